#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "porerec/losses.hpp"
#include "porerec/network.hpp"
#include "porerec/trainer.hpp"
#include "porerec/volume.hpp"

// Training-run regression at a realistic (if small) scale, kept out of the
// fast unit binary: a periodic-stripe reference is easy to learn, so a
// healthy optimizer must cut the description loss by at least 4x within 300
// iterations.  Seeds are pinned, and the whole pipeline is deterministic, so
// the recorded baseline is stable.

using namespace porerec;

namespace {

Image2D stripes(int side, int period) {
    Image2D img(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) img.at(y, x) = (x % period) < period / 2 ? kPore : kSolid;
    return img;
}

NetworkSpec l3c8() {
    NetworkSpec sp;
    sp.conv3_blocks = 3;
    sp.channels = 8;
    return sp;
}

}  // namespace

TEST_CASE("basic loop learns a 64-pixel stripe pattern: 4x loss drop in 300 iterations") {
    const ReferenceSet refs = ReferenceSet::isotropic(stripes(64, 8));

    TrainConfig cfg;
    cfg.iterations = 300;
    cfg.batch_size = 1;
    cfg.descriptor = DescriptorKind::Gram;
    cfg.seed = 2024;

    auto [params, rep] = train_basic(refs, l3c8(), cfg);
    REQUIRE(rep.loss_series.size() == 300);
    const double first = rep.loss_series.front();
    const double last = rep.loss_series.back();
    REQUIRE(std::isfinite(first));
    REQUIRE(std::isfinite(last));
    CHECK(last < 0.25 * first);
}

TEST_CASE("improved loop matches the basic loop's learning behavior on stripes") {
    const ReferenceSet refs = ReferenceSet::isotropic(stripes(64, 8));

    TrainConfig cfg;
    cfg.iterations = 300;
    cfg.batch_size = 1;
    cfg.descriptor = DescriptorKind::Gram;
    cfg.seed = 2024;

    auto [params, rep] = train_improved(refs, l3c8(), cfg);
    REQUIRE(rep.loss_series.size() == 300);
    CHECK(rep.warnings.empty());
    CHECK(rep.loss_series.back() < 0.25 * rep.loss_series.front());
}
