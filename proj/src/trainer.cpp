#include "porerec/trainer.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <ostream>
#include <stdexcept>

#include "porerec/rng.hpp"

namespace porerec {

namespace {

struct Resolved {
    int s = 0;      // output slice side S
    int side = 0;   // S + 2m
    int m = 0;
    double ref_porosity = 0;
    std::unique_ptr<SliceLoss> loss;
};

Resolved resolve(const ReferenceSet& refs, const NetworkSpec& spec, const TrainConfig& cfg) {
    if (cfg.iterations < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("train: iterations and batch size must be >= 1");
    for (const auto& img : refs.images)
        if (img.pixels.empty()) throw std::invalid_argument("train: empty reference image");

    Resolved r;
    r.m = spec.conv3_blocks;
    int min_side = refs.images[0].width;
    for (const auto& img : refs.images) {
        min_side = std::min({min_side, img.width, img.height});
    }
    r.s = cfg.slice_size > 0 ? cfg.slice_size : min_side;
    const int rf = spec.receptive_field();
    if (r.s < rf)
        throw std::invalid_argument("train: slice size " + std::to_string(r.s) +
                                    " below receptive field " + std::to_string(rf));
    r.side = r.s + 2 * r.m;

    double phi = 0;
    for (const auto& img : refs.images) phi += porosity(img).value;
    r.ref_porosity = phi / 3.0;

    if (cfg.descriptor == DescriptorKind::Gram) {
        FeatureBankConfig bank_cfg = cfg.bank;
        bank_cfg.input_channels = spec.out_channels;
        r.loss = std::make_unique<GramLoss>(refs, std::make_shared<FeatureBank>(bank_cfg));
    } else {
        if (cfg.acf_max_lag < 1)
            throw std::invalid_argument("train: acf_max_lag must be >= 1");
        if (cfg.acf_max_lag >= r.s || cfg.acf_max_lag >= min_side)
            throw std::invalid_argument(
                "train: acf_max_lag must be below the slice size and every reference side");
        r.loss = std::make_unique<AcfLoss>(refs, cfg.acf_max_lag);
    }
    return r;
}

// Rough peak footprint of one forward+backward at the given input dims:
// activations, normalized copies, and gradients all live at once.
double estimate_bytes(const NetworkSpec& spec, int dz, int dxy) {
    double total = static_cast<double>(dz) * dxy * dxy;  // input
    int z = dz, s = dxy;
    for (int b = 0; b < spec.conv3_blocks; ++b) {
        z -= 2;
        s -= 2;
        total += static_cast<double>(spec.channels) * std::max(z, 1) * s * s;
    }
    return total * 8.0 * 5.0;
}

constexpr double kMemoryBudgetBytes = 4e9;

void scatter_point_slices(const std::array<SlicePlane, 3>& slices,
                          const std::array<std::vector<double>, 3>& sgrads, int ix, int iy, int iz,
                          Tensor5& dy) {
    for (int c = 0; c < dy.c; ++c) {
        const auto& xy = slices[0];
        for (int r = 0; r < xy.rows; ++r)
            for (int col = 0; col < xy.cols; ++col)
                dy.at(0, c, iz, r, col) += sgrads[0][xy.at(c, r, col)];
        const auto& xz = slices[1];
        for (int r = 0; r < xz.rows; ++r)
            for (int col = 0; col < xz.cols; ++col)
                dy.at(0, c, r, iy, col) += sgrads[1][xz.at(c, r, col)];
        const auto& yz = slices[2];
        for (int r = 0; r < yz.rows; ++r)
            for (int col = 0; col < yz.cols; ++col)
                dy.at(0, c, r, col, ix) += sgrads[2][yz.at(c, r, col)];
    }
}

void log_progress(const TrainConfig& cfg, int t, double loss) {
    if (cfg.log && cfg.log_every > 0 && (t % cfg.log_every == 0 || t == cfg.iterations - 1))
        *cfg.log << "iter " << t << " loss " << loss << "\n";
}

}  // namespace

std::pair<ModelParams, TrainReport> train_basic(const ReferenceSet& refs, const NetworkSpec& spec,
                                                const TrainConfig& cfg) {
    Resolved r = resolve(refs, spec, cfg);
    if (estimate_bytes(spec, r.side, r.side) > kMemoryBudgetBytes)
        throw std::runtime_error(
            "train_basic: estimated memory exceeds budget; reduce the slice size or use the "
            "improved loop");

    ModelParams params = init_params(spec, cfg.seed);
    AdamState adam = AdamState::make(trainable_views(params), cfg.adam);
    SplitMix64 stream(splitmix64(cfg.seed));

    TrainReport report;
    report.slice_size = r.s;
    report.reference_porosity = r.ref_porosity;
    const auto start = std::chrono::steady_clock::now();

    for (int t = 0; t < cfg.iterations; ++t) {
        ModelGrads grads = ModelGrads::zeros_like(params);
        double iter_loss = 0;
        for (int k = 0; k < cfg.batch_size; ++k) {
            Tensor5 noise = Tensor5::zeros(1, 1, r.side, r.side, r.side);
            for (double& v : noise.v) v = stream.uniform();

            ForwardCache cache;
            Tensor5 y = forward_train(params, noise, &cache);

            const int ix = static_cast<int>(stream.below(y.w));
            const int iy = static_cast<int>(stream.below(y.h));
            const int iz = static_cast<int>(stream.below(y.d));
            auto slices = extract_slices(y, ix, iy, iz);

            std::array<std::vector<double>, 3> sgrads;
            iter_loss += r.loss->evaluate(slices, &sgrads);

            Tensor5 dy = Tensor5::zeros(y.n, y.c, y.d, y.h, y.w);
            scatter_point_slices(slices, sgrads, ix, iy, iz, dy);
            backward(params, cache, dy, grads);
        }
        adam_step(adam, trainable_views(params), grad_views(grads));
        report.loss_series.push_back(iter_loss);
        log_progress(cfg, t, iter_loss);
    }

    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(params), std::move(report)};
}

std::pair<ModelParams, TrainReport> train_improved(const ReferenceSet& refs,
                                                   const NetworkSpec& spec,
                                                   const TrainConfig& cfg) {
    Resolved r = resolve(refs, spec, cfg);
    const int side = r.side;
    const int n_side = cfg.noise_side > 0 ? cfg.noise_side : side + 32;
    if (n_side < side + 1)
        throw std::invalid_argument("train_improved: noise side must be at least S + 2m + 1");
    if (estimate_bytes(spec, 2 * r.m + 1, side) > kMemoryBudgetBytes)
        throw std::runtime_error("train_improved: estimated memory exceeds budget; reduce the "
                                 "slice size");

    TrainReport report;
    report.slice_size = r.s;
    report.noise_side = n_side;
    report.reference_porosity = r.ref_porosity;
    const double pool = static_cast<double>(n_side) * n_side * n_side;
    if (pool < 100.0 * cfg.batch_size * cfg.iterations)
        report.warnings.push_back(
            "noise volume holds " + std::to_string(static_cast<long long>(pool)) +
            " voxels for " + std::to_string(static_cast<long long>(cfg.batch_size) *
                                            cfg.iterations) +
            " samples; repeats are likely (enlarge noise_side)");

    // The persistent noise volume, generated once and never mutated.
    std::vector<double> noise(static_cast<std::size_t>(n_side) * n_side * n_side);
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = counter_uniform(cfg.seed, i);
    auto noise_at = [&](int z, int y, int x) {
        return noise[(static_cast<std::size_t>(z) * n_side + y) * n_side + x];
    };

    ModelParams params = init_params(spec, cfg.seed);
    AdamState adam = AdamState::make(trainable_views(params), cfg.adam);
    SplitMix64 stream(splitmix64(cfg.seed));

    // Anchor box: the slab spans [a-c, a-c+side) in-plane and [a-m, a+m]
    // along the normal, so anchors live in [c, n_side - side + c] per axis.
    const int c = side / 2;
    const int m = r.m;
    const std::uint64_t range = static_cast<std::uint64_t>(n_side - side + 1);

    const auto start = std::chrono::steady_clock::now();
    for (int t = 0; t < cfg.iterations; ++t) {
        ModelGrads grads = ModelGrads::zeros_like(params);
        double iter_loss = 0;
        for (int k = 0; k < cfg.batch_size; ++k) {
            const int az = c + static_cast<int>(stream.below(range));
            const int ay = c + static_cast<int>(stream.below(range));
            const int ax = c + static_cast<int>(stream.below(range));

            for (int orient = 0; orient < 3; ++orient) {
                // Slab dims per orientation; the normal axis is 2m+1 thick.
                int dz = side, dy = side, dx = side;
                int z0 = az - c, y0 = ay - c, x0 = ax - c;
                if (orient == 0) {
                    dz = 2 * m + 1;
                    z0 = az - m;
                } else if (orient == 1) {
                    dy = 2 * m + 1;
                    y0 = ay - m;
                } else {
                    dx = 2 * m + 1;
                    x0 = ax - m;
                }

                Tensor5 slab = Tensor5::zeros(1, 1, dz, dy, dx);
                for (int z = 0; z < dz; ++z)
                    for (int y = 0; y < dy; ++y)
                        for (int x = 0; x < dx; ++x)
                            slab.at(0, 0, z, y, x) = noise_at(z0 + z, y0 + y, x0 + x);

                ForwardCache cache;
                Tensor5 y = forward_train(params, slab, &cache);

                SlicePlane slice;
                slice.orientation = static_cast<SliceOrientation>(orient);
                slice.channels = y.c;
                if (orient == 0) {
                    slice.index = az;
                    slice.rows = y.h;
                    slice.cols = y.w;
                } else if (orient == 1) {
                    slice.index = ay;
                    slice.rows = y.d;
                    slice.cols = y.w;
                } else {
                    slice.index = ax;
                    slice.rows = y.d;
                    slice.cols = y.h;
                }
                slice.values.resize(static_cast<std::size_t>(y.c) * slice.rows * slice.cols);
                // The slab's whole output is the slice (one axis has size 1).
                for (std::size_t i = 0; i < slice.values.size(); ++i) slice.values[i] = y.v[i];

                std::vector<double> sgrad;
                iter_loss += r.loss->evaluate_one(slice, &sgrad);

                Tensor5 dy_t = Tensor5::zeros(y.n, y.c, y.d, y.h, y.w);
                for (std::size_t i = 0; i < sgrad.size(); ++i) dy_t.v[i] = sgrad[i];
                backward(params, cache, dy_t, grads);
            }
        }
        adam_step(adam, trainable_views(params), grad_views(grads));
        report.loss_series.push_back(iter_loss);
        log_progress(cfg, t, iter_loss);
    }

    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(params), std::move(report)};
}

}  // namespace porerec
