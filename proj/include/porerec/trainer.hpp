#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "porerec/losses.hpp"
#include "porerec/network.hpp"
#include "porerec/optimizer.hpp"

// The two training loops.  Both draw slice points / anchors at random each
// iteration, score the three orthogonal output slices against the
// reference(s), and take one Adam step per iteration.
//
// train_basic regenerates a fresh (S+2m)^3 noise cube every iteration and
// forwards it whole.  train_improved draws all inputs from one persistent
// noise volume and forwards only three thin slabs per sample — the slab of
// dims (S+2m) x (S+2m) x (2m+1) around an anchor is exactly the input region
// that produces the anchor's S x S output slice, so compute and memory drop
// by roughly a factor of S while the sampling distribution is unchanged.

namespace porerec {

enum class DescriptorKind { Gram, Acf };

struct TrainConfig {
    int iterations = 1000;  // T
    int batch_size = 1;     // K
    DescriptorKind descriptor = DescriptorKind::Gram;
    int slice_size = 0;  // S; 0 = shortest reference side
    int noise_side = 0;  // improved loop; 0 = S + 2m + 32
    std::uint64_t seed = 1;
    AdamConfig adam;
    FeatureBankConfig bank;
    int acf_max_lag = 20;
    int log_every = 0;            // 0 = silent
    std::ostream* log = nullptr;  // where progress lines go
};

struct TrainReport {
    std::vector<double> loss_series;  // one entry per iteration (batch sum)
    double wall_time_s = 0;
    double reference_porosity = 0;
    int slice_size = 0;
    int noise_side = 0;  // 0 for the basic loop
    std::vector<std::string> warnings;
};

std::pair<ModelParams, TrainReport> train_basic(const ReferenceSet& refs, const NetworkSpec& spec,
                                                const TrainConfig& cfg);
std::pair<ModelParams, TrainReport> train_improved(const ReferenceSet& refs,
                                                   const NetworkSpec& spec,
                                                   const TrainConfig& cfg);

}  // namespace porerec
