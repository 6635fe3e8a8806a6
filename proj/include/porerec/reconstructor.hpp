#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "porerec/network.hpp"
#include "porerec/volume.hpp"

// Arbitrary-size reconstruction: a noise volume padded by the receptive
// margin is pushed through the trained network tile by tile.  Noise values
// are addressed by absolute voxel coordinate (counter-based generator), so
// every tiling of the same output — including 1x1x1 tiles — produces
// bit-identical results.

namespace porerec {

enum class BinarizeMethod { Quantile, Otsu };

struct ReconConfig {
    int dim_z = 64, dim_y = 64, dim_x = 64;  // output dims (L, H, W)
    int sub_z = 64, sub_y = 64, sub_x = 64;  // tile dims (l, h, w)
    std::uint64_t seed = 0;
    std::optional<double> phi_target;  // falls back to the trained reference porosity
    BinarizeMethod method = BinarizeMethod::Quantile;
};

struct ReconResult {
    Volume3D continuous;  // 3-channel network output
    Volume3D binary;
    double achieved_porosity = 0;
    double threshold = 0;  // channel-mean cut actually used
    std::vector<std::string> warnings;
};

// default_phi is used when cfg.phi_target is unset (typically the reference
// porosity recorded at training time).
ReconResult reconstruct(const ModelParams& params, const ReconConfig& cfg, double default_phi);

// Channel-mean the voxels, then cut at the quantile that makes the pore
// count round(phi * voxels); ties resolved by voxel index order.
Volume3D binarize(const Volume3D& continuous, PhaseFraction phi_target, double* threshold = nullptr);

// Histogram-based two-class threshold on the channel means.
Volume3D binarize_otsu(const Volume3D& continuous, double* threshold = nullptr);

}  // namespace porerec
