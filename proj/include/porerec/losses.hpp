#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "porerec/tensor.hpp"
#include "porerec/volume.hpp"

// Description functions that score how much the network's output slices look
// like the reference image(s), with analytic gradients with respect to the
// slice values.  Two are provided: a Gram-matrix loss over a fixed random
// convolutional feature bank, and an autocorrelation-table loss.

namespace porerec {

enum class SliceOrientation { XY = 0, XZ = 1, YZ = 2 };

struct SlicePlane {
    SliceOrientation orientation = SliceOrientation::XY;
    int index = 0;  // coordinate along the normal axis
    int channels = 0;
    int rows = 0;
    int cols = 0;
    std::vector<double> values;  // (channel, row, col), row-major

    std::size_t at(int c, int r, int col) const {
        return (static_cast<std::size_t>(c) * rows + r) * cols + col;
    }
};

// The three axis-aligned planes through (x, y, z) of the first batch entry.
std::array<SlicePlane, 3> extract_slices(const Tensor5& y, int x, int yy, int z);

struct GramMatrix {
    int size = 0;                     // channel count C
    std::vector<double> values;       // C x C, row-major
    std::int64_t position_count = 0;  // P used in the 1/P normalization
};

// G[i,j] = (1/P) sum_p F[i,p] * F[j,p] for a (C, P) feature map.
GramMatrix gram(const std::vector<double>& features, int channels);

struct FeatureBankConfig {
    std::vector<int> widths{8, 16, 16, 16};
    std::vector<double> layer_weights{1.0, 1.0, 1.0, 1.0};
    std::uint64_t seed = 509;
    int input_channels = 3;
    double relu_slope = 0.2;
};

// Fixed (never trained) stack of 3x3 reflect-padded 2D convolutions with
// LeakyReLU, deterministic from the seed.  Stands in for a pretrained
// descriptor network while keeping the Gram-loss mathematics intact.
class FeatureBank {
public:
    explicit FeatureBank(const FeatureBankConfig& cfg);

    const FeatureBankConfig& config() const { return cfg_; }
    int layers() const { return static_cast<int>(cfg_.widths.size()); }

    // Feature maps of every layer for a (C, rows, cols) input.
    std::vector<std::vector<double>> features(const std::vector<double>& input, int rows,
                                              int cols) const;
    // Backpropagates per-layer feature gradients to the input; `feats` must be
    // the maps returned by features() (their signs gate the LeakyReLU).
    std::vector<double> backward(const std::vector<std::vector<double>>& feats, int rows, int cols,
                                 const std::vector<std::vector<double>>& feature_grads) const;

private:
    struct Layer {
        int in_c, out_c;
        std::vector<double> w;  // (out, in, 3, 3)
        std::vector<double> b;  // (out)
    };
    FeatureBankConfig cfg_;
    std::vector<Layer> layers_;

    friend class GramLoss;
};

// Per-orientation references; isotropic mode replicates one image.
struct ReferenceSet {
    std::array<Image2D, 3> images;  // indexed by SliceOrientation
    bool anisotropic = false;

    static ReferenceSet isotropic(Image2D ref);
    static ReferenceSet from_three(Image2D xy, Image2D xz, Image2D yz);
};

class SliceLoss {
public:
    virtual ~SliceLoss() = default;
    // Loss of one slice against the reference of its orientation; when grad
    // is non-null, fills it with d loss / d slice value (same layout).
    virtual double evaluate_one(const SlicePlane& slice, std::vector<double>* grad) const = 0;

    // Convenience: sum over the three orientations.
    double evaluate(const std::array<SlicePlane, 3>& slices,
                    std::array<std::vector<double>, 3>* grads) const;
};

class GramLoss final : public SliceLoss {
public:
    GramLoss(const ReferenceSet& refs, std::shared_ptr<const FeatureBank> bank);
    double evaluate_one(const SlicePlane& slice, std::vector<double>* grad) const override;

private:
    std::shared_ptr<const FeatureBank> bank_;
    std::array<std::vector<GramMatrix>, 3> ref_grams_;  // per orientation, per layer
};

// R(tau, ypsilon) = mean over valid pairs of f(i,j)*f(i+tau, j+ypsilon) on the
// channel-mean image; table is (max_lag+1)^2, row lag major.
std::vector<double> acf_table(const std::vector<double>& img, int channels, int rows, int cols,
                              int max_lag);

class AcfLoss final : public SliceLoss {
public:
    AcfLoss(const ReferenceSet& refs, int max_lag);
    double evaluate_one(const SlicePlane& slice, std::vector<double>* grad) const override;
    int max_lag() const { return max_lag_; }

private:
    int max_lag_;
    std::array<std::vector<double>, 3> ref_tables_;  // per orientation
};

// Binary image lifted to a continuous 3-channel map (value replicated).
std::vector<double> lift_reference(const Image2D& img, int channels);

}  // namespace porerec
