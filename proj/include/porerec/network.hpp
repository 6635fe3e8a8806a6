#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "porerec/descriptors.hpp"
#include "porerec/tensor.hpp"

// The LmCn model: m Conv3-blocks (3-kernel conv + BN + LeakyReLU, n channels)
// followed by one Conv1-block (1-kernel conv + BN + LeakyReLU, 3 channels).
// All convolutions are valid, so the output loses receptive_field - 1 voxels
// per spatial axis relative to the input.

namespace porerec {

struct NetworkSpec {
    int conv3_blocks = 1;  // m
    int channels = 16;     // n
    int out_channels = 3;
    std::string warning;   // non-empty when the design rule had to fall back

    int receptive_field() const;
};

// Depth rule: the receptive field should just cover the autocorrelation
// distance, so m = ceil((l_cor - 3)/2) + 1, clamped to [1, m_cap].  A curve
// that never converged gives m = m_cap plus a warning.
NetworkSpec design_from_prior(const CorrelationLength& l_cor,
                              std::optional<int> n_override = std::nullopt, int m_cap = 12);

struct NetworkBlock {
    ConvLayerParams conv;
    BatchNormParams bn;
};

struct ModelParams {
    NetworkSpec spec;
    std::uint64_t rng_seed = 0;
    double relu_slope = 0.2;
    std::vector<NetworkBlock> blocks;  // conv3_blocks + 1 entries, Conv1-block last
};

ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed);

struct BlockCache {
    Tensor5 input;       // what the convolution saw
    BatchNormCache bn;
    Tensor5 bn_out;      // pre-activation, needed by the LeakyReLU backward
};
struct ForwardCache {
    std::vector<BlockCache> blocks;
};

// Inference: frozen running statistics, no mutation, bit-deterministic.
Tensor5 forward(const ModelParams& p, const Tensor5& x);
// Training: batch statistics, running stats updated in place; pass a cache
// to enable a subsequent backward().
Tensor5 forward_train(ModelParams& p, const Tensor5& x, ForwardCache* cache = nullptr);
Tensor5 forward(ModelParams& p, const Tensor5& x, bool training);

struct ModelGrads {
    struct Block {
        std::vector<double> kernel, bias, gamma, beta;
    };
    std::vector<Block> blocks;

    static ModelGrads zeros_like(const ModelParams& p);
};

// Backpropagates grad_out through the cached forward pass, adding parameter
// gradients into `grads`; returns the gradient with respect to the input.
Tensor5 backward(const ModelParams& p, const ForwardCache& cache, const Tensor5& grad_out,
                 ModelGrads& grads);

// Trainable arrays in a fixed order (per block: kernel, bias, gamma, beta);
// the optimizer walks these side by side.
std::vector<std::span<double>> trainable_views(ModelParams& p);
std::vector<std::span<const double>> grad_views(const ModelGrads& g);

void save_model(const ModelParams& p, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace porerec
