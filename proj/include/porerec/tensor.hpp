#pragma once

#include <cstddef>
#include <vector>

// Differentiable kernels for the fixed network topology: valid 3D
// cross-correlation (kernel 1 or 3, stride 1), batch normalization and
// LeakyReLU, each with a hand-derived backward pass.  Everything is 64-bit
// float; shapes are (N, C, D, H, W) with W fastest.

namespace porerec {

struct Tensor5 {
    int n = 0, c = 0, d = 0, h = 0, w = 0;
    std::vector<double> v;

    static Tensor5 zeros(int n, int c, int d, int h, int w);

    std::size_t size() const { return v.size(); }
    std::size_t index(int in, int ic, int iz, int iy, int ix) const {
        return (((static_cast<std::size_t>(in) * c + ic) * d + iz) * h + iy) * w + ix;
    }
    double at(int in, int ic, int iz, int iy, int ix) const {
        return v[index(in, ic, iz, iy, ix)];
    }
    double& at(int in, int ic, int iz, int iy, int ix) { return v[index(in, ic, iz, iy, ix)]; }
    bool same_shape(const Tensor5& o) const {
        return n == o.n && c == o.c && d == o.d && h == o.h && w == o.w;
    }
};

struct ConvLayerParams {
    int out_channels = 0;
    int in_channels = 0;
    int kernel = 3;               // 1 or 3
    std::vector<double> weights;  // (out, in, k, k, k)
    std::vector<double> bias;     // (out)

    std::size_t weight_index(int o, int i, int dz, int dy, int dx) const {
        return (((static_cast<std::size_t>(o) * in_channels + i) * kernel + dz) * kernel + dy) *
                   kernel +
               dx;
    }
};

struct BatchNormParams {
    int channels = 0;
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;  // biased variance
    double momentum = 0.1;  // weight of the fresh batch statistics
    double epsilon = 1e-5;
};

Tensor5 conv3d_forward(const Tensor5& x, const ConvLayerParams& p);

struct ConvGrads {
    Tensor5 x;
    std::vector<double> kernel;
    std::vector<double> bias;
};
ConvGrads conv3d_backward(const Tensor5& x, const ConvLayerParams& p, const Tensor5& grad_out);

struct BatchNormCache {
    Tensor5 xhat;                 // normalized pre-scale activations
    std::vector<double> inv_std;  // per channel, 1/sqrt(var + eps)
};

// Training mode normalizes with batch statistics (over batch and spatial
// positions jointly), updates the running stats in p, and fills *cache when
// given.  Inference mode uses the frozen running stats and never touches p.
Tensor5 batchnorm_forward(const Tensor5& x, BatchNormParams& p, bool training,
                          BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Tensor5 x;
    std::vector<double> gamma, beta;
};
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                  const Tensor5& grad_out);

Tensor5 leaky_relu(const Tensor5& x, double slope);
Tensor5 leaky_relu_backward(const Tensor5& x, double slope, const Tensor5& grad_out);

// Spatial extent seen by one output voxel of m stacked 3-kernel blocks.
int receptive_field(int m);

}  // namespace porerec
