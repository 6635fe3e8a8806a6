#include "porerec/reconstructor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "porerec/rng.hpp"

namespace porerec {

namespace {

std::vector<double> channel_means(const Volume3D& v) {
    if (v.mode != VolumeMode::Continuous)
        throw std::invalid_argument("binarize: continuous volume required");
    const std::size_t n = v.voxels();
    std::vector<double> g(n, 0.0);
    const double inv_c = 1.0 / v.channels;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0;
        for (int c = 0; c < v.channels; ++c) acc += v.values[i * v.channels + c];
        g[i] = acc * inv_c;
    }
    return g;
}

Volume3D from_mask(const Volume3D& v, const std::vector<char>& pore) {
    Volume3D out = Volume3D::binary(v.dim_z, v.dim_y, v.dim_x);
    for (std::size_t i = 0; i < pore.size(); ++i) out.labels[i] = pore[i] ? kPore : kSolid;
    return out;
}

}  // namespace

Volume3D binarize(const Volume3D& continuous, PhaseFraction phi_target, double* threshold) {
    if (phi_target.value < 0.0 || phi_target.value > 1.0)
        throw std::invalid_argument("binarize: porosity target outside [0,1]");
    std::vector<double> g = channel_means(continuous);
    const std::size_t n = g.size();
    const auto want = static_cast<std::size_t>(std::llround(phi_target.value * n));

    std::vector<char> pore(n, 0);
    if (want == 0) {
        if (threshold) *threshold = std::numeric_limits<double>::infinity();
        return from_mask(continuous, pore);
    }
    if (want >= n) {
        for (auto& p : pore) p = 1;
        if (threshold) *threshold = -std::numeric_limits<double>::infinity();
        return from_mask(continuous, pore);
    }

    // tau = value of the want-th largest mean; everything above tau is pore,
    // and the remaining quota at exactly tau goes to the lowest voxel indices.
    std::vector<double> sorted = g;
    std::nth_element(sorted.begin(), sorted.begin() + (want - 1), sorted.end(),
                     std::greater<double>());
    const double tau = sorted[want - 1];
    if (threshold) *threshold = tau;

    std::size_t above = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (g[i] > tau) {
            pore[i] = 1;
            ++above;
        }
    std::size_t quota = want - above;
    for (std::size_t i = 0; i < n && quota > 0; ++i)
        if (g[i] == tau) {
            pore[i] = 1;
            --quota;
        }
    return from_mask(continuous, pore);
}

Volume3D binarize_otsu(const Volume3D& continuous, double* threshold) {
    std::vector<double> g = channel_means(continuous);
    const auto [mn_it, mx_it] = std::minmax_element(g.begin(), g.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mn == mx) {
        if (threshold) *threshold = mn;
        return from_mask(continuous, std::vector<char>(g.size(), 0));
    }

    constexpr int kBins = 256;
    std::vector<std::int64_t> hist(kBins, 0);
    const double scale = (kBins - 1) / (mx - mn);
    for (double v : g) ++hist[static_cast<int>((v - mn) * scale)];

    // Maximize between-class variance over the cut position.
    const auto total = static_cast<double>(g.size());
    double sum_all = 0;
    for (int b = 0; b < kBins; ++b) sum_all += static_cast<double>(b) * hist[b];
    double w0 = 0, sum0 = 0, best = -1;
    int best_bin = 0;
    for (int b = 0; b < kBins - 1; ++b) {
        w0 += static_cast<double>(hist[b]);
        if (w0 == 0) continue;
        const double w1 = total - w0;
        if (w1 == 0) break;
        sum0 += static_cast<double>(b) * hist[b];
        const double mu0 = sum0 / w0, mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best) {
            best = between;
            best_bin = b;
        }
    }
    const double tau = mn + (best_bin + 0.5) / scale;
    if (threshold) *threshold = tau;

    std::vector<char> pore(g.size(), 0);
    for (std::size_t i = 0; i < g.size(); ++i) pore[i] = g[i] > tau;
    return from_mask(continuous, pore);
}

ReconResult reconstruct(const ModelParams& params, const ReconConfig& cfg, double default_phi) {
    const int m = params.spec.conv3_blocks;
    const int L = cfg.dim_z, H = cfg.dim_y, W = cfg.dim_x;
    const int tl = cfg.sub_z, th = cfg.sub_y, tw = cfg.sub_x;
    if (L < 1 || H < 1 || W < 1) throw std::invalid_argument("reconstruct: output dims must be >= 1");
    if (tl < 1 || th < 1 || tw < 1) throw std::invalid_argument("reconstruct: tile dims must be >= 1");
    if (tl > L || th > H || tw > W)
        throw std::invalid_argument("reconstruct: tile dims must not exceed output dims");

    ReconResult res;

    bool bn_virgin = true;
    for (const auto& b : params.blocks)
        for (std::size_t i = 0; i < b.bn.running_mean.size() && bn_virgin; ++i)
            bn_virgin = b.bn.running_mean[i] == 0.0 && b.bn.running_var[i] == 1.0;
    if (bn_virgin)
        res.warnings.push_back(
            "batch-norm running statistics look untrained (all zero mean / unit variance)");

    // Noise coordinates live in the padded frame (dims +2m); values come from
    // the counter over that frame's linear index, so every tile sees the same
    // noise regardless of the tiling.
    const int pz = L + 2 * m, py = H + 2 * m, px = W + 2 * m;
    auto noise_at = [&](std::int64_t z, std::int64_t y, std::int64_t x) {
        return counter_uniform(cfg.seed, static_cast<std::uint64_t>((z * py + y) * px + x));
    };

    res.continuous = Volume3D::continuous(L, H, W, params.spec.out_channels);

    for (int z0 = 0; z0 < L; z0 += tl)
        for (int y0 = 0; y0 < H; y0 += th)
            for (int x0 = 0; x0 < W; x0 += tw) {
                const int cl = std::min(tl, L - z0);
                const int ch = std::min(th, H - y0);
                const int cw = std::min(tw, W - x0);

                Tensor5 in = Tensor5::zeros(1, 1, cl + 2 * m, ch + 2 * m, cw + 2 * m);
                for (int z = 0; z < in.d; ++z)
                    for (int y = 0; y < in.h; ++y)
                        for (int x = 0; x < in.w; ++x)
                            in.at(0, 0, z, y, x) = noise_at(z0 + z, y0 + y, x0 + x);

                Tensor5 out = forward(params, in);
                for (int c = 0; c < out.c; ++c)
                    for (int z = 0; z < cl; ++z)
                        for (int y = 0; y < ch; ++y)
                            for (int x = 0; x < cw; ++x)
                                res.continuous.value_at(z0 + z, y0 + y, x0 + x, c) =
                                    out.at(0, c, z, y, x);
            }

    const double phi = cfg.phi_target.value_or(default_phi);
    if (cfg.method == BinarizeMethod::Quantile)
        res.binary = binarize(res.continuous, {phi}, &res.threshold);
    else
        res.binary = binarize_otsu(res.continuous, &res.threshold);
    res.achieved_porosity = porosity(res.binary).value;
    return res;
}

}  // namespace porerec
