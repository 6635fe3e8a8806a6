#include "porerec/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "porerec/binio.hpp"
#include "porerec/rng.hpp"

namespace porerec {

int NetworkSpec::receptive_field() const { return porerec::receptive_field(conv3_blocks); }

NetworkSpec design_from_prior(const CorrelationLength& l_cor, std::optional<int> n_override,
                              int m_cap) {
    if (m_cap < 1) throw std::invalid_argument("design_from_prior: m_cap must be >= 1");
    NetworkSpec spec;
    spec.channels = n_override.value_or(16);
    if (spec.channels < 1) throw std::invalid_argument("design_from_prior: n must be >= 1");

    if (!l_cor.converged) {
        spec.conv3_blocks = m_cap;
        spec.warning =
            "autocorrelation distance did not converge; depth capped at m = " +
            std::to_string(m_cap) + " (structure may be heterogeneous)";
        return spec;
    }
    // Smallest m with receptive field 2m+1 covering l_cor.
    int m = l_cor.l_cor <= 3 ? 1 : (l_cor.l_cor - 2) / 2 + 1;
    if (m > m_cap) {
        spec.warning = "design rule wanted m = " + std::to_string(m) + ", capped at " +
                       std::to_string(m_cap);
        m = m_cap;
    }
    spec.conv3_blocks = m;
    return spec;
}

namespace {

// Platform-stable normal deviates: Box-Muller over the counter-based uniform
// stream, so initialization is reproducible independent of the C++ library.
double normal_at(std::uint64_t seed, std::uint64_t k) {
    double u1 = counter_uniform(seed, 2 * k);
    double u2 = counter_uniform(seed, 2 * k + 1);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void check_spec(const NetworkSpec& spec) {
    if (spec.conv3_blocks < 1 || spec.channels < 1 || spec.out_channels < 1)
        throw std::invalid_argument("network: invalid spec");
}

}  // namespace

ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
    check_spec(spec);
    ModelParams p;
    p.spec = spec;
    p.rng_seed = seed;
    std::uint64_t counter = 0;

    const int total_blocks = spec.conv3_blocks + 1;
    p.blocks.resize(total_blocks);
    for (int b = 0; b < total_blocks; ++b) {
        const bool last = b == spec.conv3_blocks;
        ConvLayerParams& conv = p.blocks[b].conv;
        conv.kernel = last ? 1 : 3;
        conv.in_channels = b == 0 ? 1 : spec.channels;
        conv.out_channels = last ? spec.out_channels : spec.channels;
        const int fan_in = conv.in_channels * conv.kernel * conv.kernel * conv.kernel;
        const double stddev = std::sqrt(2.0 / fan_in);
        conv.weights.resize(static_cast<std::size_t>(conv.out_channels) * fan_in);
        for (double& w : conv.weights) w = stddev * normal_at(seed, counter++);
        conv.bias.assign(conv.out_channels, 0.0);

        BatchNormParams& bn = p.blocks[b].bn;
        bn.channels = conv.out_channels;
        bn.gamma.assign(bn.channels, 1.0);
        bn.beta.assign(bn.channels, 0.0);
        bn.running_mean.assign(bn.channels, 0.0);
        bn.running_var.assign(bn.channels, 1.0);
    }
    return p;
}

namespace {

Tensor5 forward_impl(const ModelParams& cp, ModelParams* mp, const Tensor5& x, bool training,
                     ForwardCache* cache) {
    const ModelParams& p = cp;
    if (x.c != 1) throw std::invalid_argument("forward: input must be single-channel");
    const int rf = p.spec.receptive_field();
    if (x.d < rf || x.h < rf || x.w < rf)
        throw std::invalid_argument("forward: input spatial dims below receptive field " +
                                    std::to_string(rf));
    if (cache) cache->blocks.assign(p.blocks.size(), {});

    Tensor5 t = x;
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
        if (cache) cache->blocks[b].input = t;
        t = conv3d_forward(t, p.blocks[b].conv);
        if (training) {
            t = batchnorm_forward(t, mp->blocks[b].bn, true,
                                  cache ? &cache->blocks[b].bn : nullptr);
        } else {
            BatchNormParams frozen = p.blocks[b].bn;  // keep inference const-clean
            t = batchnorm_forward(t, frozen, false);
        }
        if (cache) cache->blocks[b].bn_out = t;
        t = leaky_relu(t, p.relu_slope);
    }
    return t;
}

}  // namespace

Tensor5 forward(const ModelParams& p, const Tensor5& x) {
    return forward_impl(p, nullptr, x, false, nullptr);
}

Tensor5 forward_train(ModelParams& p, const Tensor5& x, ForwardCache* cache) {
    return forward_impl(p, &p, x, true, cache);
}

Tensor5 forward(ModelParams& p, const Tensor5& x, bool training) {
    return training ? forward_train(p, x) : forward(static_cast<const ModelParams&>(p), x);
}

ModelGrads ModelGrads::zeros_like(const ModelParams& p) {
    ModelGrads g;
    g.blocks.resize(p.blocks.size());
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
        g.blocks[b].kernel.assign(p.blocks[b].conv.weights.size(), 0.0);
        g.blocks[b].bias.assign(p.blocks[b].conv.bias.size(), 0.0);
        g.blocks[b].gamma.assign(p.blocks[b].bn.gamma.size(), 0.0);
        g.blocks[b].beta.assign(p.blocks[b].bn.beta.size(), 0.0);
    }
    return g;
}

Tensor5 backward(const ModelParams& p, const ForwardCache& cache, const Tensor5& grad_out,
                 ModelGrads& grads) {
    if (cache.blocks.size() != p.blocks.size() || grads.blocks.size() != p.blocks.size())
        throw std::invalid_argument("backward: cache/grads do not match model");

    Tensor5 g = grad_out;
    for (int b = static_cast<int>(p.blocks.size()) - 1; b >= 0; --b) {
        const BlockCache& bc = cache.blocks[b];
        g = leaky_relu_backward(bc.bn_out, p.relu_slope, g);
        BatchNormGrads bng = batchnorm_backward(bc.bn, p.blocks[b].bn, g);
        for (std::size_t i = 0; i < bng.gamma.size(); ++i) {
            grads.blocks[b].gamma[i] += bng.gamma[i];
            grads.blocks[b].beta[i] += bng.beta[i];
        }
        ConvGrads cg = conv3d_backward(bc.input, p.blocks[b].conv, bng.x);
        for (std::size_t i = 0; i < cg.kernel.size(); ++i) grads.blocks[b].kernel[i] += cg.kernel[i];
        for (std::size_t i = 0; i < cg.bias.size(); ++i) grads.blocks[b].bias[i] += cg.bias[i];
        g = std::move(cg.x);
    }
    return g;
}

std::vector<std::span<double>> trainable_views(ModelParams& p) {
    std::vector<std::span<double>> out;
    out.reserve(p.blocks.size() * 4);
    for (auto& b : p.blocks) {
        out.emplace_back(b.conv.weights);
        out.emplace_back(b.conv.bias);
        out.emplace_back(b.bn.gamma);
        out.emplace_back(b.bn.beta);
    }
    return out;
}

std::vector<std::span<const double>> grad_views(const ModelGrads& g) {
    std::vector<std::span<const double>> out;
    out.reserve(g.blocks.size() * 4);
    for (auto& b : g.blocks) {
        out.emplace_back(b.kernel);
        out.emplace_back(b.bias);
        out.emplace_back(b.gamma);
        out.emplace_back(b.beta);
    }
    return out;
}

namespace {

constexpr char kModelMagic[4] = {'M', 'M', '0', '1'};
constexpr std::uint16_t kModelVersion = 1;

void write_array(binio::CrcWriter& w, const std::vector<double>& a,
                 std::initializer_list<std::uint32_t> dims) {
    std::size_t expect = 1;
    for (auto d : dims) expect *= d;
    if (a.size() != expect) throw std::runtime_error("save_model: array shape mismatch");
    w.le<std::uint32_t>(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.le<std::uint32_t>(d);
    for (double d : a) w.f64(d);
}

std::vector<double> read_array(binio::CrcReader& r, std::initializer_list<std::uint32_t> dims,
                               const char* what) {
    std::uint32_t rank = r.le<std::uint32_t>();
    if (rank != dims.size())
        throw std::runtime_error(std::string("load_model: bad rank for ") + what);
    std::size_t expect = 1;
    for (auto d : dims) {
        std::uint32_t got = r.le<std::uint32_t>();
        if (got != d) throw std::runtime_error(std::string("load_model: bad shape for ") + what);
        expect *= d;
    }
    std::vector<double> a(expect);
    for (double& d : a) d = r.f64();
    return a;
}

}  // namespace

void save_model(const ModelParams& p, const std::string& path) {
    check_spec(p.spec);
    if (p.blocks.size() != static_cast<std::size_t>(p.spec.conv3_blocks) + 1)
        throw std::invalid_argument("save_model: block count inconsistent with spec");

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_model: cannot open " + path);
    binio::put_bytes(os, kModelMagic, 4);

    binio::CrcWriter w(os);
    w.le<std::uint16_t>(kModelVersion);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(p.spec.conv3_blocks));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(p.spec.channels));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(p.spec.out_channels));
    w.le<std::uint64_t>(p.rng_seed);
    w.f64(p.relu_slope);

    for (const auto& b : p.blocks) {
        const auto& cv = b.conv;
        const auto k = static_cast<std::uint32_t>(cv.kernel);
        write_array(w, cv.weights,
                    {static_cast<std::uint32_t>(cv.out_channels),
                     static_cast<std::uint32_t>(cv.in_channels), k, k, k});
        const auto oc = static_cast<std::uint32_t>(cv.out_channels);
        write_array(w, cv.bias, {oc});
        write_array(w, b.bn.gamma, {oc});
        write_array(w, b.bn.beta, {oc});
        write_array(w, b.bn.running_mean, {oc});
        write_array(w, b.bn.running_var, {oc});
        write_array(w, {b.bn.momentum, b.bn.epsilon}, {2});
    }
    binio::put_le<std::uint32_t>(os, w.crc());
    if (!os) throw std::runtime_error("save_model: write failed for " + path);
}

ModelParams load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_model: cannot open " + path);
    char magic[4];
    binio::get_bytes(is, magic, 4);
    if (std::memcmp(magic, kModelMagic, 4) != 0)
        throw std::runtime_error("load_model: bad magic in " + path);

    binio::CrcReader r(is);
    std::uint16_t version = r.le<std::uint16_t>();
    if (version != kModelVersion)
        throw std::runtime_error("load_model: unsupported version " + std::to_string(version));

    ModelParams p;
    p.spec.conv3_blocks = static_cast<int>(r.le<std::uint32_t>());
    p.spec.channels = static_cast<int>(r.le<std::uint32_t>());
    p.spec.out_channels = static_cast<int>(r.le<std::uint32_t>());
    if (p.spec.conv3_blocks < 1 || p.spec.conv3_blocks > 1024 || p.spec.channels < 1 ||
        p.spec.channels > 65536 || p.spec.out_channels < 1 || p.spec.out_channels > 65536)
        throw std::runtime_error("load_model: implausible architecture header");
    p.rng_seed = r.le<std::uint64_t>();
    p.relu_slope = r.f64();

    const int total_blocks = p.spec.conv3_blocks + 1;
    p.blocks.resize(total_blocks);
    for (int bidx = 0; bidx < total_blocks; ++bidx) {
        const bool last = bidx == p.spec.conv3_blocks;
        auto& b = p.blocks[bidx];
        b.conv.kernel = last ? 1 : 3;
        b.conv.in_channels = bidx == 0 ? 1 : p.spec.channels;
        b.conv.out_channels = last ? p.spec.out_channels : p.spec.channels;
        const auto k = static_cast<std::uint32_t>(b.conv.kernel);
        const auto oc = static_cast<std::uint32_t>(b.conv.out_channels);
        b.conv.weights = read_array(r,
                                    {oc, static_cast<std::uint32_t>(b.conv.in_channels), k, k, k},
                                    "kernel");
        b.conv.bias = read_array(r, {oc}, "bias");
        b.bn.channels = b.conv.out_channels;
        b.bn.gamma = read_array(r, {oc}, "gamma");
        b.bn.beta = read_array(r, {oc}, "beta");
        b.bn.running_mean = read_array(r, {oc}, "running_mean");
        b.bn.running_var = read_array(r, {oc}, "running_var");
        std::vector<double> consts = read_array(r, {2}, "bn_consts");
        b.bn.momentum = consts[0];
        b.bn.epsilon = consts[1];
    }

    std::uint32_t crc_computed = r.crc();
    std::uint32_t crc_stored = binio::get_le<std::uint32_t>(is);
    if (crc_computed != crc_stored)
        throw std::runtime_error("load_model: checksum mismatch (corrupt payload)");
    return p;
}

}  // namespace porerec
