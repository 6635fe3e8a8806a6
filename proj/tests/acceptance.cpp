// Acceptance gate: runs the ten shipping criteria and prints one verdict
// line per criterion.  Exit code is the number of failed criteria.  An
// optional argv list of indices runs a subset, e.g. "acceptance 4 7".
#include <algorithm>
#include <array>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "porerec/descriptors.hpp"
#include "porerec/losses.hpp"
#include "porerec/network.hpp"
#include "porerec/optimizer.hpp"
#include "porerec/reconstructor.hpp"
#include "porerec/rng.hpp"
#include "porerec/sa.hpp"
#include "porerec/tensor.hpp"
#include "porerec/trainer.hpp"
#include "porerec/volume.hpp"

using namespace porerec;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

Tensor5 noise_cube(std::uint64_t seed, int side) {
    Tensor5 x = Tensor5::zeros(1, 1, side, side, side);
    for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] = counter_uniform(seed, i);
    return x;
}

// One training-mode pass leaves plausible running statistics for inference.
ModelParams warmed(const NetworkSpec& sp, std::uint64_t seed) {
    ModelParams p = init_params(sp, seed);
    Tensor5 x = noise_cube(seed + 1, sp.receptive_field() + 4);
    forward_train(p, x);
    return p;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------- criteria ---

// Published depth pairs reproduced by the design rule, zero tolerance.
Verdict criterion1() {
    Verdict v;
    const struct {
        int l, m;
    } rows[] = {{11, 5}, {13, 6}, {18, 9}, {22, 11}};
    for (const auto& r : rows) {
        NetworkSpec s = design_from_prior(CorrelationLength{r.l, true});
        v.require(s.conv3_blocks == r.m && s.channels == 16 && s.warning.empty(),
                  fmt("l_cor %d -> m %d (want %d)", r.l, s.conv3_blocks, r.m));
    }
    return v;
}

// Empirical one-voxel influence region equals 3 + 2(m-1) per axis.
Verdict criterion2() {
    Verdict v;
    for (int m : {1, 2, 3, 5}) {
        NetworkSpec sp;
        sp.conv3_blocks = m;
        sp.channels = 8;
        const int rf = sp.receptive_field();
        const int side = 2 * rf + 1;
        ModelParams p = warmed(sp, 40 + m);

        Tensor5 x0 = noise_cube(90 + m, side);
        Tensor5 x1 = x0;
        const int c = side / 2;
        x1.at(0, 0, c, c, c) += 0.731;
        Tensor5 y0 = forward(p, x0);
        Tensor5 y1 = forward(p, x1);

        int lo[3] = {y0.d, y0.h, y0.w}, hi[3] = {-1, -1, -1};
        for (int ch = 0; ch < y0.c; ++ch)
            for (int z = 0; z < y0.d; ++z)
                for (int yy = 0; yy < y0.h; ++yy)
                    for (int xx = 0; xx < y0.w; ++xx)
                        if (y0.at(0, ch, z, yy, xx) != y1.at(0, ch, z, yy, xx)) {
                            const int idx[3] = {z, yy, xx};
                            for (int a = 0; a < 3; ++a) {
                                lo[a] = std::min(lo[a], idx[a]);
                                hi[a] = std::max(hi[a], idx[a]);
                            }
                        }
        for (int a = 0; a < 3; ++a)
            v.require(hi[a] - lo[a] + 1 == rf,
                      fmt("m=%d axis %d influence %d (want %d)", m, a, hi[a] - lo[a] + 1, rf));
    }
    return v;
}

// Layer backwards and both loss gradients vs central finite differences,
// relative error 1e-4 at h = 1e-3, >= 20 randomized cases per category.
// Piecewise-linear activations can put a kink inside the h-interval; such
// entries are retried at h = 1e-5, where a real defect would still show.
Verdict criterion3() {
    Verdict v;
    int checked = 0;

    auto check = [&](Verdict& out, const char* tag, double analytic, auto&& lossf, double& slot) {
        double fd = testutil::central_diff(lossf, slot);
        if (!testutil::grad_close(analytic, fd)) fd = testutil::central_diff(lossf, slot, 1e-5);
        ++checked;
        out.require(testutil::grad_close(analytic, fd),
                    fmt("%s analytic %.6g vs fd %.6g", tag, analytic, fd));
    };

    SplitMix64 rng(31);
    auto fill = [&](std::vector<double>& a, double lo, double hi) {
        for (auto& x : a) x = lo + (hi - lo) * rng.uniform();
    };

    for (int rep = 0; rep < 40; ++rep) {  // convolution, 20 cases per kernel size
        ConvLayerParams p;
        p.kernel = rep % 2 ? 1 : 3;
        p.in_channels = 1 + static_cast<int>(rng.below(3));
        p.out_channels = 1 + static_cast<int>(rng.below(3));
        p.weights.resize(static_cast<std::size_t>(p.out_channels) * p.in_channels * p.kernel *
                         p.kernel * p.kernel);
        p.bias.resize(p.out_channels);
        fill(p.weights, -1, 1);
        fill(p.bias, -1, 1);
        const int s = p.kernel + 1 + static_cast<int>(rng.below(2));
        Tensor5 x = Tensor5::zeros(1, p.in_channels, s, s, s);
        fill(x.v, -1, 1);
        Tensor5 gout = conv3d_forward(x, p);
        fill(gout.v, -1, 1);
        ConvGrads g = conv3d_backward(x, p, gout);
        auto loss = [&] {
            Tensor5 y = conv3d_forward(x, p);
            double acc = 0;
            for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * gout.v[i];
            return acc;
        };
        for (int k = 0; k < 4; ++k) {
            std::size_t i = rng.below(p.weights.size());
            check(v, "conv.w", g.kernel[i], loss, p.weights[i]);
        }
        check(v, "conv.b", g.bias[0], loss, p.bias[0]);
        for (int k = 0; k < 4; ++k) {
            std::size_t i = rng.below(x.v.size());
            check(v, "conv.x", g.x.v[i], loss, x.v[i]);
        }
    }

    for (int rep = 0; rep < 20; ++rep) {  // batch normalization (training mode)
        const int ch = 1 + static_cast<int>(rng.below(3));
        const int s = 3 + static_cast<int>(rng.below(2));
        BatchNormParams p;
        p.channels = ch;
        p.gamma.resize(ch);
        p.beta.resize(ch);
        p.running_mean.assign(ch, 0.0);
        p.running_var.assign(ch, 1.0);
        fill(p.gamma, 0.5, 1.5);
        fill(p.beta, -0.5, 0.5);
        Tensor5 x = Tensor5::zeros(1, ch, s, s, s);
        fill(x.v, -1, 1);
        Tensor5 gout = x;
        fill(gout.v, -1, 1);

        BatchNormParams run = p;
        BatchNormCache cache;
        batchnorm_forward(x, run, true, &cache);
        BatchNormGrads g = batchnorm_backward(cache, p, gout);
        auto loss = [&] {
            BatchNormParams fresh = p;
            Tensor5 y = batchnorm_forward(x, fresh, true);
            double acc = 0;
            for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * gout.v[i];
            return acc;
        };
        check(v, "bn.gamma", g.gamma[0], loss, p.gamma[0]);
        check(v, "bn.beta", g.beta[0], loss, p.beta[0]);
        for (int k = 0; k < 5; ++k) {
            std::size_t i = rng.below(x.v.size());
            check(v, "bn.x", g.x.v[i], loss, x.v[i]);
        }
    }

    for (int rep = 0; rep < 20; ++rep) {  // leaky activation
        const int s = 3 + static_cast<int>(rng.below(3));
        Tensor5 x = Tensor5::zeros(1, 2, s, s, s);
        // Inputs bounded away from the kink so h = 1e-3 never crosses it.
        for (auto& val : x.v) {
            double u = rng.uniform() * 2 - 1;
            val = (u < 0 ? -0.05 : 0.05) + u;
        }
        Tensor5 gout = x;
        fill(gout.v, -1, 1);
        Tensor5 g = leaky_relu_backward(x, 0.2, gout);
        auto loss = [&] {
            Tensor5 y = leaky_relu(x, 0.2);
            double acc = 0;
            for (std::size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * gout.v[i];
            return acc;
        };
        for (int k = 0; k < 6; ++k) {
            std::size_t i = rng.below(x.v.size());
            check(v, "relu.x", g.v[i], loss, x.v[i]);
        }
    }

    auto slice_cases = [&](SliceLoss& loss_fn, const char* tag) {
        SlicePlane s;
        s.orientation = SliceOrientation::XY;
        s.channels = 3;
        s.rows = 8;
        s.cols = 8;
        s.values.resize(3 * 8 * 8);
        fill(s.values, 0, 1);
        std::vector<double> grad;
        loss_fn.evaluate_one(s, &grad);
        auto loss = [&] { return loss_fn.evaluate_one(s, nullptr); };
        for (int k = 0; k < 6; ++k) {
            std::size_t i = rng.below(s.values.size());
            check(v, tag, grad[i], loss, s.values[i]);
        }
    };
    for (int rep = 0; rep < 20; ++rep) {  // Gram-matrix loss
        ReferenceSet refs = ReferenceSet::isotropic(testutil::random_image(rng, 8, 8, 0.5));
        FeatureBankConfig bc;
        bc.widths = {4, 6};
        bc.layer_weights = {1.0, 1.0};
        bc.seed = 600 + rep;
        GramLoss gl(refs, std::make_shared<FeatureBank>(bc));
        slice_cases(gl, "gram");
    }
    for (int rep = 0; rep < 20; ++rep) {  // autocorrelation loss
        ReferenceSet refs = ReferenceSet::isotropic(testutil::random_image(rng, 8, 8, 0.5));
        AcfLoss al(refs, 4);
        slice_cases(al, "acf");
    }

    v.note(fmt("%d gradient entries", checked));
    return v;
}

// Descriptors match the brute-force oracles exactly on 100 random grids.
Verdict criterion4() {
    Verdict v;
    SplitMix64 rng(41);

    auto match = [&](const DescriptorCurve& got, const testutil::OracleCurve& want,
                     const char* tag) {
        bool ok = got.per_axis.size() == want.per_axis.size() && got.mean == want.mean;
        for (std::size_t a = 0; ok && a < want.per_axis.size(); ++a)
            ok = got.per_axis[a] == want.per_axis[a];
        v.require(ok, fmt("%s mismatch", tag));
    };

    for (int rep = 0; rep < 100; ++rep) {
        const bool flat = rep % 3 == 0;
        const int nz = flat ? 1 : 2 + static_cast<int>(rng.below(15));
        const int ny = 2 + static_cast<int>(rng.below(15));
        const int nx = 2 + static_cast<int>(rng.below(15));
        const double p = 0.15 + 0.7 * rng.uniform();
        const int longest = std::max({nz, ny, nx});
        const int max_lag = static_cast<int>(rng.below(static_cast<std::uint64_t>(longest)));

        DescriptorCurve s2, l, c2f, c2x;
        if (flat) {
            Image2D img = testutil::random_image(rng, nx, ny, p);
            testutil::OracleGrid og = testutil::OracleGrid::of(img);
            s2 = two_point_probability(img, max_lag);
            l = linear_path(img, max_lag);
            c2f = two_point_cluster(img, max_lag, Connectivity::Face);
            c2x = two_point_cluster(img, max_lag, Connectivity::Full);
            match(s2, testutil::brute_s2(og, max_lag), "s2");
            match(l, testutil::brute_l(og, max_lag), "l");
            match(c2f, testutil::brute_c2(og, max_lag, false), "c2/face");
            match(c2x, testutil::brute_c2(og, max_lag, true), "c2/full");
        } else {
            Volume3D vol = testutil::random_volume(rng, nz, ny, nx, p);
            testutil::OracleGrid og = testutil::OracleGrid::of(vol);
            s2 = two_point_probability(vol, max_lag);
            l = linear_path(vol, max_lag);
            c2f = two_point_cluster(vol, max_lag, Connectivity::Face);
            c2x = two_point_cluster(vol, max_lag, Connectivity::Full);
            match(s2, testutil::brute_s2(og, max_lag), "s2");
            match(l, testutil::brute_l(og, max_lag), "l");
            match(c2f, testutil::brute_c2(og, max_lag, false), "c2/face");
            match(c2x, testutil::brute_c2(og, max_lag, true), "c2/full");

            const int min_side = std::min({nz, ny, nx});
            const int win = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(min_side)));
            PorosityHistogram h = local_porosity_distribution(vol, win, 0.05);
            std::vector<double> want = testutil::brute_lpd(vol, win, 0.05);
            v.require(h.probabilities == want, "lpd mismatch");
        }
        for (std::size_t a = 0; a < s2.per_axis.size(); ++a)
            for (std::size_t r = 0; r < s2.per_axis[a].size(); ++r) {
                v.require(c2f.per_axis[a][r] <= s2.per_axis[a][r], "c2 > s2");
                v.require(l.per_axis[a][r] <= s2.per_axis[a][r], "l > s2");
            }
    }
    return v;
}

// 48^3 reconstruction is bit-identical whether run untiled or via 24^3 or
// 16^3 tiles, for 5 seeds.
Verdict criterion5() {
    Verdict v;
    NetworkSpec sp;
    sp.conv3_blocks = 2;
    sp.channels = 8;
    ModelParams p = warmed(sp, 77);

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ReconConfig base;
        base.dim_z = base.dim_y = base.dim_x = 48;
        base.seed = seed;
        base.phi_target = 0.5;

        ReconConfig whole = base;
        whole.sub_z = whole.sub_y = whole.sub_x = 48;
        ReconConfig t24 = base;
        t24.sub_z = t24.sub_y = t24.sub_x = 24;
        ReconConfig t16 = base;
        t16.sub_z = t16.sub_y = t16.sub_x = 16;

        ReconResult a = reconstruct(p, whole, 0.5);
        ReconResult b = reconstruct(p, t24, 0.5);
        ReconResult c = reconstruct(p, t16, 0.5);
        v.require(a.continuous.values == b.continuous.values &&
                      a.continuous.values == c.continuous.values,
                  fmt("seed %" PRIu64 " continuous differs", seed));
        v.require(a.binary.labels == b.binary.labels && a.binary.labels == c.binary.labels,
                  fmt("seed %" PRIu64 " labels differ", seed));
    }
    return v;
}

// A thin slab forward reproduces the matching plane of the full-volume
// forward exactly, for 10 random anchors.
Verdict criterion6() {
    Verdict v;
    NetworkSpec sp;
    sp.conv3_blocks = 2;
    sp.channels = 8;
    const int m = sp.conv3_blocks;
    const int rf = sp.receptive_field();
    ModelParams p = warmed(sp, 55);

    const int side = 16;
    Tensor5 x = noise_cube(321, side);
    Tensor5 full = forward(p, x);
    const int q = side - rf + 1;

    SplitMix64 rng(66);
    for (int rep = 0; rep < 10; ++rep) {
        const int orient = static_cast<int>(rng.below(3));
        const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(q)));
        Tensor5 slab = Tensor5::zeros(1, 1, orient == 0 ? 2 * m + 1 : side,
                                      orient == 1 ? 2 * m + 1 : side,
                                      orient == 2 ? 2 * m + 1 : side);
        for (int z = 0; z < slab.d; ++z)
            for (int yy = 0; yy < slab.h; ++yy)
                for (int xx = 0; xx < slab.w; ++xx)
                    slab.at(0, 0, z, yy, xx) = x.at(0, 0, orient == 0 ? z + k : z,
                                                    orient == 1 ? yy + k : yy,
                                                    orient == 2 ? xx + k : xx);
        Tensor5 plane = forward(p, slab);
        bool ok = true;
        for (int ch = 0; ch < plane.c && ok; ++ch)
            for (int z = 0; z < plane.d && ok; ++z)
                for (int yy = 0; yy < plane.h && ok; ++yy)
                    for (int xx = 0; xx < plane.w && ok; ++xx)
                        ok = plane.at(0, ch, z, yy, xx) ==
                             full.at(0, ch, orient == 0 ? k : z, orient == 1 ? k : yy,
                                     orient == 2 ? k : xx);
        v.require(ok, fmt("anchor %d (orient %d, plane %d) differs", rep, orient, k));
    }
    return v;
}

// Shared by criteria 7 and 9: the desk-scale training setup.
Image2D desk_reference() { return testutil::synthetic_reference(128, 0.4, 3, 3, 7); }

TrainConfig desk_config(int iterations) {
    TrainConfig cfg;
    cfg.iterations = iterations;
    cfg.batch_size = 1;
    cfg.descriptor = DescriptorKind::Acf;
    cfg.slice_size = 64;
    cfg.acf_max_lag = 20;
    cfg.seed = 11;
    return cfg;
}

// End-to-end desk-scale quality: L5C16, T = 1000, 64^3 reconstruction.
Verdict criterion7() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();

    Image2D ref = desk_reference();
    const double phi_ref = porosity(ref).value;
    CorrelationLength lc_ref = autocorrelation_distance(two_point_probability(ref, 40),
                                                        porosity(ref));
    v.require(lc_ref.converged, "reference l_cor did not converge");
    NetworkSpec sp = design_from_prior(lc_ref);
    v.require(sp.conv3_blocks == 5 && sp.channels == 16,
              fmt("design gave L%dC%d from l_cor %d (want L5C16)", sp.conv3_blocks, sp.channels,
                  lc_ref.l_cor));

    auto [params, rep] = train_improved(ReferenceSet::isotropic(ref), sp, desk_config(1000));

    ReconConfig rc;
    rc.dim_z = rc.dim_y = rc.dim_x = 64;
    rc.seed = 3;
    ReconResult res = reconstruct(params, rc, rep.reference_porosity);

    const double q_err = std::fabs(res.achieved_porosity - phi_ref);
    v.require(q_err <= 1.0 / (64.0 * 64.0 * 64.0) + 1e-12,
              fmt("quantile porosity err %.3g beyond the one-voxel guarantee", q_err));

    Volume3D otsu = binarize_otsu(res.continuous);
    const double o_err = std::fabs(porosity(otsu).value - phi_ref);
    v.require(o_err <= 0.03, fmt("otsu porosity err %.4f > 0.03", o_err));

    const DescriptorCurve s2_ref = two_point_probability(ref, 20);
    const DescriptorCurve s2_rec = two_point_probability(res.binary, 20);
    double mad = 0;
    for (int r = 0; r <= 20; ++r) mad += std::fabs(s2_rec.mean[r] - s2_ref.mean[r]);
    mad /= 21.0;
    v.require(mad <= 0.02, fmt("s2 mad %.4f > 0.02", mad));

    CorrelationLength lc_rec = autocorrelation_distance(two_point_probability(res.binary, 40),
                                                        porosity(res.binary));
    v.require(std::abs(lc_rec.l_cor - lc_ref.l_cor) <= 3,
              fmt("l_cor %d vs reference %d", lc_rec.l_cor, lc_ref.l_cor));

    const double mins =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    v.require(mins <= 45.0, fmt("runtime %.1f min > 45", mins));
    v.note(fmt("phi_err q=%.2g otsu=%.4f, s2_mad=%.4f, l_cor %d/%d, %.1f min", q_err, o_err, mad,
               lc_rec.l_cor, lc_ref.l_cor, mins));
    return v;
}

// SA sanity on a 32^2 reference: exact porosity, best-energy bookkeeping,
// and a 2000-move audit where every incremental energy equals a fresh
// recomputation.
Verdict criterion8() {
    Verdict v;
    Image2D ref(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) ref.at(y, x) = (x % 8) < 4 ? kPore : kSolid;

    AnnealConfig cfg;
    cfg.dims = {32, 32};
    cfg.max_lag = 8;
    cfg.max_swaps = 2000;
    cfg.seed = 5;
    cfg.audit = true;
    AnnealResult res = anneal(ref, cfg);

    std::int64_t pores = 0;
    for (auto px : res.image.pixels) pores += px;
    v.require(pores == 512, fmt("porosity %lld/1024 not conserved", static_cast<long long>(pores)));

    v.require(res.trace.size() == res.audit_energies.size(), "audit length mismatch");
    std::size_t bad = 0;
    for (std::size_t i = 0; i < res.trace.size(); ++i)
        if (res.trace[i].energy != res.audit_energies[i]) ++bad;
    v.require(bad == 0, fmt("%zu of %zu audit energies differ", bad, res.trace.size()));

    double run_best = res.initial_energy;
    for (const auto& row : res.trace) run_best = std::min(run_best, row.energy);
    v.require(res.best_energy == run_best && res.best_energy <= res.initial_energy,
              "best-energy trace bookkeeping broken");
    v.note(fmt("E0 %.4f -> best %.4f over %zu moves", res.initial_energy, res.best_energy,
               res.trace.size()));
    return v;
}

// Two identical desk-scale pipeline runs (T = 200) produce byte-identical
// model files and volumes.
Verdict criterion9() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "porerec_acceptance_c9";
    fs::remove_all(dir);
    fs::create_directories(dir);

    Image2D ref = desk_reference();
    NetworkSpec sp;
    sp.conv3_blocks = 5;
    sp.channels = 16;

    auto run = [&](const char* tag) {
        auto [params, rep] = train_improved(ReferenceSet::isotropic(ref), sp, desk_config(200));
        const std::string model = (dir / (std::string("model_") + tag + ".mm01")).string();
        save_model(params, model);
        ReconConfig rc;
        rc.dim_z = rc.dim_y = rc.dim_x = 64;
        rc.seed = 3;
        ReconResult res = reconstruct(params, rc, rep.reference_porosity);
        const std::string cont = (dir / (std::string("cont_") + tag + ".mv01")).string();
        const std::string bin = (dir / (std::string("bin_") + tag + ".mv01")).string();
        save_volume(res.continuous, cont);
        save_volume(res.binary, bin);
        return std::array<std::string, 3>{model, cont, bin};
    };

    auto a = run("a");
    auto b = run("b");
    const char* names[] = {"model", "continuous volume", "binary volume"};
    for (int i = 0; i < 3; ++i) {
        const std::string ba = read_bytes(a[i]), bb = read_bytes(b[i]);
        v.require(!ba.empty() && ba == bb, fmt("%s differs between runs", names[i]));
    }
    fs::remove_all(dir);
    const double mins =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    v.note(fmt("%.1f min", mins));
    return v;
}

// Adam contract: zero-gradient fixpoint, beta = 0 sign-collapse, and the
// one-step symbolic expansion, all bit-exact against replicated arithmetic.
Verdict criterion10() {
    Verdict v;
    struct Toy {
        std::vector<double> theta, g;
        std::vector<std::span<double>> params() { return {std::span<double>(theta)}; }
        std::vector<std::span<const double>> grads() { return {std::span<const double>(g)}; }
    };

    {
        Toy t;
        t.theta = {1.0, -2.0, 0.5};
        t.g = {0.0, 0.0, 0.0};
        AdamState st = AdamState::make(t.params(), default_hyperparams());
        for (int i = 0; i < 5; ++i) adam_step(st, t.params(), t.grads());
        v.require(t.theta == std::vector<double>{1.0, -2.0, 0.5} && st.step == 5,
                  "zero gradient moved the parameters");
    }
    {
        Toy t;
        t.theta = {0.25, -1.5};
        t.g = {3.0, -0.5};
        AdamConfig cfg;
        cfg.beta1 = 0.0;
        cfg.beta2 = 0.0;
        AdamState st = AdamState::make(t.params(), cfg);
        adam_step(st, t.params(), t.grads());
        for (int i = 0; i < 2; ++i) {
            const double g = t.g[i];
            const double want = (i == 0 ? 0.25 : -1.5) -
                                cfg.lr * g / (std::sqrt((1.0 - cfg.beta2) * g * g) + cfg.eps);
            v.require(t.theta[i] == want, fmt("beta=0 update [%d] off", i));
        }
    }
    {
        Toy t;
        t.theta = {2.0};
        t.g = {0.7};
        AdamConfig cfg = default_hyperparams();
        AdamState st = AdamState::make(t.params(), cfg);
        adam_step(st, t.params(), t.grads());
        const double g = 0.7;
        const double m = (1.0 - cfg.beta1) * g;
        const double vv = (1.0 - cfg.beta2) * g * g;
        const double mhat = m / (1.0 - std::pow(cfg.beta1, 1.0));
        const double vhat = vv / (1.0 - std::pow(cfg.beta2, 1.0));
        const double want = 2.0 - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        v.require(t.theta[0] == want, fmt("one-step %.17g vs %.17g", t.theta[0], want));
    }
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    using Criterion = std::function<Verdict()>;
    const std::map<int, Criterion> all = {
        {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},
        {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10},
    };

    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) {
        const int k = std::atoi(argv[i]);
        if (!all.count(k)) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
            return 64;
        }
        wanted.insert(k);
    }

    int failures = 0;
    for (const auto& [idx, fn] : all) {
        if (!wanted.empty() && !wanted.count(idx)) continue;
        Verdict verdict = fn();
        std::printf("criterion %d %s%s%s\n", idx, verdict.pass ? "PASS" : "FAIL",
                    verdict.detail.empty() ? "" : " -- ", verdict.detail.c_str());
        std::fflush(stdout);
        if (!verdict.pass) ++failures;
    }
    return failures;
}
