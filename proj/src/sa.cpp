#include "porerec/sa.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "porerec/rng.hpp"

namespace porerec {

EnergyTargets make_targets(const Image2D& ref, double w_s2, double w_l, int max_lag) {
    if (w_s2 < 0 || w_l < 0 || w_s2 + w_l <= 0)
        throw std::invalid_argument("make_targets: weights must be >= 0 with a positive sum");
    EnergyTargets t;
    t.w_s2 = w_s2;
    t.w_l = w_l;
    t.max_lag = max_lag;
    if (w_s2 > 0) t.s2 = two_point_probability(ref, max_lag).mean;
    if (w_l > 0) t.l = linear_path(ref, max_lag).mean;
    return t;
}

namespace {

// Shared by the incremental chain and the full recomputation.  noinline keeps
// one code instance: inlined copies could pick different FMA contraction or
// vector reduction orders per call site and flip low bits, breaking the
// audit's exact-equality contract.
__attribute__((noinline)) double curves_energy(const std::vector<std::vector<double>>& per_axis,
                                               const std::vector<double>& target, double weight) {
    if (weight <= 0) return 0;
    double e = 0;
    for (const auto& axis : per_axis)
        for (std::size_t r = 0; r < axis.size(); ++r) {
            const double d = axis[r] - target[r];
            e += d * d;
        }
    return weight * e;
}

// Incremental state: the grid plus per-axis integer pair/segment counts that
// a single-voxel toggle can update in O(axes * (max_lag + line length)).
struct Chain {
    int nz, ny, nx;
    int axes;  // 2 (y,x) or 3 (z,y,x)
    int max_lag;
    std::vector<std::uint8_t> g;
    // Axis order matches descriptors: 0 = x, 1 = y, 2 = z.
    std::vector<std::vector<std::int64_t>> s2_hits, l_segs, totals;

    Chain(int nz_, int ny_, int nx_, int axes_, int max_lag_)
        : nz(nz_), ny(ny_), nx(nx_), axes(axes_), max_lag(max_lag_) {
        g.assign(static_cast<std::size_t>(nz) * ny * nx, 0);
        s2_hits.assign(axes, std::vector<std::int64_t>(max_lag + 1, 0));
        l_segs.assign(axes, std::vector<std::int64_t>(max_lag + 1, 0));
        totals.assign(axes, std::vector<std::int64_t>(max_lag + 1, 0));
        for (int a = 0; a < axes; ++a) {
            const std::int64_t lines =
                static_cast<std::int64_t>(nz) * ny * nx / extent(a);
            for (int r = 0; r <= max_lag; ++r)
                if (extent(a) > r) totals[a][r] = lines * (extent(a) - r);
        }
    }

    int extent(int a) const { return a == 0 ? nx : a == 1 ? ny : nz; }
    std::size_t stride(int a) const {
        return a == 0 ? 1 : a == 1 ? static_cast<std::size_t>(nx)
                                   : static_cast<std::size_t>(nx) * ny;
    }
    std::size_t idx(int z, int y, int x) const {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    }

    // Rebuild all counts from the grid (initialization only).
    void rebuild() {
        for (int a = 0; a < axes; ++a) {
            auto& hits = s2_hits[a];
            auto& segs = l_segs[a];
            std::fill(hits.begin(), hits.end(), 0);
            std::fill(segs.begin(), segs.end(), 0);
            const std::size_t s = stride(a);
            const int ext = extent(a);
            for (int z = 0; z < nz; ++z)
                for (int y = 0; y < ny; ++y)
                    for (int x = 0; x < nx; ++x) {
                        const int along = a == 0 ? x : a == 1 ? y : z;
                        const std::size_t i = idx(z, y, x);
                        if (along == 0) {  // line start: segment counting
                            int run = 0;
                            for (int t = 0; t <= ext; ++t) {
                                const bool pore =
                                    t < ext && g[i + static_cast<std::size_t>(t) * s];
                                if (pore) {
                                    ++run;
                                } else {
                                    for (int r = 0; r <= max_lag && r < run; ++r)
                                        segs[r] += run - r;
                                    run = 0;
                                }
                            }
                        }
                        if (!g[i]) continue;
                        for (int r = 0; r <= max_lag && along + r < ext; ++r)
                            hits[r] += g[i + static_cast<std::size_t>(r) * s];
                    }
        }
    }

    // Toggle one voxel, keeping every count exact.
    void flip(int z, int y, int x) {
        const std::size_t i = idx(z, y, x);
        const int oldv = g[i];
        const int newv = 1 - oldv;
        for (int a = 0; a < axes; ++a) {
            const std::size_t s = stride(a);
            const int ext = extent(a);
            const int q = a == 0 ? x : a == 1 ? y : z;
            auto& hits = s2_hits[a];

            // S2 pairs that contain this voxel.
            hits[0] += newv - oldv;
            for (int r = 1; r <= max_lag; ++r) {
                if (q - r >= 0) {
                    const int other = g[i - static_cast<std::size_t>(r) * s];
                    hits[r] += (other & newv) - (other & oldv);
                }
                if (q + r < ext) {
                    const int other = g[i + static_cast<std::size_t>(r) * s];
                    hits[r] += (other & newv) - (other & oldv);
                }
            }

            // Lineal-path segments: re-count the voxel's whole line.
            const std::size_t base = i - static_cast<std::size_t>(q) * s;
            line_segments(base, s, ext, a, -1);
        }
        g[i] = static_cast<std::uint8_t>(newv);
        for (int a = 0; a < axes; ++a) {
            const std::size_t s = stride(a);
            const int q = a == 0 ? x : a == 1 ? y : z;
            line_segments(i - static_cast<std::size_t>(q) * s, s, extent(a), a, +1);
        }
    }

    void line_segments(std::size_t base, std::size_t s, int ext, int a, int sign) {
        auto& segs = l_segs[a];
        int run = 0;
        for (int t = 0; t <= ext; ++t) {
            const bool pore = t < ext && g[base + static_cast<std::size_t>(t) * s];
            if (pore) {
                ++run;
            } else {
                for (int r = 0; r <= max_lag && r < run; ++r) segs[r] += sign * (run - r);
                run = 0;
            }
        }
    }

    // Integer counts -> per-axis value curves, following the same
    // hits/totals division the descriptors module applies, so the results
    // are the same doubles a from-scratch recomputation produces.
    const std::vector<std::vector<double>>& values(
        const std::vector<std::vector<std::int64_t>>& counts) const {
        scratch.assign(axes, std::vector<double>(max_lag + 1, 0.0));
        for (int a = 0; a < axes; ++a)
            for (int r = 0; r <= max_lag; ++r)
                if (totals[a][r] > 0)
                    scratch[a][r] = static_cast<double>(counts[a][r]) /
                                    static_cast<double>(totals[a][r]);
        return scratch;
    }

    double energy(const EnergyTargets& t) const {
        double e = 0;
        if (t.w_s2 > 0) e += curves_energy(values(s2_hits), t.s2, t.w_s2);
        if (t.w_l > 0) e += curves_energy(values(l_segs), t.l, t.w_l);
        return e;
    }

    mutable std::vector<std::vector<double>> scratch;
};

}  // namespace

double anneal_energy(const Image2D& g, const EnergyTargets& t) {
    double e = 0;
    if (t.w_s2 > 0) e += curves_energy(two_point_probability(g, t.max_lag).per_axis, t.s2, t.w_s2);
    if (t.w_l > 0) e += curves_energy(linear_path(g, t.max_lag).per_axis, t.l, t.w_l);
    return e;
}

double anneal_energy(const Volume3D& g, const EnergyTargets& t) {
    double e = 0;
    if (t.w_s2 > 0) e += curves_energy(two_point_probability(g, t.max_lag).per_axis, t.s2, t.w_s2);
    if (t.w_l > 0) e += curves_energy(linear_path(g, t.max_lag).per_axis, t.l, t.w_l);
    return e;
}

AnnealResult anneal(const Image2D& ref, const AnnealConfig& cfg) {
    if (cfg.dims.size() != 2 && cfg.dims.size() != 3)
        throw std::invalid_argument("anneal: dims must have 2 or 3 entries");
    for (int d : cfg.dims)
        if (d < 2) throw std::invalid_argument("anneal: every dim must be >= 2");
    const bool is3d = cfg.dims.size() == 3;
    const int nz = is3d ? cfg.dims[0] : 1;
    const int ny = is3d ? cfg.dims[1] : cfg.dims[0];
    const int nx = is3d ? cfg.dims[2] : cfg.dims[1];
    const std::int64_t nvox = static_cast<std::int64_t>(nz) * ny * nx;
    if (is3d && nvox > 64ll * 64 * 64)
        throw std::invalid_argument("anneal: 3D grids supported up to 64^3 only");
    if (!(cfg.cooling > 0 && cfg.cooling < 1))
        throw std::invalid_argument("anneal: cooling factor must be in (0,1)");
    if (cfg.max_lag < 1 || cfg.max_lag >= std::min({is3d ? nz : ny, ny, nx}) ||
        cfg.max_lag >= std::min(ref.width, ref.height))
        throw std::invalid_argument("anneal: max_lag too large for grid or reference");

    const EnergyTargets targets = make_targets(ref, cfg.weight_s2, cfg.weight_l, cfg.max_lag);

    const double phi = porosity(ref).value;
    const auto n_pore = static_cast<std::int64_t>(std::llround(phi * static_cast<double>(nvox)));
    if (n_pore <= 0 || n_pore >= nvox)
        throw std::invalid_argument("anneal: reference has a degenerate phase split");

    // Exact-count random initial grid (partial Fisher-Yates over voxels).
    Chain chain(nz, ny, nx, is3d ? 3 : 2, cfg.max_lag);
    SplitMix64 stream(splitmix64(cfg.seed));
    {
        std::vector<std::int64_t> pos(nvox);
        for (std::int64_t i = 0; i < nvox; ++i) pos[i] = i;
        for (std::int64_t i = 0; i < n_pore; ++i) {
            const std::int64_t j =
                i + static_cast<std::int64_t>(stream.below(static_cast<std::uint64_t>(nvox - i)));
            std::swap(pos[i], pos[j]);
            chain.g[pos[i]] = kPore;
        }
    }
    chain.rebuild();

    AnnealResult res;
    res.is_3d = is3d;
    double e = chain.energy(targets);
    res.initial_energy = e;
    double best_e = e;
    std::vector<std::uint8_t> best_g = chain.g;

    double temp = cfg.t0.value_or(std::max(e * cfg.t0_factor, 1e-300));
    const std::int64_t block = cfg.swaps_per_temp > 0 ? cfg.swaps_per_temp : 10 * nvox;

    auto pick = [&](std::uint8_t phase) {
        for (;;) {
            const auto i = static_cast<std::int64_t>(stream.below(static_cast<std::uint64_t>(nvox)));
            if (chain.g[i] == phase) return i;
        }
    };

    std::int64_t swaps = 0;
    while (swaps < cfg.max_swaps && best_e > cfg.energy_stop) {
        for (std::int64_t b = 0; b < block && swaps < cfg.max_swaps && best_e > cfg.energy_stop;
             ++b) {
            ++swaps;
            const std::int64_t ip = pick(kPore);
            const std::int64_t is = pick(kSolid);
            auto coords = [&](std::int64_t i, int& z, int& y, int& x) {
                x = static_cast<int>(i % nx);
                y = static_cast<int>((i / nx) % ny);
                z = static_cast<int>(i / (static_cast<std::int64_t>(nx) * ny));
            };
            int za, ya, xa, zb, yb, xb;
            coords(ip, za, ya, xa);
            coords(is, zb, yb, xb);
            chain.flip(za, ya, xa);
            chain.flip(zb, yb, xb);

            const double e_new = chain.energy(targets);
            const double de = e_new - e;
            bool accept = de <= 0;
            if (!accept) accept = stream.uniform() < std::exp(-de / temp);
            if (accept) {
                e = e_new;
                if (e < best_e) {
                    best_e = e;
                    best_g = chain.g;
                }
            } else {
                chain.flip(zb, yb, xb);
                chain.flip(za, ya, xa);
            }
            res.trace.push_back({swaps, temp, e, accept});
            if (cfg.audit) {
                if (is3d) {
                    Volume3D v = Volume3D::binary(nz, ny, nx);
                    v.labels = chain.g;
                    res.audit_energies.push_back(anneal_energy(v, targets));
                } else {
                    Image2D img(nx, ny);
                    img.pixels = chain.g;
                    res.audit_energies.push_back(anneal_energy(img, targets));
                }
            }
        }
        temp *= cfg.cooling;
        if (temp < 1e-300) temp = 1e-300;
    }

    res.final_energy = e;
    res.best_energy = best_e;
    if (is3d) {
        res.volume = Volume3D::binary(nz, ny, nx);
        res.volume.labels = std::move(best_g);
    } else {
        res.image = Image2D(nx, ny);
        res.image.pixels = std::move(best_g);
    }
    return res;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::string out = "swap_index,temperature,energy,accepted\n";
    char buf[96];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%d\n",
                      static_cast<long long>(r.swap_index), r.temperature, r.energy,
                      r.accepted ? 1 : 0);
        out += buf;
    }
    return out;
}

}  // namespace porerec
