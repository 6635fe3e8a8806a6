#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <vector>

#include "porerec/rng.hpp"
#include "porerec/volume.hpp"

// Shared test utilities: independent brute-force descriptor oracles, a
// finite-difference gradient checker, and the synthetic reference generator
// used by the end-to-end tests.  The oracles deliberately reuse nothing from
// src/ beyond the grid containers.

namespace testutil {

using porerec::Image2D;
using porerec::Volume3D;

// ------------------------------------------------------------ random grids ---

inline Image2D random_image(porerec::SplitMix64& rng, int w, int h,
                            double p_pore = 0.5) {
    Image2D img(w, h);
    for (auto& px : img.pixels) px = rng.uniform() < p_pore ? 1 : 0;
    return img;
}

inline Volume3D random_volume(porerec::SplitMix64& rng, int nz, int ny, int nx,
                              double p_pore = 0.5) {
    Volume3D v = Volume3D::binary(nz, ny, nx);
    for (auto& vox : v.labels) vox = rng.uniform() < p_pore ? 1 : 0;
    return v;
}

// --------------------------------------------------------- gradient checks ---

// |analytic - fd| <= rel * max(|analytic|, |fd|, floor); the floor keeps
// finite-difference truncation noise from failing near-zero gradients.
inline bool grad_close(double analytic, double fd, double rel = 1e-4,
                       double floor_mag = 1e-2) {
    const double scale = std::max({std::fabs(analytic), std::fabs(fd), floor_mag});
    return std::fabs(analytic - fd) <= rel * scale;
}

// Central difference of a scalar functional with respect to x[i].
template <class F>
double central_diff(F&& f, double& xi, double h = 1e-3) {
    const double x0 = xi;
    xi = x0 + h;
    const double fp = f();
    xi = x0 - h;
    const double fm = f();
    xi = x0;
    return (fp - fm) / (2.0 * h);
}

// ------------------------------------------------------------------ oracle ---

// Minimal view shared by the oracle implementations; axis 0 = x, 1 = y,
// 2 = z to match the library's axis order.
struct OracleGrid {
    int nz, ny, nx;
    const std::uint8_t* v;
    int axes;

    static OracleGrid of(const Image2D& img) {
        return {1, img.height, img.width, img.pixels.data(), 2};
    }
    static OracleGrid of(const Volume3D& vol) {
        return {vol.dim_z, vol.dim_y, vol.dim_x, vol.labels.data(), 3};
    }
    std::size_t idx(int z, int y, int x) const {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    }
    std::uint8_t at(int z, int y, int x) const { return v[idx(z, y, x)]; }
    int extent(int a) const { return a == 0 ? nx : a == 1 ? ny : nz; }
};

struct OracleCounts {
    // [axis][lag], axis order x, y, z.
    std::vector<std::vector<std::int64_t>> hits, totals;
};

struct OracleCurve {
    std::vector<std::vector<double>> per_axis;
    std::vector<double> mean;
};

// Mirrors the library's curve assembly so equal integer counts imply equal
// doubles.
inline OracleCurve assemble_counts(const OracleCounts& c, int max_lag) {
    OracleCurve out;
    const int axes = static_cast<int>(c.hits.size());
    out.per_axis.assign(axes, std::vector<double>(max_lag + 1, 0.0));
    out.mean.assign(max_lag + 1, 0.0);
    for (int r = 0; r <= max_lag; ++r) {
        double sum = 0.0;
        int with_data = 0;
        for (int a = 0; a < axes; ++a) {
            if (c.totals[a][r] > 0) {
                double val = static_cast<double>(c.hits[a][r]) /
                             static_cast<double>(c.totals[a][r]);
                out.per_axis[a][r] = val;
                sum += val;
                ++with_data;
            }
        }
        out.mean[r] = with_data > 0 ? sum / with_data : 0.0;
    }
    return out;
}

inline OracleCounts oracle_init(const OracleGrid& g, int max_lag) {
    OracleCounts c;
    c.hits.assign(g.axes, std::vector<std::int64_t>(max_lag + 1, 0));
    c.totals.assign(g.axes, std::vector<std::int64_t>(max_lag + 1, 0));
    return c;
}

// S2: both endpoints pore, every axis-aligned start position enumerated.
inline OracleCurve brute_s2(const OracleGrid& g, int max_lag) {
    OracleCounts c = oracle_init(g, max_lag);
    const int step[3][3] = {{0, 0, 1}, {0, 1, 0}, {1, 0, 0}};  // x, y, z
    for (int a = 0; a < g.axes; ++a)
        for (int r = 0; r <= max_lag; ++r)
            for (int z = 0; z < g.nz; ++z)
                for (int y = 0; y < g.ny; ++y)
                    for (int x = 0; x < g.nx; ++x) {
                        int z2 = z + r * step[a][0];
                        int y2 = y + r * step[a][1];
                        int x2 = x + r * step[a][2];
                        if (z2 >= g.nz || y2 >= g.ny || x2 >= g.nx) continue;
                        c.totals[a][r] += 1;
                        if (g.at(z, y, x) && g.at(z2, y2, x2)) c.hits[a][r] += 1;
                    }
    return assemble_counts(c, max_lag);
}

// L: the whole segment from the start to lag r lies in the pore phase.
inline OracleCurve brute_l(const OracleGrid& g, int max_lag) {
    OracleCounts c = oracle_init(g, max_lag);
    const int step[3][3] = {{0, 0, 1}, {0, 1, 0}, {1, 0, 0}};
    for (int a = 0; a < g.axes; ++a)
        for (int r = 0; r <= max_lag; ++r)
            for (int z = 0; z < g.nz; ++z)
                for (int y = 0; y < g.ny; ++y)
                    for (int x = 0; x < g.nx; ++x) {
                        int z2 = z + r * step[a][0];
                        int y2 = y + r * step[a][1];
                        int x2 = x + r * step[a][2];
                        if (z2 >= g.nz || y2 >= g.ny || x2 >= g.nx) continue;
                        c.totals[a][r] += 1;
                        bool all = true;
                        for (int t = 0; t <= r; ++t)
                            if (!g.at(z + t * step[a][0], y + t * step[a][1],
                                      x + t * step[a][2])) {
                                all = false;
                                break;
                            }
                        if (all) c.hits[a][r] += 1;
                    }
    return assemble_counts(c, max_lag);
}

// Connected pore components by breadth-first search (the library uses
// union-find, so this is an independent path).
inline std::vector<std::int32_t> bfs_labels(const OracleGrid& g, bool full) {
    const std::size_t n = static_cast<std::size_t>(g.nz) * g.ny * g.nx;
    std::vector<std::int32_t> lab(n, -1);
    std::int32_t next = 0;
    std::deque<std::array<int, 3>> queue;
    for (int z0 = 0; z0 < g.nz; ++z0)
        for (int y0 = 0; y0 < g.ny; ++y0)
            for (int x0 = 0; x0 < g.nx; ++x0) {
                if (!g.at(z0, y0, x0) || lab[g.idx(z0, y0, x0)] >= 0) continue;
                lab[g.idx(z0, y0, x0)] = next;
                queue.push_back({z0, y0, x0});
                while (!queue.empty()) {
                    auto [z, y, x] = queue.front();
                    queue.pop_front();
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (dz == 0 && dy == 0 && dx == 0) continue;
                                if (!full &&
                                    std::abs(dz) + std::abs(dy) + std::abs(dx) != 1)
                                    continue;
                                int zz = z + dz, yy = y + dy, xx = x + dx;
                                if (zz < 0 || zz >= g.nz || yy < 0 || yy >= g.ny ||
                                    xx < 0 || xx >= g.nx)
                                    continue;
                                std::size_t j = g.idx(zz, yy, xx);
                                if (g.v[j] && lab[j] < 0) {
                                    lab[j] = next;
                                    queue.push_back({zz, yy, xx});
                                }
                            }
                }
                ++next;
            }
    return lab;
}

// C2: both endpoints pore and in the same connected component.
inline OracleCurve brute_c2(const OracleGrid& g, int max_lag, bool full) {
    std::vector<std::int32_t> lab = bfs_labels(g, full);
    OracleCounts c = oracle_init(g, max_lag);
    const int step[3][3] = {{0, 0, 1}, {0, 1, 0}, {1, 0, 0}};
    for (int a = 0; a < g.axes; ++a)
        for (int r = 0; r <= max_lag; ++r)
            for (int z = 0; z < g.nz; ++z)
                for (int y = 0; y < g.ny; ++y)
                    for (int x = 0; x < g.nx; ++x) {
                        int z2 = z + r * step[a][0];
                        int y2 = y + r * step[a][1];
                        int x2 = x + r * step[a][2];
                        if (z2 >= g.nz || y2 >= g.ny || x2 >= g.nx) continue;
                        c.totals[a][r] += 1;
                        std::int32_t la = lab[g.idx(z, y, x)];
                        std::int32_t lb = lab[g.idx(z2, y2, x2)];
                        if (la >= 0 && la == lb) c.hits[a][r] += 1;
                    }
    return assemble_counts(c, max_lag);
}

// LPD oracle: enumerate every window position by brute force and histogram
// the porosities.  The count -> porosity -> bin arithmetic mirrors the
// library (multiply by the reciprocal cell count), so equal integer window
// counts imply bit-equal probabilities.
inline std::vector<double> brute_lpd(const Volume3D& v, int side, double bin_width,
                                     std::vector<double>* edges = nullptr) {
    const int nbins = static_cast<int>(std::floor(1.0 / bin_width)) + 1;
    std::vector<std::int64_t> counts(nbins, 0);
    std::int64_t windows = 0;
    const double inv_cells = 1.0 / (static_cast<double>(side) * side * side);
    for (int z = 0; z + side <= v.dim_z; ++z)
        for (int y = 0; y + side <= v.dim_y; ++y)
            for (int x = 0; x + side <= v.dim_x; ++x) {
                std::int64_t pore = 0;
                for (int dz = 0; dz < side; ++dz)
                    for (int dy = 0; dy < side; ++dy)
                        for (int dx = 0; dx < side; ++dx)
                            pore += v.at(z + dz, y + dy, x + dx);
                double p = static_cast<double>(pore) * inv_cells;
                int b = std::min(static_cast<int>(std::floor(p / bin_width)),
                                 nbins - 1);
                counts[b] += 1;
                ++windows;
            }
    std::vector<double> probs(nbins, 0.0);
    for (int b = 0; b < nbins; ++b)
        probs[b] = windows > 0
                       ? static_cast<double>(counts[b]) / static_cast<double>(windows)
                       : 0.0;
    if (edges) {
        edges->resize(nbins + 1);
        for (int b = 0; b <= nbins; ++b) (*edges)[b] = b * bin_width;
    }
    return probs;
}

// ------------------------------------------------------ synthetic reference ---

// Smoothed thresholded noise: white noise, a few box-blur passes, then a
// quantile threshold that pins the porosity.  Blur radius and pass count set
// the correlation length.
inline Image2D synthetic_reference(int side, double phi, int blur_radius,
                                   int blur_passes, std::uint64_t seed) {
    std::vector<double> field(static_cast<std::size_t>(side) * side);
    for (std::size_t i = 0; i < field.size(); ++i)
        field[i] = porerec::counter_uniform(seed, i);

    std::vector<double> tmp(field.size());
    auto blur_axis = [&](bool along_x) {
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                double acc = 0.0;
                int cnt = 0;
                for (int d = -blur_radius; d <= blur_radius; ++d) {
                    int yy = along_x ? y : y + d;
                    int xx = along_x ? x + d : x;
                    if (yy < 0 || yy >= side || xx < 0 || xx >= side) continue;
                    acc += field[static_cast<std::size_t>(yy) * side + xx];
                    ++cnt;
                }
                tmp[static_cast<std::size_t>(y) * side + x] = acc / cnt;
            }
        field.swap(tmp);
    };
    for (int pass = 0; pass < blur_passes; ++pass) {
        blur_axis(true);
        blur_axis(false);
    }

    std::vector<double> sorted = field;
    std::sort(sorted.begin(), sorted.end());
    // Threshold so that ~phi of the pixels land in the pore phase.
    const auto cut = static_cast<std::size_t>(
        std::llround((1.0 - phi) * static_cast<double>(sorted.size())));
    const double tau = sorted[std::min(cut, sorted.size() - 1)];
    Image2D img(side, side);
    for (std::size_t i = 0; i < field.size(); ++i)
        img.pixels[i] = field[i] >= tau ? 1 : 0;
    return img;
}

}  // namespace testutil
