#include "porerec/descriptors.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace porerec {

namespace {

// Uniform view over Image2D (nz = 1, two axes) and Volume3D (three axes).
struct Grid {
    int nz, ny, nx;
    const std::uint8_t* v;
    int axes;  // 2 or 3

    std::size_t idx(int z, int y, int x) const {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    }
    int extent(int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
    std::size_t stride(int axis) const {
        return axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(nx)
                                         : static_cast<std::size_t>(nx) * ny;
    }
};

Grid as_grid(const Image2D& img) {
    if (img.pixels.empty()) throw std::invalid_argument("descriptors: empty image");
    return {1, img.height, img.width, img.pixels.data(), 2};
}

Grid as_grid(const Volume3D& vol) {
    if (vol.mode != VolumeMode::Binary)
        throw std::invalid_argument("descriptors: binary volume required");
    if (vol.labels.empty()) throw std::invalid_argument("descriptors: empty volume");
    return {vol.dim_z, vol.dim_y, vol.dim_x, vol.labels.data(), 3};
}

void check_max_lag(const Grid& g, int max_lag) {
    int longest = std::max(g.nx, std::max(g.ny, g.nz));
    if (max_lag < 0) throw std::invalid_argument("descriptors: max_lag must be >= 0");
    if (max_lag >= longest)
        throw std::invalid_argument("descriptors: max_lag " + std::to_string(max_lag) +
                                    " too large for grid");
}

// Assembles the curve from per-axis integer pair counts.  Axes too short to
// admit any pair at a lag report 0 there and are left out of the mean.
DescriptorCurve assemble(const Grid& g, int max_lag,
                         const std::vector<std::vector<std::int64_t>>& hits,
                         const std::vector<std::vector<std::int64_t>>& totals) {
    DescriptorCurve c;
    c.lags.resize(max_lag + 1);
    std::iota(c.lags.begin(), c.lags.end(), 0);
    c.per_axis.assign(g.axes, std::vector<double>(max_lag + 1, 0.0));
    c.mean.assign(max_lag + 1, 0.0);
    for (int r = 0; r <= max_lag; ++r) {
        double sum = 0.0;
        int with_data = 0;
        for (int a = 0; a < g.axes; ++a) {
            if (totals[a][r] > 0) {
                double val = static_cast<double>(hits[a][r]) / static_cast<double>(totals[a][r]);
                c.per_axis[a][r] = val;
                sum += val;
                ++with_data;
            }
        }
        c.mean[r] = with_data > 0 ? sum / with_data : 0.0;
    }
    return c;
}

// labels[i] >= 0 is the component id of pore voxel i, -1 for solid.
std::vector<std::int32_t> label_components(const Grid& g, Connectivity conn) {
    const std::size_t n = static_cast<std::size_t>(g.nz) * g.ny * g.nx;
    std::vector<std::int32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::int32_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    auto unite = [&](std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[b] = a;
    };

    // Predecessor offsets in (z,y,x) scan order; the dz = -1 entries are
    // simply out of range for 2D grids.
    std::vector<std::array<int, 3>> offs;
    if (conn == Connectivity::Face) {
        offs = {{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
    } else {
        for (int dz = -1; dz <= 0; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    bool before = dz < 0 || (dz == 0 && dy < 0) || (dz == 0 && dy == 0 && dx < 0);
                    if (before) offs.push_back({dz, dy, dx});
                }
    }

    for (int z = 0; z < g.nz; ++z)
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                std::size_t i = g.idx(z, y, x);
                if (!g.v[i]) continue;
                for (const auto& o : offs) {
                    int zz = z + o[0], yy = y + o[1], xx = x + o[2];
                    if (zz < 0 || yy < 0 || yy >= g.ny || xx < 0 || xx >= g.nx) continue;
                    std::size_t j = g.idx(zz, yy, xx);
                    if (g.v[j]) unite(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j));
                }
            }

    std::vector<std::int32_t> labels(n, -1);
    for (std::size_t i = 0; i < n; ++i)
        if (g.v[i]) labels[i] = find(static_cast<std::int32_t>(i));
    return labels;
}

std::vector<std::int64_t> pair_totals(const Grid& g, int axis, int max_lag) {
    std::vector<std::int64_t> totals(max_lag + 1, 0);
    std::int64_t lines = static_cast<std::int64_t>(g.nz) * g.ny * g.nx / g.extent(axis);
    for (int r = 0; r <= max_lag; ++r)
        if (g.extent(axis) > r) totals[r] = lines * (g.extent(axis) - r);
    return totals;
}

DescriptorCurve s2_impl(const Grid& g, int max_lag) {
    check_max_lag(g, max_lag);
    std::vector<std::vector<std::int64_t>> hits(g.axes), totals(g.axes);
    for (int a = 0; a < g.axes; ++a) {
        hits[a].assign(max_lag + 1, 0);
        totals[a] = pair_totals(g, a, max_lag);
        const std::size_t s = g.stride(a);
        const int ext = g.extent(a);
        for (int r = 0; r <= max_lag && r < ext; ++r) {
            std::int64_t cnt = 0;
            for (int z = 0; z < g.nz; ++z)
                for (int y = 0; y < g.ny; ++y) {
                    std::size_t row = g.idx(z, y, 0);
                    for (int x = 0; x < g.nx; ++x) {
                        int along = a == 0 ? x : a == 1 ? y : z;
                        if (along + r < ext) cnt += g.v[row + x] & g.v[row + x + r * s];
                    }
                }
            hits[a][r] = cnt;
        }
    }
    return assemble(g, max_lag, hits, totals);
}

DescriptorCurve lp_impl(const Grid& g, int max_lag) {
    check_max_lag(g, max_lag);
    std::vector<std::vector<std::int64_t>> hits(g.axes), totals(g.axes);
    for (int a = 0; a < g.axes; ++a) {
        hits[a].assign(max_lag + 1, 0);
        totals[a] = pair_totals(g, a, max_lag);
        const std::size_t s = g.stride(a);
        const int ext = g.extent(a);
        // Walk every line along the axis once; a pore run of length len
        // contains len - r segments of r+1 consecutive pore voxels.
        for (int z = 0; z < g.nz; ++z)
            for (int y = 0; y < g.ny; ++y)
                for (int x = 0; x < g.nx; ++x) {
                    int along = a == 0 ? x : a == 1 ? y : z;
                    if (along != 0) continue;  // line start only
                    std::size_t base = g.idx(z, y, x);
                    int run = 0;
                    for (int t = 0; t <= ext; ++t) {
                        bool pore = t < ext && g.v[base + static_cast<std::size_t>(t) * s];
                        if (pore) {
                            ++run;
                        } else {
                            for (int r = 0; r <= max_lag && r < run; ++r) hits[a][r] += run - r;
                            run = 0;
                        }
                    }
                }
    }
    return assemble(g, max_lag, hits, totals);
}

DescriptorCurve c2_impl(const Grid& g, int max_lag, Connectivity conn) {
    check_max_lag(g, max_lag);
    std::vector<std::int32_t> labels = label_components(g, conn);
    std::vector<std::vector<std::int64_t>> hits(g.axes), totals(g.axes);
    for (int a = 0; a < g.axes; ++a) {
        hits[a].assign(max_lag + 1, 0);
        totals[a] = pair_totals(g, a, max_lag);
        const std::size_t s = g.stride(a);
        const int ext = g.extent(a);
        for (int r = 0; r <= max_lag && r < ext; ++r) {
            std::int64_t cnt = 0;
            for (int z = 0; z < g.nz; ++z)
                for (int y = 0; y < g.ny; ++y) {
                    std::size_t row = g.idx(z, y, 0);
                    for (int x = 0; x < g.nx; ++x) {
                        int along = a == 0 ? x : a == 1 ? y : z;
                        if (along + r >= ext) continue;
                        std::size_t i = row + x;
                        std::size_t j = i + r * s;
                        cnt += labels[i] >= 0 && labels[i] == labels[j];
                    }
                }
            hits[a][r] = cnt;
        }
    }
    return assemble(g, max_lag, hits, totals);
}

}  // namespace

DescriptorCurve two_point_probability(const Image2D& g, int max_lag) {
    return s2_impl(as_grid(g), max_lag);
}
DescriptorCurve two_point_probability(const Volume3D& g, int max_lag) {
    return s2_impl(as_grid(g), max_lag);
}

DescriptorCurve linear_path(const Image2D& g, int max_lag) { return lp_impl(as_grid(g), max_lag); }
DescriptorCurve linear_path(const Volume3D& g, int max_lag) { return lp_impl(as_grid(g), max_lag); }

DescriptorCurve two_point_cluster(const Image2D& g, int max_lag, Connectivity conn) {
    return c2_impl(as_grid(g), max_lag, conn);
}
DescriptorCurve two_point_cluster(const Volume3D& g, int max_lag, Connectivity conn) {
    return c2_impl(as_grid(g), max_lag, conn);
}

CorrelationLength autocorrelation_distance(const DescriptorCurve& s2, PhaseFraction phi,
                                           double eps_rel, int window) {
    if (s2.mean.empty()) throw std::invalid_argument("autocorrelation_distance: empty curve");
    if (window < 1) throw std::invalid_argument("autocorrelation_distance: window must be >= 1");
    const int last = static_cast<int>(s2.mean.size()) - 1;
    const double p = phi.value;
    if (p <= 0.0 || p >= 1.0) return {1, true};  // constant curve, nothing to settle

    const double target = p * p;
    const double band = eps_rel * (p - target);
    for (int r = 0; r + window - 1 <= last; ++r) {
        bool inside = true;
        for (int k = 0; k < window && inside; ++k)
            inside = std::fabs(s2.mean[r + k] - target) <= band;
        if (inside) return {std::max(r, 1), true};
    }
    return {std::max(last, 1), false};
}

PorosityHistogram local_porosity_distribution(const Volume3D& v, int window_side,
                                              double bin_width) {
    if (v.mode != VolumeMode::Binary)
        throw std::invalid_argument("local_porosity_distribution: binary volume required");
    if (window_side < 1 || window_side > std::min({v.dim_z, v.dim_y, v.dim_x}))
        throw std::invalid_argument("local_porosity_distribution: window larger than volume");
    if (!(bin_width > 0.0 && bin_width <= 1.0))
        throw std::invalid_argument("local_porosity_distribution: bin_width must be in (0,1]");

    // Prefix sums make each window sum O(1): P(z,y,x) holds the pore count of
    // the box [0,z) x [0,y) x [0,x).
    const int nz = v.dim_z, ny = v.dim_y, nx = v.dim_x;
    std::vector<std::int64_t> pref(static_cast<std::size_t>(nz + 1) * (ny + 1) * (nx + 1), 0);
    auto P = [&](int z, int y, int x) -> std::int64_t& {
        return pref[(static_cast<std::size_t>(z) * (ny + 1) + y) * (nx + 1) + x];
    };
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                P(z + 1, y + 1, x + 1) = v.labels[v.index(z, y, x)] + P(z, y + 1, x + 1) +
                                         P(z + 1, y, x + 1) + P(z + 1, y + 1, x) -
                                         P(z, y, x + 1) - P(z, y + 1, x) - P(z + 1, y, x) +
                                         P(z, y, x);

    const int nbins = static_cast<int>(std::floor(1.0 / bin_width)) + 1;
    std::vector<std::int64_t> counts(nbins, 0);
    const int w = window_side;
    const double inv_cells = 1.0 / (static_cast<double>(w) * w * w);
    for (int z = 0; z + w <= nz; ++z)
        for (int y = 0; y + w <= ny; ++y)
            for (int x = 0; x + w <= nx; ++x) {
                std::int64_t pore = P(z + w, y + w, x + w) - P(z, y + w, x + w) -
                                    P(z + w, y, x + w) - P(z + w, y + w, x) + P(z, y, x + w) +
                                    P(z, y + w, x) + P(z + w, y, x) - P(z, y, x);
                double por = static_cast<double>(pore) * inv_cells;
                int b = std::min(static_cast<int>(std::floor(por / bin_width)), nbins - 1);
                ++counts[b];
            }

    PorosityHistogram h;
    h.window_side = window_side;
    h.bin_edges.resize(nbins + 1);
    for (int k = 0; k <= nbins; ++k) h.bin_edges[k] = k * bin_width;
    std::int64_t total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    h.probabilities.resize(nbins);
    for (int k = 0; k < nbins; ++k)
        h.probabilities[k] = static_cast<double>(counts[k]) / static_cast<double>(total);
    return h;
}

std::string to_csv(const DescriptorCurve& c) {
    std::string out = c.per_axis.size() == 3 ? "r,x,y,z,mean\n" : "r,x,y,mean\n";
    char buf[64];
    for (std::size_t i = 0; i < c.lags.size(); ++i) {
        out += std::to_string(c.lags[i]);
        for (const auto& axis : c.per_axis) {
            std::snprintf(buf, sizeof(buf), ",%.9g", axis[i]);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), ",%.9g\n", c.mean[i]);
        out += buf;
    }
    return out;
}

}  // namespace porerec
