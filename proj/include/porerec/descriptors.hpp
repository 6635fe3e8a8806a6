#pragma once

#include <string>
#include <vector>

#include "porerec/volume.hpp"

// Statistical descriptors of binary grids: two-point probability S2(r),
// lineal path L(r), two-point cluster C2(r), the autocorrelation distance
// derived from S2, and the local porosity distribution.  All are computed
// along the coordinate axes only, with non-periodic boundaries (pairs that
// would cross an edge are excluded from the counts).

namespace porerec {

struct DescriptorCurve {
    std::vector<int> lags;                      // 0..max_lag
    std::vector<std::vector<double>> per_axis;  // axis order x, y and, for volumes, z
    std::vector<double> mean;                   // unweighted average over axes with data
};

struct CorrelationLength {
    int l_cor = 1;          // voxels
    bool converged = true;  // false when S2 never settles into the band
};

struct PorosityHistogram {
    std::vector<double> bin_edges;       // nbins+1 edges, k*bin_width
    std::vector<double> probabilities;   // per-bin mass, sums to 1
    int window_side = 0;
};

enum class Connectivity { Face, Full };  // 4/8-neighbor in 2D, 6/26-neighbor in 3D

DescriptorCurve two_point_probability(const Image2D& g, int max_lag);
DescriptorCurve two_point_probability(const Volume3D& g, int max_lag);

DescriptorCurve linear_path(const Image2D& g, int max_lag);
DescriptorCurve linear_path(const Volume3D& g, int max_lag);

DescriptorCurve two_point_cluster(const Image2D& g, int max_lag,
                                  Connectivity conn = Connectivity::Face);
DescriptorCurve two_point_cluster(const Volume3D& g, int max_lag,
                                  Connectivity conn = Connectivity::Face);

// Smallest r whose following `window` lags of the mean S2 curve all lie
// within eps_rel*(phi - phi^2) of phi^2.  Falls back to the last lag with
// converged = false when the curve never settles.
CorrelationLength autocorrelation_distance(const DescriptorCurve& s2, PhaseFraction phi,
                                           double eps_rel = 0.05, int window = 3);

PorosityHistogram local_porosity_distribution(const Volume3D& v, int window_side = 20,
                                              double bin_width = 0.02);

// "r,x,y[,z],mean" with 9 significant digits, one row per lag.
std::string to_csv(const DescriptorCurve& c);

}  // namespace porerec
