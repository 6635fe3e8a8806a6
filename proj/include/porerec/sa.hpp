#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "porerec/descriptors.hpp"
#include "porerec/volume.hpp"

// Classical descriptor-matching annealer: start from a random grid at the
// reference porosity, propose pore/solid swaps, accept by the Metropolis
// rule, cool geometrically.  Serves as the comparison baseline and as an
// independent check that descriptor matching drives structure.

namespace porerec {

struct EnergyTargets {
    std::vector<double> s2;  // reference mean S2 over lags 0..max_lag
    std::vector<double> l;   // reference mean L over the same lags
    double w_s2 = 1.0;
    double w_l = 1.0;
    int max_lag = 16;
};

EnergyTargets make_targets(const Image2D& ref, double w_s2, double w_l, int max_lag);

// E = sum over axes and lags of w * (D_grid_axis(r) - D_ref_mean(r))^2, for
// the descriptors with positive weight.
double anneal_energy(const Image2D& g, const EnergyTargets& t);
double anneal_energy(const Volume3D& g, const EnergyTargets& t);

struct AnnealConfig {
    std::vector<int> dims{128, 128};  // {H, W} or {L, H, W}
    double weight_s2 = 1.0;
    double weight_l = 1.0;
    int max_lag = 16;
    std::optional<double> t0;      // explicit start temperature
    double t0_factor = 1e-3;       // else T0 = initial energy * this
    double cooling = 0.95;         // T *= cooling per block
    std::int64_t swaps_per_temp = 0;  // 0 = 10 * voxel count
    std::int64_t max_swaps = 200000;
    double energy_stop = 0.0;
    std::uint64_t seed = 0;
    // When set, the full energy is also recomputed from the grid after every
    // move (AnnealResult::audit_energies); the incrementally tracked value
    // must match it exactly.
    bool audit = false;
};

struct TraceRow {
    std::int64_t swap_index;
    double temperature;
    double energy;  // chain energy after the decision
    bool accepted;
};

struct AnnealResult {
    bool is_3d = false;
    Image2D image;    // best-seen state when 2D
    Volume3D volume;  // best-seen state when 3D
    std::vector<TraceRow> trace;
    std::vector<double> audit_energies;  // filled when AnnealConfig::audit
    double initial_energy = 0;
    double final_energy = 0;  // chain energy when the loop stopped
    double best_energy = 0;   // energy of the returned state
};

AnnealResult anneal(const Image2D& ref, const AnnealConfig& cfg);

// "swap_index,temperature,energy,accepted" rows.
std::string trace_csv(const std::vector<TraceRow>& trace);

}  // namespace porerec
