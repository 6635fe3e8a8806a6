#pragma once

#include <cstdint>
#include <span>
#include <vector>

// Standard Adam over a list of parameter arrays.  Defaults follow the
// training setup this artifact reproduces: lr 0.1, beta1 0.1, beta2 0.999,
// eps 1e-8.

namespace porerec {

struct AdamConfig {
    double lr = 0.1;
    double beta1 = 0.1;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamConfig default_hyperparams();

struct AdamState {
    AdamConfig cfg;
    std::int64_t step = 0;                  // completed updates
    std::vector<std::vector<double>> m, v;  // first/second moment per array

    static AdamState make(const std::vector<std::span<double>>& params, AdamConfig cfg = {});
};

// One update: t += 1; m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g^2;
// theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads);

}  // namespace porerec
