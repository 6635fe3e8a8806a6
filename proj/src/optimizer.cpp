#include "porerec/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace porerec {

AdamConfig default_hyperparams() { return {}; }

AdamState AdamState::make(const std::vector<std::span<double>>& params, AdamConfig cfg) {
    if (!(cfg.lr > 0) || !(cfg.eps > 0) || cfg.beta1 < 0 || cfg.beta1 >= 1 || cfg.beta2 < 0 ||
        cfg.beta2 >= 1)
        throw std::invalid_argument("AdamState: hyperparameters out of range");
    AdamState s;
    s.cfg = cfg;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
        s.m.emplace_back(p.size(), 0.0);
        s.v.emplace_back(p.size(), 0.0);
    }
    return s;
}

void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads) {
    if (params.size() != state.m.size() || grads.size() != state.m.size())
        throw std::invalid_argument("adam_step: array count mismatch with state");

    state.step += 1;
    const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (std::size_t a = 0; a < params.size(); ++a) {
        if (params[a].size() != state.m[a].size() || grads[a].size() != state.m[a].size())
            throw std::invalid_argument("adam_step: array shape mismatch with state");
        double* m = state.m[a].data();
        double* v = state.v[a].data();
        double* th = params[a].data();
        const double* g = grads[a].data();
        for (std::size_t i = 0; i < params[a].size(); ++i) {
            if (!std::isfinite(g[i])) throw std::invalid_argument("adam_step: non-finite gradient");
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            th[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
        }
    }
}

}  // namespace porerec
