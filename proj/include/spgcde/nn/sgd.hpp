#pragma once
// SGD with momentum and decoupled-from-nothing L2 (decay folds into the
// gradient before the momentum update, matching the common convention).

#include <cmath>
#include <vector>

#include "spgcde/nn/module.hpp"

namespace spgcde::nn {

inline double poly_lr(double base, int64_t step, int64_t total_steps, double power = 0.9) {
    if (total_steps <= 0) return base;
    double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
    if (frac < 0.0) frac = 0.0;
    return base * std::pow(frac, power);
}

template <typename T>
struct SgdOptimizer {
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<Tensor<T>> velocity;

    SgdOptimizer() = default;
    SgdOptimizer(double mu, double wd) : momentum(mu), weight_decay(wd) {}

    void step(Registry<T>& reg, double lr) {
        if (velocity.size() != reg.params.size()) {
            velocity.clear();
            velocity.reserve(reg.params.size());
            for (const auto& p : reg.params) velocity.push_back(Tensor<T>::zeros(p.value->shape()));
        }
        for (size_t i = 0; i < reg.params.size(); ++i) {
            auto& p = reg.params[i];
            if (p.grad->empty()) continue;
            Tensor<T>& v = velocity[i];
            T* theta = p.value->data();
            const T* g = p.grad->data();
            T* vel = v.data();
            const T mu = static_cast<T>(momentum);
            const T wd = static_cast<T>(weight_decay);
            const T eta = static_cast<T>(lr);
            const int64_t n = p.value->numel();
            for (int64_t k = 0; k < n; ++k) {
                const T eff = g[k] + wd * theta[k];
                vel[k] = mu * vel[k] + eff;
                theta[k] -= eta * vel[k];
            }
        }
    }
};

}  // namespace spgcde::nn
