#include "kicl/numerics/adam.hpp"

#include <cmath>

#include "kicl/error.hpp"

namespace kicl {

AdamState::AdamState(std::span<const Tensor> params, AdamOptions options) : options_(options) {
    KICL_REQUIRE(options.learning_rate > 0.0, "Adam learning rate must be positive");
    KICL_REQUIRE(options.beta1 >= 0.0 && options.beta1 < 1.0 && options.beta2 >= 0.0 && options.beta2 < 1.0,
                 "Adam betas must lie in [0, 1)");
    KICL_REQUIRE(options.epsilon > 0.0, "Adam epsilon must be positive");
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.emplace_back(p.dims());
        v_.emplace_back(p.dims());
    }
}

void AdamState::step(std::span<Tensor> params, std::span<const Tensor> grads) {
    KICL_REQUIRE(params.size() == m_.size() && grads.size() == m_.size(),
                 "Adam step: parameter count does not match optimizer state");
    for (std::size_t i = 0; i < params.size(); ++i) {
        KICL_REQUIRE(params[i].same_shape(m_[i]) && grads[i].same_shape(m_[i]),
                     "Adam step: shape mismatch for parameter " + std::to_string(i));
    }
    ++step_;
    const auto& o = options_;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        const auto& g = grads[i];
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < p.numel(); ++j) {
            m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
            v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
        }
    }
}

}  // namespace kicl
