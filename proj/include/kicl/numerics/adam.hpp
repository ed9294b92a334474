#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kicl/numerics/tensor.hpp"

namespace kicl {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Moment accumulators for a fixed, ordered list of parameter tensors.
class AdamState {
public:
    AdamState() = default;
    AdamState(std::span<const Tensor> params, AdamOptions options);

    // Bias-corrected Adam update in place. params and grads must line up with
    // the tensors the state was created for.
    void step(std::span<Tensor> params, std::span<const Tensor> grads);

    std::uint64_t steps() const { return step_; }
    const AdamOptions& options() const { return options_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

private:
    AdamOptions options_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::uint64_t step_ = 0;
};

}  // namespace kicl
