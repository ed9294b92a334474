#pragma once

#include <functional>

#include "kicl/numerics/tensor.hpp"

namespace kicl {

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps), one
// coordinate at a time. Throws ContractViolation naming the coordinate if f
// is not finite at a perturbed point.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double eps = 1e-5);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-8);

}  // namespace kicl
