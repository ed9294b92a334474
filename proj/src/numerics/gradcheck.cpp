#include "kicl/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "kicl/error.hpp"

namespace kicl {

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps) {
    KICL_REQUIRE(eps > 0.0, "finite difference step must be positive");
    Tensor grad(x.dims());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double up = f(probe);
        probe[i] = orig - eps;
        const double down = f(probe);
        probe[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw ContractViolation("finite_difference_grad: non-finite function value at coordinate " +
                                    std::to_string(i));
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

double max_relative_error(const Tensor& a, const Tensor& b, double floor) {
    KICL_REQUIRE(a.same_shape(b), "max_relative_error shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace kicl
