#include "kicl/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kicl/error.hpp"
#include "gemm.hpp"

namespace kicl {

std::size_t product(const std::vector<std::size_t>& dims) {
    std::size_t p = 1;
    for (auto d : dims) p *= d;
    return p;
}

std::string shape_string(const std::vector<std::size_t>& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : dims_(std::move(dims)), data_(product(dims_), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
    KICL_REQUIRE(product(dims_) == data_.size(),
                 "tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                     shape_string(dims_));
}

Tensor Tensor::scalar(double v) { return Tensor({}, std::vector<double>{v}); }

Tensor Tensor::vector(std::vector<double> v) {
    const auto n = v.size();
    return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        KICL_REQUIRE(row.size() == c, "ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

double Tensor::item() const {
    KICL_REQUIRE(numel() == 1, "item() on tensor of shape " + shape_string(dims_));
    return data_[0];
}

Tensor Tensor::reshaped(std::vector<std::size_t> dims) const {
    KICL_REQUIRE(product(dims) == numel(),
                 "cannot reshape " + shape_string(dims_) + " to " + shape_string(dims));
    return Tensor(std::move(dims), data_);
}

Tensor Tensor::rows_slice(std::size_t begin, std::size_t end) const {
    KICL_REQUIRE(begin <= end && end <= rows(), "row slice out of range");
    auto dims = dims_;
    dims[0] = end - begin;
    const auto c = cols();
    return Tensor(std::move(dims), std::vector<double>(data_.begin() + begin * c, data_.begin() + end * c));
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    KICL_REQUIRE(!parts.empty(), "concat_rows of nothing");
    const auto c = parts.front().cols();
    std::size_t r = 0;
    for (const auto& p : parts) {
        KICL_REQUIRE(p.rank() == 2 && p.cols() == c, "concat_rows width mismatch");
        r += p.rows();
    }
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
    return Tensor({r, c}, std::move(data));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    KICL_REQUIRE(a.same_shape(b), "max_abs_diff shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor softmax_stable(const Tensor& logits, std::size_t axis) {
    const auto& dims = logits.dims();
    KICL_REQUIRE(axis < std::max<std::size_t>(dims.size(), 1), "softmax axis out of range");
    KICL_REQUIRE(logits.all_finite(), "softmax of non-finite logits");
    const std::size_t len = dims.empty() ? 1 : dims[axis];
    KICL_REQUIRE(len > 0, "softmax over empty axis");
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < dims.size(); ++i) inner *= dims[i];
    const std::size_t outer = logits.numel() / (len * inner);

    Tensor out(dims);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double mx = logits[base];
            for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, logits[base + k * inner]);
            double s = 0.0;
            for (std::size_t k = 0; k < len; ++k) {
                const double e = std::exp(logits[base + k * inner] - mx);
                out[base + k * inner] = e;
                s += e;
            }
            for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= s;
        }
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    KICL_REQUIRE(a.rank() == 2 && b.rank() == 2, "matmul expects rank-2 tensors");
    KICL_REQUIRE(a.cols() == b.rows(), "matmul inner dims disagree: " + shape_string(a.dims()) +
                                           " x " + shape_string(b.dims()));
    Tensor c({a.rows(), b.cols()});
    detail::gemm_nn(a.ptr(), b.ptr(), c.ptr(), a.rows(), a.cols(), b.cols(), false);
    return c;
}

}  // namespace kicl
