#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace kicl {

// Dense row-major array of doubles. A rank-2 tensor is the common case; higher
// ranks are views of the same buffer with more dims (rows() is always dims[0]).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
    Tensor(std::vector<std::size_t> dims, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> v);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor identity(std::size_t n);

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t rank() const { return dims_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t rows() const { return dims_.empty() ? 1 : dims_[0]; }
    std::size_t cols() const {
        std::size_t c = 1;
        for (std::size_t i = 1; i < dims_.size(); ++i) c *= dims_[i];
        return c;
    }
    bool empty() const { return data_.empty(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    double* ptr() { return data_.data(); }
    const double* ptr() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    double item() const;
    Tensor reshaped(std::vector<std::size_t> dims) const;
    Tensor rows_slice(std::size_t begin, std::size_t end) const;
    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

    bool operator==(const Tensor& other) const = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& dims);
std::size_t product(const std::vector<std::size_t>& dims);

// Stacks equal-width rank-2 tensors along the row axis.
Tensor concat_rows(std::span<const Tensor> parts);

// Max absolute difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

// Numerically stable softmax along one axis of any-rank tensor.
Tensor softmax_stable(const Tensor& logits, std::size_t axis);

// Plain matrix product without taping.
Tensor matmul(const Tensor& a, const Tensor& b);

}  // namespace kicl
