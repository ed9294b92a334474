#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kicl/numerics/tensor.hpp"

namespace kicl {

// A classification task already split into context (train) and queries (test).
struct Dataset {
    Tensor features_train;  // [n x d]
    std::vector<int> labels_train;
    Tensor features_test;  // [m x d]
    std::vector<int> labels_test;
    std::string source;  // where it came from, e.g. "prior:7:3" or a file path

    std::size_t n() const { return labels_train.size(); }
    std::size_t m() const { return labels_test.size(); }
    std::size_t d() const { return features_train.cols(); }

    // Throws ContractViolation if shapes, finiteness or labels are off.
    // For binary tasks both classes must appear in the training split.
    void validate(std::size_t classes) const;
};

// Number of distinct classes implied by the labels (max + 1).
std::size_t class_count(const std::vector<int>& labels);

struct SplitIndices {
    std::vector<std::size_t> train;  // ascending
    std::vector<std::size_t> test;   // ascending
};

// Stratified split with round(fraction * N) training rows overall, shared out
// over classes by largest remainder. Deterministic per seed.
SplitIndices stratified_split(const std::vector<int>& labels, double fraction, std::uint64_t seed);

// Build a Dataset from row-major features and labels using the given split.
Dataset make_split_dataset(const Tensor& features, const std::vector<int>& labels, const SplitIndices& split,
                           std::string source);

}  // namespace kicl
