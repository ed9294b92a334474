#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kicl/numerics/tape.hpp"
#include "kicl/numerics/tensor.hpp"

// The prediction head: kernel weights between projected queries and keys,
// Nadaraya-Watson class probabilities, and perplexity of the weight rows.
namespace kicl {

enum class KernelKind { dot, gaussian, knn };

std::string to_string(KernelKind kind);
KernelKind parse_kernel_kind(const std::string& s);

// Scale is gamma for the soft kernels and the neighbour count for knn.
struct KernelSpec {
    KernelKind kind = KernelKind::gaussian;
    double scale = 1.0;

    static KernelSpec dot(double gamma) { return {KernelKind::dot, gamma}; }
    static KernelSpec gaussian(double gamma) { return {KernelKind::gaussian, gamma}; }
    static KernelSpec knn(std::size_t k) { return {KernelKind::knn, static_cast<double>(k)}; }

    // Uncalibrated defaults: 1/sqrt(dk), 1/(2 sqrt(dk)), k = 5.
    static KernelSpec default_for(KernelKind kind, std::size_t key_dim);

    std::size_t neighbors() const;
    bool is_soft() const { return kind != KernelKind::knn; }
    // Throws ContractViolation unless the scale is valid for `context` training rows.
    void validate(std::size_t context) const;
    std::string describe() const;
};

// Row j holds the normalized weights of test point j over the training set.
struct WeightMatrix {
    Tensor weights;  // [m x n]

    std::size_t queries() const { return weights.rows(); }
    std::size_t context() const { return weights.cols(); }
    std::span<const double> row(std::size_t j) const { return weights.row(j); }
};

// softmax_i(gamma * q_j . k_i)
WeightMatrix kernel_dot(const Tensor& queries, const Tensor& keys, double gamma);
// softmax_i(-gamma * ||q_j - k_i||^2)
WeightMatrix kernel_gaussian(const Tensor& queries, const Tensor& keys, double gamma);
// 1/k on the k nearest keys; distance ties at the threshold go to the lower index.
WeightMatrix kernel_knn(const Tensor& queries, const Tensor& keys, std::size_t k);
WeightMatrix kernel_weights(const KernelSpec& spec, const Tensor& queries, const Tensor& keys);

// Indices of the k nearest keys to one query, ordered by (distance, index).
std::vector<std::size_t> nearest_keys(std::span<const double> query, const Tensor& keys, std::size_t k);

struct ClassProbabilities {
    Tensor probs;                // [m x classes]
    std::vector<int> predicted;  // argmax, ties to the lowest class
};

ClassProbabilities predict(const WeightMatrix& weights, std::span<const int> labels, std::size_t classes);

// exp(-sum w log w) with 0 log 0 = 0, clamped to [1, len(w)].
double perplexity(std::span<const double> w);

struct RelativePerplexity {
    std::vector<double> per_point;  // PPL / n
    double dataset = 1.0;           // geometric mean over test points
};

RelativePerplexity relative_perplexity(const WeightMatrix& weights);

struct PredictionReport {
    Tensor probs;
    std::vector<int> predicted;
    WeightMatrix weights;
    std::vector<double> perplexity;
    RelativePerplexity relative;
};

PredictionReport make_report(WeightMatrix weights, std::span<const int> labels, std::size_t classes);

// Explanation exports. top == 0 writes every training sample per test point.
// Columns: test_index,train_index,weight,rank (rank 1 = largest weight).
void write_weights_csv(const std::filesystem::path& path, const WeightMatrix& weights, std::size_t top = 0);
// Columns: test_index,perplexity,relative_perplexity,predicted
void write_perplexity_csv(const std::filesystem::path& path, const PredictionReport& report);

// Taped counterparts used during training (soft kernels only).
namespace ops {
Var kernel_weights(const KernelSpec& spec, Var queries, Var keys);
// probs[j][c] = sum_i w[j][i] * [labels[i] == c]
Var class_probabilities(Var weights, std::span<const int> labels, std::size_t classes);
// Mean negative log-probability of the true class, probabilities clamped to
// [1e-7, 1 - 1e-7].
Var cross_entropy(Var probs, std::span<const int> targets);
}  // namespace ops

}  // namespace kicl
