#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "kicl/backbone/embedder.hpp"
#include "kicl/kernels/kernels.hpp"

// Per-dataset choice of the kernel scale by k-fold cross-validation on the
// training split.
namespace kicl {

struct CalibrationGrid {
    KernelKind kind = KernelKind::gaussian;
    std::vector<double> candidates;

    void validate() const;
};

// gaussian {0.01 .. 1.5}, dot {1/sqrt(2^j), j = 2..9}, knn {1 .. 8192}.
CalibrationGrid default_grid(KernelKind kind);

struct CandidateScore {
    double scale = 0.0;
    double mean_accuracy = 0.0;
    bool skipped = false;  // knn with k above the smallest fold context
    std::vector<double> fold_accuracy;
};

struct CalibrationResult {
    KernelSpec chosen;
    std::vector<CandidateScore> candidates;  // grid order
    std::size_t folds = 0;
    std::uint64_t seed = 0;

    // Columns: candidate,mean_cv_accuracy,skipped
    void write_csv(const std::filesystem::path& path) const;
};

// Disjoint cover of [0, labels.size()). Stratified when every class has at
// least `folds` members, otherwise a plain shuffled round-robin.
std::vector<std::vector<std::size_t>> make_folds(const std::vector<int>& labels, std::size_t folds,
                                                 std::uint64_t seed);

// Called once per fold with the context and held-out row indices.
using FoldObserver = std::function<void(std::size_t fold, const std::vector<std::size_t>& context,
                                        const std::vector<std::size_t>& held_out)>;

struct CalibrationOptions {
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    std::size_t classes = 2;
    FoldObserver observer;
};

// Mean accuracies closer than this are treated as tied.
inline constexpr double kCalibrationTieTolerance = 1e-12;

// Re-embeds every fold with only that fold's training part as context.
// Highest mean accuracy wins; ties go to the sparser scale (larger gamma,
// smaller k), then to the earlier grid entry.
CalibrationResult calibrate(const Embedder& embedder, const Tensor& features, const std::vector<int>& labels,
                            const CalibrationGrid& grid, const CalibrationOptions& options);

// Fraction of argmax predictions equal to the truth.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

}  // namespace kicl
