#pragma once

#include <filesystem>
#include <vector>

#include "kicl/backbone/embedder.hpp"
#include "kicl/kernels/kernels.hpp"
#include "kicl/priorgen/dataset.hpp"

// Accuracy as a function of sparsity: each scale on a ladder is applied to
// the test split and the best scale not exceeding each perplexity target is
// reported.
namespace kicl {

struct SweepMeasurement {
    double scale = 0.0;
    double achieved = 0.0;  // dataset relative perplexity on the test split
    double accuracy = 0.0;
};

struct SweepPoint {
    double target = 0.0;
    bool attained = false;
    double achieved = 0.0;
    double scale = 0.0;
    double accuracy = 0.0;
};

std::vector<SweepMeasurement> measure_ladder(const Embedder& embedder, const Dataset& ds, KernelKind kind,
                                             const std::vector<double>& ladder, std::size_t classes = 2);

// For each target the measurement with the largest achieved perplexity that
// does not exceed it; earlier ladder entries win exact ties.
std::vector<SweepPoint> select_targets(const std::vector<SweepMeasurement>& measured,
                                       const std::vector<double>& targets);

std::vector<SweepPoint> tradeoff_sweep(const Embedder& embedder, const Dataset& ds, KernelKind kind,
                                       const std::vector<double>& ladder, const std::vector<double>& targets,
                                       std::size_t classes = 2);

// Log-spaced soft-kernel ladder from 1e-6 to 1e3 (including a near-zero
// endpoint), or k = 1..n for knn.
std::vector<double> default_ladder(KernelKind kind, std::size_t n);
// 0.001 .. 1 on a log grid, ending at exactly 1.
std::vector<double> default_targets();

// Columns: target,achieved,scale,accuracy (empty cells when unattained)
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points);

}  // namespace kicl
