#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kicl/backbone/embedder.hpp"
#include "kicl/calibration/calibrate.hpp"
#include "kicl/kernels/kernels.hpp"
#include "kicl/priorgen/dataset.hpp"

namespace kicl {

// A kernel head on top of an embedding. The scale is either fixed, the
// kernel default, or calibrated by cross-validation on the training split.
struct MethodSpec {
    std::string name;
    const Embedder* embedder = nullptr;
    KernelKind kernel = KernelKind::gaussian;
    std::optional<double> scale;  // unset: default for the key dimension
    bool calibrate = false;
    std::optional<CalibrationGrid> grid;  // unset: default_grid(kernel)
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    std::size_t classes = 2;
};

struct MethodResult {
    std::string method;
    std::string dataset;
    double accuracy = 0.0;
    double rel_perplexity = 1.0;
    double seconds = 0.0;
    KernelSpec kernel;
};

struct Prediction {
    PredictionReport report;
    KernelSpec kernel;
};

// Embed, pick the scale, and produce the full report on the test split.
Prediction predict_dataset(const MethodSpec& method, const Dataset& ds);
// Wall time covers predict_dataset end to end.
MethodResult evaluate(const MethodSpec& method, const Dataset& ds);

// Columns: method,dataset,accuracy,rel_perplexity,seconds
void write_results_csv(const std::filesystem::path& path, const std::vector<MethodResult>& rows);

struct RankSummary {
    std::vector<std::string> methods;  // sorted by name
    std::vector<double> mean_rank;
    std::vector<double> mean_accuracy;
};

// Per dataset, rank methods by accuracy (1 = best, average ranks on ties) and
// average over datasets. Every (method, dataset) pair must be present once.
RankSummary mean_rank(const std::vector<MethodResult>& rows);

}  // namespace kicl
