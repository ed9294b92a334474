#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kicl/backbone/embedder.hpp"
#include "kicl/priorgen/dataset.hpp"

namespace kicl {

// For every test point, its k nearest training points are found in the
// method's kernel space; per feature, the mean absolute distance to them in
// standardized input space is averaged over test points.
std::vector<double> feature_compactness(const Embedder& space, const Dataset& ds, std::size_t k);

// Same, from already computed kernel-space coordinates.
std::vector<double> feature_compactness(const KernelSpace& space, const Dataset& ds, std::size_t k);

// Divides by the mean over features, so the result averages to 1.
std::vector<double> normalize_by_mean(const std::vector<double>& raw);

struct CompactnessRow {
    std::string feature;
    double baseline_norm = 0.0;
    double method_norm = 0.0;
    // (baseline - method) / baseline in percent; positive = method tighter.
    double rel_diff_pct = 0.0;
};

std::vector<CompactnessRow> compare_compactness(const std::vector<double>& baseline_raw,
                                                const std::vector<double>& method_raw,
                                                const std::vector<std::string>& feature_names);

// Columns: feature,baseline_norm,method_norm,rel_diff_pct
void write_compactness_csv(const std::filesystem::path& path, const std::vector<CompactnessRow>& rows);

}  // namespace kicl
