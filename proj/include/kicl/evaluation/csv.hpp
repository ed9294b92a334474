#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kicl/numerics/tensor.hpp"
#include "kicl/priorgen/dataset.hpp"

namespace kicl {

// An unsplit labelled table. If the file carried a "split" column its
// assignment is kept in `split` (0 = train, 1 = test); otherwise it is empty.
struct LabeledTable {
    std::vector<std::string> feature_names;
    Tensor features;  // [rows x features]
    std::vector<int> labels;
    std::vector<int> split;
    std::string source;
};

// Comma-separated, header row, one label column. Features must parse as
// finite decimals and labels as nonnegative integers. Malformed cells raise
// IoError naming the file line and column; single-class tables raise
// ContractViolation.
LabeledTable load_csv(const std::filesystem::path& path, const std::string& label_column = "label");

inline constexpr double kDefaultTrainFraction = 0.76;

// Uses the table's split column when present, otherwise a deterministic
// stratified split at `fraction`.
Dataset split(const LabeledTable& table, double fraction = kDefaultTrainFraction, std::uint64_t seed = 0);

// Writes features, label and a split column (train rows first). Values are
// printed with enough digits to load back identically.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds,
                       const std::vector<std::string>& feature_names = {});

// Default feature names x0, x1, ...
std::vector<std::string> default_feature_names(std::size_t d);

}  // namespace kicl
