#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "kicl/backbone/params.hpp"

// Cost of symmetric embedding relative to asymmetric embedding.
namespace kicl {

struct OverheadConfig {
    std::vector<std::size_t> sizes{1000, 2000, 5000, 10000, 20000, 50000, 100000, 200000};
    std::vector<std::size_t> features{1, 5, 20, 100};
    std::size_t m = 50;
    std::size_t repetitions = 3;
    // Timed runs whose estimated tape footprint exceeds this are skipped.
    std::uint64_t memory_budget_bytes = std::uint64_t{1} << 30;
    bool measure_time = true;
    std::uint64_t seed = 0;
};

struct OverheadRow {
    std::size_t n = 0, d = 0;
    std::uint64_t flops_symmetric = 0, flops_asymmetric = 0;
    double flop_ratio = 0.0;
    double time_ratio = 0.0;  // NaN when not timed
    bool skipped = false;     // timing skipped by the memory budget
};

// Rough peak bytes held by an inference tape for one embedding pass.
std::uint64_t estimated_tape_bytes(const Hyperparameters& hp, std::uint64_t n, std::uint64_t m, std::uint64_t d,
                                   EmbeddingMode mode);

// FLOP ratios come from the analytic counter; wall-time ratios are medians of
// `repetitions` runs on a synthetic Gaussian dataset.
std::vector<OverheadRow> overhead_benchmark(const ModelParameters& params, const OverheadConfig& config);

// Columns: n,d,flop_ratio,time_ratio,skipped
void write_overhead_csv(const std::filesystem::path& path, const std::vector<OverheadRow>& rows);

}  // namespace kicl
