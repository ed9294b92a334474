#include "kicl/evaluation/overhead.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include "kicl/backbone/backbone.hpp"
#include "kicl/backbone/flops.hpp"
#include "kicl/error.hpp"

namespace kicl {

std::uint64_t estimated_tape_bytes(const Hyperparameters& hp, std::uint64_t n, std::uint64_t m, std::uint64_t d,
                                   EmbeddingMode mode) {
    const std::uint64_t w = hp.width, f = hp.ffn_width(), heads = hp.heads, total = n + m;
    // Values kept per block: norms, q/k/v, attention out, residuals, FFN.
    auto block = [&](std::uint64_t rows, std::uint64_t kv_rows, std::uint64_t probs) {
        return rows * (8 * w + 3 * f) + kv_rows * 4 * w + probs * heads;
    };
    std::uint64_t doubles = 0;
    const std::uint64_t tok = d * total, ind = d * hp.inducing;
    doubles += 3 * tok * w;
    doubles += hp.col_layers * (block(ind, d * n, ind * n) + block(tok, ind, tok * hp.inducing) + tok * w);
    const std::uint64_t row_tok = total * (d + 1);
    doubles += row_tok * w * 3 + hp.row_layers * block(row_tok, row_tok, total * (d + 1) * (d + 1));
    const std::uint64_t r = mode == EmbeddingMode::symmetric ? 2 * n + m : n + m;
    doubles += r * w * 3 + hp.icl_layers * block(r, n, r * n);
    return 8 * doubles;
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

double time_embedding(const ModelParameters& params, const Tensor& x_train, const std::vector<int>& y,
                      const Tensor& x_test, EmbeddingMode mode, std::size_t reps) {
    std::vector<double> t;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto start = std::chrono::steady_clock::now();
        const auto b = embed(params, x_train, y, x_test, mode);
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        (void)b;
    }
    return median(t);
}

}  // namespace

std::vector<OverheadRow> overhead_benchmark(const ModelParameters& params, const OverheadConfig& cfg) {
    KICL_REQUIRE(!cfg.sizes.empty() && !cfg.features.empty(), "overhead benchmark needs sizes and feature counts");
    KICL_REQUIRE(std::is_sorted(cfg.sizes.begin(), cfg.sizes.end()), "overhead sizes must be ascending");
    KICL_REQUIRE(cfg.m >= 1 && cfg.repetitions >= 1, "overhead benchmark needs m >= 1 and repetitions >= 1");
    const auto& hp = params.hyper();
    // Asymmetric costs are measured with the shared projection so that both
    // modes run the same network; only the in-context stage differs.
    std::vector<OverheadRow> rows;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto d : cfg.features) {
        for (auto n : cfg.sizes) {
            OverheadRow row;
            row.n = n;
            row.d = d;
            row.flops_symmetric = embedding_flops(hp, n, cfg.m, d, EmbeddingMode::symmetric).total();
            row.flops_asymmetric = embedding_flops(hp, n, cfg.m, d, EmbeddingMode::asymmetric).total();
            row.flop_ratio = static_cast<double>(row.flops_symmetric) / static_cast<double>(row.flops_asymmetric);
            row.time_ratio = std::nan("");
            if (cfg.measure_time) {
                if (estimated_tape_bytes(hp, n, cfg.m, d, EmbeddingMode::symmetric) > cfg.memory_budget_bytes) {
                    row.skipped = true;
                } else {
                    Tensor x_train({n, d}), x_test({cfg.m, d});
                    for (auto& v : x_train.data()) v = normal(rng);
                    for (auto& v : x_test.data()) v = normal(rng);
                    std::vector<int> y(n);
                    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % hp.classes);
                    const double ts = time_embedding(params, x_train, y, x_test, EmbeddingMode::symmetric, cfg.repetitions);
                    const double ta = time_embedding(params, x_train, y, x_test, EmbeddingMode::asymmetric, cfg.repetitions);
                    row.time_ratio = ta > 0.0 ? ts / ta : std::nan("");
                }
            }
            rows.push_back(row);
        }
    }
    return rows;
}

void write_overhead_csv(const std::filesystem::path& path, const std::vector<OverheadRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.precision(17);
    out << "n,d,flop_ratio,time_ratio,skipped\n";
    for (const auto& r : rows) {
        out << r.n << ',' << r.d << ',' << r.flop_ratio << ',';
        if (!std::isnan(r.time_ratio)) out << r.time_ratio;
        out << ',' << (r.skipped ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace kicl
