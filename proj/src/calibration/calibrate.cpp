#include "kicl/calibration/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "kicl/common/parallel.hpp"
#include "kicl/error.hpp"
#include "kicl/priorgen/dataset.hpp"

namespace kicl {

void CalibrationGrid::validate() const {
    KICL_REQUIRE(!candidates.empty(), "calibration grid for " + to_string(kind) + " is empty");
    for (double c : candidates) {
        if (kind == KernelKind::knn)
            KICL_REQUIRE(c >= 1.0 && c == std::floor(c), "knn grid entries must be positive integers");
        else
            KICL_REQUIRE(std::isfinite(c) && c > 0.0, "soft-kernel grid entries must be positive");
    }
}

CalibrationGrid default_grid(KernelKind kind) {
    switch (kind) {
        case KernelKind::gaussian: return {kind, {0.01, 0.05, 0.1, 0.3, 0.5, 0.8, 1.0, 1.5}};
        case KernelKind::dot: {
            CalibrationGrid g{kind, {}};
            for (int j = 2; j <= 9; ++j) g.candidates.push_back(1.0 / std::sqrt(std::ldexp(1.0, j)));
            return g;
        }
        case KernelKind::knn: return {kind, {1, 4, 5, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192}};
    }
    throw ContractViolation("unknown kernel kind");
}

void CalibrationResult::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.precision(17);
    out << "candidate,mean_cv_accuracy,skipped\n";
    for (const auto& c : candidates)
        out << c.scale << ',' << (c.skipped ? std::string() : std::to_string(c.mean_accuracy)) << ','
            << (c.skipped ? 1 : 0) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<std::vector<std::size_t>> make_folds(const std::vector<int>& labels, std::size_t folds,
                                                 std::uint64_t seed) {
    const std::size_t n = labels.size();
    KICL_REQUIRE(folds >= 2, "cross-validation needs at least 2 folds");
    KICL_REQUIRE(n >= folds, "cannot split " + std::to_string(n) + " rows into " + std::to_string(folds) + " folds");
    std::mt19937_64 rng(seed);
    const std::size_t classes = class_count(labels);
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < n; ++i) {
        KICL_REQUIRE(labels[i] >= 0, "labels must be nonnegative");
        members[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    const bool stratified = std::all_of(members.begin(), members.end(),
                                        [&](const auto& m) { return m.empty() || m.size() >= folds; });
    std::vector<std::size_t> sequence;
    if (stratified) {
        for (auto& m : members) {
            std::shuffle(m.begin(), m.end(), rng);
            sequence.insert(sequence.end(), m.begin(), m.end());
        }
    } else {
        sequence.resize(n);
        std::iota(sequence.begin(), sequence.end(), std::size_t{0});
        std::shuffle(sequence.begin(), sequence.end(), rng);
    }
    std::vector<std::vector<std::size_t>> out(folds);
    for (std::size_t r = 0; r < n; ++r) out[r % folds].push_back(sequence[r]);
    for (auto& f : out) std::sort(f.begin(), f.end());
    return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    KICL_REQUIRE(predicted.size() == truth.size(), "prediction and truth lengths differ");
    KICL_REQUIRE(!truth.empty(), "accuracy of an empty prediction set");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

namespace {

Tensor take_rows(const Tensor& x, const std::vector<std::size_t>& idx) {
    const std::size_t d = x.cols();
    Tensor out({idx.size(), d});
    for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(x.ptr() + idx[r] * d, d, out.ptr() + r * d);
    return out;
}

// True if candidate a should replace the current best b at equal accuracy.
bool sparser(KernelKind kind, double a, double b) { return kind == KernelKind::knn ? a < b : a > b; }

}  // namespace

CalibrationResult calibrate(const Embedder& embedder, const Tensor& x, const std::vector<int>& y,
                            const CalibrationGrid& grid, const CalibrationOptions& opt) {
    grid.validate();
    KICL_REQUIRE(x.rank() == 2 && x.rows() == y.size(), "features and labels disagree in length");
    const auto folds = make_folds(y, opt.folds, opt.seed);
    const std::size_t n = y.size();

    std::size_t min_context = n;
    for (const auto& f : folds) min_context = std::min(min_context, n - f.size());

    CalibrationResult result;
    result.folds = opt.folds;
    result.seed = opt.seed;
    for (double c : grid.candidates) {
        CandidateScore s;
        s.scale = c;
        s.skipped = grid.kind == KernelKind::knn && static_cast<std::size_t>(c) > min_context;
        result.candidates.push_back(std::move(s));
    }
    const bool any = std::any_of(result.candidates.begin(), result.candidates.end(),
                                 [](const CandidateScore& s) { return !s.skipped; });
    if (!any) {
        std::string list;
        for (double c : grid.candidates) list += (list.empty() ? "" : ",") + std::to_string(static_cast<long long>(c));
        throw ContractViolation("every " + to_string(grid.kind) + " grid candidate {" + list +
                                "} exceeds the fold context size " + std::to_string(min_context) + " (n=" +
                                std::to_string(n) + ")");
    }

    // fold_acc[f][c]
    std::vector<std::vector<double>> fold_acc(folds.size(), std::vector<double>(grid.candidates.size(), 0.0));
    std::vector<std::vector<std::size_t>> contexts(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<bool> held(n, false);
        for (auto i : folds[f]) held[i] = true;
        for (std::size_t i = 0; i < n; ++i)
            if (!held[i]) contexts[f].push_back(i);
        if (opt.observer) opt.observer(f, contexts[f], folds[f]);
    }
    parallel_for(folds.size(), [&](std::size_t f) {
        const auto& ctx = contexts[f];
        std::vector<int> y_ctx, y_out;
        for (auto i : ctx) y_ctx.push_back(y[i]);
        for (auto i : folds[f]) y_out.push_back(y[i]);
        const auto space = embedder.embed(take_rows(x, ctx), y_ctx, take_rows(x, folds[f]));
        for (std::size_t c = 0; c < grid.candidates.size(); ++c) {
            if (result.candidates[c].skipped) continue;
            const KernelSpec spec{grid.kind, grid.candidates[c]};
            const auto pred = predict(kernel_weights(spec, space.queries, space.keys), y_ctx, opt.classes);
            fold_acc[f][c] = accuracy(pred.predicted, y_out);
        }
    });

    std::size_t best = grid.candidates.size();
    for (std::size_t c = 0; c < grid.candidates.size(); ++c) {
        auto& s = result.candidates[c];
        if (s.skipped) continue;
        double total = 0.0;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            s.fold_accuracy.push_back(fold_acc[f][c]);
            total += fold_acc[f][c];
        }
        s.mean_accuracy = total / static_cast<double>(folds.size());
        if (best == grid.candidates.size()) {
            best = c;
            continue;
        }
        const auto& b = result.candidates[best];
        // Means that agree up to summation order count as ties.
        const bool tie = std::abs(s.mean_accuracy - b.mean_accuracy) <= kCalibrationTieTolerance;
        if ((!tie && s.mean_accuracy > b.mean_accuracy) || (tie && sparser(grid.kind, s.scale, b.scale)))
            best = c;
    }
    result.chosen = KernelSpec{grid.kind, grid.candidates[best]};
    return result;
}

}  // namespace kicl
