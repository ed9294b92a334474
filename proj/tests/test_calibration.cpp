#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>

#include "kicl/calibration/calibrate.hpp"
#include "kicl/error.hpp"
#include "kicl/priorgen/prior.hpp"

using namespace kicl;

namespace {

struct Pooled {
    Tensor x;
    std::vector<int> y;
};

Pooled toy_train(ToyKind kind, std::uint64_t seed, std::size_t noise = 2) {
    ToyConfig cfg;
    cfg.kind = kind;
    cfg.seed = seed;
    cfg.noise_features = noise;
    auto ds = generate_toy(cfg);
    return {ds.features_train, ds.labels_train};
}

Tensor take_rows(const Tensor& x, const std::vector<std::size_t>& idx) {
    Tensor out({idx.size(), x.cols()});
    for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(x.row(idx[r]).begin(), x.cols(), out.row(r).begin());
    return out;
}

std::vector<int> take(const std::vector<int>& y, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    for (auto i : idx) out.push_back(y[i]);
    return out;
}

// Independent recount of every candidate's mean CV accuracy.
std::vector<double> recount(const Embedder& e, const Pooled& data, const CalibrationGrid& grid, std::size_t folds,
                            std::uint64_t seed) {
    const auto parts = make_folds(data.y, folds, seed);
    std::vector<double> sums(grid.candidates.size(), 0.0);
    for (const auto& held : parts) {
        std::vector<std::size_t> ctx;
        for (std::size_t i = 0; i < data.y.size(); ++i)
            if (!std::binary_search(held.begin(), held.end(), i)) ctx.push_back(i);
        const auto space = e.embed(take_rows(data.x, ctx), take(data.y, ctx), take_rows(data.x, held));
        for (std::size_t c = 0; c < grid.candidates.size(); ++c) {
            if (grid.kind == KernelKind::knn && grid.candidates[c] > static_cast<double>(ctx.size())) continue;
            const auto w = kernel_weights({grid.kind, grid.candidates[c]}, space.queries, space.keys);
            sums[c] += accuracy(predict(w, take(data.y, ctx), 2).predicted, take(data.y, held));
        }
    }
    for (auto& s : sums) s /= static_cast<double>(folds);
    return sums;
}

// Row ids live in an extra first column so the context each call sees can be
// reconstructed; the kernel space ignores that column.
class RecordingEmbedder final : public Embedder {
public:
    KernelSpace embed(const Tensor& train, std::span<const int> y, const Tensor& test) const override {
        std::set<int> ctx;
        for (std::size_t r = 0; r < train.rows(); ++r) ctx.insert(static_cast<int>(train(r, 0)));
        std::vector<int> queries;
        for (std::size_t r = 0; r < test.rows(); ++r) queries.push_back(static_cast<int>(test(r, 0)));
        {
            std::lock_guard lock(mu_);
            calls.push_back({ctx, queries});
        }
        return inner_.embed(drop_first(train), y, drop_first(test));
    }
    std::string name() const override { return "recording"; }

    struct Call {
        std::set<int> context;
        std::vector<int> queries;
    };
    mutable std::vector<Call> calls;

private:
    static Tensor drop_first(const Tensor& x) {
        Tensor out({x.rows(), x.cols() - 1});
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 1; c < x.cols(); ++c) out(r, c - 1) = x(r, c);
        return out;
    }
    InputSpaceEmbedder inner_;
    mutable std::mutex mu_;
};

}  // namespace

TEST(Grids, DefaultGrids) {
    const auto g = default_grid(KernelKind::gaussian);
    EXPECT_EQ(g.candidates, (std::vector<double>{0.01, 0.05, 0.1, 0.3, 0.5, 0.8, 1.0, 1.5}));
    const auto k = default_grid(KernelKind::knn);
    ASSERT_EQ(k.candidates.size(), 13u);
    EXPECT_EQ(k.candidates.front(), 1.0);
    EXPECT_EQ(k.candidates[2], 5.0);
    EXPECT_EQ(k.candidates.back(), 8192.0);
    const auto d = default_grid(KernelKind::dot);
    ASSERT_EQ(d.candidates.size(), 8u);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(d.candidates[j], 1.0 / std::sqrt(std::pow(2.0, j + 2)));
    EXPECT_TRUE(std::is_sorted(d.candidates.rbegin(), d.candidates.rend()));
    EXPECT_EQ(std::adjacent_find(d.candidates.begin(), d.candidates.end()), d.candidates.end());
}

TEST(Grids, InvalidGridsAreRejected) {
    EXPECT_THROW((CalibrationGrid{KernelKind::gaussian, {}}.validate()), ContractViolation);
    EXPECT_THROW((CalibrationGrid{KernelKind::gaussian, {0.0}}.validate()), ContractViolation);
    EXPECT_THROW((CalibrationGrid{KernelKind::knn, {2.5}}.validate()), ContractViolation);
}

TEST(Folds, DisjointCoverAndDeterministic) {
    const auto data = toy_train(ToyKind::moons, 1);
    for (std::size_t k : {2u, 5u, 7u}) {
        const auto f = make_folds(data.y, k, 3);
        ASSERT_EQ(f.size(), k);
        std::vector<int> seen(data.y.size(), 0);
        for (const auto& fold : f) {
            EXPECT_TRUE(std::is_sorted(fold.begin(), fold.end()));
            for (auto i : fold) ++seen[i];
        }
        for (int s : seen) EXPECT_EQ(s, 1);
        EXPECT_EQ(f, make_folds(data.y, k, 3));
    }
    // Stratified: 60 per class over 5 folds gives 12 of each.
    for (const auto& fold : make_folds(data.y, 5, 3)) {
        std::size_t ones = 0;
        for (auto i : fold) ones += data.y[i] == 1;
        EXPECT_EQ(ones, 12u);
        EXPECT_EQ(fold.size(), 24u);
    }
    EXPECT_NE(make_folds(data.y, 5, 3), make_folds(data.y, 5, 4));
}

TEST(Calibrate, SingleCandidateIsChosen) {
    InputSpaceEmbedder input;
    const auto data = toy_train(ToyKind::circles, 2);
    const auto r = calibrate(input, data.x, data.y, {KernelKind::gaussian, {0.37}}, {});
    EXPECT_EQ(r.chosen.scale, 0.37);
    EXPECT_EQ(r.chosen.kind, KernelKind::gaussian);
}

TEST(Calibrate, KnnCandidatesAboveFoldContextAreSkipped) {
    InputSpaceEmbedder input;
    ToyConfig cfg;
    cfg.n_total = 200;
    cfg.train_fraction = 0.5;
    const auto ds = generate_toy(cfg);
    ASSERT_EQ(ds.n(), 100u);
    const auto r = calibrate(input, ds.features_train, ds.labels_train, default_grid(KernelKind::knn), {});
    for (const auto& c : r.candidates) EXPECT_EQ(c.skipped, c.scale >= 128) << c.scale;
    EXPECT_LE(r.chosen.scale, 64.0);
}

TEST(Calibrate, AllSkippedIsAnError) {
    InputSpaceEmbedder input;
    const auto data = toy_train(ToyKind::linear, 3);
    try {
        calibrate(input, data.x, data.y, {KernelKind::knn, {4096, 8192}}, {});
        FAIL() << "expected an error";
    } catch (const ContractViolation& e) {
        EXPECT_NE(std::string(e.what()).find("120"), std::string::npos) << e.what();
    }
}

TEST(Calibrate, PreconditionsOnFolds) {
    InputSpaceEmbedder input;
    const auto data = toy_train(ToyKind::linear, 3);
    CalibrationOptions opt;
    opt.folds = 1;
    EXPECT_THROW(calibrate(input, data.x, data.y, default_grid(KernelKind::gaussian), opt), ContractViolation);
    opt.folds = 121;
    EXPECT_THROW(calibrate(input, data.x, data.y, default_grid(KernelKind::gaussian), opt), ContractViolation);
}

TEST(Calibrate, ChosenScaleMatchesExhaustiveRecount) {
    InputSpaceEmbedder input;
    std::size_t checked = 0;
    for (auto kind : {ToyKind::moons, ToyKind::circles, ToyKind::linear}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const auto data = toy_train(kind, seed, 4);
            for (auto kk : {KernelKind::gaussian, KernelKind::dot, KernelKind::knn}) {
                const auto grid = default_grid(kk);
                CalibrationOptions opt;
                opt.seed = seed;
                const auto r = calibrate(input, data.x, data.y, grid, opt);
                const auto expect = recount(input, data, grid, 5, seed);
                double best = -1;
                for (std::size_t c = 0; c < grid.candidates.size(); ++c) {
                    if (r.candidates[c].skipped) continue;
                    EXPECT_NEAR(r.candidates[c].mean_accuracy, expect[c], 1e-12);
                    best = std::max(best, expect[c]);
                }
                const auto it = std::find(grid.candidates.begin(), grid.candidates.end(), r.chosen.scale);
                ASSERT_NE(it, grid.candidates.end());
                EXPECT_NEAR(expect[static_cast<std::size_t>(it - grid.candidates.begin())], best, 1e-12);
                ++checked;
            }
        }
    }
    EXPECT_EQ(checked, 27u);
}

TEST(Calibrate, TiesPreferTheSparserScale) {
    // Perfectly separated blobs: every reasonable scale scores 100%.
    ToyConfig cfg;
    cfg.kind = ToyKind::linear;
    cfg.noise_features = 0;
    cfg.separation = 40.0;
    const auto ds = generate_toy(cfg);
    InputSpaceEmbedder input;
    EXPECT_EQ(calibrate(input, ds.features_train, ds.labels_train, default_grid(KernelKind::gaussian), {}).chosen.scale, 1.5);
    EXPECT_EQ(calibrate(input, ds.features_train, ds.labels_train, default_grid(KernelKind::knn), {}).chosen.scale, 1.0);
}

TEST(Calibrate, HeldOutPointsNeverSeeThemselvesInContext) {
    const auto data = toy_train(ToyKind::moons, 5);
    Tensor tagged({data.x.rows(), data.x.cols() + 1});
    for (std::size_t r = 0; r < data.x.rows(); ++r) {
        tagged(r, 0) = static_cast<double>(r);
        for (std::size_t c = 0; c < data.x.cols(); ++c) tagged(r, c + 1) = data.x(r, c);
    }
    RecordingEmbedder rec;
    std::vector<std::vector<std::size_t>> observed_held;
    CalibrationOptions opt;
    opt.observer = [&](std::size_t, const std::vector<std::size_t>& ctx, const std::vector<std::size_t>& held) {
        for (auto i : held) EXPECT_FALSE(std::binary_search(ctx.begin(), ctx.end(), i));
        EXPECT_EQ(ctx.size() + held.size(), data.y.size());
        observed_held.push_back(held);
    };
    calibrate(rec, tagged, data.y, default_grid(KernelKind::gaussian), opt);
    ASSERT_EQ(rec.calls.size(), 5u);
    ASSERT_EQ(observed_held.size(), 5u);
    for (const auto& call : rec.calls) {
        EXPECT_EQ(call.context.size() + call.queries.size(), data.y.size());
        for (int q : call.queries) EXPECT_EQ(call.context.count(q), 0u) << "row " << q << " leaked";
    }
}

TEST(Calibrate, CalibratedNeverWorseThanDefaultOnMoons) {
    InputSpaceEmbedder input;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto data = toy_train(ToyKind::moons, seed, 18);
        CalibrationOptions opt;
        opt.seed = seed;
        const auto cal = calibrate(input, data.x, data.y, default_grid(KernelKind::gaussian), opt);
        const double dflt = KernelSpec::default_for(KernelKind::gaussian, data.x.cols()).scale;
        const auto base = calibrate(input, data.x, data.y, {KernelKind::gaussian, {dflt}}, opt);
        double best = 0;
        for (const auto& c : cal.candidates) best = std::max(best, c.mean_accuracy);
        EXPECT_GE(best, base.candidates[0].mean_accuracy) << "seed " << seed;
    }
}

TEST(Calibrate, CsvListsEveryCandidate) {
    InputSpaceEmbedder input;
    const auto data = toy_train(ToyKind::circles, 6);
    const auto r = calibrate(input, data.x, data.y, {KernelKind::knn, {1, 5, 200}}, {});
    const auto path = std::filesystem::temp_directory_path() / "kicl_cal.csv";
    r.write_csv(path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "candidate,mean_cv_accuracy,skipped");
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[2].substr(0, 4), "200,");
    EXPECT_EQ(rows[2].back(), '1');
    std::filesystem::remove(path);
}

TEST(Accuracy, Basics) {
    EXPECT_EQ(accuracy(std::vector<int>{1, 0, 1, 1}, std::vector<int>{1, 1, 1, 0}), 0.5);
    EXPECT_THROW(accuracy(std::vector<int>{1}, std::vector<int>{1, 0}), ContractViolation);
}
