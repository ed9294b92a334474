#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "kicl/backbone/embedder.hpp"
#include "kicl/error.hpp"
#include "kicl/evaluation/compactness.hpp"
#include "kicl/evaluation/csv.hpp"
#include "kicl/evaluation/evaluate.hpp"
#include "kicl/evaluation/overhead.hpp"
#include "kicl/evaluation/sweep.hpp"
#include "kicl/priorgen/prior.hpp"

using namespace kicl;
namespace fs = std::filesystem;

namespace {

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("kicl_eval_" + name); }

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string hundred_rows() {
    std::string s = "a,b,label\n";
    for (int i = 0; i < 100; ++i)
        s += std::to_string(i) + "," + std::to_string(i * 0.5) + "," + std::to_string(i % 4 == 0 ? 1 : 0) + "\n";
    return s;
}

// Training labels 3:1 in favour of class 1 so a uniform kernel has a clear majority.
Dataset unbalanced(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0, 1);
    Tensor x({200, 3});
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        y[i] = i % 4 == 0 ? 0 : 1;
        for (std::size_t c = 0; c < 3; ++c) x(i, c) = n(rng) + (c == 0 ? 2.0 * y[i] : 0.0);
    }
    return make_split_dataset(x, y, stratified_split(y, 0.6, seed), "unbalanced");
}

MethodResult row(const std::string& m, const std::string& d, double acc) {
    MethodResult r;
    r.method = m;
    r.dataset = d;
    r.accuracy = acc;
    return r;
}

}  // namespace

TEST(Csv, HundredRowsSplitIntoSeventySixAndTwentyFour) {
    const auto p = temp("100.csv");
    write_text(p, hundred_rows());
    const auto t = load_csv(p);
    EXPECT_EQ(t.feature_names, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(t.features.rows(), 100u);
    EXPECT_TRUE(t.split.empty());
    const auto ds = split(t);
    EXPECT_EQ(ds.n(), 76u);
    EXPECT_EQ(ds.m(), 24u);
    EXPECT_THROW(split(t, 1.0), ContractViolation);
    fs::remove(p);
}

TEST(Csv, SplitColumnIsHonoured) {
    const auto p = temp("split.csv");
    write_text(p, "x,label,split\n1,0,train\n2,1,test\n3,1,train\n4,0,train\n");
    const auto ds = split(load_csv(p));
    EXPECT_EQ(ds.n(), 3u);
    EXPECT_EQ(ds.m(), 1u);
    EXPECT_EQ(ds.features_test(0, 0), 2.0);
    fs::remove(p);
}

TEST(Csv, RoundTripIsValueIdentical) {
    ToyConfig cfg;
    cfg.noise_features = 3;
    const auto ds = generate_toy(cfg);
    const auto p = temp("rt.csv");
    write_dataset_csv(p, ds);
    const auto back = split(load_csv(p));
    EXPECT_TRUE(std::ranges::equal(back.features_train.data(), ds.features_train.data()));
    EXPECT_TRUE(std::ranges::equal(back.features_test.data(), ds.features_test.data()));
    EXPECT_EQ(back.labels_train, ds.labels_train);
    EXPECT_EQ(back.labels_test, ds.labels_test);
    fs::remove(p);
}

TEST(Csv, MalformedInputsNameLineAndColumn) {
    const auto p = temp("bad.csv");
    write_text(p, "x,y,label\n1,2,0\n3,abc,1\n");
    try {
        load_csv(p);
        FAIL();
    } catch (const IoError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("'y'"), std::string::npos) << msg;
    }
    write_text(p, "x,label\n1,0\n2,-1\n");
    EXPECT_THROW(load_csv(p), IoError);
    write_text(p, "x,label\n1,0\n2\n");
    EXPECT_THROW(load_csv(p), IoError);
    write_text(p, "x,label\nnan,0\n2,1\n");
    EXPECT_THROW(load_csv(p), IoError);
    write_text(p, "x,label\n1,1\n2,1\n");
    EXPECT_THROW(load_csv(p), ContractViolation);
    write_text(p, "x,target\n1,1\n2,0\n");
    EXPECT_THROW(load_csv(p), IoError);
    EXPECT_NO_THROW(load_csv(p, "target"));
    fs::remove(p);
    EXPECT_THROW(load_csv(temp("missing.csv")), IoError);
}

TEST(Evaluate, AccuracyMatchesIndependentRecount) {
    InputSpaceEmbedder input;
    ToyConfig cfg;
    cfg.kind = ToyKind::circles;
    cfg.noise_features = 2;
    const auto ds = generate_toy(cfg);
    MethodSpec m;
    m.embedder = &input;
    m.kernel = KernelKind::knn;
    m.scale = 3;
    const auto pred = predict_dataset(m, ds);
    const auto space = input.embed(ds.features_train, ds.labels_train, ds.features_test);
    std::size_t correct = 0;
    for (std::size_t j = 0; j < ds.m(); ++j) {
        int votes = 0;
        for (auto i : nearest_keys(space.queries.row(j), space.keys, 3)) votes += ds.labels_train[i];
        correct += (votes >= 2 ? 1 : 0) == ds.labels_test[j];
    }
    EXPECT_EQ(evaluate(m, ds).accuracy, static_cast<double>(correct) / static_cast<double>(ds.m()));
    EXPECT_EQ(pred.kernel.scale, 3.0);
    EXPECT_NEAR(evaluate(m, ds).rel_perplexity, 3.0 / 120, 1e-15);
}

TEST(Evaluate, UniformWeightsGiveMajorityRate) {
    InputSpaceEmbedder input;
    const auto ds = unbalanced(1);
    MethodSpec m;
    m.embedder = &input;
    m.kernel = KernelKind::gaussian;
    m.scale = 1e-14;
    std::size_t ones = 0;
    for (int y : ds.labels_test) ones += y == 1;
    EXPECT_NEAR(evaluate(m, ds).accuracy, static_cast<double>(ones) / static_cast<double>(ds.m()), 1e-12);
}

TEST(Evaluate, CalibrationUsesTheGrid) {
    InputSpaceEmbedder input;
    MethodSpec m;
    m.embedder = &input;
    m.kernel = KernelKind::knn;
    m.calibrate = true;
    m.grid = CalibrationGrid{KernelKind::knn, {7}};
    EXPECT_EQ(predict_dataset(m, unbalanced(2)).kernel.scale, 7.0);
    m.grid = CalibrationGrid{KernelKind::gaussian, {1.0}};
    EXPECT_THROW(predict_dataset(m, unbalanced(2)), ContractViolation);
}

TEST(MeanRank, HandTables) {
    const auto two = mean_rank({row("a", "d1", 0.9), row("b", "d1", 0.8), row("a", "d2", 0.7), row("b", "d2", 0.6)});
    EXPECT_EQ(two.methods, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(two.mean_rank, (std::vector<double>{1.0, 2.0}));

    const auto tied = mean_rank({row("a", "d", 0.5), row("b", "d", 0.5), row("c", "d", 0.5)});
    EXPECT_EQ(tied.mean_rank, (std::vector<double>{2.0, 2.0, 2.0}));

    // d1: a 1, b 2.5, c 2.5; d2: b 1, a 2, c 3.
    const auto three = mean_rank({row("a", "d1", 0.9), row("b", "d1", 0.8), row("c", "d1", 0.8), row("a", "d2", 0.7),
                                  row("b", "d2", 0.9), row("c", "d2", 0.6)});
    EXPECT_EQ(three.mean_rank, (std::vector<double>{1.5, 1.75, 2.75}));
    EXPECT_NEAR(three.mean_accuracy[1], 0.85, 1e-15);
}

TEST(MeanRank, InvariantUnderRenaming) {
    const auto a = mean_rank({row("x", "d1", 0.3), row("y", "d1", 0.4), row("x", "d2", 0.9), row("y", "d2", 0.1)});
    const auto b = mean_rank({row("q", "d1", 0.3), row("p", "d1", 0.4), row("q", "d2", 0.9), row("p", "d2", 0.1)});
    EXPECT_EQ(a.mean_rank[0], b.mean_rank[1]);
    EXPECT_EQ(a.mean_rank[1], b.mean_rank[0]);
}

TEST(MeanRank, MissingOrDuplicateCells) {
    try {
        mean_rank({row("a", "d1", 0.9), row("b", "d1", 0.8), row("a", "d2", 0.7)});
        FAIL();
    } catch (const ContractViolation& e) {
        EXPECT_NE(std::string(e.what()).find("(b, d2)"), std::string::npos) << e.what();
    }
    EXPECT_THROW(mean_rank({row("a", "d", 0.9), row("a", "d", 0.8)}), ContractViolation);
}

TEST(Sweep, SelectionRule) {
    const std::vector<SweepMeasurement> ladder{{10, 0.01, 0.9}, {1, 0.1, 0.8}, {0.5, 0.1, 0.7}, {0.1, 0.5, 0.6}};
    const auto pts = select_targets(ladder, {0.005, 0.05, 0.1, 0.3, 1.0});
    EXPECT_FALSE(pts[0].attained);
    EXPECT_EQ(pts[1].scale, 10.0);
    EXPECT_EQ(pts[2].scale, 1.0);  // exact tie at 0.1: earlier entry wins
    EXPECT_EQ(pts[3].scale, 1.0);
    EXPECT_EQ(pts[4].scale, 0.1);
    for (const auto& p : pts) {
        if (!p.attained) continue;
        EXPECT_LE(p.achieved, p.target);
        for (const auto& m : ladder) EXPECT_FALSE(m.achieved > p.achieved && m.achieved <= p.target);
    }
}

TEST(Sweep, SingleScaleLadderReusesOnePoint) {
    const auto pts = select_targets({{2.0, 0.2, 0.75}}, default_targets());
    for (const auto& p : pts) {
        EXPECT_EQ(p.attained, p.target >= 0.2);
        if (p.attained) EXPECT_EQ(p.scale, 2.0);
    }
}

TEST(Sweep, UniformEndpointMatchesMajorityRate) {
    InputSpaceEmbedder input;
    const auto ds = unbalanced(3);
    const auto ladder = default_ladder(KernelKind::gaussian, ds.n());
    EXPECT_EQ(ladder.front(), 1e-12);
    const auto targets = default_targets();
    EXPECT_EQ(targets.back(), 1.0);
    const auto pts = tradeoff_sweep(input, ds, KernelKind::gaussian, ladder, targets);
    const auto& end = pts.back();
    ASSERT_TRUE(end.attained);
    EXPECT_GE(end.achieved, 0.999);
    std::size_t ones = 0;
    for (int y : ds.labels_test) ones += y == 1;
    EXPECT_NEAR(end.accuracy, static_cast<double>(ones) / static_cast<double>(ds.m()), 1e-9);
}

TEST(Sweep, KnnAchievedIsKOverN) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 1);
    Tensor x({520, 2});
    std::vector<int> y(520);
    for (std::size_t i = 0; i < 520; ++i) {
        y[i] = static_cast<int>(i % 2);
        x(i, 0) = n(rng) + y[i];
        x(i, 1) = n(rng);
    }
    SplitIndices s;
    for (std::size_t i = 0; i < 520; ++i) (i < 500 ? s.train : s.test).push_back(i);
    const auto ds = make_split_dataset(x, y, s, "knn500");
    InputSpaceEmbedder input;
    const auto ladder = default_ladder(KernelKind::knn, 500);
    ASSERT_EQ(ladder.size(), 500u);
    const auto measured = measure_ladder(input, ds, KernelKind::knn, ladder);
    for (const auto& m : measured) EXPECT_EQ(m.achieved, m.scale / 500.0);
}

TEST(Compactness, MatchesBruteForceOracle) {
    ToyConfig cfg;
    cfg.noise_features = 2;
    cfg.n_total = 40;
    const auto ds = generate_toy(cfg);
    InputSpaceEmbedder input;
    const auto got = feature_compactness(input, ds, 3);
    // Standardize with training statistics, then brute-force the neighbours.
    const std::size_t d = ds.d();
    std::vector<double> mu(d, 0), sd(d, 0);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t i = 0; i < ds.n(); ++i) mu[c] += ds.features_train(i, c) / static_cast<double>(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i)
            sd[c] += std::pow(ds.features_train(i, c) - mu[c], 2) / static_cast<double>(ds.n());
        sd[c] = std::sqrt(sd[c]);
    }
    auto ztr = [&](std::size_t i, std::size_t c) { return (ds.features_train(i, c) - mu[c]) / sd[c]; };
    auto zte = [&](std::size_t j, std::size_t c) { return (ds.features_test(j, c) - mu[c]) / sd[c]; };
    std::vector<double> expect(d, 0);
    for (std::size_t j = 0; j < ds.m(); ++j) {
        std::vector<std::pair<double, std::size_t>> dist;
        for (std::size_t i = 0; i < ds.n(); ++i) {
            double s = 0;
            for (std::size_t c = 0; c < d; ++c) s += std::pow(zte(j, c) - ztr(i, c), 2);
            dist.emplace_back(s, i);
        }
        std::sort(dist.begin(), dist.end());
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < d; ++c)
                expect[c] += std::abs(zte(j, c) - ztr(dist[r].second, c)) / static_cast<double>(3 * ds.m());
    }
    for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(got[c], expect[c], 1e-12);
    EXPECT_THROW(feature_compactness(input, ds, ds.n() + 1), ContractViolation);
}

TEST(Compactness, SpaceIgnoringAFeatureIsLooserAlongIt) {
    ToyConfig cfg;
    cfg.kind = ToyKind::linear;
    cfg.noise_features = 1;
    const auto ds = generate_toy(cfg);
    KernelSpace only_first{Tensor({ds.n(), 1}), Tensor({ds.m(), 1})};
    for (std::size_t i = 0; i < ds.n(); ++i) only_first.keys(i, 0) = ds.features_train(i, 0);
    for (std::size_t j = 0; j < ds.m(); ++j) only_first.queries(j, 0) = ds.features_test(j, 0);
    const auto c = feature_compactness(only_first, ds, 5);
    EXPECT_LT(c[0], c[2]);
    EXPECT_LT(c[0], c[1]);
}

TEST(Compactness, NormalizationAndSelfComparison) {
    const std::vector<double> raw{0.5, 1.5, 1.0, 3.0};
    const auto n = normalize_by_mean(raw);
    EXPECT_NEAR((n[0] + n[1] + n[2] + n[3]) / 4, 1.0, 1e-15);
    EXPECT_NEAR(n[3], 2.0, 1e-15);
    for (const auto& r : compare_compactness(raw, raw, {"a", "b", "c", "d"})) EXPECT_EQ(r.rel_diff_pct, 0.0);
    const auto rows = compare_compactness({1.0, 1.0}, {0.5, 1.5}, {"a", "b"});
    // Normalized method values 0.5 and 1.5 against 1 and 1.
    EXPECT_NEAR(rows[0].rel_diff_pct, 50.0, 1e-12);
    EXPECT_NEAR(rows[1].rel_diff_pct, -50.0, 1e-12);
}

TEST(Overhead, FlopRatioGrowsWithSamplesAndShrinksWithFeatures) {
    Hyperparameters hp;
    hp.width = 16;
    hp.heads = 2;
    hp.key_dim = 16;
    hp.inducing = 4;
    const auto params = ModelParameters::initialize(hp, 0);
    OverheadConfig cfg;
    cfg.sizes = {100, 1000, 10000, 100000, 1000000};
    cfg.features = {1, 100};
    cfg.measure_time = false;
    const auto rows = overhead_benchmark(params, cfg);
    ASSERT_EQ(rows.size(), 10u);
    double prev = 0;
    for (const auto& r : rows) {
        if (r.d != 1) continue;
        EXPECT_GE(r.flop_ratio, prev);
        EXPECT_TRUE(std::isnan(r.time_ratio));
        EXPECT_GT(r.flops_symmetric, r.flops_asymmetric);
        prev = r.flop_ratio;
    }
    EXPECT_GT(prev, 1.8);
    EXPECT_LT(prev, 2.0);
}

TEST(Overhead, MemoryBudgetSkipsTimedRuns) {
    Hyperparameters hp;
    hp.width = 8;
    hp.heads = 2;
    hp.key_dim = 8;
    hp.inducing = 4;
    const auto params = ModelParameters::initialize(hp, 0);
    OverheadConfig cfg;
    cfg.sizes = {50, 400};
    cfg.features = {2};
    cfg.m = 5;
    cfg.repetitions = 1;
    cfg.memory_budget_bytes = estimated_tape_bytes(hp, 100, 5, 2, EmbeddingMode::symmetric);
    const auto rows = overhead_benchmark(params, cfg);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_FALSE(rows[0].skipped);
    EXPECT_GT(rows[0].time_ratio, 0.0);
    EXPECT_TRUE(rows[1].skipped);
    EXPECT_GT(rows[1].flop_ratio, 1.0);  // FLOPs are still counted
}
