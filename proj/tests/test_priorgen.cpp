#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "kicl/backbone/embedder.hpp"
#include "kicl/calibration/calibrate.hpp"
#include "kicl/error.hpp"
#include "kicl/evaluation/evaluate.hpp"
#include "kicl/kernels/kernels.hpp"
#include "kicl/priorgen/dataset.hpp"
#include "kicl/priorgen/prior.hpp"

using namespace kicl;

namespace {

bool same(const Dataset& a, const Dataset& b) {
    return std::ranges::equal(a.features_train.data(), b.features_train.data()) &&
           std::ranges::equal(a.features_test.data(), b.features_test.data()) &&
           a.labels_train == b.labels_train && a.labels_test == b.labels_test && a.source == b.source;
}

}  // namespace

TEST(Prior, DeterministicPerSeedAndIndex) {
    PriorConfig cfg;
    cfg.seed = 17;
    const auto a = sample_prior_batch(cfg, 3), b = sample_prior_batch(cfg, 3);
    ASSERT_EQ(a.size(), 8u);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(same(a[i], b[i]));
    EXPECT_TRUE(same(a[5], sample_prior_dataset(cfg, 3, 5)));
    EXPECT_FALSE(same(a[0], sample_prior_batch(cfg, 4)[0]));
    cfg.seed = 18;
    EXPECT_FALSE(same(a[0], sample_prior_batch(cfg, 3)[0]));
}

TEST(Prior, DeskConfigInvariantsOverManyBatches) {
    PriorConfig cfg;
    cfg.seed = 5;
    for (std::uint64_t b = 0; b < 100; ++b) {
        for (const auto& ds : sample_prior_batch(cfg, b)) {
            ASSERT_NO_THROW(ds.validate(2));
            EXPECT_GE(ds.d(), 3u);
            EXPECT_LE(ds.d(), 10u);
            const std::size_t total = ds.n() + ds.m();
            EXPECT_GE(total, cfg.min_samples);
            EXPECT_LE(total, cfg.max_samples);
            const double f = static_cast<double>(ds.n()) / static_cast<double>(total);
            // Rounding to whole rows can move the fraction by half a row.
            EXPECT_GE(f, cfg.train_min - 0.5 / static_cast<double>(total));
            EXPECT_LE(f, cfg.train_max + 0.5 / static_cast<double>(total));
            std::size_t ones = 0;
            for (int y : ds.labels_train) ones += y == 1;
            const double minority = static_cast<double>(std::min(ones, ds.n() - ones)) / static_cast<double>(ds.n());
            EXPECT_GE(minority, 0.1);
        }
    }
}

TEST(Prior, MulticlassLabelsStayInRange) {
    PriorConfig cfg;
    cfg.classes = 4;
    for (std::uint64_t b = 0; b < 10; ++b)
        for (const auto& ds : sample_prior_batch(cfg, b)) EXPECT_NO_THROW(ds.validate(4));
}

TEST(Prior, PaperScaleConfiguration) {
    const auto p = PriorConfig::paper_scale();
    EXPECT_EQ(p.datasets_per_batch, 64u);
    EXPECT_EQ(p.d_min, 5u);
    EXPECT_EQ(p.d_max, 100u);
    EXPECT_EQ(p.max_samples, 1024u);
    EXPECT_DOUBLE_EQ(p.train_min, 0.6);
    EXPECT_DOUBLE_EQ(p.train_max, 0.8);
    EXPECT_NO_THROW(p.validate());
}

TEST(Prior, InvalidConfigsAreRejected) {
    PriorConfig cfg;
    cfg.d_min = 0;
    EXPECT_THROW(cfg.validate(), ContractViolation);
    cfg = {};
    cfg.d_min = 11;
    EXPECT_THROW(cfg.validate(), ContractViolation);
    cfg = {};
    cfg.train_max = 1.0;
    EXPECT_THROW(cfg.validate(), ContractViolation);
    cfg = {};
    cfg.datasets_per_batch = 0;
    EXPECT_THROW(sample_prior_batch(cfg, 0), ContractViolation);
}

TEST(Toy, PaperSettingShapes) {
    for (auto kind : {ToyKind::moons, ToyKind::circles, ToyKind::linear}) {
        ToyConfig cfg;
        cfg.kind = kind;
        const auto ds = generate_toy(cfg);
        EXPECT_EQ(ds.d(), 20u);
        EXPECT_EQ(ds.n(), 120u);
        EXPECT_EQ(ds.m(), 80u);
        std::size_t ones = 0;
        for (int y : ds.labels_train) ones += y == 1;
        EXPECT_EQ(ones, 60u);
    }
}

TEST(Toy, Deterministic) {
    ToyConfig cfg;
    cfg.seed = 9;
    EXPECT_TRUE(same(generate_toy(cfg), generate_toy(cfg)));
    ToyConfig other = cfg;
    other.seed = 10;
    EXPECT_FALSE(same(generate_toy(cfg), generate_toy(other)));
}

TEST(Toy, CirclesClassMatchesRadiusBand) {
    ToyConfig cfg;
    cfg.kind = ToyKind::circles;
    cfg.noise_features = 3;
    cfg.signal_noise = 0.05;
    const auto ds = generate_toy(cfg);
    auto check = [&](const Tensor& x, const std::vector<int>& y) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = std::hypot(x(i, 0), x(i, 1));
            EXPECT_EQ(y[i], r < 0.75 ? 1 : 0) << "radius " << r;
        }
    };
    check(ds.features_train, ds.labels_train);
    check(ds.features_test, ds.labels_test);
}

TEST(Toy, SeparableLinearGivesPerfectTrainingNearestNeighbour) {
    ToyConfig cfg;
    cfg.kind = ToyKind::linear;
    cfg.noise_features = 0;
    cfg.separation = 20.0;
    const auto ds = generate_toy(cfg);
    const auto w = kernel_knn(ds.features_train, ds.features_train, 1);
    EXPECT_EQ(accuracy(predict(w, ds.labels_train, 2).predicted, ds.labels_train), 1.0);
}

TEST(Toy, SignalIsRecoverableWithoutNoise) {
    InputSpaceEmbedder input;
    for (auto kind : {ToyKind::moons, ToyKind::circles, ToyKind::linear}) {
        ToyConfig cfg;
        cfg.kind = kind;
        cfg.noise_features = 0;
        cfg.seed = 3;
        MethodSpec m;
        m.embedder = &input;
        m.kernel = KernelKind::gaussian;
        m.calibrate = true;
        EXPECT_GT(evaluate(m, generate_toy(cfg)).accuracy, 0.9) << to_string(kind);
    }
}

TEST(Toy, RejectsBadConfigs) {
    ToyConfig cfg;
    cfg.n_total = 9;
    EXPECT_THROW(generate_toy(cfg), ContractViolation);
    EXPECT_THROW(parse_toy_kind("spirals"), ContractViolation);
}

TEST(Split, StratifiedCountsAndDeterminism) {
    std::vector<int> y(100);
    for (std::size_t i = 0; i < 100; ++i) y[i] = i < 30 ? 1 : 0;
    const auto s = stratified_split(y, 0.76, 4);
    EXPECT_EQ(s.train.size(), 76u);
    EXPECT_EQ(s.test.size(), 24u);
    std::map<int, std::size_t> per;
    for (auto i : s.train) ++per[y[i]];
    EXPECT_EQ(per[1], 23u);  // 22.8 rounds up by largest remainder
    EXPECT_EQ(per[0], 53u);
    EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
    const auto t = stratified_split(y, 0.76, 4);
    EXPECT_EQ(s.train, t.train);
    EXPECT_THROW(stratified_split(y, 1.0, 0), ContractViolation);
}
