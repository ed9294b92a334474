#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = kicl::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("kicl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir);
        data = (dir / "circles.csv").string();
        ASSERT_EQ(cli({"toy", "--kind", "circles", "--out", data}).code, 0);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }

    std::string tiny_model() const {
        const auto p = path("model.kicl");
        const auto r = cli({"train", "--batches", "3", "--width", "8", "--heads", "2", "--key-dim", "8", "--inducing", "2",
                            "--col-layers", "1", "--row-layers", "1", "--icl-layers", "1", "--datasets-per-batch", "2",
                            "--val-batches", "1", "--out", p, "--log", path("log.csv")});
        EXPECT_EQ(r.code, 0) << r.err;
        return p;
    }

    fs::path dir;
    std::string data;
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
    const auto help = cli({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("predict"), std::string::npos);
    EXPECT_NE(help.out.find("bench-overhead"), std::string::npos);
    EXPECT_EQ(cli({"predict", "--help"}).code, 0);
    EXPECT_EQ(cli({}).code, 1);
    EXPECT_EQ(cli({"frobnicate"}).code, 1);
    EXPECT_EQ(cli({"toy"}).code, 1);  // --out is required
}

TEST_F(Cli, ToyHasTwentyFeaturesAndPaperSplit) {
    const auto r = cli({"toy", "--kind", "moons", "--out", path("m.csv")});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("120 train / 80 test, 20"), std::string::npos) << r.out;
    const auto rows = lines(path("m.csv"));
    ASSERT_EQ(rows.size(), 201u);
    EXPECT_EQ(rows[0].substr(0, 6), "x0,x1,");
    EXPECT_EQ(rows[0].substr(rows[0].size() - 12), ",label,split");
    EXPECT_EQ(cli({"toy", "--kind", "spiral", "--out", path("s.csv")}).code, 1);
}

TEST_F(Cli, PredictKnnExportsPerplexityFive) {
    const auto r = cli({"predict", "--data", data, "--kernel", "knn", "--scale", "5", "--out", path("pred.csv"),
                        "--explain", path("w.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ppl = lines(path("w_perplexity.csv"));
    ASSERT_EQ(ppl.size(), 81u);
    EXPECT_EQ(ppl[0], "test_index,perplexity,relative_perplexity,predicted");
    for (std::size_t i = 1; i < ppl.size(); ++i) EXPECT_EQ(ppl[i].substr(ppl[i].find(',') + 1, 2), "5,") << ppl[i];
    const auto w = lines(path("w.csv"));
    EXPECT_EQ(w.size(), 1u + 80u * 120u);
    EXPECT_EQ(lines(path("pred.csv")).size(), 81u);
    cli({"predict", "--data", data, "--kernel", "knn", "--scale", "5", "--out", path("pred.csv"), "--explain",
         path("top.csv"), "--top", "2"});
    EXPECT_EQ(lines(path("top.csv")).size(), 1u + 80u * 2u);
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(cli({"predict", "--data", path("missing.csv")}).code, 2);
    const auto big = cli({"predict", "--data", data, "--kernel", "knn", "--scale", "500"});
    EXPECT_EQ(big.code, 1);
    EXPECT_NE(big.err.find("error:"), std::string::npos);
    EXPECT_EQ(cli({"predict", "--data", data, "--kernel", "rbf"}).code, 1);
    EXPECT_EQ(cli({"compactness", "--data", data}).code, 1);  // --model is required
    EXPECT_EQ(cli({"predict", "--data", data, "--model", path("nope.kicl")}).code, 2);
}

TEST_F(Cli, CalibrateListsTheDefaultGrid) {
    const auto r = cli({"calibrate", "--data", data, "--kernel", "gaussian", "--out", path("cal.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("chosen gaussian"), std::string::npos) << r.out;
    const auto rows = lines(path("cal.csv"));
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_EQ(rows[0], "candidate,mean_cv_accuracy,skipped");
    EXPECT_EQ(rows[8].substr(0, 4), "1.5,");
    const auto knn = cli({"calibrate", "--data", data, "--kernel", "knn", "--out", path("knn.csv")});
    ASSERT_EQ(knn.code, 0);
    EXPECT_NE(knn.out.find("8192: skipped"), std::string::npos);
    EXPECT_EQ(cli({"calibrate", "--data", data, "--kernel", "knn", "--grid", "4096,8192"}).code, 1);
}

TEST_F(Cli, RerunsAreByteIdentical) {
    for (const char* name : {"a.csv", "b.csv"})
        ASSERT_EQ(cli({"--seed", "3", "predict", "--data", data, "--kernel", "gaussian", "--out", path(name), "--explain",
                       path(std::string("w_") + name)})
                      .code,
                  0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
    EXPECT_EQ(slurp(path("w_a.csv")), slurp(path("w_b.csv")));
}

TEST_F(Cli, SweepReachesTheUniformEndpoint) {
    const auto r = cli({"sweep", "--data", data, "--kernel", "gaussian", "--out", path("sweep.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = lines(path("sweep.csv"));
    EXPECT_EQ(rows[0], "target,achieved,scale,accuracy");
    EXPECT_EQ(rows.back().substr(0, 2), "1,");
}

TEST_F(Cli, TrainedModelFeedsEveryCommand) {
    const auto model = tiny_model();
    EXPECT_EQ(lines(path("log.csv"))[0], "batch,train_loss,val_loss,seconds");
    auto r = cli({"predict", "--data", data, "--model", model, "--no-calibrate", "--out", path("p.csv")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.err.empty()) << r.err;
    r = cli({"predict", "--data", data, "--model", model, "--kernel", "dot", "--no-calibrate", "--out", path("p.csv")});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    r = cli({"predict", "--data", data, "--model", model, "--kernel", "knn", "--no-calibrate", "--out", path("p.csv")});
    EXPECT_TRUE(r.err.empty()) << r.err;  // knn reuses gaussian embeddings

    r = cli({"compactness", "--data", data, "--model", model, "--out", path("c.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(path("c.csv")).size(), 21u);

    for (const char* stage : {"row", "icl", "kernel"}) {
        r = cli({"export-embeddings", "--data", data, "--model", model, "--stage", stage, "--out", path("e.csv")});
        EXPECT_EQ(r.code, 0) << stage << r.err;
        EXPECT_EQ(lines(path("e.csv")).size(), 201u);
    }
    EXPECT_EQ(cli({"export-embeddings", "--data", data, "--model", model, "--stage", "col", "--out", path("e.csv")}).code, 1);

    r = cli({"evaluate", "--data", data, "--model", model, "--no-calibrate", "--kernels", "gaussian,knn", "--out",
             path("res.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(path("res.csv")).size(), 5u);  // input and model for two kernels
    EXPECT_NE(r.out.find("mean rank"), std::string::npos);

    r = cli({"bench-overhead", "--model", model, "--sizes", "100,1000", "--features", "1,20", "--no-time", "--out",
             path("o.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(path("o.csv"))[0], "n,d,flop_ratio,time_ratio,skipped");
    EXPECT_EQ(lines(path("o.csv")).size(), 5u);
}
