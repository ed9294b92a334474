#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "kicl/backbone/checkpoint.hpp"
#include "kicl/error.hpp"
#include "kicl/training/train.hpp"

using namespace kicl;

namespace {

Hyperparameters tiny() {
    Hyperparameters hp;
    hp.width = 16;
    hp.heads = 2;
    hp.col_layers = 1;
    hp.row_layers = 1;
    hp.icl_layers = 1;
    hp.inducing = 4;
    hp.key_dim = 16;
    return hp;
}

TrainConfig tiny_config(std::size_t batches) {
    TrainConfig cfg;
    cfg.model = tiny();
    cfg.batches = batches;
    cfg.validation_interval = 10;
    cfg.seed = 11;
    return cfg;
}

PriorConfig small_prior() {
    PriorConfig p;
    p.d_min = 3;
    p.d_max = 8;
    p.max_samples = 64;
    p.seed = 11;
    return p;
}

struct ThreadsEnv {
    explicit ThreadsEnv(const char* value) { setenv("KERNELICL_THREADS", value, 1); }
    ~ThreadsEnv() { unsetenv("KERNELICL_THREADS"); }
};

}  // namespace

TEST(Training, SmokeRunReducesLoss) {
    auto cfg = tiny_config(50);
    cfg.adam.learning_rate = 3e-3;
    const auto r = train(cfg, small_prior());
    ASSERT_EQ(r.log.batch_losses.size(), 50u);
    EXPECT_LT(r.log.rows.back().train_loss, r.log.rows.front().train_loss);
}

TEST(Training, LogRowsAndBestIndex) {
    const auto r = train(tiny_config(20), small_prior());
    ASSERT_EQ(r.log.rows.size(), 3u);  // batches 0, 10 and 20
    EXPECT_EQ(r.log.rows[0].batch, 0u);
    EXPECT_EQ(r.log.rows[2].batch, 20u);
    for (const auto& row : r.log.rows) EXPECT_GE(row.val_loss, r.log.rows[r.log.best].val_loss);
    const auto pool = validation_pool(small_prior(), 2);
    EXPECT_EQ(mean_loss(r.params, pool, KernelKind::gaussian, EmbeddingMode::symmetric),
              r.log.rows[r.log.best].val_loss);
}

TEST(Training, OverfitsASingleDataset) {
    PriorConfig p = small_prior();
    p.min_samples = 32;
    p.max_samples = 32;
    const Dataset ds = sample_prior_dataset(p, 0, 0);
    auto cfg = tiny_config(500);
    cfg.adam.learning_rate = 1e-2;
    cfg.validation_interval = 500;
    const std::vector<Dataset> batch{ds};
    const auto r = train(cfg, [&](std::uint64_t) { return batch; }, batch);
    double best = INFINITY;
    for (double l : r.log.batch_losses) best = std::min(best, l);
    EXPECT_LT(best, 0.1);
}

TEST(Training, DeterministicForSameSeed) {
    const auto a = train(tiny_config(8), small_prior()), b = train(tiny_config(8), small_prior());
    EXPECT_TRUE(a.log.same_losses(b.log));
    EXPECT_EQ(a.params, b.params);
    auto other = tiny_config(8);
    other.seed = 12;
    EXPECT_FALSE(train(other, small_prior()).log.same_losses(a.log));
}

TEST(Training, ParallelMatchesSequential) {
    TrainResult seq, par;
    {
        ThreadsEnv env("1");
        seq = train(tiny_config(6), small_prior());
    }
    {
        ThreadsEnv env("4");
        par = train(tiny_config(6), small_prior());
    }
    EXPECT_TRUE(seq.log.same_losses(par.log));
    EXPECT_EQ(seq.params, par.params);
}

TEST(Training, GradientAtInitIsFiniteAndNonzero) {
    const auto params = ModelParameters::initialize(tiny(), 3);
    for (auto kernel : {KernelKind::gaussian, KernelKind::dot}) {
        const auto lg = loss_and_grad(params, sample_prior_dataset(small_prior(), 0, 0), kernel, EmbeddingMode::symmetric);
        EXPECT_TRUE(std::isfinite(lg.loss));
        double norm = 0;
        for (const auto& g : lg.grads) {
            EXPECT_TRUE(g.all_finite());
            for (double v : g.data()) norm += v * v;
        }
        EXPECT_GT(norm, 0.0);
    }
}

TEST(Training, CheckpointReproducesValidationLoss) {
    const auto path = std::filesystem::temp_directory_path() / "kicl_train_ckpt.bin";
    auto cfg = tiny_config(10);
    cfg.checkpoint = path;
    const auto r = train(cfg, small_prior());
    const auto ckpt = load_checkpoint(path);
    EXPECT_EQ(ckpt.params, r.params);
    EXPECT_EQ(ckpt.annotations.at("kernel"), "gaussian");
    const auto pool = validation_pool(small_prior(), 2);
    EXPECT_EQ(mean_loss(ckpt.params, pool, KernelKind::gaussian, EmbeddingMode::symmetric),
              r.log.rows[r.log.best].val_loss);
    std::filesystem::remove(path);
}

TEST(Training, LogCsvHasHeaderAndRows) {
    const auto path = std::filesystem::temp_directory_path() / "kicl_train_log.csv";
    const auto r = train(tiny_config(10), small_prior());
    r.log.write_csv(path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "batch,train_loss,val_loss,seconds");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, r.log.rows.size());
    std::filesystem::remove(path);
}

TEST(Training, ConfigValidation) {
    auto cfg = tiny_config(10);
    cfg.kernel = KernelKind::knn;
    EXPECT_THROW(train(cfg, small_prior()), ContractViolation);
    cfg = tiny_config(0);
    EXPECT_THROW(train(cfg, small_prior()), ContractViolation);
}

TEST(Training, NonFiniteLossAbortsWithBatchAndSeed) {
    // One Adam step of this size overflows the weights.
    auto cfg = tiny_config(3);
    cfg.adam.learning_rate = 1e300;
    try {
        train(cfg, small_prior());
        FAIL() << "expected an error";
    } catch (const ContractViolation& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("batch 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("seed 11"), std::string::npos) << msg;
    }
}

TEST(KernelReuse, KnnUsesGaussianEmbeddings) {
    std::map<KernelKind, ModelParameters> trained{{KernelKind::gaussian, ModelParameters::initialize(tiny(), 1)},
                                                  {KernelKind::dot, ModelParameters::initialize(tiny(), 2)}};
    EXPECT_EQ(&embeddings_for_kernel(KernelKind::knn, trained), &trained.at(KernelKind::gaussian));
    EXPECT_EQ(&embeddings_for_kernel(KernelKind::gaussian, trained), &trained.at(KernelKind::gaussian));
    EXPECT_EQ(&embeddings_for_kernel(KernelKind::dot, trained), &trained.at(KernelKind::dot));
    EXPECT_EQ(training_kernel_for(KernelKind::knn), KernelKind::gaussian);
    trained.erase(KernelKind::gaussian);
    try {
        embeddings_for_kernel(KernelKind::knn, trained);
        FAIL() << "expected an error";
    } catch (const ContractViolation& e) {
        EXPECT_NE(std::string(e.what()).find("gaussian"), std::string::npos);
    }
}
