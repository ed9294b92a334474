#include "kicl/training/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "kicl/backbone/checkpoint.hpp"
#include "kicl/common/parallel.hpp"
#include "kicl/error.hpp"

namespace kicl {

void TrainConfig::validate() const {
    KICL_REQUIRE(kernel != KernelKind::knn, "kNN cannot be trained directly; train with gaussian and reuse it");
    KICL_REQUIRE(batches >= 1, "training needs at least one batch");
    KICL_REQUIRE(validation_batches >= 1, "training needs at least one validation batch");
    KICL_REQUIRE(validation_interval >= 1, "validation interval must be at least 1");
    KICL_REQUIRE(adam.learning_rate > 0.0, "learning rate must be positive");
    model.validate();
    KICL_REQUIRE(mode == EmbeddingMode::symmetric || model.mode == EmbeddingMode::asymmetric,
                 "asymmetric training needs a model built with a query projection");
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.precision(17);
    out << "batch,train_loss,val_loss,seconds\n";
    for (const auto& r : rows) out << r.batch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.seconds << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

bool TrainLog::same_losses(const TrainLog& o) const {
    if (rows.size() != o.rows.size() || best != o.best || batch_losses != o.batch_losses) return false;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].batch != o.rows[i].batch || rows[i].train_loss != o.rows[i].train_loss ||
            rows[i].val_loss != o.rows[i].val_loss)
            return false;
    return true;
}

KernelKind training_kernel_for(KernelKind requested) {
    return requested == KernelKind::knn ? KernelKind::gaussian : requested;
}

const ModelParameters& embeddings_for_kernel(KernelKind requested,
                                             const std::map<KernelKind, ModelParameters>& trained) {
    const KernelKind source = training_kernel_for(requested);
    auto it = trained.find(source);
    KICL_REQUIRE(it != trained.end(), to_string(requested) + " needs a model trained with --kernel " +
                                          to_string(source) + "; run `kernelicl train --kernel " +
                                          to_string(source) + "` first");
    return it->second;
}

Var dataset_loss(const BoundParameters& p, const Dataset& ds, KernelKind kernel, EmbeddingMode mode) {
    KICL_REQUIRE(ds.m() >= 1, "dataset '" + ds.source + "' has no test points to score");
    const auto f = forward(p, ds.features_train, ds.labels_train, ds.features_test, mode);
    const auto spec = KernelSpec::default_for(kernel, p.hyper().key_dim);
    Var w = ops::kernel_weights(spec, f.queries, f.keys);
    Var probs = ops::class_probabilities(w, ds.labels_train, p.hyper().classes);
    return ops::cross_entropy(probs, ds.labels_test);
}

LossAndGrad loss_and_grad(const ModelParameters& params, const Dataset& ds, KernelKind kernel, EmbeddingMode mode) {
    Tape tape;
    BoundParameters p(tape, params, true);
    Var loss = dataset_loss(p, ds, kernel, mode);
    LossAndGrad out;
    out.loss = loss.value().item();
    out.grads = tape.backward(loss, p.vars());
    return out;
}

double mean_loss(const ModelParameters& params, const std::vector<Dataset>& datasets, KernelKind kernel,
                 EmbeddingMode mode) {
    KICL_REQUIRE(!datasets.empty(), "mean loss over an empty dataset list");
    std::vector<double> losses(datasets.size());
    parallel_for(datasets.size(), [&](std::size_t i) {
        Tape tape;
        BoundParameters p(tape, params, false);
        losses[i] = dataset_loss(p, datasets[i], kernel, mode).value().item();
    });
    double total = 0.0;
    for (double l : losses) total += l;
    return total / static_cast<double>(datasets.size());
}

std::vector<Dataset> validation_pool(const PriorConfig& prior, std::size_t batches) {
    // Far above any training batch index.
    constexpr std::uint64_t kOffset = std::uint64_t{1} << 40;
    std::vector<Dataset> pool;
    for (std::size_t b = 0; b < batches; ++b)
        for (auto& ds : sample_prior_batch(prior, kOffset + b)) pool.push_back(std::move(ds));
    return pool;
}

TrainResult train(const TrainConfig& cfg, const PriorConfig& prior) {
    cfg.validate();
    prior.validate();
    KICL_REQUIRE(prior.classes == cfg.model.classes, "prior and model disagree on the class count");
    const auto pool = validation_pool(prior, cfg.validation_batches);
    return train(cfg, [&](std::uint64_t b) { return sample_prior_batch(prior, b); }, pool);
}

TrainResult train(const TrainConfig& cfg, const BatchSource& source, const std::vector<Dataset>& validation) {
    cfg.validate();
    KICL_REQUIRE(!validation.empty(), "validation pool is empty");
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    ModelParameters params = ModelParameters::initialize(cfg.model, cfg.seed);
    std::vector<Tensor> flat;
    for (const auto& [_, t] : params.tensors()) flat.push_back(t);
    AdamState adam(flat, cfg.adam);

    TrainResult result{params, {}};
    double best_val = INFINITY;
    auto record = [&](std::size_t batch, double train_loss) {
        const double val = mean_loss(params, validation, cfg.kernel, cfg.mode);
        KICL_REQUIRE(std::isfinite(val), "validation loss became non-finite after " + std::to_string(batch) +
                                             " batches (seed " + std::to_string(cfg.seed) + ")");
        result.log.rows.push_back({batch, train_loss, val, elapsed()});
        if (val < best_val) {
            best_val = val;
            result.log.best = result.log.rows.size() - 1;
            result.params = params;
        }
    };

    for (std::size_t b = 0; b <= cfg.batches; ++b) {
        const auto batch = source(b);
        KICL_REQUIRE(!batch.empty(), "batch " + std::to_string(b) + " is empty");
        const bool final = b == cfg.batches;
        if (final) {
            record(b, mean_loss(params, batch, cfg.kernel, cfg.mode));
            break;
        }
        std::vector<LossAndGrad> parts(batch.size());
        try {
            parallel_for(batch.size(),
                         [&](std::size_t i) { parts[i] = loss_and_grad(params, batch[i], cfg.kernel, cfg.mode); });
        } catch (const ContractViolation& e) {
            // Diverged weights surface as non-finite logits inside the forward pass.
            throw ContractViolation("training failed at batch " + std::to_string(b) + " (seed " +
                                    std::to_string(cfg.seed) + "): " + e.what());
        }

        // Ordered reduction keeps the result independent of the thread count.
        const double inv = 1.0 / static_cast<double>(batch.size());
        double loss = 0.0;
        std::vector<Tensor> grads = std::move(parts[0].grads);
        loss += parts[0].loss;
        for (std::size_t i = 1; i < parts.size(); ++i) {
            loss += parts[i].loss;
            for (std::size_t t = 0; t < grads.size(); ++t)
                for (std::size_t e = 0; e < grads[t].numel(); ++e) grads[t][e] += parts[i].grads[t][e];
        }
        loss *= inv;
        for (auto& g : grads)
            for (auto& v : g.data()) v *= inv;
        if (!std::isfinite(loss))
            throw ContractViolation("training loss became non-finite at batch " + std::to_string(b) + " (seed " +
                                    std::to_string(cfg.seed) + ")");
        result.log.batch_losses.push_back(loss);
        if (b % cfg.validation_interval == 0) record(b, loss);

        std::size_t t = 0;
        for (auto& [_, tensor] : params.tensors()) flat[t++] = std::move(tensor);
        adam.step(flat, grads);
        t = 0;
        for (auto& [_, tensor] : params.tensors()) tensor = flat[t++];
    }

    if (!cfg.checkpoint.empty()) {
        Checkpoint ckpt{result.params,
                        {{"kernel", to_string(cfg.kernel)},
                         {"mode", to_string(cfg.mode)},
                         {"seed", std::to_string(cfg.seed)},
                         {"batches", std::to_string(cfg.batches)}}};
        save_checkpoint(cfg.checkpoint, ckpt);
    }
    return result;
}

}  // namespace kicl
