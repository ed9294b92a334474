#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <vector>

#include "kicl/backbone/backbone.hpp"
#include "kicl/backbone/params.hpp"
#include "kicl/kernels/kernels.hpp"
#include "kicl/numerics/adam.hpp"
#include "kicl/priorgen/dataset.hpp"
#include "kicl/priorgen/prior.hpp"

namespace kicl {

struct TrainConfig {
    KernelKind kernel = KernelKind::gaussian;  // dot or gaussian
    EmbeddingMode mode = EmbeddingMode::symmetric;
    Hyperparameters model;
    std::size_t batches = 500;
    std::size_t validation_batches = 2;
    std::size_t validation_interval = 25;
    AdamOptions adam;
    std::uint64_t seed = 0;
    // Written with the best parameters when non-empty.
    std::filesystem::path checkpoint;

    void validate() const;
};

struct TrainLogRow {
    std::size_t batch = 0;  // optimizer steps taken before this row
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
    std::vector<double> batch_losses;  // one per optimizer step
    std::size_t best = 0;              // index into rows

    // Columns: batch,train_loss,val_loss,seconds
    void write_csv(const std::filesystem::path& path) const;
    // Everything except wall time.
    bool same_losses(const TrainLog& other) const;
};

struct TrainResult {
    ModelParameters params;  // at the best validation loss
    TrainLog log;
};

using BatchSource = std::function<std::vector<Dataset>(std::uint64_t batch_index)>;

TrainResult train(const TrainConfig& config, const PriorConfig& prior);
// Explicit data: `source` supplies batch b, `validation` is the held-out pool.
TrainResult train(const TrainConfig& config, const BatchSource& source, const std::vector<Dataset>& validation);

// The fixed validation pool drawn from the prior (disjoint batch indices).
std::vector<Dataset> validation_pool(const PriorConfig& prior, std::size_t batches);

// Mean cross-entropy of the test points of one dataset under the kernel's
// default scale. Recorded on p's tape.
Var dataset_loss(const BoundParameters& p, const Dataset& ds, KernelKind kernel, EmbeddingMode mode);

struct LossAndGrad {
    double loss = 0.0;
    std::vector<Tensor> grads;  // ModelParameters::tensors() order
};

LossAndGrad loss_and_grad(const ModelParameters& params, const Dataset& ds, KernelKind kernel, EmbeddingMode mode);
// Mean over datasets of dataset_loss, without gradients.
double mean_loss(const ModelParameters& params, const std::vector<Dataset>& datasets, KernelKind kernel,
                 EmbeddingMode mode);

// Checkpoint for the requested kernel. kNN reuses the Gaussian-trained model.
const ModelParameters& embeddings_for_kernel(KernelKind requested,
                                             const std::map<KernelKind, ModelParameters>& trained);
// The kernel whose trained embeddings serve `requested`.
KernelKind training_kernel_for(KernelKind requested);

}  // namespace kicl
