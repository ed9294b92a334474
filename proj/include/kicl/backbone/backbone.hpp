#pragma once

#include <span>
#include <vector>

#include "kicl/backbone/params.hpp"
#include "kicl/numerics/tape.hpp"

// Three-stage embedding: per-column set attention through inducing vectors,
// per-row feature attention pooled by a learned token, and a label-conditioned
// in-context transformer whose queries only ever attend to context rows.
namespace kicl {

struct Standardized {
    Tensor train;
    Tensor test;
};

// z-score every column with training-set mean and population std. Constant
// columns become all-zero. Non-finite inputs are rejected.
Standardized standardize(const Tensor& features_train, const Tensor& features_test);

// Tokens are laid out column-major: row c*(n+m)+s is feature c of sample s,
// training samples first.
struct ColumnEmbeddings {
    Var tokens;
    std::size_t n = 0, m = 0, d = 0;

    Tensor train() const;  // [n x d x width]
    Tensor test() const;   // [m x d x width]
};

// One pooled vector per sample, training samples first.
struct RowEmbeddings {
    Var all;
    std::size_t n = 0, m = 0;

    Var train() const;
    Var test() const;
};

struct IclEmbeddings {
    Var train;  // [n x width]
    Var test;   // [m x width]
};

ColumnEmbeddings embed_columns(const BoundParameters& p, const Tensor& features_train,
                               const Tensor& features_test);
RowEmbeddings embed_rows(const BoundParameters& p, const ColumnEmbeddings& cols);
Var encode_labels(const BoundParameters& p, std::span<const int> labels);
IclEmbeddings embed_icl_asymmetric(const BoundParameters& p, const RowEmbeddings& rows,
                                   std::span<const int> labels);
IclEmbeddings embed_icl_symmetric(const BoundParameters& p, const RowEmbeddings& rows,
                                  std::span<const int> labels);
IclEmbeddings embed_icl(const BoundParameters& p, const RowEmbeddings& rows, std::span<const int> labels,
                        EmbeddingMode mode);

enum class ProjectionRole { key, query };

// Linear map into the kernel space. Queries use the separate query projection
// only in asymmetric mode on models that carry one.
Var project(const BoundParameters& p, Var embeddings, ProjectionRole role, EmbeddingMode mode);

struct ForwardPass {
    ColumnEmbeddings columns;
    RowEmbeddings rows;
    IclEmbeddings icl;
    Var keys;     // [n x key_dim]
    Var queries;  // [m x key_dim]
};

// Standardize, embed and project. Everything is recorded on p's tape.
ForwardPass forward(const BoundParameters& p, const Tensor& features_train, std::span<const int> labels_train,
                    const Tensor& features_test, EmbeddingMode mode);

struct EmbeddingBundle {
    EmbeddingMode mode = EmbeddingMode::symmetric;
    Tensor col_train, col_test;  // [n|m x d x width]
    Tensor row_train, row_test;  // [n|m x width]
    Tensor icl_train, icl_test;  // [n|m x width]
    Tensor keys, queries;        // [n|m x key_dim]
};

// Inference-only forward pass with every stage materialized.
EmbeddingBundle embed(const ModelParameters& params, const Tensor& features_train,
                      std::span<const int> labels_train, const Tensor& features_test, EmbeddingMode mode);

// Fixed sinusoidal feature-position code added to row-stage tokens.
Tensor feature_position_codes(std::size_t features, std::size_t width);

}  // namespace kicl
