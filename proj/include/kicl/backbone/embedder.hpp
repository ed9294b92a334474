#pragma once

#include <memory>
#include <span>
#include <string>

#include "kicl/backbone/params.hpp"
#include "kicl/numerics/tensor.hpp"

namespace kicl {

// Keys for the context rows and queries for the test rows in kernel space.
struct KernelSpace {
    Tensor keys;     // [n x k]
    Tensor queries;  // [m x k]
};

// Maps a (context, queries) pair into the space where the kernel is applied.
// Implementations must be safe to call concurrently.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual KernelSpace embed(const Tensor& features_train, std::span<const int> labels_train,
                              const Tensor& features_test) const = 0;
    virtual std::string name() const = 0;
};

// Standardized raw features; the classical kernel-regression baseline.
class InputSpaceEmbedder final : public Embedder {
public:
    KernelSpace embed(const Tensor& features_train, std::span<const int> labels_train,
                      const Tensor& features_test) const override;
    std::string name() const override { return "input"; }
};

// Projected keys and queries of a trained backbone.
class ModelEmbedder final : public Embedder {
public:
    ModelEmbedder(ModelParameters params, EmbeddingMode mode);
    KernelSpace embed(const Tensor& features_train, std::span<const int> labels_train,
                      const Tensor& features_test) const override;
    std::string name() const override { return "kernelicl-" + to_string(mode_); }
    const ModelParameters& params() const { return params_; }
    EmbeddingMode mode() const { return mode_; }

private:
    ModelParameters params_;
    EmbeddingMode mode_;
};

}  // namespace kicl
