#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kicl/numerics/tape.hpp"
#include "kicl/numerics/tensor.hpp"

namespace kicl {

enum class EmbeddingMode { symmetric, asymmetric };

std::string to_string(EmbeddingMode mode);
EmbeddingMode parse_embedding_mode(const std::string& s);

struct Hyperparameters {
    std::size_t width = 64;
    std::size_t heads = 4;
    std::size_t col_layers = 2;
    std::size_t row_layers = 2;
    std::size_t icl_layers = 2;
    std::size_t inducing = 16;
    std::size_t classes = 2;
    std::size_t key_dim = 64;
    std::size_t ffn_multiplier = 2;
    // Mode the projection was built for. Asymmetric models carry separate
    // query and key projections.
    EmbeddingMode mode = EmbeddingMode::symmetric;
    // Rescale every projected row to unit norm.
    bool unit_norm = false;

    std::size_t ffn_width() const { return width * ffn_multiplier; }
    void validate() const;
    bool operator==(const Hyperparameters&) const = default;
};

// All backbone weights, the label table and the projection(s), keyed by
// dotted names. std::map keeps a stable, sorted iteration order which the
// optimizer and the checkpoint writer both rely on.
class ModelParameters {
public:
    ModelParameters() = default;
    ModelParameters(Hyperparameters hp, std::map<std::string, Tensor> tensors);

    // Random initialization; the label table starts at zero.
    static ModelParameters initialize(const Hyperparameters& hp, std::uint64_t seed);

    const Hyperparameters& hyper() const { return hp_; }
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    const std::map<std::string, Tensor>& tensors() const { return tensors_; }
    std::map<std::string, Tensor>& tensors() { return tensors_; }
    std::size_t parameter_count() const;

    // Checks every tensor against the shapes implied by the hyperparameters.
    void validate() const;

    bool operator==(const ModelParameters&) const = default;

private:
    Hyperparameters hp_;
    std::map<std::string, Tensor> tensors_;
};

// Expected name -> shape table for a configuration.
std::map<std::string, std::vector<std::size_t>> parameter_shapes(const Hyperparameters& hp);

// Parameters placed on a tape as leaves. Order matches ModelParameters::tensors().
class BoundParameters {
public:
    BoundParameters(Tape& tape, const ModelParameters& params, bool trainable);

    Var operator[](const std::string& name) const;
    const Hyperparameters& hyper() const { return hp_; }
    Tape& tape() const { return *tape_; }
    const std::vector<Var>& vars() const { return vars_; }
    const std::vector<std::string>& names() const { return names_; }

private:
    Tape* tape_;
    Hyperparameters hp_;
    std::map<std::string, Var> by_name_;
    std::vector<Var> vars_;
    std::vector<std::string> names_;
};

}  // namespace kicl
