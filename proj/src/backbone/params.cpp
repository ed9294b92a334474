#include "kicl/backbone/params.hpp"

#include <cmath>
#include <random>

#include "kicl/error.hpp"

namespace kicl {

std::string to_string(EmbeddingMode mode) {
    return mode == EmbeddingMode::symmetric ? "symmetric" : "asymmetric";
}

EmbeddingMode parse_embedding_mode(const std::string& s) {
    if (s == "symmetric") return EmbeddingMode::symmetric;
    if (s == "asymmetric") return EmbeddingMode::asymmetric;
    throw ContractViolation("unknown embedding mode '" + s + "' (expected symmetric|asymmetric)");
}

void Hyperparameters::validate() const {
    KICL_REQUIRE(width >= 1 && heads >= 1, "width and heads must be positive");
    KICL_REQUIRE(width % heads == 0, "width must be divisible by the head count");
    KICL_REQUIRE(col_layers >= 1 && row_layers >= 1 && icl_layers >= 1, "every stage needs a layer");
    KICL_REQUIRE(inducing >= 1, "at least one inducing vector is required");
    KICL_REQUIRE(classes >= 2, "at least two classes are required");
    KICL_REQUIRE(key_dim >= 1, "key dimension must be at least 1");
    KICL_REQUIRE(ffn_multiplier >= 1, "ffn multiplier must be at least 1");
}

namespace {

void add_block(std::map<std::string, std::vector<std::size_t>>& s, const std::string& p,
               const Hyperparameters& hp, bool cross) {
    const auto w = hp.width, f = hp.ffn_width();
    s[p + ".ln_q.g"] = {w};
    s[p + ".ln_q.b"] = {w};
    if (cross) {
        s[p + ".ln_kv.g"] = {w};
        s[p + ".ln_kv.b"] = {w};
    }
    for (const char* m : {".wq", ".wk", ".wv", ".wo"}) s[p + m] = {w, w};
    s[p + ".ln_ff.g"] = {w};
    s[p + ".ln_ff.b"] = {w};
    s[p + ".ff1.w"] = {w, f};
    s[p + ".ff1.b"] = {f};
    s[p + ".ff2.w"] = {f, w};
    s[p + ".ff2.b"] = {w};
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::map<std::string, std::vector<std::size_t>> parameter_shapes(const Hyperparameters& hp) {
    hp.validate();
    std::map<std::string, std::vector<std::size_t>> s;
    const auto w = hp.width;
    s["col.embed.w"] = {1, w};
    s["col.embed.b"] = {w};
    for (std::size_t l = 0; l < hp.col_layers; ++l) {
        const auto p = "col." + std::to_string(l);
        s[p + ".inducing"] = {hp.inducing, w};
        add_block(s, p + ".ind", hp, true);
        add_block(s, p + ".out", hp, true);
    }
    s["col.norm.g"] = {w};
    s["col.norm.b"] = {w};
    s["row.cls"] = {1, w};
    for (std::size_t l = 0; l < hp.row_layers; ++l) add_block(s, "row." + std::to_string(l), hp, false);
    s["row.norm.g"] = {w};
    s["row.norm.b"] = {w};
    s["label.table"] = {hp.classes, w};
    for (std::size_t l = 0; l < hp.icl_layers; ++l) add_block(s, "icl." + std::to_string(l), hp, false);
    s["icl.norm.g"] = {w};
    s["icl.norm.b"] = {w};
    s["proj.key"] = {w, hp.key_dim};
    if (hp.mode == EmbeddingMode::asymmetric) s["proj.query"] = {w, hp.key_dim};
    return s;
}

ModelParameters::ModelParameters(Hyperparameters hp, std::map<std::string, Tensor> tensors)
    : hp_(hp), tensors_(std::move(tensors)) {
    validate();
}

ModelParameters ModelParameters::initialize(const Hyperparameters& hp, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::map<std::string, Tensor> tensors;
    for (const auto& [name, dims] : parameter_shapes(hp)) {
        Tensor t(dims);
        if (ends_with(name, ".g")) {
            for (auto& v : t.data()) v = 1.0;
        } else if (name == "label.table" || ends_with(name, ".b")) {
            // zeros; col.embed.b is the exception below
        } else {
            const double fan_in = dims.size() == 2 ? static_cast<double>(dims[0]) : 1.0;
            double sd = 1.0 / std::sqrt(fan_in);
            if (name == "row.cls" || ends_with(name, ".inducing")) sd = 1.0;
            for (auto& v : t.data()) v = sd * normal(rng);
        }
        if (name == "col.embed.b")
            for (auto& v : t.data()) v = normal(rng);
        tensors.emplace(name, std::move(t));
    }
    return ModelParameters(hp, std::move(tensors));
}

const Tensor& ModelParameters::at(const std::string& name) const {
    auto it = tensors_.find(name);
    KICL_REQUIRE(it != tensors_.end(), "missing model parameter '" + name + "'");
    return it->second;
}

Tensor& ModelParameters::at(const std::string& name) {
    auto it = tensors_.find(name);
    KICL_REQUIRE(it != tensors_.end(), "missing model parameter '" + name + "'");
    return it->second;
}

std::size_t ModelParameters::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.numel();
    return n;
}

void ModelParameters::validate() const {
    const auto shapes = parameter_shapes(hp_);
    KICL_REQUIRE(shapes.size() == tensors_.size(),
                 "model has " + std::to_string(tensors_.size()) + " tensors, configuration expects " +
                     std::to_string(shapes.size()));
    for (const auto& [name, dims] : shapes) {
        auto it = tensors_.find(name);
        KICL_REQUIRE(it != tensors_.end(), "missing model parameter '" + name + "'");
        KICL_REQUIRE(it->second.dims() == dims, "parameter '" + name + "' has shape " +
                                                    shape_string(it->second.dims()) + ", expected " +
                                                    shape_string(dims));
    }
}

BoundParameters::BoundParameters(Tape& tape, const ModelParameters& params, bool trainable)
    : tape_(&tape), hp_(params.hyper()) {
    for (const auto& [name, t] : params.tensors()) {
        Var v = trainable ? tape.parameter(t) : tape.constant(t);
        by_name_.emplace(name, v);
        vars_.push_back(v);
        names_.push_back(name);
    }
}

Var BoundParameters::operator[](const std::string& name) const {
    auto it = by_name_.find(name);
    KICL_REQUIRE(it != by_name_.end(), "missing model parameter '" + name + "'");
    return it->second;
}

}  // namespace kicl
