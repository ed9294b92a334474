#include "kicl/backbone/embedder.hpp"

#include "kicl/backbone/backbone.hpp"
#include "kicl/error.hpp"

namespace kicl {

KernelSpace InputSpaceEmbedder::embed(const Tensor& x_train, std::span<const int> y_train,
                                      const Tensor& x_test) const {
    KICL_REQUIRE(y_train.size() == x_train.rows(), "label count does not match training rows");
    auto z = standardize(x_train, x_test);
    return {std::move(z.train), std::move(z.test)};
}

ModelEmbedder::ModelEmbedder(ModelParameters params, EmbeddingMode mode) : params_(std::move(params)), mode_(mode) {
    KICL_REQUIRE(mode == EmbeddingMode::symmetric || params_.hyper().mode == EmbeddingMode::asymmetric,
                 "asymmetric embedding needs a model with a query projection");
}

KernelSpace ModelEmbedder::embed(const Tensor& x_train, std::span<const int> y_train, const Tensor& x_test) const {
    auto b = kicl::embed(params_, x_train, y_train, x_test, mode_);
    return {std::move(b.keys), std::move(b.queries)};
}

}  // namespace kicl
