#include "kicl/backbone/flops.hpp"

#include "kicl/numerics/ops.hpp"

namespace kicl {

using ops::cost::kLayerNormPerElement;

std::uint64_t feed_forward_flops(const Hyperparameters& hp, std::uint64_t r) {
    const std::uint64_t w = hp.width, f = hp.ffn_width();
    return kLayerNormPerElement * r * w                    // ln_ff
           + ops::cost::matmul(r, w, f) + r * f            // ff1 + bias
           + ops::cost::kGeluPerElement * r * f            // activation
           + ops::cost::matmul(r, f, w) + r * w            // ff2 + bias
           + r * w;                                        // residual
}

namespace {

std::uint64_t attend_flops(const Hyperparameters& hp, std::uint64_t q_rows, std::uint64_t kv_rows,
                           std::uint64_t groups) {
    const std::uint64_t w = hp.width;
    return ops::cost::matmul(q_rows, w, w)           // wq
           + 2 * ops::cost::matmul(kv_rows, w, w)    // wk, wv
           + groups * ops::cost::attention(q_rows / groups, kv_rows / groups, w, hp.heads)
           + ops::cost::matmul(q_rows, w, w);        // wo
}

}  // namespace

std::uint64_t self_block_flops(const Hyperparameters& hp, std::uint64_t r, std::uint64_t kv, std::uint64_t g) {
    const std::uint64_t w = hp.width;
    return kLayerNormPerElement * r * w + attend_flops(hp, r, kv, g) + r * w + feed_forward_flops(hp, r);
}

std::uint64_t cross_block_flops(const Hyperparameters& hp, std::uint64_t q, std::uint64_t kv, std::uint64_t g) {
    const std::uint64_t w = hp.width;
    return kLayerNormPerElement * (q + kv) * w + attend_flops(hp, q, kv, g) + q * w + feed_forward_flops(hp, q);
}

EmbeddingFlops embedding_flops(const Hyperparameters& hp, std::uint64_t n, std::uint64_t m, std::uint64_t d,
                               EmbeddingMode mode) {
    const std::uint64_t w = hp.width, total = n + m, induce = hp.inducing;
    EmbeddingFlops f;

    f.columns = ops::cost::matmul(d * total, 1, w) + d * total * w;
    for (std::size_t l = 0; l < hp.col_layers; ++l) {
        f.columns += cross_block_flops(hp, d * induce, d * n, d);
        f.columns += cross_block_flops(hp, d * total, d * induce, d);
    }
    f.columns += kLayerNormPerElement * d * total * w;

    const std::uint64_t tokens = total * (d + 1);
    f.rows = tokens * w;
    for (std::size_t l = 0; l < hp.row_layers; ++l) f.rows += self_block_flops(hp, tokens, tokens, total);
    f.rows += kLayerNormPerElement * total * w;

    const std::uint64_t icl_rows = mode == EmbeddingMode::symmetric ? 2 * n + m : n + m;
    f.icl = n * w;
    for (std::size_t l = 0; l < hp.icl_layers; ++l) f.icl += self_block_flops(hp, icl_rows, n, 1);
    f.icl += kLayerNormPerElement * icl_rows * w;

    f.projection = ops::cost::matmul(n, w, hp.key_dim) + ops::cost::matmul(m, w, hp.key_dim);
    if (hp.unit_norm) f.projection += 3 * (n + m) * hp.key_dim;
    return f;
}

}  // namespace kicl
