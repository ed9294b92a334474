#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kicl/numerics/tape.hpp"

// Differentiable primitives. Every function records one node on the tape of
// its first operand. Shapes are checked eagerly and reported as
// ContractViolation. Unless stated otherwise, operands are rank-2.
namespace kicl::ops {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// x[r x c] + b broadcast over rows; b has c elements.
Var add_bias(Var x, Var b);

Var gelu(Var x);
Var exp(Var x);
Var log(Var x);
// Values are clipped to [lo, hi]; gradient is zero where clipping was active.
Var clamp(Var x, double lo, double hi);

// Per-row normalization with affine gamma/beta (each c elements).
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
// Softmax along the last axis, with per-row max subtraction.
Var softmax_rows(Var x);
// Scales each row to unit Euclidean norm.
Var row_normalize(Var x);

// Multi-head scaled dot-product attention over contiguous groups.
// q: [groups*lq x width], k and v: [groups*lk x width]. Query rows of group g
// attend to key rows of group g only. Heads split the width evenly.
struct AttentionLayout {
    std::size_t groups = 1;
    std::size_t heads = 1;
};
Var attention(Var q, Var k, Var v, AttentionLayout layout);

// out[i] = x[indices[i]]; repeated indices scatter-add on the way back.
Var gather_rows(Var x, std::vector<std::size_t> indices);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var reshape(Var x, std::vector<std::size_t> dims);
Var transpose(Var x);

// out[r] = x[r, cols[r]], shape [r x 1].
Var select_per_row(Var x, std::vector<std::size_t> cols);

Var sum(Var x);
Var mean(Var x);

// out[i][j] = ||q_i - k_j||^2, computed from explicit differences.
Var sqdist(Var q, Var k);

// Static FLOP conventions shared with the analytic counter in backbone/flops.
namespace cost {
inline constexpr std::uint64_t kLayerNormPerElement = 7;
inline constexpr std::uint64_t kSoftmaxPerElement = 4;
inline constexpr std::uint64_t kGeluPerElement = 1;
inline std::uint64_t matmul(std::uint64_t m, std::uint64_t k, std::uint64_t n) { return 2 * m * k * n; }
// Scores + scaling + softmax + weighted sum, per group.
inline std::uint64_t attention(std::uint64_t lq, std::uint64_t lk, std::uint64_t width,
                               std::uint64_t heads) {
    return 4 * lq * lk * width + (1 + kSoftmaxPerElement) * lq * lk * heads;
}
}  // namespace cost

}  // namespace kicl::ops
