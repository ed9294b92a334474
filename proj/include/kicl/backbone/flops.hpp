#pragma once

#include <cstdint>

#include "kicl/backbone/params.hpp"

namespace kicl {

// Analytic operation count of one embedding pass, split by stage. Follows the
// same per-primitive conventions as the tape counter (see ops::cost), so for
// any shape it equals Tape::flops() after forward().
struct EmbeddingFlops {
    std::uint64_t columns = 0;
    std::uint64_t rows = 0;
    std::uint64_t icl = 0;
    std::uint64_t projection = 0;

    std::uint64_t embedding() const { return columns + rows + icl; }
    std::uint64_t total() const { return embedding() + projection; }
};

EmbeddingFlops embedding_flops(const Hyperparameters& hp, std::uint64_t n, std::uint64_t m, std::uint64_t d,
                               EmbeddingMode mode);

// Building blocks, exposed for hand-count tests.
std::uint64_t feed_forward_flops(const Hyperparameters& hp, std::uint64_t rows);
std::uint64_t self_block_flops(const Hyperparameters& hp, std::uint64_t rows, std::uint64_t kv_rows,
                               std::uint64_t groups);
std::uint64_t cross_block_flops(const Hyperparameters& hp, std::uint64_t q_rows, std::uint64_t kv_rows,
                                std::uint64_t groups);

}  // namespace kicl
