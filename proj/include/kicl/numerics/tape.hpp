#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "kicl/numerics/tensor.hpp"

namespace kicl {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as its tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const std::vector<std::size_t>& dims() const { return value().dims(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

// Records primitive operations in execution order so that a reverse sweep can
// accumulate vector-Jacobian products. Nodes that do not depend on any
// gradient-requiring leaf store no backward closure.
//
// The tape also counts floating-point operations of every recorded primitive;
// the embedding-overhead benchmark relies on that counter.
class Tape {
public:
    // Receives the node's forward value and output gradient; accumulates into
    // parents via grad_of().
    using BackwardFn = std::function<void(Tape&, const Tensor& out, const Tensor& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var parameter(Tensor value);

    // Used by primitives. `parents` must already be on this tape.
    Var record(Tensor value, std::span<const Var> parents, BackwardFn backward, std::uint64_t flops);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

    // Reverse sweep from a scalar. Clears previous gradients first, so repeated
    // calls on the same loss give identical results.
    void backward(Var loss);

    // Convenience: sweep, then copy gradients of the given leaves. Leaves that
    // did not participate receive exact zeros.
    std::vector<Tensor> backward(Var loss, std::span<const Var> wrt);

    // Gradient of a node after backward(); zeros if it was not reached.
    Tensor grad(Var v) const;

    // Mutable gradient accumulator for a node, allocated on first use. Only
    // valid inside a backward sweep.
    Tensor& grad_of(Var v);

    std::uint64_t flops() const { return flops_; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    std::uint64_t flops_ = 0;
};

}  // namespace kicl
