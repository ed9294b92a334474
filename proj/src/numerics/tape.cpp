#include "kicl/numerics/tape.hpp"

#include "kicl/error.hpp"

namespace kicl {

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, false, true, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn backward,
                 std::uint64_t flops) {
    bool needs = false;
    for (const auto& p : parents) {
        KICL_REQUIRE(p.tape == this, "operand recorded on a different tape");
        needs = needs || nodes_[p.id].requires_grad;
    }
    flops_ += flops;
    nodes_.push_back(Node{std::move(value), {}, false, needs, needs ? std::move(backward) : BackwardFn{}});
    return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_of(Var v) {
    auto& node = nodes_[v.id];
    if (!node.has_grad) {
        node.grad = Tensor(node.value.dims());
        node.has_grad = true;
    }
    return node.grad;
}

void Tape::backward(Var loss) {
    KICL_REQUIRE(loss.tape == this, "loss belongs to another tape");
    KICL_REQUIRE(nodes_[loss.id].value.numel() == 1,
                 "backward needs a scalar loss, got shape " + shape_string(nodes_[loss.id].value.dims()));
    for (auto& n : nodes_) {
        n.grad = Tensor();
        n.has_grad = false;
    }
    grad_of(loss)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        auto& node = nodes_[i];
        if (!node.has_grad || !node.backward) continue;
        // The closure may allocate parent gradients, which never reallocates nodes_.
        node.backward(*this, node.value, node.grad);
    }
}

std::vector<Tensor> Tape::backward(Var loss, std::span<const Var> wrt) {
    backward(loss);
    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (const auto& v : wrt) out.push_back(grad(v));
    return out;
}

Tensor Tape::grad(Var v) const {
    const auto& node = nodes_[v.id];
    return node.has_grad ? node.grad : Tensor(node.value.dims());
}

}  // namespace kicl
