#pragma once

#include <array>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "uqlab/tensor.hpp"

namespace uqlab {

class Tape;

/// Handle to a node on a tape: a tensor value plus its slot in the
/// differentiation record.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
};

enum class OpKind {
    Leaf,
    MatMul,
    Add,        // same shape, or matrix + row-vector broadcast
    Sub,
    Mul,
    Div,
    Relu,
    Softmax,    // row-wise
    LogSoftmax, // row-wise
    Log,
    Exp,
    Cos,
    Sum,
    Mean,
    L2Norm,
    Dropout,
    GatherRows,
    Affine,     // a*x + b elementwise
};

/// Reverse-mode tape: an append-only record of primitive operations in
/// topological order (parents always precede children). A backward pass
/// visits each reachable node exactly once, in reverse.
class Tape {
public:
    Var leaf(Tensor value, bool requires_grad = false);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var relu(Var x);
    Var softmax(Var x);
    Var log_softmax(Var x);
    Var log(Var x);
    Var exp(Var x);
    Var cos(Var x);
    Var sum(Var x);
    Var mean(Var x);
    Var l2_norm(Var x);
    Var dropout(Var x, double rate, Rng& rng);
    Var gather_rows(Var x, const std::vector<std::size_t>& indices);
    Var affine(Var x, double scale, double shift);

    /// Accumulates d(loss)/d(node) into every node reachable from `loss`.
    /// Deterministic: identical inputs yield bitwise-identical gradients.
    void backward(Var loss);

    const Tensor& value(Var v) const;
    const Tensor& grad(Var v) const;

    /// Node-id keyed view of all gradients populated by the last backward().
    std::unordered_map<int, const Tensor*> gradient_map() const;

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        OpKind kind = OpKind::Leaf;
        Tensor value;
        Tensor grad;
        bool has_grad = false;
        std::array<int, 2> parents{-1, -1};
        Tensor aux;                      // dropout mask
        std::vector<std::size_t> indices; // gather-rows
        double a = 0.0, b = 0.0;         // affine coefficients
    };

    int push(Node n);
    const Node& node_checked(Var v, const char* who) const;
    Var unary(OpKind kind, Var x, const char* name);
    void backprop_node(int id);

    std::vector<Node> nodes_;
};

// Free-function spellings so expressions read naturally.
inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var add(Var a, Var b) { return a.tape->add(a, b); }
inline Var sub(Var a, Var b) { return a.tape->sub(a, b); }
inline Var mul(Var a, Var b) { return a.tape->mul(a, b); }
inline Var div(Var a, Var b) { return a.tape->div(a, b); }
inline Var relu(Var x) { return x.tape->relu(x); }
inline Var softmax(Var x) { return x.tape->softmax(x); }
inline Var log_softmax(Var x) { return x.tape->log_softmax(x); }
inline Var log(Var x) { return x.tape->log(x); }
inline Var exp(Var x) { return x.tape->exp(x); }
inline Var cos(Var x) { return x.tape->cos(x); }
inline Var sum(Var x) { return x.tape->sum(x); }
inline Var mean(Var x) { return x.tape->mean(x); }
inline Var l2_norm(Var x) { return x.tape->l2_norm(x); }
inline Var dropout(Var x, double rate, Rng& rng) { return x.tape->dropout(x, rate, rng); }
inline Var gather_rows(Var x, const std::vector<std::size_t>& idx) {
    return x.tape->gather_rows(x, idx);
}
inline Var affine(Var x, double scale, double shift) { return x.tape->affine(x, scale, shift); }

} // namespace uqlab
