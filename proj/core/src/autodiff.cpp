#include "uqlab/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace uqlab {

namespace {

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Leaf: return "leaf";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::Relu: return "relu";
        case OpKind::Softmax: return "softmax";
        case OpKind::LogSoftmax: return "log-softmax";
        case OpKind::Log: return "log";
        case OpKind::Exp: return "exp";
        case OpKind::Cos: return "cos";
        case OpKind::Sum: return "sum";
        case OpKind::Mean: return "mean";
        case OpKind::L2Norm: return "l2-norm";
        case OpKind::Dropout: return "dropout";
        case OpKind::GatherRows: return "gather-rows";
        case OpKind::Affine: return "affine";
    }
    return "?";
}

[[noreturn]] void shape_fail(OpKind kind, const Tensor& a, const Tensor& b) {
    throw ValueError(std::string(op_name(kind)) + ": incompatible shapes " +
                     shape_str(a.shape) + " and " + shape_str(b.shape));
}

// Treat rank-1 tensors as a single row; rank-2 as row-major matrix.
std::pair<std::size_t, std::size_t> row_view(const Tensor& t, OpKind kind) {
    if (t.rank() == 1) return {1, t.shape[0]};
    if (t.rank() == 2) return {t.shape[0], t.shape[1]};
    throw ValueError(std::string(op_name(kind)) + ": expects rank 1 or 2, got " +
                     shape_str(t.shape));
}

} // namespace

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

const Tape::Node& Tape::node_checked(Var v, const char* who) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw ValueError(std::string(who) + ": node not on this tape");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.kind = OpKind::Leaf;
    n.value = std::move(value);
    n.a = requires_grad ? 1.0 : 0.0;
    return Var{this, push(std::move(n))};
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& av = node_checked(a, "matmul").value;
    const Tensor& bv = node_checked(b, "matmul").value;
    Node n;
    n.kind = OpKind::MatMul;
    n.parents = {a.id, b.id};
    if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0]) shape_fail(n.kind, av, bv);
    n.value = matmul_plain(av, bv);
    return Var{this, push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = node_checked(a, "add").value;
    const Tensor& bv = node_checked(b, "add").value;
    Node n;
    n.kind = OpKind::Add;
    n.parents = {a.id, b.id};
    if (av.same_shape(bv)) {
        n.value = av;
        for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.values[i] += bv.values[i];
    } else if (av.rank() == 2 && bv.rank() == 1 && av.shape[1] == bv.shape[0]) {
        // broadcast row vector over matrix rows
        n.value = av;
        const std::size_t rows = av.shape[0], cols = av.shape[1];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) n.value.values[r * cols + c] += bv.values[c];
    } else {
        shape_fail(n.kind, av, bv);
    }
    return Var{this, push(std::move(n))};
}

Var Tape::sub(Var a, Var b) {
    const Tensor& av = node_checked(a, "sub").value;
    const Tensor& bv = node_checked(b, "sub").value;
    Node n;
    n.kind = OpKind::Sub;
    n.parents = {a.id, b.id};
    if (av.same_shape(bv)) {
        n.value = av;
        for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.values[i] -= bv.values[i];
    } else if (av.rank() == 2 && bv.rank() == 1 && av.shape[1] == bv.shape[0]) {
        n.value = av;
        const std::size_t rows = av.shape[0], cols = av.shape[1];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) n.value.values[r * cols + c] -= bv.values[c];
    } else {
        shape_fail(n.kind, av, bv);
    }
    return Var{this, push(std::move(n))};
}

Var Tape::mul(Var a, Var b) {
    const Tensor& av = node_checked(a, "mul").value;
    const Tensor& bv = node_checked(b, "mul").value;
    if (!av.same_shape(bv)) shape_fail(OpKind::Mul, av, bv);
    Node n;
    n.kind = OpKind::Mul;
    n.parents = {a.id, b.id};
    n.value = av;
    for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.values[i] *= bv.values[i];
    return Var{this, push(std::move(n))};
}

Var Tape::div(Var a, Var b) {
    const Tensor& av = node_checked(a, "div").value;
    const Tensor& bv = node_checked(b, "div").value;
    if (!av.same_shape(bv)) shape_fail(OpKind::Div, av, bv);
    Node n;
    n.kind = OpKind::Div;
    n.parents = {a.id, b.id};
    n.value = av;
    for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.values[i] /= bv.values[i];
    return Var{this, push(std::move(n))};
}

Var Tape::unary(OpKind kind, Var x, const char* name) {
    const Tensor& xv = node_checked(x, name).value;
    Node n;
    n.kind = kind;
    n.parents = {x.id, -1};
    n.value = xv;
    return Var{this, push(std::move(n))};
}

Var Tape::relu(Var x) {
    Var v = unary(OpKind::Relu, x, "relu");
    for (double& e : nodes_[v.id].value.values) e = e > 0.0 ? e : 0.0;
    return v;
}

Var Tape::softmax(Var x) {
    Var v = unary(OpKind::Softmax, x, "softmax");
    Tensor& out = nodes_[v.id].value;
    auto [rows, cols] = row_view(out, OpKind::Softmax);
    for (std::size_t r = 0; r < rows; ++r) {
        double* p = &out.values[r * cols];
        double mx = p[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, p[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            p[c] = std::exp(p[c] - mx);
            z += p[c];
        }
        for (std::size_t c = 0; c < cols; ++c) p[c] /= z;
    }
    return v;
}

Var Tape::log_softmax(Var x) {
    Var v = unary(OpKind::LogSoftmax, x, "log-softmax");
    Tensor& out = nodes_[v.id].value;
    auto [rows, cols] = row_view(out, OpKind::LogSoftmax);
    for (std::size_t r = 0; r < rows; ++r) {
        double* p = &out.values[r * cols];
        double mx = p[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, p[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) z += std::exp(p[c] - mx);
        const double lz = mx + std::log(z);
        for (std::size_t c = 0; c < cols; ++c) p[c] -= lz;
    }
    return v;
}

Var Tape::log(Var x) {
    Var v = unary(OpKind::Log, x, "log");
    for (double& e : nodes_[v.id].value.values) e = std::log(e);
    return v;
}

Var Tape::exp(Var x) {
    Var v = unary(OpKind::Exp, x, "exp");
    for (double& e : nodes_[v.id].value.values) e = std::exp(e);
    return v;
}

Var Tape::cos(Var x) {
    Var v = unary(OpKind::Cos, x, "cos");
    for (double& e : nodes_[v.id].value.values) e = std::cos(e);
    return v;
}

Var Tape::sum(Var x) {
    const Tensor& xv = node_checked(x, "sum").value;
    Node n;
    n.kind = OpKind::Sum;
    n.parents = {x.id, -1};
    double s = 0.0;
    for (double e : xv.values) s += e;
    n.value = Tensor::scalar(s);
    return Var{this, push(std::move(n))};
}

Var Tape::mean(Var x) {
    const Tensor& xv = node_checked(x, "mean").value;
    if (xv.numel() == 0) throw ValueError("mean: empty tensor");
    Node n;
    n.kind = OpKind::Mean;
    n.parents = {x.id, -1};
    double s = 0.0;
    for (double e : xv.values) s += e;
    n.value = Tensor::scalar(s / static_cast<double>(xv.numel()));
    return Var{this, push(std::move(n))};
}

Var Tape::l2_norm(Var x) {
    const Tensor& xv = node_checked(x, "l2-norm").value;
    Node n;
    n.kind = OpKind::L2Norm;
    n.parents = {x.id, -1};
    n.value = Tensor::scalar(xv.l2_norm());
    return Var{this, push(std::move(n))};
}

Var Tape::dropout(Var x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ValueError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    }
    const Tensor& xv = node_checked(x, "dropout").value;
    Node n;
    n.kind = OpKind::Dropout;
    n.parents = {x.id, -1};
    n.aux = Tensor(xv.shape);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& m : n.aux.values) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
    n.value = xv;
    for (std::size_t i = 0; i < n.value.numel(); ++i) n.value.values[i] *= n.aux.values[i];
    return Var{this, push(std::move(n))};
}

Var Tape::gather_rows(Var x, const std::vector<std::size_t>& indices) {
    const Tensor& xv = node_checked(x, "gather-rows").value;
    if (xv.rank() != 2) {
        throw ValueError("gather-rows: expects a matrix, got " + shape_str(xv.shape));
    }
    const std::size_t rows = xv.shape[0], cols = xv.shape[1];
    Node n;
    n.kind = OpKind::GatherRows;
    n.parents = {x.id, -1};
    n.indices = indices;
    n.value = Tensor({indices.size(), cols});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= rows) {
            throw ValueError("gather-rows: index " + std::to_string(indices[k]) +
                             " out of range for " + shape_str(xv.shape));
        }
        std::copy_n(&xv.values[indices[k] * cols], cols, &n.value.values[k * cols]);
    }
    return Var{this, push(std::move(n))};
}

Var Tape::affine(Var x, double scale, double shift) {
    Var v = unary(OpKind::Affine, x, "affine");
    Node& n = nodes_[v.id];
    n.a = scale;
    n.b = shift;
    for (double& e : n.value.values) e = scale * e + shift;
    return v;
}

const Tensor& Tape::value(Var v) const { return node_checked(v, "value").value; }

const Tensor& Tape::grad(Var v) const {
    const Node& n = node_checked(v, "grad");
    if (!n.has_grad) throw ValueError("grad: no gradient recorded; run backward first");
    return n.grad;
}

std::unordered_map<int, const Tensor*> Tape::gradient_map() const {
    std::unordered_map<int, const Tensor*> m;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].has_grad) m.emplace(static_cast<int>(i), &nodes_[i].grad);
    }
    return m;
}

void Tape::backward(Var loss) {
    const Node& ln = node_checked(loss, "backward");
    if (!ln.value.is_scalar()) {
        throw ValueError("backward: loss must be scalar, got " + shape_str(ln.value.shape));
    }
    // reachability pass so each needed node is visited exactly once
    std::vector<char> needed(nodes_.size(), 0);
    needed[loss.id] = 1;
    for (int i = loss.id; i >= 0; --i) {
        if (!needed[i]) continue;
        for (int p : nodes_[i].parents)
            if (p >= 0) needed[p] = 1;
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        nodes_[i].has_grad = false;
        const bool grad_leaf = nodes_[i].kind == OpKind::Leaf && nodes_[i].a != 0.0;
        if (needed[i] || grad_leaf) {
            nodes_[i].grad = Tensor(nodes_[i].value.shape);
            nodes_[i].has_grad = true;
        }
    }
    nodes_[loss.id].grad.values[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        if (needed[i]) backprop_node(i);
    }
}

void Tape::backprop_node(int id) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    auto parent_grad = [&](int slot) -> Tensor& { return nodes_[n.parents[slot]].grad; };
    auto parent_val = [&](int slot) -> const Tensor& { return nodes_[n.parents[slot]].value; };

    switch (n.kind) {
        case OpKind::Leaf:
            break;
        case OpKind::MatMul: {
            const Tensor& a = parent_val(0);
            const Tensor& b = parent_val(1);
            Tensor& ga = parent_grad(0);
            Tensor& gb = parent_grad(1);
            const std::size_t m = a.shape[0], k = a.shape[1], c = b.shape[1];
            // ga += g * b^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    const double gv = g.values[i * c + j];
                    if (gv == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p)
                        ga.values[i * k + p] += gv * b.values[p * c + j];
                }
            // gb += a^T * g
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = a.values[i * k + p];
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < c; ++j)
                        gb.values[p * c + j] += av * g.values[i * c + j];
                }
            break;
        }
        case OpKind::Add: {
            Tensor& ga = parent_grad(0);
            Tensor& gb = parent_grad(1);
            for (std::size_t i = 0; i < g.numel(); ++i) ga.values[i] += g.values[i];
            if (parent_val(1).same_shape(n.value)) {
                for (std::size_t i = 0; i < g.numel(); ++i) gb.values[i] += g.values[i];
            } else {  // broadcast: column sums
                const std::size_t rows = n.value.shape[0], cols = n.value.shape[1];
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) gb.values[c] += g.values[r * cols + c];
            }
            break;
        }
        case OpKind::Sub: {
            Tensor& ga = parent_grad(0);
            Tensor& gb = parent_grad(1);
            for (std::size_t i = 0; i < g.numel(); ++i) ga.values[i] += g.values[i];
            if (parent_val(1).same_shape(n.value)) {
                for (std::size_t i = 0; i < g.numel(); ++i) gb.values[i] -= g.values[i];
            } else {
                const std::size_t rows = n.value.shape[0], cols = n.value.shape[1];
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) gb.values[c] -= g.values[r * cols + c];
            }
            break;
        }
        case OpKind::Mul: {
            const Tensor& a = parent_val(0);
            const Tensor& b = parent_val(1);
            Tensor& ga = parent_grad(0);
            Tensor& gb = parent_grad(1);
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga.values[i] += g.values[i] * b.values[i];
                gb.values[i] += g.values[i] * a.values[i];
            }
            break;
        }
        case OpKind::Div: {
            const Tensor& a = parent_val(0);
            const Tensor& b = parent_val(1);
            Tensor& ga = parent_grad(0);
            Tensor& gb = parent_grad(1);
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga.values[i] += g.values[i] / b.values[i];
                gb.values[i] -= g.values[i] * a.values[i] / (b.values[i] * b.values[i]);
            }
            break;
        }
        case OpKind::Relu: {
            const Tensor& x = parent_val(0);
            Tensor& gx = parent_grad(0);
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (x.values[i] > 0.0) gx.values[i] += g.values[i];
            break;
        }
        case OpKind::Softmax: {
            Tensor& gx = parent_grad(0);
            const Tensor& p = n.value;
            auto [rows, cols] = row_view(p, OpKind::Softmax);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* pr = &p.values[r * cols];
                const double* gr = &g.values[r * cols];
                double dot = 0.0;
                for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * pr[c];
                for (std::size_t c = 0; c < cols; ++c)
                    gx.values[r * cols + c] += pr[c] * (gr[c] - dot);
            }
            break;
        }
        case OpKind::LogSoftmax: {
            Tensor& gx = parent_grad(0);
            const Tensor& lp = n.value;
            auto [rows, cols] = row_view(lp, OpKind::LogSoftmax);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* lpr = &lp.values[r * cols];
                const double* gr = &g.values[r * cols];
                double gsum = 0.0;
                for (std::size_t c = 0; c < cols; ++c) gsum += gr[c];
                for (std::size_t c = 0; c < cols; ++c)
                    gx.values[r * cols + c] += gr[c] - std::exp(lpr[c]) * gsum;
            }
            break;
        }
        case OpKind::Log: {
            const Tensor& x = parent_val(0);
            Tensor& gx = parent_grad(0);
            for (std::size_t i = 0; i < g.numel(); ++i) gx.values[i] += g.values[i] / x.values[i];
            break;
        }
        case OpKind::Exp: {
            Tensor& gx = parent_grad(0);
            for (std::size_t i = 0; i < g.numel(); ++i)
                gx.values[i] += g.values[i] * n.value.values[i];
            break;
        }
        case OpKind::Cos: {
            const Tensor& x = parent_val(0);
            Tensor& gx = parent_grad(0);
            for (std::size_t i = 0; i < g.numel(); ++i)
                gx.values[i] -= g.values[i] * std::sin(x.values[i]);
            break;
        }
        case OpKind::Sum: {
            Tensor& gx = parent_grad(0);
            const double gv = g.values[0];
            for (double& e : gx.values) e += gv;
            break;
        }
        case OpKind::Mean: {
            Tensor& gx = parent_grad(0);
            const double gv = g.values[0] / static_cast<double>(gx.numel());
            for (double& e : gx.values) e += gv;
            break;
        }
        case OpKind::L2Norm: {
            const Tensor& x = parent_val(0);
            Tensor& gx = parent_grad(0);
            const double norm = n.value.values[0];
            if (norm > 0.0) {
                const double gv = g.values[0] / norm;
                for (std::size_t i = 0; i < x.numel(); ++i) gx.values[i] += gv * x.values[i];
            }
            break;
        }
        case OpKind::Dropout: {
            Tensor& gx = parent_grad(0);
            for (std::size_t i = 0; i < g.numel(); ++i)
                gx.values[i] += g.values[i] * n.aux.values[i];
            break;
        }
        case OpKind::GatherRows: {
            Tensor& gx = parent_grad(0);
            const std::size_t cols = n.value.shape[1];
            for (std::size_t k = 0; k < n.indices.size(); ++k)
                for (std::size_t c = 0; c < cols; ++c)
                    gx.values[n.indices[k] * cols + c] += g.values[k * cols + c];
            break;
        }
        case OpKind::Affine: {
            Tensor& gx = parent_grad(0);
            for (std::size_t i = 0; i < g.numel(); ++i) gx.values[i] += g.values[i] * n.a;
            break;
        }
    }
}

} // namespace uqlab
