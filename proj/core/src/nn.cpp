#include "uqlab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace uqlab {

void NetworkSpec::validate() const {
    if (input_dim == 0 || output_dim == 0) throw ValueError("network spec: zero-width layer");
    for (std::size_t w : hidden)
        if (w == 0) throw ValueError("network spec: zero-width hidden layer");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw ValueError("network spec: dropout rate must be in [0,1)");
    }
}

std::size_t NetworkSpec::param_count() const {
    std::size_t total = 0, prev = input_dim;
    for (std::size_t w : hidden) {
        total += prev * w + w;
        prev = w;
    }
    total += prev * output_dim + output_dim;
    return total;
}

Mlp::Mlp(NetworkSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t prev = spec_.input_dim;
    auto push_layer = [&](std::size_t out) {
        const double stddev = std::sqrt(2.0 / static_cast<double>(prev));
        params_.push_back(Tensor::randn({prev, out}, rng, stddev));
        params_.push_back(Tensor::zeros({out}));
        prev = out;
    };
    for (std::size_t w : spec_.hidden) push_layer(w);
    push_layer(spec_.output_dim);
}

std::vector<std::string> Mlp::param_names() const {
    std::vector<std::string> names;
    for (std::size_t layer = 0; layer * 2 < params_.size(); ++layer) {
        names.push_back("w" + std::to_string(layer));
        names.push_back("b" + std::to_string(layer));
    }
    return names;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const Tensor& p : params_) n += p.numel();
    return n;
}

Mlp::TapeForward Mlp::forward(Tape& tape, Var input, bool train_mode, Rng* dropout_rng) const {
    TapeForward out;
    out.param_vars.reserve(params_.size());
    for (const Tensor& p : params_) out.param_vars.push_back(tape.leaf(p, true));
    out.logits = forward_with(tape, input, out.param_vars, train_mode, dropout_rng);
    return out;
}

Var Mlp::forward_with(Tape& tape, Var input, const std::vector<Var>& param_vars,
                      bool train_mode, Rng* dropout_rng) const {
    if (param_vars.size() != params_.size()) {
        throw ValueError("mlp forward: wrong number of parameter vars");
    }
    const bool use_dropout = train_mode && spec_.dropout_rate > 0.0;
    if (use_dropout && dropout_rng == nullptr) {
        throw ValueError("mlp forward: dropout requested without an rng stream");
    }
    Var h = input;
    const std::size_t layers = params_.size() / 2;
    for (std::size_t l = 0; l < layers; ++l) {
        h = tape.add(tape.matmul(h, param_vars[2 * l]), param_vars[2 * l + 1]);
        if (l + 1 < layers) {
            h = tape.relu(h);
            if (use_dropout) h = tape.dropout(h, spec_.dropout_rate, *dropout_rng);
        }
    }
    return h;
}

Mlp::TapeForward Mlp::forward(Tape& tape, const Tensor& x, bool train_mode,
                              Rng* dropout_rng) const {
    return forward(tape, tape.leaf(x, false), train_mode, dropout_rng);
}

Tensor Mlp::logits_plain(const Tensor& x) const {
    Tensor h = x;
    const std::size_t layers = params_.size() / 2;
    for (std::size_t l = 0; l < layers; ++l) {
        h = matmul_plain(h, params_[2 * l]);
        const Tensor& b = params_[2 * l + 1];
        const std::size_t rows = h.shape[0], cols = h.shape[1];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) h.values[r * cols + c] += b.values[c];
        if (l + 1 < layers) {
            for (double& v : h.values) v = v > 0.0 ? v : 0.0;
        }
    }
    return h;
}

Tensor Mlp::logits_dropout(const Tensor& x, Rng& rng) const {
    if (spec_.dropout_rate <= 0.0) return logits_plain(x);
    const double keep_scale = 1.0 / (1.0 - spec_.dropout_rate);
    Tensor h = x;
    const std::size_t layers = params_.size() / 2;
    for (std::size_t l = 0; l < layers; ++l) {
        h = matmul_plain(h, params_[2 * l]);
        const Tensor& b = params_[2 * l + 1];
        const std::size_t rows = h.shape[0], cols = h.shape[1];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) h.values[r * cols + c] += b.values[c];
        if (l + 1 < layers) {
            for (double& v : h.values) v = v > 0.0 ? v : 0.0;
            // one mask per unit: a single pass is one thinned network
            // evaluated on the whole batch
            std::vector<double> mask(cols);
            for (double& m : mask) m = rng.bernoulli(spec_.dropout_rate) ? 0.0 : keep_scale;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) h.values[r * cols + c] *= mask[c];
        }
    }
    return h;
}

std::vector<double> Mlp::flatten() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const Tensor& p : params_) flat.insert(flat.end(), p.values.begin(), p.values.end());
    return flat;
}

void Mlp::set_flat(std::span<const double> w) {
    if (w.size() != param_count()) {
        throw ValueError("mlp: flat vector of " + std::to_string(w.size()) +
                         " does not match " + std::to_string(param_count()) + " parameters");
    }
    std::size_t at = 0;
    for (Tensor& p : params_) {
        std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(at), p.numel(), p.values.begin());
        at += p.numel();
    }
}

Tensor one_hot(const std::vector<int>& labels, std::size_t classes) {
    Tensor t({labels.size(), classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw ValueError("one-hot: label " + std::to_string(y) + " outside [0," +
                             std::to_string(classes) + ")");
        }
        t.values[i * classes + static_cast<std::size_t>(y)] = 1.0;
    }
    return t;
}

Tensor softmax_plain(const Tensor& logits) {
    Tensor p = logits;
    const std::size_t rows = p.rank() == 1 ? 1 : p.shape[0];
    const std::size_t cols = p.rank() == 1 ? p.shape[0] : p.shape[1];
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = &p.values[r * cols];
        double mx = row[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            z += row[c];
        }
        for (std::size_t c = 0; c < cols; ++c) row[c] /= z;
    }
    return p;
}

std::vector<int> argmax_rows(const Tensor& m) {
    const std::size_t rows = m.shape[0], cols = m.shape[1];
    std::vector<int> out(rows, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = &m.values[r * cols];
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c)
            if (row[c] > row[best]) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

double accuracy(const Tensor& probs, const std::vector<int>& labels) {
    if (probs.shape[0] != labels.size()) {
        throw ValueError("accuracy: " + std::to_string(probs.shape[0]) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
    }
    const std::vector<int> pred = argmax_rows(probs);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (pred[i] == labels[i]) ++hits;
    return labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(labels.size());
}

Var cross_entropy_loss(Tape& tape, Var logits, const std::vector<int>& labels,
                       Reduction reduction) {
    // copy dims up front: pushing nodes may reallocate the tape storage
    const Shape logits_shape = tape.value(logits).shape;
    if (logits_shape.size() != 2 || logits_shape[0] != labels.size()) {
        throw ValueError("cross-entropy: logits " + shape_str(logits_shape) + " vs " +
                         std::to_string(labels.size()) + " labels");
    }
    Var lp = tape.log_softmax(logits);
    Var mask = tape.leaf(one_hot(labels, logits_shape[1]), false);
    Var picked = tape.mul(lp, mask);
    Var total = tape.sum(picked);
    const double scale = reduction == Reduction::Mean
                             ? -1.0 / static_cast<double>(labels.size())
                             : -1.0;
    return tape.affine(total, scale, 0.0);
}

TrainResult train_classifier(Mlp& net, const Tensor& x, const std::vector<int>& labels,
                             const TrainOptions& options) {
    if (x.shape[0] != labels.size()) {
        throw ValueError("train: feature rows vs label count mismatch");
    }
    const std::size_t n = labels.size();
    const std::size_t batch = std::min<std::size_t>(std::max<std::size_t>(options.batch_size, 1), n);
    Rng rng = Rng(options.seed).split(0xba7c4);

    Optimizer opt(options.opt);
    std::vector<ParamRef> refs;
    const auto names = net.param_names();
    for (std::size_t i = 0; i < net.params().size(); ++i) {
        refs.push_back({names[i], &net.params()[i]});
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    Rng dropout_rng = Rng(options.seed).split(0xd201);

    TrainResult result;
    double best_loss = std::numeric_limits<double>::infinity();
    int stale = 0;

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        // Fisher-Yates with our own stream
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = rng.integer(i + 1);
            std::swap(order[i], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            Tensor bx({count, x.shape[1]});
            std::vector<int> by(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t src = order[start + i];
                std::copy_n(&x.values[src * x.shape[1]], x.shape[1],
                            &bx.values[i * x.shape[1]]);
                by[i] = labels[src];
            }
            Tape tape;
            auto fwd = net.forward(tape, bx, true, &dropout_rng);
            Var loss = cross_entropy_loss(tape, fwd.logits, by, Reduction::Mean);
            const double lv = tape.value(loss).values[0];
            if (!std::isfinite(lv)) {
                throw RuntimeFailure("training diverged: non-finite loss at epoch " +
                                     std::to_string(epoch));
            }
            epoch_loss += lv;
            ++batches;
            tape.backward(loss);
            std::vector<const Tensor*> grads;
            grads.reserve(fwd.param_vars.size());
            for (Var pv : fwd.param_vars) grads.push_back(&tape.grad(pv));
            opt.step(refs, grads);
        }
        epoch_loss /= static_cast<double>(batches);
        result.final_loss = epoch_loss;
        result.epochs_run = epoch + 1;
        if (options.early_stop_patience > 0) {
            if (epoch_loss < best_loss - 1e-6) {
                best_loss = epoch_loss;
                stale = 0;
            } else if (++stale >= options.early_stop_patience) {
                break;
            }
        }
    }
    return result;
}

} // namespace uqlab
