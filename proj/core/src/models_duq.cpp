#include <algorithm>
#include <cmath>
#include <numeric>

#include "uqlab/models.hpp"

namespace uqlab {

namespace {

/// Per-class kernel column K_c = exp(-||emb - e_c||^2 / (2 sigma^2)) on the
/// tape; returns the squared-distance column as well (stable log-kernel).
struct KernelColumn {
    Var d2;      // B x 1
    Var kernel;  // B x 1
};

KernelColumn kernel_column(Tape& tape, Var emb, const Tensor& centroid, double length_scale,
                           Var ones_col) {
    Var c = tape.leaf(centroid, false);  // row vector, broadcast
    Var diff = tape.sub(emb, c);
    Var sq = tape.mul(diff, diff);
    Var d2 = tape.matmul(sq, ones_col);  // row sums
    Var u = tape.affine(d2, 1.0 / (2.0 * length_scale * length_scale), 0.0);
    Var k = tape.exp(tape.affine(u, -1.0, 0.0));
    return {d2, k};
}

} // namespace

DuqModel duq_train(const NetworkSpec& backbone, const LabeledDataset& data,
                   const DuqConfig& cfg, std::uint64_t seed) {
    if (cfg.length_scale <= 0.0) throw ValueError("duq: length scale must be > 0");
    data.validate();
    const std::size_t classes = data.class_count();
    if (classes < 2) throw ValueError("duq: need at least two classes");

    NetworkSpec spec = backbone;
    spec.output_dim = cfg.embedding_dim;
    const Rng base(seed);
    Rng init_rng = base.split(0xd59);
    Mlp net(spec, init_rng);

    // EMA accumulators: centroids = m_c / n_c
    Rng cent_rng = base.split(0xd5a);
    Tensor m = Tensor::randn({classes, cfg.embedding_dim}, cent_rng, 0.05);
    std::vector<double> nacc(classes, 1.0);
    const double gamma = cfg.centroid_momentum;

    Optimizer opt(cfg.train.opt);
    std::vector<ParamRef> refs;
    const auto names = net.param_names();
    for (std::size_t i = 0; i < net.params().size(); ++i)
        refs.push_back({names[i], &net.params()[i]});

    const std::size_t n = data.size();
    const std::size_t batch = std::min<std::size_t>(std::max<std::size_t>(cfg.train.batch_size, 1), n);
    Rng shuffle_rng = base.split(0xd5b);
    Rng fd_rng = base.split(0xd5c);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    Tensor ones_col({cfg.embedding_dim, 1});
    for (double& v : ones_col.values) v = 1.0;

    for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = shuffle_rng.integer(i + 1);
            std::swap(order[i], order[j]);
        }
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            Tensor bx({count, data.dim()});
            std::vector<int> by(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t src = order[start + i];
                std::copy_n(&data.features.values[src * data.dim()], data.dim(),
                            &bx.values[i * data.dim()]);
                by[i] = data.labels[src];
            }

            Tape tape;
            auto fwd = net.forward(tape, bx);
            Var ones = tape.leaf(ones_col, false);
            Var loss{};
            for (std::size_t c = 0; c < classes; ++c) {
                Tensor e_c({cfg.embedding_dim});
                for (std::size_t j = 0; j < cfg.embedding_dim; ++j)
                    e_c.values[j] = m.values[c * cfg.embedding_dim + j] / nacc[c];
                auto col = kernel_column(tape, fwd.logits, e_c, cfg.length_scale, ones);
                // targets for this class
                Tensor t({count, 1});
                for (std::size_t i = 0; i < count; ++i)
                    t.values[i] = by[i] == static_cast<int>(c) ? 1.0 : 0.0;
                Var tv = tape.leaf(t, false);
                Tensor omt({count, 1});
                for (std::size_t i = 0; i < count; ++i) omt.values[i] = 1.0 - t.values[i];
                Var omtv = tape.leaf(omt, false);
                // -t log k  ==  t * d2 / (2 sigma^2), numerically stable
                Var pos = tape.mul(tv, tape.affine(col.d2,
                                                   1.0 / (2.0 * cfg.length_scale *
                                                          cfg.length_scale),
                                                   0.0));
                Var one_minus_k = tape.affine(col.kernel, -1.0, 1.0 + 1e-12);
                Var neg = tape.affine(tape.mul(omtv, tape.log(one_minus_k)), -1.0, 0.0);
                Var term = tape.sum(tape.add(pos, neg));
                loss = loss.valid() ? tape.add(loss, term) : term;
            }
            loss = tape.affine(loss, 1.0 / static_cast<double>(count), 0.0);

            if (cfg.gradient_penalty > 0.0) {
                // two-sided gradient penalty on sum_c K_c, estimated along a
                // random direction through finite differences of the forward
                // pass (keeps the estimator first-order differentiable)
                const double h = 1e-3;
                Tensor dir({data.dim()});
                double norm = 0.0;
                for (double& v : dir.values) {
                    v = fd_rng.normal();
                    norm += v * v;
                }
                norm = std::sqrt(norm);
                for (double& v : dir.values) v /= norm;
                Tensor bx_plus = bx, bx_minus = bx;
                for (std::size_t i = 0; i < count; ++i)
                    for (std::size_t j = 0; j < data.dim(); ++j) {
                        bx_plus.values[i * data.dim() + j] += h * dir.values[j];
                        bx_minus.values[i * data.dim() + j] -= h * dir.values[j];
                    }
                auto sum_kernels = [&](const Tensor& input) -> Var {
                    Var emb_v = net.forward_with(tape, tape.leaf(input, false), fwd.param_vars);
                    Var total{};
                    for (std::size_t c = 0; c < classes; ++c) {
                        Tensor e_c({cfg.embedding_dim});
                        for (std::size_t j = 0; j < cfg.embedding_dim; ++j)
                            e_c.values[j] = m.values[c * cfg.embedding_dim + j] / nacc[c];
                        auto col = kernel_column(tape, emb_v, e_c, cfg.length_scale, ones);
                        total = total.valid() ? tape.add(total, col.kernel) : col.kernel;
                    }
                    return total;
                };
                Var s_plus = sum_kernels(bx_plus);
                Var s_minus = sum_kernels(bx_minus);
                Var deriv = tape.affine(tape.sub(s_plus, s_minus), 1.0 / (2.0 * h), 0.0);
                Var deriv_sq = tape.mul(deriv, deriv);
                Var grad_sq = tape.affine(deriv_sq, static_cast<double>(data.dim()), 0.0);
                Var excess = tape.affine(grad_sq, 1.0, -1.0);
                Var penalty = tape.mean(tape.mul(excess, excess));
                loss = tape.add(loss, tape.affine(penalty, cfg.gradient_penalty, 0.0));
            }

            const double lv = tape.value(loss).values[0];
            if (!std::isfinite(lv)) {
                throw RuntimeFailure("duq: training diverged at epoch " + std::to_string(epoch));
            }
            tape.backward(loss);
            std::vector<const Tensor*> grads;
            for (Var pv : fwd.param_vars) grads.push_back(&tape.grad(pv));
            opt.step(refs, grads);

            // centroid EMA from the pre-step embeddings
            const Tensor& emb = tape.value(fwd.logits);
            for (std::size_t c = 0; c < classes; ++c) {
                double cnt = 0.0;
                std::vector<double> acc(cfg.embedding_dim, 0.0);
                for (std::size_t i = 0; i < count; ++i) {
                    if (by[i] != static_cast<int>(c)) continue;
                    cnt += 1.0;
                    for (std::size_t j = 0; j < cfg.embedding_dim; ++j)
                        acc[j] += emb.values[i * cfg.embedding_dim + j];
                }
                nacc[c] = gamma * nacc[c] + (1.0 - gamma) * cnt;
                for (std::size_t j = 0; j < cfg.embedding_dim; ++j) {
                    m.values[c * cfg.embedding_dim + j] =
                        gamma * m.values[c * cfg.embedding_dim + j] + (1.0 - gamma) * acc[j];
                }
            }
        }
    }

    DuqModel model;
    model.spec = spec;
    model.weights = net.flatten();
    model.centroids = Tensor({classes, cfg.embedding_dim});
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t j = 0; j < cfg.embedding_dim; ++j)
            model.centroids.values[c * cfg.embedding_dim + j] =
                m.values[c * cfg.embedding_dim + j] / std::max(nacc[c], 1e-12);
    model.length_scale = cfg.length_scale;
    model.classes = classes;

    for (std::size_t a = 0; a < classes && !model.collapse_warning; ++a) {
        for (std::size_t b = a + 1; b < classes; ++b) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < cfg.embedding_dim; ++j) {
                const double d = model.centroids.values[a * cfg.embedding_dim + j] -
                                 model.centroids.values[b * cfg.embedding_dim + j];
                d2 += d * d;
            }
            if (std::sqrt(d2) < 1e-6) {
                model.collapse_warning = true;
                break;
            }
        }
    }
    return model;
}

DuqPrediction duq_predict(const DuqModel& model, const Tensor& x) {
    Mlp net;
    {
        Rng scratch(0);
        net = Mlp(model.spec, scratch);
    }
    net.set_flat(model.weights);
    const Tensor emb = net.logits_plain(x);
    const std::size_t n = emb.shape[0], e = emb.shape[1], c = model.classes;

    DuqPrediction out;
    out.kernels = Tensor({n, c});
    out.distances.resize(n);
    const double denom = 2.0 * model.length_scale * model.length_scale;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t cc = 0; cc < c; ++cc) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < e; ++j) {
                const double d = emb.values[i * e + j] - model.centroids.values[cc * e + j];
                d2 += d * d;
            }
            out.kernels.values[i * c + cc] = std::exp(-d2 / denom);
        }
        std::size_t best = 0;
        for (std::size_t cc = 1; cc < c; ++cc)
            if (out.kernels.values[i * c + cc] > out.kernels.values[i * c + best]) best = cc;
        double d2 = 0.0;
        for (std::size_t j = 0; j < e; ++j) {
            const double d = emb.values[i * e + j] - model.centroids.values[best * e + j];
            d2 += d * d;
        }
        out.distances[i] = std::sqrt(d2);
    }

    // softmax(log k) == k / sum k; clamp keeps exact-zero kernels finite
    out.aleatoric = Tensor({n, c});
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t cc = 0; cc < c; ++cc) {
            const double k = std::max(out.kernels.values[i * c + cc], 1e-12);
            out.aleatoric.values[i * c + cc] = k;
            total += k;
        }
        for (std::size_t cc = 0; cc < c; ++cc) out.aleatoric.values[i * c + cc] /= total;
    }
    return out;
}

} // namespace uqlab
