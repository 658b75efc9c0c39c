#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uqlab/models.hpp"

namespace uqlab {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// one power-iteration step; returns the singular-value estimate
double power_step(const Tensor& w, std::vector<double>& u, std::vector<double>& v) {
    const std::size_t r = w.shape[0], c = w.shape[1];
    for (std::size_t j = 0; j < c; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < r; ++i) acc += w.values[i * c + j] * u[i];
        v[j] = acc;
    }
    double vn = 0.0;
    for (double x : v) vn += x * x;
    vn = std::sqrt(vn);
    if (vn < 1e-300) return 0.0;
    for (double& x : v) x /= vn;
    for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += w.values[i * c + j] * v[j];
        u[i] = acc;
    }
    double un = 0.0;
    for (double x : u) un += x * x;
    un = std::sqrt(un);
    if (un < 1e-300) return 0.0;
    for (double& x : u) x /= un;
    double sigma = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += w.values[i * c + j] * v[j];
        sigma += u[i] * acc;
    }
    return sigma;
}

double converged_sigma(const Tensor& w, std::vector<double> u) {
    std::vector<double> v(w.shape[1]);
    double sigma = 0.0;
    for (int it = 0; it < 500; ++it) {
        const double next = power_step(w, u, v);
        if (std::abs(next - sigma) <= 1e-12 * std::max(1.0, next)) return next;
        sigma = next;
    }
    return sigma;
}

/// Rescales W so its top singular value stays within the bound. The running
/// estimate uses `iterations` persistent power steps; an exact check backs
/// it up so the bound holds after every update.
void spectral_normalize(Tensor& w, std::vector<double>& u, double bound, int iterations) {
    std::vector<double> v(w.shape[1]);
    double sigma = 0.0;
    for (int it = 0; it < std::max(iterations, 1); ++it) sigma = power_step(w, u, v);
    if (sigma > bound) {
        const double s = bound / sigma;
        for (double& x : w.values) x *= s;
    }
    const double exact = converged_sigma(w, u);
    if (exact > bound) {
        const double s = bound / exact;
        for (double& x : w.values) x *= s;
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky; throws on
/// failure so the caller can retry with jitter.
Tensor spd_inverse(const Tensor& a) {
    const std::size_t n = a.shape[0];
    Tensor l({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = a.values[i * n + j];
            for (std::size_t k = 0; k < j; ++k)
                acc -= l.values[i * n + k] * l.values[j * n + k];
            if (i == j) {
                if (acc <= 0.0) throw RuntimeFailure("cholesky: matrix not positive definite");
                l.values[i * n + i] = std::sqrt(acc);
            } else {
                l.values[i * n + j] = acc / l.values[j * n + j];
            }
        }
    }
    Tensor linv({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        linv.values[i * n + i] = 1.0 / l.values[i * n + i];
        for (std::size_t j = 0; j < i; ++j) {
            double acc = 0.0;
            for (std::size_t k = j; k < i; ++k)
                acc += l.values[i * n + k] * linv.values[k * n + j];
            linv.values[i * n + j] = -acc / l.values[i * n + i];
        }
    }
    Tensor inv({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = 0.0;
            for (std::size_t k = i; k < n; ++k)
                acc += linv.values[k * n + i] * linv.values[k * n + j];
            inv.values[i * n + j] = acc;
            inv.values[j * n + i] = acc;
        }
    }
    return inv;
}

/// Parameter layout: W_in (D x H), b_in (H), then per block W_l (H x H),
/// b_l (H).
struct SngpNet {
    std::size_t input_dim;
    std::size_t width;
    std::size_t blocks;
    std::vector<Tensor> params;

    static SngpNet init(const NetworkSpec& spec, Rng& rng) {
        SngpNet net;
        net.input_dim = spec.input_dim;
        net.blocks = spec.hidden.size();
        net.width = spec.output_dim;
        for (std::size_t w : spec.hidden) {
            if (w != net.width) {
                throw ValueError("sngp: residual blocks need equal widths");
            }
        }
        net.params.push_back(Tensor::randn({net.input_dim, net.width}, rng,
                                           std::sqrt(2.0 / static_cast<double>(net.input_dim))));
        net.params.push_back(Tensor::zeros({net.width}));
        for (std::size_t b = 0; b < net.blocks; ++b) {
            net.params.push_back(Tensor::randn({net.width, net.width}, rng,
                                               std::sqrt(2.0 / static_cast<double>(net.width))));
            net.params.push_back(Tensor::zeros({net.width}));
        }
        return net;
    }

    static SngpNet from_flat(const NetworkSpec& spec, const std::vector<double>& flat) {
        Rng scratch(0);
        SngpNet net = init(spec, scratch);
        std::size_t at = 0;
        for (Tensor& p : net.params) {
            if (at + p.numel() > flat.size()) throw ValueError("sngp: flat weights too short");
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), p.numel(),
                        p.values.begin());
            at += p.numel();
        }
        if (at != flat.size()) throw ValueError("sngp: flat weights too long");
        return net;
    }

    std::vector<double> flatten() const {
        std::vector<double> flat;
        for (const Tensor& p : params) {
            flat.insert(flat.end(), p.values.begin(), p.values.end());
        }
        return flat;
    }

    Var forward(Tape& tape, Var input, const std::vector<Var>& pv, double dropout_rate,
                Rng* dropout_rng) const {
        Var h = tape.add(tape.matmul(input, pv[0]), pv[1]);
        for (std::size_t b = 0; b < blocks; ++b) {
            Var branch = tape.relu(tape.add(tape.matmul(h, pv[2 * b + 2]), pv[2 * b + 3]));
            if (dropout_rate > 0.0 && dropout_rng) {
                branch = tape.dropout(branch, dropout_rate, *dropout_rng);
            }
            h = tape.add(h, branch);
        }
        return h;
    }

    Tensor latent_plain(const Tensor& x) const {
        Tensor h = matmul_plain(x, params[0]);
        auto add_bias = [](Tensor& t, const Tensor& b) {
            const std::size_t rows = t.shape[0], cols = t.shape[1];
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) t.values[r * cols + c] += b.values[c];
        };
        add_bias(h, params[1]);
        for (std::size_t b = 0; b < blocks; ++b) {
            Tensor branch = matmul_plain(h, params[2 * b + 2]);
            add_bias(branch, params[2 * b + 3]);
            for (double& v : branch.values) v = v > 0.0 ? v : 0.0;
            for (std::size_t i = 0; i < h.numel(); ++i) h.values[i] += branch.values[i];
        }
        return h;
    }
};

Tensor rff_from_latent(const Tensor& h, const Tensor& omega, const Tensor& phase,
                       double rff_scale) {
    Tensor z = matmul_plain(h, omega);
    const std::size_t n = z.shape[0], f = z.shape[1];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j)
            z.values[i * f + j] = rff_scale * std::cos(z.values[i * f + j] + phase.values[j]);
    return z;
}

} // namespace

double top_singular_value(const Tensor& w) {
    std::vector<double> u(w.shape[0], 1.0);
    double norm = std::sqrt(static_cast<double>(u.size()));
    for (double& x : u) x /= norm;
    return converged_sigma(w, std::move(u));
}

SngpModel sngp_train(const NetworkSpec& backbone, const LabeledDataset& data,
                     const SngpConfig& cfg, std::uint64_t seed,
                     const std::function<void(const std::vector<Tensor>&)>& on_step) {
    if (cfg.norm_bound <= 0.0) throw ValueError("sngp: norm bound must be > 0");
    if (cfg.feature_count == 0) throw ValueError("sngp: need at least one random feature");
    data.validate();
    const std::size_t classes = data.class_count();
    const std::size_t features = cfg.feature_count;
    const Rng base(seed);

    Rng init_rng = base.split(0x569b);
    SngpNet net = SngpNet::init(backbone, init_rng);

    SngpModel model;
    model.spec = backbone;
    model.norm_bound = cfg.norm_bound;
    model.rff_scale = std::sqrt(2.0 / static_cast<double>(features));
    model.mean_field_lambda = cfg.mean_field_lambda;
    model.classes = classes;
    model.sample_count = cfg.sample_count;
    model.sample_seed = base.split(0x569f).raw();

    Rng feat_rng = base.split(0x569c);
    model.omega = Tensor({net.width, features});
    for (double& v : model.omega.values) v = feat_rng.normal() / cfg.rff_length_scale;
    model.phase = Tensor({features});
    for (double& v : model.phase.values) v = feat_rng.uniform(0.0, kTwoPi);

    Rng beta_rng = base.split(0x569d);
    model.beta = Tensor::randn({features, classes}, beta_rng,
                               1.0 / std::sqrt(static_cast<double>(features)));

    // persistent power-iteration vectors, one per weight matrix
    std::vector<std::vector<double>> power_u;
    Rng pow_rng = base.split(0x569e);
    for (std::size_t i = 0; i < net.params.size(); i += 2) {
        std::vector<double> u(net.params[i].shape[0]);
        double norm = 0.0;
        for (double& x : u) {
            x = pow_rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (double& x : u) x /= norm;
        power_u.push_back(std::move(u));
    }

    auto normalize_all = [&]() {
        for (std::size_t i = 0; i < net.params.size(); i += 2) {
            spectral_normalize(net.params[i], power_u[i / 2], cfg.norm_bound,
                               cfg.power_iterations);
        }
    };
    normalize_all();  // bound holds before the first step too

    Optimizer opt(cfg.train.opt);
    std::vector<ParamRef> refs;
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const std::size_t layer = i / 2;
        refs.push_back({(i % 2 == 0 ? "w" : "b") + std::to_string(layer), &net.params[i]});
    }
    refs.push_back({"beta", &model.beta});

    const std::size_t n = data.size();
    const std::size_t batch =
        std::min<std::size_t>(std::max<std::size_t>(cfg.train.batch_size, 1), n);
    Rng shuffle_rng = base.split(0x56a0);
    Rng dropout_rng = base.split(0x56a1);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    double best_loss = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = shuffle_rng.integer(i + 1);
            std::swap(order[i], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t batches = 0;
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
            std::vector<Var> pv;
            pv.reserve(net.params.size());
            for (const Tensor& p : net.params) pv.push_back(tape.leaf(p, true));
            Var latent = net.forward(tape, tape.leaf(bx, false), pv, backbone.dropout_rate,
                                     &dropout_rng);
            Var beta_var = tape.leaf(model.beta, true);
            Var z = tape.add(tape.matmul(latent, tape.leaf(model.omega, false)),
                             tape.leaf(model.phase, false));
            Var phi = tape.affine(tape.cos(z), model.rff_scale, 0.0);
            Var logits = tape.matmul(phi, beta_var);
            Var loss = cross_entropy_loss(tape, logits, by, Reduction::Mean);
            const double lv = tape.value(loss).values[0];
            if (!std::isfinite(lv)) {
                throw RuntimeFailure("sngp: training diverged at epoch " +
                                     std::to_string(epoch));
            }
            epoch_loss += lv;
            ++batches;
            tape.backward(loss);
            std::vector<const Tensor*> grads;
            for (Var p : pv) grads.push_back(&tape.grad(p));
            grads.push_back(&tape.grad(beta_var));
            opt.step(refs, grads);
            if (cfg.beta_ridge > 0.0) {
                const double shrink = 1.0 - cfg.train.opt.learning_rate * cfg.beta_ridge;
                for (double& b : model.beta.values) b *= shrink;
            }
            normalize_all();
            if (on_step) on_step(net.params);
        }
        epoch_loss /= static_cast<double>(batches);
        if (cfg.train.early_stop_patience > 0) {
            if (epoch_loss < best_loss - 1e-6) {
                best_loss = epoch_loss;
                stale = 0;
            } else if (++stale >= cfg.train.early_stop_patience) {
                break;
            }
        }
    }

    model.weights = net.flatten();
    model.power_u = power_u;

    // Laplace precision over the training set: I + sum_n p(1-p) phi phi^T,
    // with p the predicted-class probability.
    const Tensor h = net.latent_plain(data.features);
    const Tensor phi = rff_from_latent(h, model.omega, model.phase, model.rff_scale);
    const Tensor probs = softmax_plain(matmul_plain(phi, model.beta));
    Tensor precision({features, features});
    for (std::size_t i = 0; i < features; ++i) precision.values[i * features + i] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* prow = &probs.values[i * classes];
        double pmax = prow[0];
        for (std::size_t c = 1; c < classes; ++c) pmax = std::max(pmax, prow[c]);
        const double mult = pmax * (1.0 - pmax);
        if (mult == 0.0) continue;
        const double* ph = &phi.values[i * features];
        for (std::size_t a = 0; a < features; ++a) {
            const double pa = mult * ph[a];
            if (pa == 0.0) continue;
            double* row = &precision.values[a * features];
            for (std::size_t b = 0; b < features; ++b) row[b] += pa * ph[b];
        }
    }
    try {
        model.covariance = spd_inverse(precision);
    } catch (const RuntimeFailure&) {
        for (std::size_t i = 0; i < features; ++i) precision.values[i * features + i] += 1e-6;
        model.covariance = spd_inverse(precision);
    }
    return model;
}

Tensor sngp_features(const SngpModel& model, const Tensor& x) {
    const SngpNet net = SngpNet::from_flat(model.spec, model.weights);
    return rff_from_latent(net.latent_plain(x), model.omega, model.phase, model.rff_scale);
}

SngpLatent sngp_latent(const SngpModel& model, const Tensor& x) {
    const Tensor phi = sngp_features(model, x);
    SngpLatent out;
    out.logits = matmul_plain(phi, model.beta);
    const std::size_t n = phi.shape[0], f = phi.shape[1];
    out.variance.resize(n);
    const Tensor vphi = matmul_plain(phi, model.covariance);  // N x F
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < f; ++j)
            acc += vphi.values[i * f + j] * phi.values[i * f + j];
        if (acc < 0.0) {
            acc = 0.0;
            out.clamped_negative = true;
        }
        out.variance[i] = acc;
    }
    return out;
}

Tensor sngp_mean_field_probs(const SngpModel& model, const Tensor& x) {
    const SngpLatent latent = sngp_latent(model, x);
    Tensor scaled = latent.logits;
    const std::size_t n = scaled.shape[0], c = scaled.shape[1];
    for (std::size_t i = 0; i < n; ++i) {
        const double denom = std::sqrt(1.0 + model.mean_field_lambda * latent.variance[i]);
        for (std::size_t j = 0; j < c; ++j) scaled.values[i * c + j] /= denom;
    }
    return softmax_plain(scaled);
}

ProbEnsemble sngp_sample_probs(const SngpModel& model, const Tensor& x, std::size_t count,
                               std::uint64_t seed) {
    if (count == 0) throw ValueError("sngp: need at least one sample");
    const SngpLatent latent = sngp_latent(model, x);
    const std::size_t n = latent.logits.shape[0], c = latent.logits.shape[1];
    Rng rng = Rng(seed).split(0x569a);
    ProbEnsemble ens(count, n, c);
    Tensor draw({n, c});
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            const double sd = std::sqrt(latent.variance[i]);
            for (std::size_t j = 0; j < c; ++j)
                draw.values[i * c + j] = latent.logits.values[i * c + j] + sd * rng.normal();
        }
        const Tensor probs = softmax_plain(draw);
        std::copy(probs.values.begin(), probs.values.end(),
                  ens.p.begin() + static_cast<std::ptrdiff_t>(s * n * c));
    }
    return ens;
}

} // namespace uqlab
