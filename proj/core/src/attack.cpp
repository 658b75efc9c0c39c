#include "uqlab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace uqlab {

void AttackSpec::validate() const {
    if (epsilon <= 0.0) throw ValueError("attack spec: epsilon must be > 0");
    if (alpha <= 0.0) throw ValueError("attack spec: alpha must be > 0");
    if (iterations < 1) throw ValueError("attack spec: need at least one iteration");
    if (norm != "l2") throw ValueError("attack spec: only the l2 norm is supported");
}

Tensor ProxyModel::probs(const Tensor& x) const {
    Rng scratch(0);
    Mlp net(spec, scratch);
    net.set_flat(weights);
    return softmax_plain(net.logits_plain(x));
}

ProxyModel fit_proxy(const Model& target, const LabeledDataset& data,
                     const ProxyFitOptions& options, std::uint64_t seed,
                     const LabeledDataset* eval_data) {
    data.validate();
    const std::vector<int> target_preds = argmax_rows(predict_mean_probs(target, data.features));

    const Rng base(seed);
    Rng init_rng = base.split(0x9c0);
    Mlp net(options.spec, init_rng);
    TrainOptions train = options.train;
    train.seed = base.split(0x9c1).raw();
    train_classifier(net, data.features, target_preds, train);

    ProxyModel proxy;
    proxy.spec = options.spec;
    proxy.weights = net.flatten();

    const LabeledDataset& eval = eval_data ? *eval_data : data;
    const std::vector<int> eval_target = argmax_rows(predict_mean_probs(target, eval.features));
    const std::vector<int> eval_proxy = argmax_rows(proxy.probs(eval.features));
    std::size_t agree = 0;
    for (std::size_t i = 0; i < eval_target.size(); ++i)
        if (eval_target[i] == eval_proxy[i]) ++agree;
    proxy.agreement = static_cast<double>(agree) / static_cast<double>(eval_target.size());
    proxy.low_agreement_warning = proxy.agreement < options.agreement_warning_threshold;
    return proxy;
}

void project_l2(Tensor& delta, double epsilon) {
    const std::size_t n = delta.shape[0], d = delta.shape[1];
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = delta.values[i * d + j];
            sq += v * v;
        }
        const double norm = std::sqrt(sq);
        if (norm > epsilon * (1.0 + 1e-12)) {
            const double s = epsilon / norm;
            for (std::size_t j = 0; j < d; ++j) delta.values[i * d + j] *= s;
        }
    }
}

namespace {

std::vector<double> per_datum_ce(const Tensor& probs, const std::vector<int>& labels) {
    std::vector<double> out(labels.size());
    const std::size_t c = probs.shape[1];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::max(probs.values[i * c + static_cast<std::size_t>(labels[i])],
                                  1e-300);
        out[i] = -std::log(p);
    }
    return out;
}

} // namespace

AdversarialBatch l2_pgd(const ProxyModel& proxy, const Tensor& inputs,
                        const std::vector<int>& target_preds, const AttackSpec& spec) {
    spec.validate();
    if (inputs.shape[0] != target_preds.size()) {
        throw ValueError("pgd: input rows vs prediction count mismatch");
    }
    const std::size_t n = inputs.shape[0], d = inputs.shape[1];
    Rng scratch(0);
    Mlp net(proxy.spec, scratch);
    net.set_flat(proxy.weights);

    AdversarialBatch batch;
    batch.clean = inputs;
    batch.delta = Tensor({n, d});
    batch.target_clean_pred = target_preds;
    batch.proxy_loss_initial = per_datum_ce(proxy.probs(inputs), target_preds);

    for (int iter = 0; iter < spec.iterations; ++iter) {
        Tape tape;
        Var delta_var = tape.leaf(batch.delta, true);
        Var adv = tape.add(tape.leaf(batch.clean, false), delta_var);
        auto fwd = net.forward(tape, adv);
        Var loss = cross_entropy_loss(tape, fwd.logits, target_preds, Reduction::Sum);
        tape.backward(loss);
        const Tensor& g = tape.grad(delta_var);
        if (!g.all_finite()) {
            batch.aborted_nonfinite = true;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (spec.raw_gradient) {
                for (std::size_t j = 0; j < d; ++j)
                    batch.delta.values[i * d + j] += spec.alpha * g.values[i * d + j];
            } else {
                double sq = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double v = g.values[i * d + j];
                    sq += v * v;
                }
                const double norm = std::sqrt(sq);
                if (norm < 1e-12) continue;  // flat loss, stay put
                const double s = spec.alpha / norm;
                for (std::size_t j = 0; j < d; ++j)
                    batch.delta.values[i * d + j] += s * g.values[i * d + j];
            }
        }
        project_l2(batch.delta, spec.epsilon);
    }

    batch.adversarial = batch.clean;
    for (std::size_t i = 0; i < n * d; ++i) batch.adversarial.values[i] += batch.delta.values[i];
    batch.delta_norm.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double v = batch.delta.values[i * d + j];
            sq += v * v;
        }
        batch.delta_norm[i] = std::sqrt(sq);
    }
    batch.proxy_loss_final = per_datum_ce(proxy.probs(batch.adversarial), target_preds);
    const std::vector<int> proxy_adv_pred = argmax_rows(proxy.probs(batch.adversarial));
    batch.proxy_fooled.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        batch.proxy_fooled[i] = proxy_adv_pred[i] != target_preds[i] ? 1 : 0;
    }
    return batch;
}

AdversarialBatch l2_pgd_calibrated(const ProxyModel& proxy, const Tensor& inputs,
                                   const std::vector<int>& target_preds, AttackSpec spec,
                                   const ProxyCalibration& calibration, double* alpha_used) {
    AdversarialBatch batch = l2_pgd(proxy, inputs, target_preds, spec);
    for (int round = 0; round < calibration.max_rounds; ++round) {
        std::size_t fooled = 0;
        for (char f : batch.proxy_fooled) fooled += f;
        const double proxy_acc =
            1.0 - static_cast<double>(fooled) / static_cast<double>(batch.proxy_fooled.size());
        if (proxy_acc > calibration.proxy_accuracy_high) {
            spec.alpha *= 2.0;  // not fooled enough, push harder
        } else if (proxy_acc < calibration.proxy_accuracy_low) {
            spec.alpha *= 0.5;
        } else {
            break;
        }
        batch = l2_pgd(proxy, inputs, target_preds, spec);
    }
    if (alpha_used) *alpha_used = spec.alpha;
    return batch;
}

AdversarialBatch manifold_perturb(const LabeledDataset& data, const ManifoldMeta& meta,
                                  double strength, PerturbDirection direction,
                                  std::uint64_t seed) {
    meta.validate();
    if (strength < 0.0) throw ValueError("manifold perturb: strength must be >= 0");
    data.validate();
    if (data.dim() != 2) throw ValueError("manifold perturb: 2-D data only");
    const std::array<double, 2>& axis =
        direction == PerturbDirection::On ? meta.on_axis : meta.off_axis;

    Rng rng = Rng(seed).split(0x3a77ac4);
    const std::size_t n = data.size();
    AdversarialBatch batch;
    batch.clean = data.features;
    batch.delta = Tensor({n, 2});
    batch.delta_norm.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double magnitude = rng.normal(strength, 0.5);
        const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double scalar = sign * magnitude;
        batch.delta.at(i, 0) = scalar * axis[0];
        batch.delta.at(i, 1) = scalar * axis[1];
        batch.delta_norm[i] = std::abs(scalar);
    }
    batch.adversarial = batch.clean;
    for (std::size_t i = 0; i < batch.adversarial.numel(); ++i) {
        batch.adversarial.values[i] += batch.delta.values[i];
    }
    return batch;
}

AttackMetrics evaluate_attack(const Model& target, const AdversarialBatch& batch,
                              const std::vector<int>& true_labels) {
    const std::size_t n = batch.adversarial.shape[0];
    if (true_labels.size() != n) {
        throw ValueError("evaluate attack: " + std::to_string(n) + " rows vs " +
                         std::to_string(true_labels.size()) + " labels");
    }
    AttackMetrics metrics;
    const Tensor target_probs = predict_mean_probs(target, batch.adversarial);
    metrics.adversarial_accuracy = accuracy(target_probs, true_labels);
    double l2 = 0.0;
    for (double v : batch.delta_norm) l2 += v;
    metrics.mean_l2 = n > 0 ? l2 / static_cast<double>(n) : 0.0;
    if (!batch.proxy_fooled.empty()) {
        std::size_t fooled = 0;
        for (char f : batch.proxy_fooled) fooled += f;
        metrics.proxy_accuracy = 1.0 - static_cast<double>(fooled) / static_cast<double>(n);
    }
    if (!batch.target_clean_pred.empty()) {
        const std::vector<int> adv_pred = argmax_rows(target_probs);
        metrics.target_fooled.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            metrics.target_fooled[i] = adv_pred[i] != batch.target_clean_pred[i] ? 1 : 0;
        }
    }
    return metrics;
}

void write_batch_csv(const AdversarialBatch& batch, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path);
    const std::size_t n = batch.clean.shape[0], d = batch.clean.shape[1];
    for (std::size_t j = 0; j < d; ++j) out << "x" << j << ",";
    for (std::size_t j = 0; j < d; ++j) out << "d" << j << ",";
    out << "l2,proxy_fooled,target_fooled\n";
    char buf[64];
    auto emit = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            emit(batch.clean.values[i * d + j]);
            out << ",";
        }
        for (std::size_t j = 0; j < d; ++j) {
            emit(batch.delta.values[i * d + j]);
            out << ",";
        }
        emit(batch.delta_norm[i]);
        out << ",";
        if (i < batch.proxy_fooled.size()) out << int(batch.proxy_fooled[i]);
        out << ",";
        if (i < batch.target_fooled.size()) out << int(batch.target_fooled[i]);
        out << "\n";
    }
}

} // namespace uqlab
