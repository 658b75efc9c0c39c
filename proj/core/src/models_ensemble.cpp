#include <cmath>

#include "uqlab/models.hpp"

namespace uqlab {

DeepEnsembleModel train_deep_ensemble(const NetworkSpec& spec, const LabeledDataset& data,
                                      const EnsembleConfig& cfg, std::uint64_t seed) {
    if (cfg.members < 1) throw ValueError("deep ensemble: need at least one member");
    data.validate();
    DeepEnsembleModel model;
    model.spec = spec;
    model.members.reserve(cfg.members);
    const Rng base(seed);
    for (std::size_t m = 0; m < cfg.members; ++m) {
        Rng init_rng = base.split(0x3a0000 + m);
        Mlp net(spec, init_rng);
        TrainOptions opts = cfg.train;
        opts.seed = base.split(0x3b0000 + m).raw();
        try {
            train_classifier(net, data.features, data.labels, opts);
        } catch (const RuntimeFailure& e) {
            throw RuntimeFailure("deep ensemble member " + std::to_string(m) + ": " + e.what());
        }
        model.members.push_back(net.flatten());
    }
    return model;
}

BnnModel hmc_sample_bnn(const NetworkSpec& spec, const LabeledDataset& data,
                        const HmcConfig& cfg) {
    if (cfg.prior_std <= 0.0) throw ValueError("bnn: prior std must be > 0");
    data.validate();
    Rng init_rng = Rng(cfg.seed).split(0xb99);
    Mlp net(spec, init_rng);
    const std::size_t dim = net.param_count();
    const double inv_var = 1.0 / (cfg.prior_std * cfg.prior_std);

    // U = summed cross-entropy + Gaussian prior (negative log joint).
    PotentialFn potential = [&net, &data, inv_var](const std::vector<double>& w,
                                                   std::vector<double>& grad) -> double {
        net.set_flat(w);
        Tape tape;
        auto fwd = net.forward(tape, data.features);
        Var loss = cross_entropy_loss(tape, fwd.logits, data.labels, Reduction::Sum);
        double u = tape.value(loss).values[0];
        if (!std::isfinite(u)) return u;
        tape.backward(loss);
        grad.assign(w.size(), 0.0);
        std::size_t at = 0;
        for (Var pv : fwd.param_vars) {
            const Tensor& g = tape.grad(pv);
            for (double v : g.values) grad[at++] = v;
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            u += 0.5 * w[i] * w[i] * inv_var;
            grad[i] += w[i] * inv_var;
        }
        return u;
    };

    BnnModel model;
    model.spec = spec;
    model.posterior = hmc_sample(potential, dim, cfg, net.flatten(), &model.diagnostics);
    return model;
}

} // namespace uqlab
