#include "uqlab/models.hpp"

namespace uqlab {

namespace {

ProbEnsemble map_weight_samples(const NetworkSpec& spec,
                                const std::vector<std::vector<double>>& samples,
                                const Tensor& x) {
    if (samples.empty()) throw ValueError("predict: model has no weight samples (untrained?)");
    Rng scratch(0);
    Mlp net(spec, scratch);
    std::vector<Tensor> member_probs;
    member_probs.reserve(samples.size());
    for (const auto& w : samples) {
        net.set_flat(w);
        member_probs.push_back(softmax_plain(net.logits_plain(x)));
    }
    return ProbEnsemble::from_members(member_probs);
}

} // namespace

std::string model_kind(const Model& model) {
    return std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DeepEnsembleModel>) return "deep-ensemble";
            if constexpr (std::is_same_v<T, BnnModel>) return "bnn";
            if constexpr (std::is_same_v<T, SwagModel>) return "swag";
            if constexpr (std::is_same_v<T, McDropoutModel>) return "mc-dropout";
            if constexpr (std::is_same_v<T, DuqModel>) return "duq";
            if constexpr (std::is_same_v<T, SngpModel>) return "sngp";
        },
        model);
}

ProbEnsemble predict_ensemble(const Model& model, const Tensor& x) {
    ProbEnsemble out = std::visit(
        [&](const auto& m) -> ProbEnsemble {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DeepEnsembleModel>) {
                return map_weight_samples(m.spec, m.members, x);
            } else if constexpr (std::is_same_v<T, BnnModel>) {
                return map_weight_samples(m.spec, m.posterior, x);
            } else if constexpr (std::is_same_v<T, SwagModel>) {
                const auto samples =
                    swag_sample(m.state, m.sample_count, m.sample_scale, m.sample_seed);
                return map_weight_samples(m.state.spec, samples, x);
            } else if constexpr (std::is_same_v<T, McDropoutModel>) {
                if (m.weights.empty()) throw ValueError("predict: untrained mc-dropout model");
                return mc_dropout_predict(m, x, m.passes, m.predict_seed);
            } else if constexpr (std::is_same_v<T, DuqModel>) {
                if (m.weights.empty()) throw ValueError("predict: untrained duq model");
                return ProbEnsemble::from_matrix(duq_predict(m, x).aleatoric);
            } else {
                if (m.weights.empty()) throw ValueError("predict: untrained sngp model");
                return sngp_sample_probs(m, x, m.sample_count, m.sample_seed);
            }
        },
        model);
    return out;
}

Tensor predict_mean_probs(const Model& model, const Tensor& x) {
    if (const auto* sngp = std::get_if<SngpModel>(&model)) {
        return sngp_mean_field_probs(*sngp, x);
    }
    return predict_ensemble(model, x).mean_probs();
}

UncertaintyReport report(const Model& model, const Tensor& x) {
    UncertaintyReport rep;
    rep.model_kind = model_kind(model);
    if (const auto* duq = std::get_if<DuqModel>(&model)) {
        const DuqPrediction pred = duq_predict(*duq, x);
        rep.aleatoric = aleatoric_entropy(ProbEnsemble::from_matrix(pred.aleatoric));
        rep.distance = pred.distances;
        if (duq->collapse_warning) rep.warnings.push_back("duq: centroids nearly collapsed");
        return rep;
    }
    const ProbEnsemble ens = predict_ensemble(model, x);
    rep.aleatoric = aleatoric_entropy(ens);
    rep.epistemic_entropy = epistemic_entropy(ens);
    if (ens.members >= 2) rep.kl = kl_uncertainty(ens);
    if (const auto* sngp = std::get_if<SngpModel>(&model)) {
        if (sngp_latent(*sngp, x).clamped_negative) {
            rep.warnings.push_back("sngp: negative predictive variance clamped at 0");
        }
    }
    return rep;
}

} // namespace uqlab
