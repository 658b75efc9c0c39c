#include <algorithm>
#include <cmath>

#include "uqlab/models.hpp"

namespace uqlab {

std::vector<double> SwagState::diag_variance() const {
    std::vector<double> var(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        var[i] = std::max(0.0, sq_mean[i] - mean[i] * mean[i]);
    }
    return var;
}

SwagState swag_fit(const NetworkSpec& spec, const LabeledDataset& data, const SwagConfig& cfg,
                   std::uint64_t seed) {
    if (cfg.rank > cfg.explore_epochs) {
        throw ValueError("swag: rank " + std::to_string(cfg.rank) + " exceeds " +
                         std::to_string(cfg.explore_epochs) + " exploration epochs");
    }
    data.validate();
    const Rng base(seed);
    Rng init_rng = base.split(0x54a6);
    Mlp net(spec, init_rng);
    TrainOptions pre = cfg.pretrain;
    pre.seed = base.split(0x54a7).raw();
    train_classifier(net, data.features, data.labels, pre);

    SwagState state;
    state.spec = spec;
    state.mean.assign(net.param_count(), 0.0);
    state.sq_mean.assign(net.param_count(), 0.0);

    // constant-rate SGD exploration, one snapshot per epoch
    TrainOptions explore;
    explore.opt.kind = OptKind::SgdMomentum;
    explore.opt.learning_rate = cfg.explore_lr > 0.0 ? cfg.explore_lr : 1e-12;
    explore.opt.momentum = cfg.explore_momentum;
    explore.opt.weight_decay = cfg.explore_weight_decay;
    explore.batch_size = cfg.explore_batch;
    explore.epochs = 1;
    const bool frozen = cfg.explore_lr <= 0.0;
    for (std::size_t epoch = 0; epoch < cfg.explore_epochs; ++epoch) {
        if (!frozen) {
            explore.seed = base.split(0x54b0 + epoch).raw();
            train_classifier(net, data.features, data.labels, explore);
        }
        const std::vector<double> w = net.flatten();
        state.snapshots += 1;
        const double inv = 1.0 / static_cast<double>(state.snapshots);
        for (std::size_t i = 0; i < w.size(); ++i) {
            state.mean[i] += (w[i] - state.mean[i]) * inv;
            state.sq_mean[i] += (w[i] * w[i] - state.sq_mean[i]) * inv;
        }
        std::vector<double> dev(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) dev[i] = w[i] - state.mean[i];
        state.deviations.push_back(std::move(dev));
        if (state.deviations.size() > cfg.rank) {
            state.deviations.erase(state.deviations.begin());
        }
    }
    state.fitted = true;
    return state;
}

std::vector<std::vector<double>> swag_sample(const SwagState& state, std::size_t count,
                                             double scale, std::uint64_t seed) {
    if (!state.fitted) throw ValueError("swag: sampling from an unfitted state");
    std::vector<std::vector<double>> out;
    out.reserve(count);
    const std::size_t dim = state.mean.size();
    const std::vector<double> var = state.diag_variance();
    const std::size_t k = state.deviations.size();
    Rng rng = Rng(seed).split(0x54a9);
    for (std::size_t s = 0; s < count; ++s) {
        std::vector<double> w = state.mean;
        if (scale != 0.0) {
            const double diag_coeff = scale / std::sqrt(2.0);
            for (std::size_t i = 0; i < dim; ++i) {
                w[i] += diag_coeff * std::sqrt(var[i]) * rng.normal();
            }
            if (k >= 2) {
                const double lr_coeff = scale / std::sqrt(2.0 * static_cast<double>(k - 1));
                for (std::size_t col = 0; col < k; ++col) {
                    const double z = rng.normal();
                    const std::vector<double>& d = state.deviations[col];
                    for (std::size_t i = 0; i < dim; ++i) w[i] += lr_coeff * z * d[i];
                }
            }
        }
        out.push_back(std::move(w));
    }
    return out;
}

} // namespace uqlab
