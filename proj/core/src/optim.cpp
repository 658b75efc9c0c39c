#include "uqlab/optim.hpp"

#include <cmath>

namespace uqlab {

const char* opt_kind_name(OptKind k) {
    switch (k) {
        case OptKind::SgdMomentum: return "sgd-momentum";
        case OptKind::Adam: return "adam";
        case OptKind::RmsProp: return "rmsprop";
    }
    return "?";
}

OptKind opt_kind_from_name(const std::string& name) {
    if (name == "sgd-momentum" || name == "sgd") return OptKind::SgdMomentum;
    if (name == "adam") return OptKind::Adam;
    if (name == "rmsprop") return OptKind::RmsProp;
    throw ValueError("unknown optimizer kind: " + name);
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) {
    if (cfg_.learning_rate <= 0.0) {
        throw ValueError("optimizer: learning rate must be > 0, got " +
                         std::to_string(cfg_.learning_rate));
    }
}

void Optimizer::step(const std::vector<ParamRef>& params,
                     const std::vector<const Tensor*>& grads) {
    if (params.size() != grads.size()) {
        throw ValueError("optimizer: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " grads");
    }
    if (m1_.empty()) {
        for (const auto& p : params) m1_.emplace_back(Tensor(p.tensor->shape));
        if (cfg_.kind == OptKind::Adam) {
            for (const auto& p : params) m2_.emplace_back(Tensor(p.tensor->shape));
        }
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& g = *grads[i];
        if (!g.same_shape(*params[i].tensor)) {
            throw ValueError("optimizer: gradient shape " + shape_str(g.shape) +
                             " does not match parameter " + params[i].name + " " +
                             shape_str(params[i].tensor->shape));
        }
        for (double v : g.values) {
            if (!std::isfinite(v)) {
                throw RuntimeFailure("optimizer: non-finite gradient for parameter " +
                                     params[i].name);
            }
            sq += v * v;
        }
    }
    const double gnorm = std::sqrt(sq);
    double clip_scale = 1.0;
    if (cfg_.clip_norm && gnorm > *cfg_.clip_norm) clip_scale = *cfg_.clip_norm / gnorm;

    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = *params[i].tensor;
        const Tensor& graw = *grads[i];
        Tensor& buf = m1_[i];
        for (std::size_t j = 0; j < w.numel(); ++j) {
            const double g = graw.values[j] * clip_scale + cfg_.weight_decay * w.values[j];
            switch (cfg_.kind) {
                case OptKind::SgdMomentum: {
                    buf.values[j] = cfg_.momentum * buf.values[j] + g;
                    w.values[j] -= cfg_.learning_rate * buf.values[j];
                    break;
                }
                case OptKind::Adam: {
                    buf.values[j] = cfg_.beta1 * buf.values[j] + (1.0 - cfg_.beta1) * g;
                    double& v2 = m2_[i].values[j];
                    v2 = cfg_.beta2 * v2 + (1.0 - cfg_.beta2) * g * g;
                    const double mhat = buf.values[j] / bc1;
                    const double vhat = v2 / bc2;
                    w.values[j] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
                    break;
                }
                case OptKind::RmsProp: {
                    buf.values[j] = cfg_.rho * buf.values[j] + (1.0 - cfg_.rho) * g * g;
                    w.values[j] -= cfg_.learning_rate * g / (std::sqrt(buf.values[j]) + cfg_.eps);
                    break;
                }
            }
        }
    }
}

} // namespace uqlab
