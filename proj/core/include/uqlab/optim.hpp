#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uqlab/tensor.hpp"

namespace uqlab {

enum class OptKind { SgdMomentum, Adam, RmsProp };

const char* opt_kind_name(OptKind k);
OptKind opt_kind_from_name(const std::string& name);

struct OptimizerConfig {
    OptKind kind = OptKind::SgdMomentum;
    double learning_rate = 0.01;
    double momentum = 0.0;
    double weight_decay = 0.0;
    double beta1 = 0.9;      // adam
    double beta2 = 0.999;    // adam
    double eps = 1e-8;       // adam / rmsprop
    double rho = 0.9;        // rmsprop
    std::optional<double> clip_norm;  // global gradient-norm clip
};

struct ParamRef {
    std::string name;
    Tensor* tensor = nullptr;
};

/// Stateful optimizer: moment buffers are allocated on first step and
/// shape-checked against the parameters afterwards.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg);

    const OptimizerConfig& config() const { return cfg_; }

    /// Applies one update. grads[i] pairs with params[i]. Clipping (when
    /// configured) rescales the whole gradient set so its global L2 norm
    /// is at most clip_norm, before any other processing.
    void step(const std::vector<ParamRef>& params, const std::vector<const Tensor*>& grads);

private:
    OptimizerConfig cfg_;
    std::vector<Tensor> m1_;  // momentum / first moment / square accumulator
    std::vector<Tensor> m2_;  // adam second moment
    long long t_ = 0;
};

} // namespace uqlab
