#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "uqlab/common.hpp"

namespace uqlab {

struct HmcConfig {
    int chains = 1;
    int warmup = 1000;
    int samples = 50;
    double init_step = 1e-6;
    double target_accept = 0.95;
    int max_tree_depth = 5;  // trajectory capped at 2^depth leapfrog steps
    double prior_std = 1.0;  // used by the BNN potential
    std::uint64_t seed = 0;
    std::optional<int> fixed_leapfrog;  // disable trajectory jitter
    std::optional<double> fixed_step;   // disable step-size adaptation
};

struct HmcDiagnostics {
    double post_warmup_accept = 0.0;
    double adapted_step = 0.0;
    int divergences = 0;
    double max_abs_drift = 0.0;  // |H_proposal - H_current| over finite trajectories
};

/// Potential: returns U(q) and fills grad with dU/dq.
using PotentialFn =
    std::function<double(const std::vector<double>& q, std::vector<double>& grad)>;

/// Hamiltonian Monte Carlo with dual-averaging step-size adaptation and a
/// uniformly jittered trajectory length in [1, 2^max_tree_depth]. A
/// non-finite Hamiltonian rejects the step and halves the step size;
/// persistent divergence aborts.
std::vector<std::vector<double>> hmc_sample(const PotentialFn& potential, std::size_t dim,
                                            const HmcConfig& cfg,
                                            std::vector<double> init = {},
                                            HmcDiagnostics* diagnostics = nullptr);

} // namespace uqlab
