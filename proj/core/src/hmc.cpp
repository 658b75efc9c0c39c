#include "uqlab/hmc.hpp"

#include <algorithm>
#include <cmath>

namespace uqlab {

namespace {

// Dual averaging after Hoffman & Gelman: gamma=0.05, t0=10, kappa=0.75.
struct StepAdapter {
    double mu;
    double log_eps;
    double log_eps_bar;
    double h_bar = 0.0;
    double target;
    int t = 0;

    StepAdapter(double eps0, double target_accept)
        : mu(std::log(10.0 * eps0)),
          log_eps(std::log(eps0)),
          log_eps_bar(std::log(eps0)),
          target(target_accept) {}

    void update(double accept_prob) {
        ++t;
        const double frac = 1.0 / (t + 10.0);
        h_bar = (1.0 - frac) * h_bar + frac * (target - accept_prob);
        log_eps = mu - std::sqrt(static_cast<double>(t)) / 0.05 * h_bar;
        const double eta = std::pow(static_cast<double>(t), -0.75);
        log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
    }

    double current() const { return std::exp(log_eps); }
    double adapted() const { return std::exp(log_eps_bar); }
};

} // namespace

std::vector<std::vector<double>> hmc_sample(const PotentialFn& potential, std::size_t dim,
                                            const HmcConfig& cfg, std::vector<double> init,
                                            HmcDiagnostics* diagnostics) {
    if (cfg.samples < 0 || cfg.warmup < 0 || cfg.chains < 1) {
        throw ValueError("hmc: counts must be positive");
    }
    if (cfg.target_accept <= 0.0 || cfg.target_accept >= 1.0) {
        throw ValueError("hmc: target acceptance must lie in (0,1)");
    }
    if (cfg.max_tree_depth < 0 || cfg.max_tree_depth > 20) {
        throw ValueError("hmc: max tree depth out of range");
    }
    if (!init.empty() && init.size() != dim) {
        throw ValueError("hmc: init size does not match dimension");
    }

    const int leapfrog_cap = 1 << cfg.max_tree_depth;
    std::vector<std::vector<double>> draws;
    draws.reserve(static_cast<std::size_t>(cfg.samples) * static_cast<std::size_t>(cfg.chains));

    double accept_accum = 0.0;
    long accept_count = 0;
    double max_drift = 0.0;
    int divergences = 0;
    double last_adapted_step = cfg.fixed_step.value_or(cfg.init_step);

    for (int chain = 0; chain < cfg.chains; ++chain) {
        Rng rng = Rng(cfg.seed).split(0xac3ad + static_cast<std::uint64_t>(chain));
        std::vector<double> q = init.empty() ? std::vector<double>(dim, 0.0) : init;
        std::vector<double> grad(dim, 0.0), grad_new(dim, 0.0);
        double u_cur = potential(q, grad);
        if (!std::isfinite(u_cur)) throw RuntimeFailure("hmc: non-finite potential at init");

        StepAdapter adapter(cfg.init_step, cfg.target_accept);
        double eps = cfg.fixed_step.value_or(cfg.init_step);
        int consecutive_divergences = 0;

        const int total = cfg.warmup + cfg.samples;
        for (int iter = 0; iter < total; ++iter) {
            const bool warming = iter < cfg.warmup;
            if (!cfg.fixed_step) {
                eps = warming ? adapter.current() : adapter.adapted();
            }

            std::vector<double> p(dim);
            for (double& v : p) v = rng.normal();
            double kin = 0.0;
            for (double v : p) kin += v * v;
            const double h0 = u_cur + 0.5 * kin;

            const int steps = cfg.fixed_leapfrog
                                  ? *cfg.fixed_leapfrog
                                  : 1 + static_cast<int>(rng.integer(
                                            static_cast<std::uint64_t>(leapfrog_cap)));

            std::vector<double> q_new = q;
            double u_new = u_cur;
            double h1 = h0;
            bool finite = true;
            if (steps > 0) {
                std::vector<double> p_new = p;
                grad_new = grad;
                for (std::size_t i = 0; i < dim; ++i) p_new[i] -= 0.5 * eps * grad_new[i];
                for (int s = 0; s < steps; ++s) {
                    for (std::size_t i = 0; i < dim; ++i) q_new[i] += eps * p_new[i];
                    u_new = potential(q_new, grad_new);
                    if (!std::isfinite(u_new)) {
                        finite = false;
                        break;
                    }
                    const double half = (s + 1 == steps) ? 0.5 * eps : eps;
                    for (std::size_t i = 0; i < dim; ++i) p_new[i] -= half * grad_new[i];
                }
                if (finite) {
                    double kin_new = 0.0;
                    for (double v : p_new) kin_new += v * v;
                    h1 = u_new + 0.5 * kin_new;
                    finite = std::isfinite(h1);
                }
            }

            double accept_prob = 0.0;
            if (!finite) {
                ++divergences;
                ++consecutive_divergences;
                eps *= 0.5;
                if (!cfg.fixed_step) {
                    // re-anchor adaptation on the halved step
                    adapter.mu = std::log(10.0 * eps);
                    adapter.log_eps = std::log(eps);
                }
                if (consecutive_divergences > 100) {
                    throw RuntimeFailure("hmc: persistent divergence, aborting");
                }
            } else {
                consecutive_divergences = 0;
                max_drift = std::max(max_drift, std::abs(h1 - h0));
                accept_prob = std::min(1.0, std::exp(h0 - h1));
                if (rng.uniform() < accept_prob) {
                    q = std::move(q_new);
                    u_cur = u_new;
                    grad = grad_new;
                }
            }

            if (warming) {
                if (!cfg.fixed_step) adapter.update(accept_prob);
            } else {
                accept_accum += accept_prob;
                ++accept_count;
                draws.push_back(q);
            }
        }
        last_adapted_step = cfg.fixed_step.value_or(adapter.adapted());
    }

    if (diagnostics) {
        diagnostics->post_warmup_accept =
            accept_count > 0 ? accept_accum / static_cast<double>(accept_count) : 0.0;
        diagnostics->adapted_step = last_adapted_step;
        diagnostics->divergences = divergences;
        diagnostics->max_abs_drift = max_drift;
    }
    return draws;
}

} // namespace uqlab
