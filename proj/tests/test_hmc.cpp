#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "uqlab/hmc.hpp"

using namespace uqlab;

namespace {

// standard Gaussian potential: U = 0.5 ||q||^2
double gaussian_potential(const std::vector<double>& q, std::vector<double>& grad) {
    grad = q;
    double u = 0.0;
    for (double v : q) u += 0.5 * v * v;
    return u;
}

double mean_of(const std::vector<std::vector<double>>& draws, std::size_t dim) {
    double m = 0.0;
    for (const auto& d : draws) m += d[dim];
    return m / static_cast<double>(draws.size());
}

double var_of(const std::vector<std::vector<double>>& draws, std::size_t dim) {
    const double m = mean_of(draws, dim);
    double v = 0.0;
    for (const auto& d : draws) v += (d[dim] - m) * (d[dim] - m);
    return v / static_cast<double>(draws.size());
}

// batch-means standard error, robust to autocorrelation
double batch_se(const std::vector<std::vector<double>>& draws, std::size_t dim,
                std::size_t batches) {
    const std::size_t per = draws.size() / batches;
    std::vector<double> means;
    for (std::size_t b = 0; b < batches; ++b) {
        double m = 0.0;
        for (std::size_t i = 0; i < per; ++i) m += draws[b * per + i][dim];
        means.push_back(m / static_cast<double>(per));
    }
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= static_cast<double>(batches);
    double v = 0.0;
    for (double m : means) v += (m - grand) * (m - grand);
    v /= static_cast<double>(batches - 1);
    return std::sqrt(v / static_cast<double>(batches));
}

} // namespace

TEST_CASE("gaussian target: moments and acceptance") {
    HmcConfig cfg;
    cfg.warmup = 400;
    cfg.samples = 1000;
    cfg.init_step = 1e-3;
    cfg.target_accept = 0.95;
    cfg.max_tree_depth = 5;
    cfg.seed = 2718;
    HmcDiagnostics diag;
    const auto draws = hmc_sample(gaussian_potential, 2, cfg, {}, &diag);
    REQUIRE(draws.size() == 1000);
    for (std::size_t d = 0; d < 2; ++d) {
        CHECK(std::abs(mean_of(draws, d)) <= 3.0 * batch_se(draws, d, 20));
        CHECK(var_of(draws, d) == doctest::Approx(1.0).epsilon(0.15));
    }
    CHECK(diag.post_warmup_accept >= 0.75);
    CHECK(diag.post_warmup_accept <= 0.999);
    CHECK(diag.divergences == 0);
}

TEST_CASE("zero leapfrog steps propose the current state") {
    HmcConfig cfg;
    cfg.warmup = 0;
    cfg.samples = 25;
    cfg.fixed_leapfrog = 0;
    cfg.fixed_step = 0.1;
    cfg.seed = 5;
    HmcDiagnostics diag;
    std::vector<double> init = {0.7, -0.3};
    const auto draws = hmc_sample(gaussian_potential, 2, cfg, init, &diag);
    for (const auto& d : draws) CHECK(d == init);  // identity proposal, always accepted
    CHECK(diag.post_warmup_accept == doctest::Approx(1.0));
}

TEST_CASE("hamiltonian drift stays tiny at small fixed steps") {
    HmcConfig cfg;
    cfg.warmup = 0;
    cfg.samples = 200;
    cfg.fixed_leapfrog = 10;
    cfg.fixed_step = 1e-3;
    cfg.seed = 12;
    HmcDiagnostics diag;
    hmc_sample(gaussian_potential, 2, cfg, {}, &diag);
    CHECK(diag.max_abs_drift < 1e-4);
}

TEST_CASE("persistent divergence aborts") {
    auto bad = [](const std::vector<double>& q, std::vector<double>& grad) -> double {
        grad.assign(q.size(), 0.0);
        return std::numeric_limits<double>::quiet_NaN();
    };
    HmcConfig cfg;
    cfg.warmup = 10;
    cfg.samples = 10;
    cfg.seed = 3;
    std::vector<double> init = {0.1};
    CHECK_THROWS_AS(hmc_sample(bad, 1, cfg, init), RuntimeFailure);
}

TEST_CASE("divergent proposals halve the step and recover") {
    // potential blows up outside a small ball; large initial steps must
    // shrink until proposals stay finite
    auto walled = [](const std::vector<double>& q, std::vector<double>& grad) -> double {
        double u = 0.0;
        grad.resize(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) {
            if (std::abs(q[i]) > 3.0) return std::numeric_limits<double>::infinity();
            grad[i] = q[i];
            u += 0.5 * q[i] * q[i];
        }
        return u;
    };
    HmcConfig cfg;
    cfg.warmup = 300;
    cfg.samples = 300;
    cfg.init_step = 2.5;  // deliberately coarse
    cfg.seed = 8;
    HmcDiagnostics diag;
    const auto draws = hmc_sample(walled, 2, cfg, {}, &diag);
    CHECK(draws.size() == 300);
    CHECK(var_of(draws, 0) == doctest::Approx(1.0).epsilon(0.35));
}

TEST_CASE("config validation") {
    HmcConfig cfg;
    cfg.target_accept = 1.5;
    CHECK_THROWS_AS(hmc_sample(gaussian_potential, 2, cfg), ValueError);
    HmcConfig cfg2;
    cfg2.chains = 0;
    CHECK_THROWS_AS(hmc_sample(gaussian_potential, 2, cfg2), ValueError);
}
