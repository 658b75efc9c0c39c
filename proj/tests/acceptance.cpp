// Acceptance suite: one checkable criterion per function, each printing a
// single PASS/FAIL line. Run `acceptance <n>` for one criterion or
// `acceptance all` for the full set; the exit code is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fd_check.hpp"
#include "uqlab/suite.hpp"

using namespace uqlab;

namespace {

struct Outcome {
    bool pass = true;
    std::string details;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!details.empty()) details += "; ";
            details += what;
        }
    }
    void note(const std::string& what) {
        if (!details.empty()) details += "; ";
        details += what;
    }
};

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

const std::vector<std::string> kAllModels = {"deep-ensemble", "bnn",  "swag",
                                             "mc-dropout",    "duq", "sngp"};

// ---------------------------------------------------------------- criterion 1

double oracle_kl_pairs(const ProbEnsemble& e, std::size_t n) {
    const double clamp = 1e-12;
    double total = 0.0;
    for (std::size_t a = 0; a < e.members; ++a) {
        for (std::size_t b = 0; b < e.members; ++b) {
            if (a == b) continue;
            double kl = 0.0;
            for (std::size_t c = 0; c < e.classes; ++c) {
                const double p = e.at(a, n, c), q = e.at(b, n, c);
                kl += p * (std::log(std::max(p, clamp)) - std::log(std::max(q, clamp)));
            }
            total += kl;
        }
    }
    return total / static_cast<double>(e.members * (e.members - 1));
}

Outcome criterion_metric_identities() {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    Rng rng(615);
    std::size_t violations = 0, oracle_mismatch = 0;
    const std::size_t trials = 100000;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t m = 2 + rng.integer(15);
        const std::size_t c = 2 + rng.integer(9);
        ProbEnsemble e(m, 1, c);
        for (std::size_t mm = 0; mm < m; ++mm) {
            double total = 0.0;
            for (std::size_t cc = 0; cc < c; ++cc) {
                double g = -std::log(1.0 - rng.uniform());
                if (rng.bernoulli(0.25)) g *= 0.01;  // spiky rows stress the clamps
                e.at(mm, 0, cc) = g;
                total += g;
            }
            for (std::size_t cc = 0; cc < c; ++cc) e.at(mm, 0, cc) /= total;
        }
        const double ha = aleatoric_entropy(e)[0];
        const double he = epistemic_entropy(e)[0];
        const double kl = kl_uncertainty(e)[0];
        const double lnc = std::log(static_cast<double>(c));
        if (!(ha >= -1e-9 && he >= ha - 1e-9 && he <= lnc + 1e-9 && kl >= -1e-9)) ++violations;
        if (std::abs(kl - oracle_kl_pairs(e, 0)) >= 1e-12) ++oracle_mismatch;
    }
    const double secs = elapsed_s(t0);
    out.require(violations == 0, std::to_string(violations) + " identity violations");
    out.require(oracle_mismatch == 0,
                std::to_string(oracle_mismatch) + " KL oracle mismatches beyond 1e-12");
    out.require(secs < 30.0, "runtime " + fmt(secs) + "s exceeds 30s");
    out.note("100000 ensembles in " + fmt(secs) + "s");
    return out;
}

// ---------------------------------------------------------------- criterion 2

Outcome criterion_autodiff_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    std::size_t failed = 0;
    const std::size_t total = 1000;
    for (std::size_t i = 0; i < total; ++i) {
        fdcheck::RandomGraph g = fdcheck::make_graph(90000 + i);
        if (!fdcheck::finite_difference_check(g, 1e-4)) ++failed;
    }
    const double secs = elapsed_s(t0);
    out.require(failed == 0, std::to_string(failed) + "/1000 graphs failed the check");
    out.require(secs < 60.0, "runtime " + fmt(secs) + "s exceeds 60s");
    out.note("1000 graphs in " + fmt(secs) + "s");
    return out;
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion_hmc_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    auto potential = [](const std::vector<double>& q, std::vector<double>& grad) -> double {
        grad = q;
        double u = 0.0;
        for (double v : q) u += 0.5 * v * v;
        return u;
    };
    HmcConfig cfg;
    cfg.warmup = 500;
    cfg.samples = 2000;
    cfg.init_step = 1e-3;
    cfg.target_accept = 0.95;
    cfg.max_tree_depth = 5;
    cfg.seed = 271828;
    HmcDiagnostics diag;
    const auto draws = hmc_sample(potential, 2, cfg, {}, &diag);

    for (std::size_t d = 0; d < 2; ++d) {
        double mean = 0.0;
        for (const auto& q : draws) mean += q[d];
        mean /= static_cast<double>(draws.size());
        // batch-means standard error over 20 batches of 100
        const std::size_t batches = 20, per = draws.size() / batches;
        std::vector<double> bm(batches, 0.0);
        for (std::size_t b = 0; b < batches; ++b) {
            for (std::size_t i = 0; i < per; ++i) bm[b] += draws[b * per + i][d];
            bm[b] /= static_cast<double>(per);
        }
        double grand = std::accumulate(bm.begin(), bm.end(), 0.0) / batches;
        double vb = 0.0;
        for (double m : bm) vb += (m - grand) * (m - grand);
        const double se = std::sqrt(vb / (batches - 1) / batches);
        double var = 0.0;
        for (const auto& q : draws) var += (q[d] - mean) * (q[d] - mean);
        var /= static_cast<double>(draws.size());
        out.require(std::abs(mean) <= 3.0 * se,
                    "dim " + std::to_string(d) + " mean " + fmt(mean) + " beyond 3 SE " +
                        fmt(3.0 * se));
        out.require(std::abs(var - 1.0) <= 0.15,
                    "dim " + std::to_string(d) + " variance " + fmt(var) + " off by >15%");
        out.note("dim" + std::to_string(d) + " mean " + fmt(mean) + " var " + fmt(var));
    }
    out.require(diag.post_warmup_accept >= 0.75 && diag.post_warmup_accept <= 0.999,
                "acceptance " + fmt(diag.post_warmup_accept) + " outside [0.75, 0.999]");
    out.note("acceptance " + fmt(diag.post_warmup_accept));
    const double secs = elapsed_s(t0);
    out.require(secs < 120.0, "runtime " + fmt(secs) + "s exceeds 2min");
    out.note(fmt(secs) + "s");
    return out;
}

// ------------------------------------------------------- half-moons machinery

struct SeedAverages {
    std::map<std::string, double> clean, adv, epi_auroc;
};

SeedAverages run_half_moons_models(const ExperimentConfig& cfg, bool with_attack,
                                   bool with_ood) {
    const DatasetBundle data = build_dataset(cfg, cfg.seeds().front());
    SeedAverages avg;
    for (const std::string& name : kAllModels) {
        for (std::uint64_t seed : cfg.seeds()) {
            const Model model = train_model(cfg, name, data, seed);
            avg.clean[name] +=
                accuracy(predict_mean_probs(model, data.test.features), data.test.labels);
            if (with_attack) {
                ExperimentResult r = run_robustness(
                    model, data.train, data.test, cfg.attack_spec(),
                    cfg.proxy_options(data.input_dim, data.classes), seed);
                avg.adv[name] += r.attack.adversarial_accuracy;
            }
            if (with_ood) {
                const auto ri = report(model, data.test.features);
                const auto ro = report(model, data.ood->features);
                avg.epi_auroc[name] += auroc(ri.epistemic_score(), ro.epistemic_score());
            }
        }
        const double inv = 1.0 / static_cast<double>(cfg.seeds().size());
        avg.clean[name] *= inv;
        if (with_attack) avg.adv[name] *= inv;
        if (with_ood) avg.epi_auroc[name] *= inv;
    }
    return avg;
}

// ---------------------------------------------------------------- criterion 4

Outcome criterion_half_moons_robustness() {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    ExperimentConfig cfg = resolve_config(nlohmann::json::object());  // Table-1 attack defaults
    const SeedAverages avg = run_half_moons_models(cfg, true, false);
    for (const std::string& name : kAllModels) {
        const double clean = avg.clean.at(name), adv = avg.adv.at(name);
        out.require(clean >= 0.95, name + " clean " + fmt(clean) + " < 0.95");
        out.require(adv >= 0.20 && adv <= 0.60,
                    name + " adv " + fmt(adv) + " outside [0.20, 0.60]");
        out.require(clean - adv >= 0.30,
                    name + " drop " + fmt(clean - adv) + " < 30 points");
        out.note(name + " clean " + fmt(clean) + " adv " + fmt(adv));
    }
    const double secs = elapsed_s(t0);
    out.require(secs < 900.0, "runtime " + fmt(secs) + "s exceeds 15min");
    out.note(fmt(secs) + "s");
    return out;
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion_half_moons_ood() {
    Outcome out;
    ExperimentConfig cfg = resolve_config(nlohmann::json::object());  // default margin
    const SeedAverages avg = run_half_moons_models(cfg, false, true);
    for (const char* single : {"duq", "sngp"}) {
        const double a = avg.epi_auroc.at(single);
        out.require(a >= 0.95, std::string(single) + " epistemic AUROC " + fmt(a) + " < 0.95");
        for (const char* other : {"deep-ensemble", "bnn", "swag", "mc-dropout"}) {
            out.require(a > avg.epi_auroc.at(other),
                        std::string(single) + " (" + fmt(a) + ") does not exceed " + other +
                            " (" + fmt(avg.epi_auroc.at(other)) + ")");
        }
    }
    for (const std::string& name : kAllModels) {
        out.note(name + " " + fmt(avg.epi_auroc.at(name)));
    }
    return out;
}

// ------------------------------------------------------------- toy machinery

struct ToyRun {
    DatasetBundle data;
    std::map<std::string, std::map<std::uint64_t, Model>> models;  // name -> seed -> model
};

ToyRun train_toy_models(const ExperimentConfig& cfg) {
    ToyRun run;
    run.data = build_dataset(cfg, cfg.seeds().front());
    for (const std::string& name : kAllModels) {
        for (std::uint64_t seed : cfg.seeds()) {
            run.models[name].emplace(seed, train_model(cfg, name, run.data, seed));
        }
    }
    return run;
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion_toy_robustness() {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    ExperimentConfig cfg = resolve_config({{"dataset", {{"kind", "toy-manifold"}}}});
    ToyRun run = train_toy_models(cfg);
    const std::vector<double> grid = cfg.manifold_strength_grid();
    const std::size_t repeats = cfg.manifold_repeats();

    // seed-averaged on/off sweep curves per model
    std::map<std::string, std::vector<double>> on_curve, off_curve;
    for (const std::string& name : kAllModels) {
        on_curve[name].assign(grid.size(), 0.0);
        off_curve[name].assign(grid.size(), 0.0);
        for (std::uint64_t seed : cfg.seeds()) {
            const Model& m = run.models[name].at(seed);
            const auto on = run_manifold_sweep(m, run.data.test, *run.data.meta, grid,
                                               PerturbDirection::On, repeats, seed);
            const auto off = run_manifold_sweep(m, run.data.test, *run.data.meta, grid,
                                                PerturbDirection::Off, repeats, seed);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                on_curve[name][i] += on[i].second;
                off_curve[name][i] += off[i].second;
            }
        }
        const double inv = 1.0 / static_cast<double>(cfg.seeds().size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            on_curve[name][i] *= inv;
            off_curve[name][i] *= inv;
        }
    }

    const std::size_t last = grid.size() - 1;
    const double de_off = off_curve["deep-ensemble"][last];
    const double duq_off = off_curve["duq"][last];
    out.require(de_off - duq_off >= 0.15,
                "off-manifold gap at eps=" + fmt(grid[last]) + ": DE " + fmt(de_off) +
                    " - DUQ " + fmt(duq_off) + " < 15 points");
    out.note("off@" + fmt(grid[last]) + " DE " + fmt(de_off) + " DUQ " + fmt(duq_off));

    for (std::size_t i = 0; i < grid.size(); ++i) {
        double lo = 1.0, hi = 0.0;
        for (const std::string& name : kAllModels) {
            lo = std::min(lo, on_curve[name][i]);
            hi = std::max(hi, on_curve[name][i]);
        }
        out.require(hi - lo <= 0.10, "on-manifold band " + fmt(hi - lo) + " at eps=" +
                                         fmt(grid[i]) + " exceeds 10 points");
    }

    // random-restart sensitivity: fields from seeds 12345 and 99999 differ
    // more than two runs of the same seed (which are identical)
    for (const char* name : {"mc-dropout", "swag", "bnn"}) {
        const Model& first = run.models[name].at(12345);
        const Model& second = run.models[name].at(99999);
        const UncertaintyField fa = uncertainty_field(first, run.data.train, 40, 1.5);
        const UncertaintyField fa2 = uncertainty_field(first, run.data.train, 40, 1.5);
        const UncertaintyField fb = uncertainty_field(second, run.data.train, 40, 1.5);
        const double same = field_cosine_distance(fa, fa2, "epistemic");
        const double cross = field_cosine_distance(fa, fb, "epistemic");
        out.require(cross > same, std::string(name) + " restart distance " + fmt(cross) +
                                      " not above same-seed " + fmt(same));
        out.note(std::string(name) + " restart-dist " + fmt(cross));
    }
    out.note(fmt(elapsed_s(t0)) + "s");
    return out;
}

// ---------------------------------------------------------------- criterion 7

Outcome criterion_toy_ood() {
    Outcome out;
    ExperimentConfig cfg = resolve_config({{"dataset", {{"kind", "toy-manifold"}}}});
    ToyRun run = train_toy_models(cfg);
    for (const std::string& name : kAllModels) {
        double a = 0.0;
        for (std::uint64_t seed : cfg.seeds()) {
            const Model& m = run.models[name].at(seed);
            const auto ri = report(m, run.data.test.features);
            const auto ro = report(m, run.data.ood->features);
            a += auroc(ri.epistemic_score(), ro.epistemic_score());
        }
        a /= static_cast<double>(cfg.seeds().size());
        out.require(a >= 0.9, name + " epistemic AUROC " + fmt(a) + " < 0.9");
        out.note(name + " " + fmt(a));
    }
    return out;
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion_sngp_mean_field() {
    Outcome out;
    ExperimentConfig cfg = resolve_config(nlohmann::json::object());
    const DatasetBundle data = build_dataset(cfg, cfg.seeds().front());
    const Model model = train_model(cfg, "sngp", data, cfg.seeds().front());
    const SngpModel& sngp = std::get<SngpModel>(model);
    const Tensor mf = sngp_mean_field_probs(sngp, data.test.features);
    const ProbEnsemble samples = sngp_sample_probs(sngp, data.test.features, 10000, 424242);
    const Tensor avg = samples.mean_probs();
    double mad = 0.0;
    for (std::size_t i = 0; i < avg.numel(); ++i) {
        mad += std::abs(avg.values[i] - mf.values[i]);
    }
    mad /= static_cast<double>(avg.numel());
    out.require(mad < 0.02, "mean |MF - sampled| " + fmt(mad) + " >= 0.02");
    out.note("mean abs difference " + fmt(mad) + " over " +
             std::to_string(data.test.size()) + " test points");
    return out;
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion_pgd_contracts() {
    Outcome out;
    ExperimentConfig cfg = resolve_config(nlohmann::json::object());
    const DatasetBundle data = build_dataset(cfg, 12345);
    const Model target = train_model(cfg, "deep-ensemble", data, 12345);
    const ProxyModel proxy =
        fit_proxy(target, data.train, cfg.proxy_options(2, 2), 12345, &data.test);
    const std::vector<int> preds =
        argmax_rows(predict_mean_probs(target, data.test.features));
    for (double eps : {0.2, 0.6, 1.5}) {
        AttackSpec spec = cfg.attack_spec();
        spec.epsilon = eps;
        const AdversarialBatch batch = l2_pgd(proxy, data.test.features, preds, spec);
        double max_norm = 0.0;
        for (double v : batch.delta_norm) max_norm = std::max(max_norm, v);
        out.require(max_norm <= eps + 1e-9,
                    "max |delta| " + fmt(max_norm) + " exceeds eps " + fmt(eps));
        std::size_t ok = 0;
        for (std::size_t i = 0; i < batch.proxy_loss_final.size(); ++i) {
            if (batch.proxy_loss_final[i] >= batch.proxy_loss_initial[i] - 1e-12) ++ok;
        }
        const double frac = static_cast<double>(ok) /
                            static_cast<double>(batch.proxy_loss_final.size());
        out.require(frac >= 0.95,
                    "loss non-decreasing for only " + fmt(frac) + " at eps " + fmt(eps));
        out.note("eps " + fmt(eps) + ": max|d| " + fmt(max_norm) + ", monotone " + fmt(frac));
    }
    return out;
}

// --------------------------------------------------------------- criterion 10

Outcome criterion_mnist_substitute() {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    ExperimentConfig cfg = resolve_config(
        {{"dataset", {{"kind", "mnist"}}},
         // desk-scale attack budget on [0,1]-scaled 196-dim inputs
         {"attack", {{"epsilon", 1.0}, {"alpha", 0.1}}},
         {"seeds", {12345}}});
    DatasetBundle data;
    try {
        data = build_dataset(cfg, cfg.seeds().front());
    } catch (const std::exception& e) {
        out.require(false, std::string("MNIST/Fashion-MNIST unavailable: ") + e.what() +
                               " (provide IDX files via dataset.mnist.data_dir or "
                               "UQLAB_DATA_DIR)");
        return out;
    }
    for (const std::string& name : kAllModels) {
        const Model model = train_model(cfg, name, data, cfg.seeds().front());
        const double clean =
            accuracy(predict_mean_probs(model, data.test.features), data.test.labels);
        ExperimentResult r =
            run_robustness(model, data.train, data.test, cfg.attack_spec(),
                           cfg.proxy_options(data.input_dim, data.classes), 12345);
        out.require(r.attack.adversarial_accuracy < clean,
                    name + " adversarial accuracy not strictly below clean");
        const auto ri = report(model, data.test.features);
        const auto ro = report(model, data.ood->features);
        const double a = auroc(ri.epistemic_score(), ro.epistemic_score());
        out.require(a >= 0.8, name + " fashion-mnist AUROC " + fmt(a) + " < 0.8");
        out.note(name + " clean " + fmt(clean) + " adv " + fmt(r.attack.adversarial_accuracy) +
                 " ood-auroc " + fmt(a));
    }
    const double secs = elapsed_s(t0);
    out.require(secs < 2700.0, "runtime " + fmt(secs) + "s exceeds 45min");
    return out;
}

struct Criterion {
    int index;
    const char* name;
    std::function<Outcome()> run;
};

const std::vector<Criterion> kCriteria = {
    {1, "metric identity suite", criterion_metric_identities},
    {2, "autodiff finite-difference oracle", criterion_autodiff_oracle},
    {3, "hmc gaussian oracle", criterion_hmc_oracle},
    {4, "half moons robustness", criterion_half_moons_robustness},
    {5, "half moons ood ordering", criterion_half_moons_ood},
    {6, "toy manifold robustness", criterion_toy_robustness},
    {7, "toy manifold ood", criterion_toy_ood},
    {8, "sngp mean-field consistency", criterion_sngp_mean_field},
    {9, "pgd contracts", criterion_pgd_contracts},
    {10, "downsampled mnist substitute", criterion_mnist_substitute},
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc > 1 && std::strcmp(argv[1], "all") != 0) only = std::atoi(argv[1]);
    int failures = 0;
    for (const Criterion& c : kCriteria) {
        if (only != 0 && c.index != only) continue;
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.details = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d (%s): %s\n", out.pass ? "PASS" : "FAIL", c.index,
                    c.name, out.details.c_str());
        std::fflush(stdout);
        if (!out.pass) ++failures;
    }
    return failures;
}
