#include "uqlab/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace uqlab {

double auroc(const std::vector<double>& in_dist_scores, const std::vector<double>& ood_scores) {
    if (ood_scores.empty()) throw ValueError("auroc: empty OoD score set");
    if (in_dist_scores.empty()) throw ValueError("auroc: empty in-distribution score set");
    struct Entry {
        double score;
        bool positive;
    };
    std::vector<Entry> entries;
    entries.reserve(in_dist_scores.size() + ood_scores.size());
    for (double s : in_dist_scores) entries.push_back({s, false});
    for (double s : ood_scores) entries.push_back({s, true});
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // midranks over tie groups
    const std::size_t n = entries.size();
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && entries[j + 1].score == entries[i].score) ++j;
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (entries[k].positive) rank_sum_pos += midrank;
        }
        i = j + 1;
    }
    const double p = static_cast<double>(ood_scores.size());
    const double q = static_cast<double>(in_dist_scores.size());
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

ExperimentResult run_robustness(const Model& target, const LabeledDataset& train,
                                const LabeledDataset& test, const AttackSpec& attack,
                                const ProxyFitOptions& proxy_options, std::uint64_t seed,
                                AdversarialBatch* batch_out) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentResult result;
    result.model = model_kind(target);
    result.task = "robustness";
    result.attack_spec = attack;
    result.seeds = {seed};

    result.clean_accuracy = accuracy(predict_mean_probs(target, test.features), test.labels);
    const ProxyModel proxy = fit_proxy(target, train, proxy_options, seed, &test);
    const std::vector<int> target_preds =
        argmax_rows(predict_mean_probs(target, test.features));
    AdversarialBatch batch = l2_pgd(proxy, test.features, target_preds, attack);
    result.attack = evaluate_attack(target, batch, test.labels);
    if (batch_out) {
        batch.target_fooled = result.attack.target_fooled;
        *batch_out = std::move(batch);
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

std::vector<std::pair<double, double>> run_manifold_sweep(
    const Model& target, const LabeledDataset& test, const ManifoldMeta& meta,
    const std::vector<double>& strength_grid, PerturbDirection direction, std::size_t repeats,
    std::uint64_t seed) {
    if (strength_grid.empty()) throw ValueError("manifold sweep: empty strength grid");
    if (repeats == 0) throw ValueError("manifold sweep: need at least one repeat");
    std::vector<std::pair<double, double>> curve;
    curve.reserve(strength_grid.size());
    const Rng base(seed);
    for (std::size_t gi = 0; gi < strength_grid.size(); ++gi) {
        const double eps = strength_grid[gi];
        double acc = 0.0;
        for (std::size_t r = 0; r < repeats; ++r) {
            const AdversarialBatch batch = manifold_perturb(
                test, meta, eps, direction, base.split(gi * 1000 + r).raw());
            acc += accuracy(predict_mean_probs(target, batch.adversarial), test.labels);
        }
        curve.emplace_back(eps, acc / static_cast<double>(repeats));
    }
    return curve;
}

std::map<std::string, double> ood_detection(const Model& model, const Tensor& in_dist,
                                            const OoDSet& ood) {
    if (ood.features.numel() == 0) throw ValueError("ood detection: empty OoD set");
    const UncertaintyReport in_rep = report(model, in_dist);
    const UncertaintyReport ood_rep = report(model, ood.features);

    std::map<std::string, double> out;
    out["aleatoric"] = auroc(in_rep.aleatoric, ood_rep.aleatoric);
    if (in_rep.epistemic_entropy && ood_rep.epistemic_entropy) {
        out["epistemic_entropy"] = auroc(*in_rep.epistemic_entropy, *ood_rep.epistemic_entropy);
    }
    if (in_rep.kl && ood_rep.kl) out["kl"] = auroc(*in_rep.kl, *ood_rep.kl);
    if (in_rep.distance && ood_rep.distance) {
        out["distance"] = auroc(*in_rep.distance, *ood_rep.distance);
    }
    out["epistemic"] = auroc(in_rep.epistemic_score(), ood_rep.epistemic_score());
    return out;
}

UncertaintyField uncertainty_field(const Model& model, const LabeledDataset& reference,
                                   std::size_t resolution, double expand) {
    reference.validate();
    if (reference.dim() != 2) {
        throw ValueError("uncertainty field: 2-D input space only, got D=" +
                         std::to_string(reference.dim()));
    }
    if (resolution < 2) throw ValueError("uncertainty field: resolution must be >= 2");

    double xmin = reference.features.at(0, 0), xmax = xmin;
    double ymin = reference.features.at(0, 1), ymax = ymin;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        xmin = std::min(xmin, reference.features.at(i, 0));
        xmax = std::max(xmax, reference.features.at(i, 0));
        ymin = std::min(ymin, reference.features.at(i, 1));
        ymax = std::max(ymax, reference.features.at(i, 1));
    }
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
    const double hx = 0.5 * (xmax - xmin) * expand, hy = 0.5 * (ymax - ymin) * expand;

    UncertaintyField field;
    field.xmin = cx - hx;
    field.xmax = cx + hx;
    field.ymin = cy - hy;
    field.ymax = cy + hy;
    field.resolution = resolution;

    Tensor grid({resolution * resolution, 2});
    for (std::size_t r = 0; r < resolution; ++r) {
        const double y = field.ymin + (field.ymax - field.ymin) * static_cast<double>(r) /
                                          static_cast<double>(resolution - 1);
        for (std::size_t c = 0; c < resolution; ++c) {
            const double x = field.xmin + (field.xmax - field.xmin) * static_cast<double>(c) /
                                              static_cast<double>(resolution - 1);
            grid.at(r * resolution + c, 0) = x;
            grid.at(r * resolution + c, 1) = y;
        }
    }

    const UncertaintyReport rep = report(model, grid);
    field.channels["aleatoric"] = rep.aleatoric;
    if (rep.epistemic_entropy) field.channels["epistemic_entropy"] = *rep.epistemic_entropy;
    if (rep.kl) field.channels["kl"] = *rep.kl;
    if (rep.distance) field.channels["distance"] = *rep.distance;
    field.channels["epistemic"] = rep.epistemic_score();
    field.class_map = argmax_rows(predict_mean_probs(model, grid));
    return field;
}

void write_field_csv(const UncertaintyField& field, const std::string& channel,
                     const std::string& path) {
    const auto it = field.channels.find(channel);
    if (it == field.channels.end()) throw ValueError("field: unknown channel " + channel);
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path);
    char buf[64];
    const std::size_t res = field.resolution;
    for (std::size_t r = 0; r < res; ++r) {
        for (std::size_t c = 0; c < res; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", it->second[r * res + c]);
            out << buf << (c + 1 == res ? "" : ",");
        }
        out << "\n";
    }
}

void write_field_pgm(const UncertaintyField& field, const std::string& channel,
                     const std::string& path) {
    const auto it = field.channels.find(channel);
    if (it == field.channels.end()) throw ValueError("field: unknown channel " + channel);
    const std::vector<double>& v = it->second;
    double lo = v[0], hi = v[0];
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path);
    out << "P5\n" << field.resolution << " " << field.resolution << "\n255\n";
    for (double x : v) {
        const int byte = static_cast<int>(std::lround(255.0 * (x - lo) / span));
        out.put(static_cast<char>(std::clamp(byte, 0, 255)));
    }
}

double field_cosine_distance(const UncertaintyField& a, const UncertaintyField& b,
                             const std::string& channel) {
    const auto ia = a.channels.find(channel);
    const auto ib = b.channels.find(channel);
    if (ia == a.channels.end() || ib == b.channels.end()) {
        throw ValueError("field cosine distance: missing channel " + channel);
    }
    if (ia->second.size() != ib->second.size()) {
        throw ValueError("field cosine distance: resolution mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < ia->second.size(); ++i) {
        dot += ia->second[i] * ib->second[i];
        na += ia->second[i] * ia->second[i];
        nb += ib->second[i] * ib->second[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace uqlab
