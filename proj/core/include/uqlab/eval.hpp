#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uqlab/attack.hpp"
#include "uqlab/data.hpp"
#include "uqlab/models.hpp"

namespace uqlab {

struct ExperimentResult {
    std::string dataset;
    std::string model;
    std::string task;
    double clean_accuracy = std::numeric_limits<double>::quiet_NaN();
    AttackMetrics attack;
    AttackSpec attack_spec;
    std::map<std::string, double> ood_auroc;  // channel -> AUROC
    std::map<std::string, double> curves;     // manifold sweep points
    std::vector<std::uint64_t> seeds;
    double wall_seconds = 0.0;
    std::string error;  // empty on success
};

struct UncertaintyField {
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    std::size_t resolution = 0;
    std::map<std::string, std::vector<double>> channels;  // row-major res x res
    std::vector<int> class_map;
};

/// Mann-Whitney AUROC with midrank tie handling: the probability a random
/// OoD score exceeds a random in-distribution score.
double auroc(const std::vector<double>& in_dist_scores, const std::vector<double>& ood_scores);

/// Fits the proxy on the training split, attacks the test split, and
/// evaluates the target.
ExperimentResult run_robustness(const Model& target, const LabeledDataset& train,
                                const LabeledDataset& test, const AttackSpec& attack,
                                const ProxyFitOptions& proxy_options, std::uint64_t seed,
                                AdversarialBatch* batch_out = nullptr);

/// Accuracy under the Gaussian manifold attack, averaged over `repeats`
/// seeded draws per strength value. Returns (strength, mean accuracy) pairs.
std::vector<std::pair<double, double>> run_manifold_sweep(
    const Model& target, const LabeledDataset& test, const ManifoldMeta& meta,
    const std::vector<double>& strength_grid, PerturbDirection direction, std::size_t repeats,
    std::uint64_t seed);

/// AUROC of every uncertainty channel, scoring OoD as the positive class.
std::map<std::string, double> ood_detection(const Model& model, const Tensor& in_dist,
                                            const OoDSet& ood);

/// Evaluates report() and the decision rule over a regular grid covering the
/// reference data's bounding box expanded by `expand`.
UncertaintyField uncertainty_field(const Model& model, const LabeledDataset& reference,
                                   std::size_t resolution, double expand);

void write_field_csv(const UncertaintyField& field, const std::string& channel,
                     const std::string& path);

/// 8-bit binary PGM, min-max normalized.
void write_field_pgm(const UncertaintyField& field, const std::string& channel,
                     const std::string& path);

/// Flattened-channel cosine distance between two fields (1 - cosine
/// similarity); used for random-restart comparisons.
double field_cosine_distance(const UncertaintyField& a, const UncertaintyField& b,
                             const std::string& channel);

} // namespace uqlab
