#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "uqlab/data.hpp"
#include "uqlab/models.hpp"

namespace uqlab {

struct AttackSpec {
    double epsilon = 0.6;  // max L2 perturbation
    double alpha = 0.01;   // step size
    int iterations = 40;
    std::string norm = "l2";
    std::uint64_t seed = 0;
    bool raw_gradient = false;  // literal ascent step, no per-example normalization

    void validate() const;
};

/// Deterministic imitator of a black-box target, trained on the target's
/// hard predictions rather than ground-truth labels.
struct ProxyModel {
    NetworkSpec spec;
    std::vector<double> weights;
    double agreement = 0.0;  // vs target on clean evaluation data
    bool low_agreement_warning = false;

    Tensor probs(const Tensor& x) const;
};

struct AdversarialBatch {
    Tensor clean;        // N x D
    Tensor delta;        // N x D
    Tensor adversarial;  // clean + delta
    std::vector<int> target_clean_pred;       // y_hat_t
    std::vector<char> proxy_fooled;           // proxy(adv) != y_hat_t
    std::vector<char> target_fooled;          // filled by the harness after evaluation
    std::vector<double> delta_norm;           // per-datum L2
    std::vector<double> proxy_loss_initial;   // per-datum proxy CE at delta = 0
    std::vector<double> proxy_loss_final;     // per-datum proxy CE at the emitted delta
    bool aborted_nonfinite = false;
};

struct ProxyFitOptions {
    NetworkSpec spec;
    TrainOptions train;
    double agreement_warning_threshold = 0.6;
};

/// Trains the proxy on (features, argmax target predictions); agreement is
/// measured on `eval_data` when provided, otherwise on the training data.
ProxyModel fit_proxy(const Model& target, const LabeledDataset& data,
                     const ProxyFitOptions& options, std::uint64_t seed,
                     const LabeledDataset* eval_data = nullptr);

/// Projects each row of delta onto the L2 ball of radius epsilon.
void project_l2(Tensor& delta, double epsilon);

/// Iterative L2-PGD ascent on the proxy loss against the target's clean
/// predictions; delta starts at zero and stays inside the epsilon ball.
AdversarialBatch l2_pgd(const ProxyModel& proxy, const Tensor& inputs,
                        const std::vector<int>& target_preds, const AttackSpec& spec);

struct ProxyCalibration {
    double proxy_accuracy_low = 0.2;
    double proxy_accuracy_high = 0.5;
    int max_rounds = 6;
};

/// Re-runs the attack, doubling or halving alpha, until the proxy accuracy
/// on adversarial inputs lands inside the band (or rounds run out).
AdversarialBatch l2_pgd_calibrated(const ProxyModel& proxy, const Tensor& inputs,
                                   const std::vector<int>& target_preds, AttackSpec spec,
                                   const ProxyCalibration& calibration,
                                   double* alpha_used = nullptr);

enum class PerturbDirection { On, Off };

/// Gaussian manifold attack: per datum draw s ~ N(strength, 0.5^2), flip its
/// sign with probability 1/2, and displace along the on- or off-axis.
AdversarialBatch manifold_perturb(const LabeledDataset& data, const ManifoldMeta& meta,
                                  double strength, PerturbDirection direction,
                                  std::uint64_t seed);

struct AttackMetrics {
    double proxy_accuracy = std::numeric_limits<double>::quiet_NaN();
    double adversarial_accuracy = 0.0;
    double mean_l2 = 0.0;
    std::vector<char> target_fooled;  // target(adv) != y_hat_t
};

/// Pure evaluation: proxy accuracy vs y_hat_t, target accuracy vs the true
/// labels, and the mean perturbation norm.
AttackMetrics evaluate_attack(const Model& target, const AdversarialBatch& batch,
                              const std::vector<int>& true_labels);

/// CSV: clean features, delta components, L2 norm, fooled flags.
void write_batch_csv(const AdversarialBatch& batch, const std::string& path);

} // namespace uqlab
