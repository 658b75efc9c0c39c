#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "uqlab/data.hpp"
#include "uqlab/hmc.hpp"
#include "uqlab/metrics.hpp"
#include "uqlab/nn.hpp"

namespace uqlab {

// ---------------------------------------------------------------- ensembles

struct EnsembleConfig {
    std::size_t members = 20;
    TrainOptions train;
};

struct DeepEnsembleModel {
    NetworkSpec spec;
    std::vector<std::vector<double>> members;  // flat weight vectors
};

/// Independently initialized and trained members; randomness comes from
/// per-member streams split off `seed`, so member m is reproducible in
/// isolation. Divergent training aborts naming the member.
DeepEnsembleModel train_deep_ensemble(const NetworkSpec& spec, const LabeledDataset& data,
                                      const EnsembleConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------- BNN

struct BnnModel {
    NetworkSpec spec;
    std::vector<std::vector<double>> posterior;  // weight draws
    HmcDiagnostics diagnostics;
};

/// HMC over the flat weight vector; U = summed cross-entropy + Gaussian
/// prior with cfg.prior_std.
BnnModel hmc_sample_bnn(const NetworkSpec& spec, const LabeledDataset& data,
                        const HmcConfig& cfg);

// --------------------------------------------------------------------- SWAG

struct SwagConfig {
    TrainOptions pretrain;
    std::size_t explore_epochs = 30;
    double explore_lr = 0.033;
    std::size_t explore_batch = 32;
    double explore_momentum = 0.0;
    double explore_weight_decay = 0.0;
    std::size_t rank = 5;  // low-rank columns K
};

struct SwagState {
    NetworkSpec spec;
    std::vector<double> mean;                      // SWA mean
    std::vector<double> sq_mean;                   // running E[W^2]
    std::vector<std::vector<double>> deviations;   // last K snapshots of W - mean
    std::size_t snapshots = 0;
    bool fitted = false;

    std::vector<double> diag_variance() const;  // E[W^2] - mean^2, clamped at 0
};

SwagState swag_fit(const NetworkSpec& spec, const LabeledDataset& data, const SwagConfig& cfg,
                   std::uint64_t seed);

/// W = mean + scale * ( (1/sqrt(2)) diag-noise + (1/sqrt(2(K-1))) D z ).
/// scale = 0 reproduces the SWA mean bitwise.
std::vector<std::vector<double>> swag_sample(const SwagState& state, std::size_t count,
                                             double scale, std::uint64_t seed);

struct SwagModel {
    SwagState state;
    std::size_t sample_count = 30;
    double sample_scale = 1.0;
    std::uint64_t sample_seed = 0;
};

// --------------------------------------------------------------- MC dropout

struct McDropoutModel {
    NetworkSpec spec;  // carries the dropout rate
    std::vector<double> weights;
    std::size_t passes = 100;  // T
    std::uint64_t predict_seed = 0;
};

McDropoutModel train_mc_dropout(const NetworkSpec& spec, const LabeledDataset& data,
                                const TrainOptions& train, std::size_t passes,
                                std::uint64_t seed);

/// T dropout-enabled forward passes; member t uses stream (seed, t).
ProbEnsemble mc_dropout_predict(const McDropoutModel& model, const Tensor& x,
                                std::size_t passes, std::uint64_t seed);

// ---------------------------------------------------------------------- DUQ

struct DuqConfig {
    std::size_t embedding_dim = 20;
    double length_scale = 0.1;
    double centroid_momentum = 0.999;
    double gradient_penalty = 0.0;  // 0 disables; 0.5 when enabled
    TrainOptions train;
};

struct DuqModel {
    NetworkSpec spec;  // output_dim == embedding_dim
    std::vector<double> weights;
    Tensor centroids;  // C x E
    double length_scale = 0.1;
    std::size_t classes = 2;
    bool collapse_warning = false;
};

/// Per-class RBF kernel head trained with summed binary cross-entropy;
/// centroids follow an exponential moving average of assigned embeddings.
DuqModel duq_train(const NetworkSpec& backbone, const LabeledDataset& data,
                   const DuqConfig& cfg, std::uint64_t seed);

struct DuqPrediction {
    Tensor kernels;                  // N x C, values in (0,1]
    std::vector<double> distances;   // ||f(x) - e_c|| for the argmax class
    Tensor aleatoric;                // softmax(log kernels) == kernels / row sum
};

DuqPrediction duq_predict(const DuqModel& model, const Tensor& x);

// --------------------------------------------------------------------- SNGP

struct SngpConfig {
    double norm_bound = 0.9;
    int power_iterations = 1;
    std::size_t feature_count = 1024;
    double rff_length_scale = 1.0;
    std::size_t sample_count = 10;
    double mean_field_lambda = 0.39269908169872414;  // pi/8
    double beta_ridge = 0.0;  // MAP shrinkage toward the N(0,I) GP prior on beta
    TrainOptions train;
};

/// Backbone: linear input projection followed by residual blocks
/// h <- h + relu(W h + b), every weight matrix spectrally normalized. The
/// residual form keeps the latent map distance-preserving under the bound.
struct SngpModel {
    NetworkSpec spec;  // hidden = residual block widths (all equal), output_dim = width
    std::vector<double> weights;
    std::vector<std::vector<double>> power_u;  // per weight matrix
    Tensor omega;       // H x F random projection (fixed)
    Tensor phase;       // F   random phase (fixed)
    Tensor beta;        // F x C GP output weights
    Tensor covariance;  // F x F Laplace posterior covariance
    double norm_bound = 0.9;
    double rff_scale = 1.0;        // sqrt(2/F)
    double mean_field_lambda = 0.39269908169872414;
    std::size_t classes = 2;
    std::size_t sample_count = 10;
    std::uint64_t sample_seed = 0;
};

/// `on_step`, when set, observes the backbone parameters after every
/// optimizer step (spectral-bound verification hook).
SngpModel sngp_train(const NetworkSpec& backbone, const LabeledDataset& data,
                     const SngpConfig& cfg, std::uint64_t seed,
                     const std::function<void(const std::vector<Tensor>&)>& on_step = {});

Tensor sngp_features(const SngpModel& model, const Tensor& x);  // N x F

struct SngpLatent {
    Tensor logits;                 // N x C
    std::vector<double> variance;  // per input, clamped at 0
    bool clamped_negative = false;
};
SngpLatent sngp_latent(const SngpModel& model, const Tensor& x);

enum class SngpPredictMode { MeanField, Sample };

/// Mean-field mode: softmax(logit / sqrt(1 + lambda * var)). Sample mode:
/// softmax over draws from N(logit, var), one ensemble member per draw.
Tensor sngp_mean_field_probs(const SngpModel& model, const Tensor& x);
ProbEnsemble sngp_sample_probs(const SngpModel& model, const Tensor& x, std::size_t count,
                               std::uint64_t seed);

/// Largest singular value by converged power iteration (test/verification
/// helper; training uses the persistent one-step estimate).
double top_singular_value(const Tensor& w);

// ----------------------------------------------------------- common contract

using Model = std::variant<DeepEnsembleModel, BnnModel, SwagModel, McDropoutModel, DuqModel,
                           SngpModel>;

std::string model_kind(const Model& model);

/// Uniform M x N x C contract: weight-sample models map draws through the
/// network, MC Dropout runs T passes, SNGP uses sample mode, DUQ yields M=1.
ProbEnsemble predict_ensemble(const Model& model, const Tensor& x);

/// Decision-rule probabilities (member mean; mean-field for SNGP).
Tensor predict_mean_probs(const Model& model, const Tensor& x);

/// Routes every model through its metric contract; DUQ reports centroid
/// distance instead of H_e/KL_e.
UncertaintyReport report(const Model& model, const Tensor& x);

} // namespace uqlab
