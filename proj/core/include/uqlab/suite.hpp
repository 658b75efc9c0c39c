#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uqlab/config.hpp"
#include "uqlab/eval.hpp"

namespace uqlab {

struct DatasetBundle {
    LabeledDataset train;
    LabeledDataset test;
    std::optional<ManifoldMeta> meta;
    std::optional<OoDSet> ood;
    std::size_t input_dim = 2;
    std::size_t classes = 2;
};

/// Materializes the configured dataset (generators seeded off `seed`; MNIST
/// read from IDX files under the configured data directory).
DatasetBundle build_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

/// Trains one model by name ("deep-ensemble" | "bnn" | "swag" |
/// "mc-dropout" | "duq" | "sngp") with the config's hyperparameters.
Model train_model(const ExperimentConfig& cfg, const std::string& name,
                  const DatasetBundle& data, std::uint64_t seed);

struct SuiteOptions {
    std::string output_dir_override;
    std::size_t jobs = 1;
};

/// Executes the requested (models x tasks) cross-product, averaging metrics
/// over the configured seeds, and writes the run directory: summary.csv,
/// ood_auroc.csv, per-channel field grids, adversarial batches, checkpoints
/// and manifest.json. Per-cell failures are recorded and do not stop the
/// suite.
std::vector<ExperimentResult> run_suite(const ExperimentConfig& cfg,
                                        const SuiteOptions& options = {});

/// Tables 1-2 column layout: model, proxy-acc, adv-acc, eps, alpha,
/// iterations, mean-L2.
void write_summary_csv(const std::vector<ExperimentResult>& results, const std::string& path);
void write_ood_csv(const std::vector<ExperimentResult>& results, const std::string& path);
void write_manifest(const ExperimentConfig& cfg, const std::string& path);

} // namespace uqlab
