#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqlab/attack.hpp"
#include "uqlab/models.hpp"

namespace uqlab {

/// A fully resolved experiment description: defaults applied, every key
/// validated, and a provenance note recorded per field.
struct ExperimentConfig {
    nlohmann::json doc;
    std::map<std::string, std::string> provenance;  // "/models/bnn/warmup" -> source

    std::string name() const;
    std::string dataset_kind() const;
    std::vector<std::uint64_t> seeds() const;
    std::string output_dir() const;
    std::vector<std::string> tasks() const;
    std::vector<std::string> models_enabled() const;

    NetworkSpec base_spec(std::size_t input_dim, std::size_t classes) const;
    NetworkSpec mc_dropout_spec(std::size_t input_dim, std::size_t classes) const;
    EnsembleConfig ensemble_config() const;
    HmcConfig bnn_config(std::uint64_t seed) const;
    SwagConfig swag_config() const;
    std::size_t swag_sample_count() const;
    double swag_sample_scale() const;
    TrainOptions mc_dropout_train() const;
    std::size_t mc_dropout_passes() const;
    DuqConfig duq_config() const;
    SngpConfig sngp_config() const;
    AttackSpec attack_spec() const;
    bool attack_calibrate() const;
    ProxyFitOptions proxy_options(std::size_t input_dim, std::size_t classes) const;
    std::vector<double> manifold_strength_grid() const;
    std::size_t manifold_repeats() const;
    std::size_t field_resolution() const;
    double field_expand() const;
    bool write_pgm() const;

    OodPlacement ood_placement() const;
    // dataset parameters
    std::size_t train_size() const;
    std::size_t test_size() const;
    double half_moons_noise() const;
    bool dataset_standardize() const;
    ToyManifoldParams toy_params() const;
    std::size_t toy_test_points_per_cluster() const;
    std::string mnist_data_dir() const;  // falls back to $UQLAB_DATA_DIR
    std::size_t mnist_train_subset() const;
    std::size_t mnist_test_subset() const;
    std::size_t mnist_downsample_factor() const;
};

/// Default document (and field provenance) for a dataset kind.
nlohmann::json default_config(const std::string& dataset_kind);

/// Parses and resolves a user JSON document. Unknown keys are rejected with
/// a path diagnostic; defaults come from the dataset kind.
ExperimentConfig resolve_config(const nlohmann::json& user);

/// Reads a config file. Throws ValueError with diagnostics on any schema
/// violation.
ExperimentConfig parse_config(const std::string& path);

/// Canonical serialization; parse(serialize(c)) reproduces `doc` exactly.
std::string serialize_config(const ExperimentConfig& cfg);

/// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const ExperimentConfig& cfg);

} // namespace uqlab
