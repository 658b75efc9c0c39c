#include "uqlab/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "uqlab/common.hpp"

namespace uqlab {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json spec_to_json(const NetworkSpec& spec) {
    return json{{"input_dim", spec.input_dim},
                {"hidden", spec.hidden},
                {"output_dim", spec.output_dim},
                {"dropout_rate", spec.dropout_rate}};
}

NetworkSpec spec_from_json(const json& j) {
    NetworkSpec spec;
    spec.input_dim = j.at("input_dim").get<std::size_t>();
    spec.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    spec.output_dim = j.at("output_dim").get<std::size_t>();
    spec.dropout_rate = j.at("dropout_rate").get<double>();
    return spec;
}

json tensor_to_json(const Tensor& t) {
    return json{{"shape", t.shape}, {"values", t.values}};
}

Tensor tensor_from_json(const json& j) {
    return Tensor(j.at("shape").get<Shape>(), j.at("values").get<std::vector<double>>());
}

} // namespace

void save_model(const Model& model, const std::string& path) {
    json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = model_kind(model);
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, DeepEnsembleModel>) {
                j["spec"] = spec_to_json(m.spec);
                j["members"] = m.members;
            } else if constexpr (std::is_same_v<T, BnnModel>) {
                j["spec"] = spec_to_json(m.spec);
                j["posterior"] = m.posterior;
                j["diagnostics"] = {{"post_warmup_accept", m.diagnostics.post_warmup_accept},
                                    {"adapted_step", m.diagnostics.adapted_step},
                                    {"divergences", m.diagnostics.divergences},
                                    {"max_abs_drift", m.diagnostics.max_abs_drift}};
            } else if constexpr (std::is_same_v<T, SwagModel>) {
                j["spec"] = spec_to_json(m.state.spec);
                j["mean"] = m.state.mean;
                j["sq_mean"] = m.state.sq_mean;
                j["deviations"] = m.state.deviations;
                j["snapshots"] = m.state.snapshots;
                j["fitted"] = m.state.fitted;
                j["sample_count"] = m.sample_count;
                j["sample_scale"] = m.sample_scale;
                j["sample_seed"] = m.sample_seed;
            } else if constexpr (std::is_same_v<T, McDropoutModel>) {
                j["spec"] = spec_to_json(m.spec);
                j["weights"] = m.weights;
                j["passes"] = m.passes;
                j["predict_seed"] = m.predict_seed;
            } else if constexpr (std::is_same_v<T, DuqModel>) {
                j["spec"] = spec_to_json(m.spec);
                j["weights"] = m.weights;
                j["centroids"] = tensor_to_json(m.centroids);
                j["length_scale"] = m.length_scale;
                j["classes"] = m.classes;
                j["collapse_warning"] = m.collapse_warning;
            } else {
                j["spec"] = spec_to_json(m.spec);
                j["weights"] = m.weights;
                j["power_u"] = m.power_u;
                j["omega"] = tensor_to_json(m.omega);
                j["phase"] = tensor_to_json(m.phase);
                j["beta"] = tensor_to_json(m.beta);
                j["covariance"] = tensor_to_json(m.covariance);
                j["norm_bound"] = m.norm_bound;
                j["rff_scale"] = m.rff_scale;
                j["mean_field_lambda"] = m.mean_field_lambda;
                j["classes"] = m.classes;
                j["sample_count"] = m.sample_count;
                j["sample_seed"] = m.sample_seed;
            }
        },
        model);
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("checkpoint: cannot write " + path);
    out << j.dump(2) << "\n";
}

Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("checkpoint: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw RuntimeFailure("checkpoint: " + path + ": " + e.what());
    }
    if (j.at("format_version").get<int>() != kFormatVersion) {
        throw RuntimeFailure("checkpoint: unsupported format version in " + path);
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "deep-ensemble") {
        DeepEnsembleModel m;
        m.spec = spec_from_json(j.at("spec"));
        m.members = j.at("members").get<std::vector<std::vector<double>>>();
        return m;
    }
    if (kind == "bnn") {
        BnnModel m;
        m.spec = spec_from_json(j.at("spec"));
        m.posterior = j.at("posterior").get<std::vector<std::vector<double>>>();
        const json& d = j.at("diagnostics");
        m.diagnostics.post_warmup_accept = d.at("post_warmup_accept").get<double>();
        m.diagnostics.adapted_step = d.at("adapted_step").get<double>();
        m.diagnostics.divergences = d.at("divergences").get<int>();
        m.diagnostics.max_abs_drift = d.at("max_abs_drift").get<double>();
        return m;
    }
    if (kind == "swag") {
        SwagModel m;
        m.state.spec = spec_from_json(j.at("spec"));
        m.state.mean = j.at("mean").get<std::vector<double>>();
        m.state.sq_mean = j.at("sq_mean").get<std::vector<double>>();
        m.state.deviations = j.at("deviations").get<std::vector<std::vector<double>>>();
        m.state.snapshots = j.at("snapshots").get<std::size_t>();
        m.state.fitted = j.at("fitted").get<bool>();
        m.sample_count = j.at("sample_count").get<std::size_t>();
        m.sample_scale = j.at("sample_scale").get<double>();
        m.sample_seed = j.at("sample_seed").get<std::uint64_t>();
        return m;
    }
    if (kind == "mc-dropout") {
        McDropoutModel m;
        m.spec = spec_from_json(j.at("spec"));
        m.weights = j.at("weights").get<std::vector<double>>();
        m.passes = j.at("passes").get<std::size_t>();
        m.predict_seed = j.at("predict_seed").get<std::uint64_t>();
        return m;
    }
    if (kind == "duq") {
        DuqModel m;
        m.spec = spec_from_json(j.at("spec"));
        m.weights = j.at("weights").get<std::vector<double>>();
        m.centroids = tensor_from_json(j.at("centroids"));
        m.length_scale = j.at("length_scale").get<double>();
        m.classes = j.at("classes").get<std::size_t>();
        m.collapse_warning = j.at("collapse_warning").get<bool>();
        return m;
    }
    if (kind == "sngp") {
        SngpModel m;
        m.spec = spec_from_json(j.at("spec"));
        m.weights = j.at("weights").get<std::vector<double>>();
        m.power_u = j.at("power_u").get<std::vector<std::vector<double>>>();
        m.omega = tensor_from_json(j.at("omega"));
        m.phase = tensor_from_json(j.at("phase"));
        m.beta = tensor_from_json(j.at("beta"));
        m.covariance = tensor_from_json(j.at("covariance"));
        m.norm_bound = j.at("norm_bound").get<double>();
        m.rff_scale = j.at("rff_scale").get<double>();
        m.mean_field_lambda = j.at("mean_field_lambda").get<double>();
        m.classes = j.at("classes").get<std::size_t>();
        m.sample_count = j.at("sample_count").get<std::size_t>();
        m.sample_seed = j.at("sample_seed").get<std::uint64_t>();
        return m;
    }
    throw RuntimeFailure("checkpoint: unknown model kind '" + kind + "' in " + path);
}

} // namespace uqlab
