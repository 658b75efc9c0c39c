#include "uqlab/config.hpp"

#include <cstdlib>
#include <fstream>

namespace uqlab {

using nlohmann::json;

namespace {

json base_defaults() {
    return json{
        {"name", "experiment"},
        {"dataset",
         {{"kind", "half-moons"},
          {"train_size", 600},
          {"test_size", 400},
          {"noise", 0.1},
          {"standardize", false},
          {"toy",
           {{"clusters_per_class", 3},
            {"points_per_cluster", 60},
            {"test_points_per_cluster", 25},
            {"spacing", 1.0},
            {"std_on", 0.15},
            {"std_off", 0.005},
            {"angle", 0.0},
            {"offset", 0.0}}},
          {"mnist",
           {{"data_dir", ""},
            {"train_subset", 8000},
            {"test_subset", 2000},
            {"downsample_factor", 2}}},
          {"ood",
           {{"clusters", 4},
            {"points_per_cluster", 25},
            {"margin", 0.0},
            {"spread", 0.15},
            {"off_manifold", false}}}}},
        {"models",
         {{"base_hidden", json::array({20, 20})},
          {"deep-ensemble",
           {{"members", 10},
            {"optimizer", "adam"},
            {"learning_rate", 0.01},
            {"momentum", 0.0},
            {"weight_decay", 0.0},
            {"clip_norm", 0.0},
            {"epochs", 200},
            {"batch_size", 64},
            {"early_stop_patience", 0}}},
          {"bnn",
           {{"chains", 1},
            {"warmup", 300},
            {"samples", 50},
            {"init_step", 0.001},
            {"target_accept", 0.95},
            {"max_tree_depth", 5},
            {"prior_std", 1.0}}},
          {"swag",
           {{"optimizer", "sgd"},
            {"learning_rate", 0.05},
            {"momentum", 0.0},
            {"weight_decay", 0.0},
            {"pretrain_epochs", 300},
            {"batch_size", 32},
            {"explore_epochs", 30},
            {"explore_lr", 0.033},
            {"explore_momentum", 0.0},
            {"explore_weight_decay", 0.0},
            {"rank", 5},
            {"samples", 30},
            {"sample_scale", 1.0}}},
          {"mc-dropout",
           {{"hidden", json::array({128, 128})},
            {"rate", 0.2},
            {"passes", 100},
            {"optimizer", "adam"},
            {"learning_rate", 0.001},
            {"clip_norm", 0.0},
            {"batch_size", 64},
            {"epochs", 300},
            {"early_stop_patience", 30}}},
          {"duq",
           {{"embedding_dim", 20},
            {"length_scale", 0.1},
            {"centroid_momentum", 0.999},
            {"gradient_penalty", 0.0},
            {"optimizer", "adam"},
            {"learning_rate", 0.001},
            {"batch_size", 32},
            {"epochs", 300}}},
          {"sngp",
           {{"norm_bound", 0.9},
            {"power_iterations", 1},
            {"features", 512},
            {"rff_length_scale", 1.0},
            {"samples", 10},
            {"dropout_rate", 0.0},
            {"beta_ridge", 0.0},
            {"optimizer", "adam"},
            {"learning_rate", 0.001},
            {"batch_size", 32},
            {"epochs", 300},
            {"early_stop_patience", 0}}}}},
        {"attack",
         {{"epsilon", 0.6},
          {"alpha", 0.01},
          {"iterations", 40},
          {"norm", "l2"},
          {"raw_gradient", false},
          {"calibrate", false},
          {"proxy",
           {{"hidden", json::array({20, 20})},
            {"optimizer", "adam"},
            {"learning_rate", 0.01},
            {"weight_decay", 0.001},
            {"epochs", 200},
            {"batch_size", 64}}},
          {"manifold",
           {{"strength_grid", json::array({0.0, 0.25, 0.5, 0.75, 1.0, 1.5})},
            {"repeats", 3}}}}},
        {"eval",
         {{"field_resolution", 200},
          {"field_expand", 1.5},
          {"write_pgm", false}}},
        {"tasks", json::array({"robustness", "ood"})},
        {"models_enabled",
         json::array({"deep-ensemble", "bnn", "swag", "mc-dropout", "duq", "sngp"})},
        {"seeds", json::array({12345, 99999, 424242, 7, 31337})},
        {"output_dir", "runs/experiment"}};
}

// Fields whose defaults come from the published reference configurations
// rather than an artifact decision, per dataset kind.
std::map<std::string, std::string> reference_provenance(const std::string& kind) {
    std::map<std::string, std::string> p;
    if (kind == "half-moons") {
        p["/attack/epsilon"] = "reference-defaults";
        p["/attack/alpha"] = "reference-defaults";
        p["/attack/iterations"] = "reference-defaults";
        p["/models/base_hidden"] = "reference-defaults";
        p["/models/mc-dropout/hidden"] = "reference-defaults";
        p["/seeds"] = "reference-seeds";
    } else if (kind == "toy-manifold") {
        p["/models/base_hidden"] = "reference-defaults";
        p["/models/mc-dropout/hidden"] = "reference-defaults";
        p["/models/deep-ensemble/members"] = "reference-defaults";
        p["/models/deep-ensemble/optimizer"] = "reference-defaults";
        p["/models/deep-ensemble/epochs"] = "reference-defaults";
        p["/models/bnn/chains"] = "reference-defaults";
        p["/models/bnn/warmup"] = "reference-defaults";
        p["/models/bnn/samples"] = "reference-defaults";
        p["/models/bnn/init_step"] = "reference-defaults";
        p["/models/bnn/target_accept"] = "reference-defaults";
        p["/models/bnn/max_tree_depth"] = "reference-defaults";
        p["/models/mc-dropout/optimizer"] = "reference-defaults";
        p["/models/mc-dropout/clip_norm"] = "reference-defaults";
        p["/models/mc-dropout/batch_size"] = "reference-defaults";
        p["/models/mc-dropout/rate"] = "reference-defaults";
        p["/models/mc-dropout/epochs"] = "reference-defaults";
        p["/models/mc-dropout/early_stop_patience"] = "reference-defaults";
        p["/models/mc-dropout/passes"] = "reference-defaults";
        p["/models/swag/optimizer"] = "reference-defaults";
        p["/models/swag/pretrain_epochs"] = "reference-defaults";
        p["/models/swag/explore_epochs"] = "reference-defaults";
        p["/models/swag/explore_lr"] = "reference-defaults";
        p["/models/swag/rank"] = "reference-defaults";
        p["/models/duq/optimizer"] = "reference-defaults";
        p["/models/duq/batch_size"] = "reference-defaults";
        p["/models/duq/epochs"] = "reference-defaults";
        p["/models/sngp/optimizer"] = "reference-defaults";
        p["/models/sngp/learning_rate"] = "reference-defaults";
        p["/models/sngp/batch_size"] = "reference-defaults";
        p["/models/sngp/norm_bound"] = "reference-defaults";
        p["/models/sngp/power_iterations"] = "reference-defaults";
        p["/models/sngp/dropout_rate"] = "reference-defaults";
        p["/models/sngp/epochs"] = "reference-defaults";
        p["/models/sngp/early_stop_patience"] = "reference-defaults";
        p["/models/sngp/samples"] = "reference-defaults";
        p["/seeds"] = "reference-seeds";
    } else if (kind == "mnist") {
        p["/models/deep-ensemble/members"] = "reference-defaults";
        p["/models/deep-ensemble/optimizer"] = "reference-defaults";
        p["/models/deep-ensemble/learning_rate"] = "reference-defaults";
        p["/models/deep-ensemble/momentum"] = "reference-defaults";
        p["/models/deep-ensemble/weight_decay"] = "reference-defaults";
        p["/models/deep-ensemble/batch_size"] = "reference-defaults";
        p["/models/deep-ensemble/epochs"] = "reference-defaults";
        p["/models/mc-dropout/optimizer"] = "reference-defaults";
        p["/models/mc-dropout/learning_rate"] = "reference-defaults";
        p["/models/mc-dropout/batch_size"] = "reference-defaults";
        p["/models/mc-dropout/rate"] = "reference-defaults";
        p["/models/mc-dropout/passes"] = "reference-defaults";
        p["/models/swag/optimizer"] = "reference-defaults";
        p["/models/swag/learning_rate"] = "reference-defaults";
        p["/models/swag/momentum"] = "reference-defaults";
        p["/models/swag/weight_decay"] = "reference-defaults";
        p["/models/swag/batch_size"] = "reference-defaults";
        p["/models/swag/explore_epochs"] = "reference-defaults";
        p["/models/swag/explore_lr"] = "reference-defaults";
        p["/models/swag/rank"] = "reference-defaults";
        p["/models/swag/samples"] = "reference-defaults";
        p["/models/duq/optimizer"] = "reference-defaults";
        p["/models/duq/learning_rate"] = "reference-defaults";
        p["/models/sngp/optimizer"] = "reference-defaults";
        p["/models/sngp/learning_rate"] = "reference-defaults";
        p["/models/sngp/batch_size"] = "reference-defaults";
        p["/models/sngp/norm_bound"] = "reference-defaults";
        p["/models/sngp/power_iterations"] = "reference-defaults";
        p["/attack/iterations"] = "reference-defaults";
        p["/attack/epsilon"] = "reference-defaults-rescaled";
        p["/seeds"] = "reference-seeds";
    }
    return p;
}

void apply_kind_defaults(json& doc, const std::string& kind) {
    if (kind == "half-moons") return;  // base document
    if (kind == "toy-manifold") {
        doc["dataset"]["kind"] = "toy-manifold";
        doc["dataset"]["toy"]["points_per_cluster"] = 100;
        doc["dataset"]["ood"]["off_manifold"] = true;
        doc["dataset"]["ood"]["margin"] = 3.0;
        doc["models"]["deep-ensemble"] = {{"members", 20},         {"optimizer", "sgd"},
                                          {"learning_rate", 0.01}, {"momentum", 0.9},
                                          {"weight_decay", 0.001}, {"clip_norm", 0.0},
                                          {"epochs", 500},         {"batch_size", 32},
                                          {"early_stop_patience", 0}};
        doc["models"]["bnn"] = {{"chains", 1},          {"warmup", 1000},
                                {"samples", 50},        {"init_step", 1e-6},
                                {"target_accept", 0.95}, {"max_tree_depth", 5},
                                {"prior_std", 1.0}};
        doc["models"]["mc-dropout"] = {{"hidden", json::array({128, 128})},
                                       {"rate", 0.2},
                                       {"passes", 100},
                                       {"optimizer", "adam"},
                                       {"learning_rate", 0.0003},
                                       {"clip_norm", 0.5},
                                       {"batch_size", 32},
                                       {"epochs", 650},
                                       {"early_stop_patience", 50}};
        doc["models"]["swag"] = {{"optimizer", "sgd"},       {"learning_rate", 0.01},
                                 {"momentum", 0.9},          {"weight_decay", 0.001},
                                 {"pretrain_epochs", 600},   {"batch_size", 32},
                                 {"explore_epochs", 30},     {"explore_lr", 0.033},
                                 {"explore_momentum", 0.9},  {"explore_weight_decay", 0.001},
                                 {"rank", 5},                {"samples", 30},
                                 {"sample_scale", 3.0}};
        doc["models"]["duq"] = {{"embedding_dim", 20},        {"length_scale", 0.5},
                                {"centroid_momentum", 0.999}, {"gradient_penalty", 0.0},
                                {"optimizer", "adam"},        {"learning_rate", 0.001},
                                {"batch_size", 32},           {"epochs", 500}};
        doc["models"]["sngp"] = {{"norm_bound", 0.9},   {"power_iterations", 1},
                                 {"features", 512},     {"rff_length_scale", 1.0},
                                 {"samples", 10},       {"dropout_rate", 0.1},
                                 {"beta_ridge", 1.0},   {"optimizer", "adam"},
                                 {"learning_rate", 0.0001}, {"batch_size", 32},
                                 {"epochs", 750},       {"early_stop_patience", 50}};
        doc["tasks"] = json::array({"manifold-sweep", "ood", "field"});
        doc["output_dir"] = "runs/toy-manifold";
        return;
    }
    if (kind == "mnist") {
        doc["dataset"]["kind"] = "mnist";
        doc["models"]["base_hidden"] = json::array({128, 128});
        doc["models"]["deep-ensemble"] = {{"members", 30},           {"optimizer", "sgd"},
                                          {"learning_rate", 1e-5},   {"momentum", 0.9},
                                          {"weight_decay", 1e-5},    {"clip_norm", 0.0},
                                          {"epochs", 5},             {"batch_size", 32},
                                          {"early_stop_patience", 0}};
        doc["models"]["bnn"] = {{"chains", 1},           {"warmup", 200},
                                {"samples", 30},         {"init_step", 0.001},
                                {"target_accept", 0.95}, {"max_tree_depth", 5},
                                {"prior_std", 1.0}};
        doc["models"]["mc-dropout"] = {{"hidden", json::array({128, 128})},
                                       {"rate", 0.1},
                                       {"passes", 100},
                                       {"optimizer", "adam"},
                                       {"learning_rate", 0.0001},
                                       {"clip_norm", 0.0},
                                       {"batch_size", 256},
                                       {"epochs", 20},
                                       {"early_stop_patience", 0}};
        doc["models"]["swag"] = {{"optimizer", "sgd"},      {"learning_rate", 1e-5},
                                 {"momentum", 0.9},         {"weight_decay", 1e-5},
                                 {"pretrain_epochs", 10},   {"batch_size", 32},
                                 {"explore_epochs", 30},    {"explore_lr", 0.1},
                                 {"explore_momentum", 0.9}, {"explore_weight_decay", 1e-5},
                                 {"rank", 10},              {"samples", 30},
                                 {"sample_scale", 1.0}};
        doc["models"]["duq"] = {{"embedding_dim", 64},        {"length_scale", 0.1},
                                {"centroid_momentum", 0.999}, {"gradient_penalty", 0.0},
                                {"optimizer", "sgd"},         {"learning_rate", 0.0001},
                                {"batch_size", 32},           {"epochs", 10}};
        doc["models"]["sngp"] = {{"norm_bound", 1.0},   {"power_iterations", 1},
                                 {"features", 1024},    {"rff_length_scale", 1.0},
                                 {"samples", 10},       {"dropout_rate", 0.0},
                                 {"beta_ridge", 1.0},   {"optimizer", "sgd"},
                                 {"learning_rate", 0.01}, {"batch_size", 64},
                                 {"epochs", 10},        {"early_stop_patience", 0}};
        // reference budget of 25 on 0-255 pixels, rescaled to [0,1] inputs
        // at a quarter of the pixel count: 25/255 * sqrt(196/784)
        doc["attack"]["epsilon"] = 25.0 / 255.0 * 0.5;
        doc["attack"]["alpha"] = 0.01;
        doc["attack"]["iterations"] = 50;
        doc["attack"]["proxy"]["hidden"] = json::array({128, 128});
        doc["tasks"] = json::array({"robustness", "ood"});
        doc["output_dir"] = "runs/mnist";
        return;
    }
    throw ValueError("config: unknown dataset kind '" + kind +
                     "' (expected half-moons | toy-manifold | mnist)");
}

bool type_compatible(const json& a, const json& b) {
    if (a.is_number() && b.is_number()) return true;
    return a.type() == b.type();
}

void validate_keys(const json& user, const json& defaults, const std::string& path) {
    if (!user.is_object()) return;
    for (const auto& [key, value] : user.items()) {
        const std::string child = path + "/" + key;
        if (!defaults.is_object() || !defaults.contains(key)) {
            throw ValueError("config: unknown key " + child);
        }
        const json& dv = defaults.at(key);
        if (value.is_object()) {
            if (!dv.is_object()) throw ValueError("config: " + child + " is not a section");
            validate_keys(value, dv, child);
        } else if (!type_compatible(value, dv)) {
            throw ValueError("config: " + child + " has type " + std::string(value.type_name()) +
                             ", expected " + std::string(dv.type_name()));
        }
    }
}

void overlay(json& doc, const json& user) {
    for (const auto& [key, value] : user.items()) {
        if (value.is_object() && doc[key].is_object()) {
            overlay(doc[key], value);
        } else {
            doc[key] = value;
        }
    }
}

void mark_user(const json& user, const std::string& path,
               std::map<std::string, std::string>& prov) {
    for (const auto& [key, value] : user.items()) {
        const std::string child = path + "/" + key;
        if (value.is_object()) {
            mark_user(value, child, prov);
        } else {
            prov[child] = "user";
        }
    }
}

void default_provenance(const json& doc, const std::string& path,
                        std::map<std::string, std::string>& prov) {
    for (const auto& [key, value] : doc.items()) {
        const std::string child = path + "/" + key;
        if (value.is_object()) {
            default_provenance(value, child, prov);
        } else {
            prov[child] = "artifact-default";
        }
    }
}

OptimizerConfig opt_from(const json& section) {
    OptimizerConfig opt;
    opt.kind = opt_kind_from_name(section.at("optimizer").get<std::string>());
    opt.learning_rate = section.at("learning_rate").get<double>();
    if (section.contains("momentum")) opt.momentum = section.at("momentum").get<double>();
    if (section.contains("weight_decay")) {
        opt.weight_decay = section.at("weight_decay").get<double>();
    }
    if (section.contains("clip_norm")) {
        const double clip = section.at("clip_norm").get<double>();
        if (clip > 0.0) opt.clip_norm = clip;
    }
    return opt;
}

TrainOptions train_from(const json& section) {
    TrainOptions t;
    t.opt = opt_from(section);
    t.epochs = section.at("epochs").get<std::size_t>();
    t.batch_size = section.at("batch_size").get<std::size_t>();
    if (section.contains("early_stop_patience")) {
        t.early_stop_patience = section.at("early_stop_patience").get<int>();
    }
    return t;
}

const std::vector<std::string> kKnownTasks = {"robustness", "ood", "field", "manifold-sweep"};
const std::vector<std::string> kKnownModels = {"deep-ensemble", "bnn",  "swag",
                                               "mc-dropout",    "duq", "sngp"};

} // namespace

json default_config(const std::string& dataset_kind) {
    json doc = base_defaults();
    apply_kind_defaults(doc, dataset_kind);
    return doc;
}

ExperimentConfig resolve_config(const json& user) {
    if (!user.is_object()) throw ValueError("config: document must be a JSON object");
    std::string kind = "half-moons";
    if (user.contains("dataset") && user.at("dataset").is_object() &&
        user.at("dataset").contains("kind")) {
        kind = user.at("dataset").at("kind").get<std::string>();
    }
    json doc = default_config(kind);
    validate_keys(user, doc, "");
    ExperimentConfig cfg;
    default_provenance(doc, "", cfg.provenance);
    for (const auto& [path, src] : reference_provenance(kind)) cfg.provenance[path] = src;
    overlay(doc, user);
    mark_user(user, "", cfg.provenance);
    cfg.doc = std::move(doc);

    for (const auto& task : cfg.tasks()) {
        if (std::find(kKnownTasks.begin(), kKnownTasks.end(), task) == kKnownTasks.end()) {
            throw ValueError("config: unknown task '" + task + "'");
        }
    }
    for (const auto& m : cfg.models_enabled()) {
        if (std::find(kKnownModels.begin(), kKnownModels.end(), m) == kKnownModels.end()) {
            throw ValueError("config: unknown model '" + m + "'");
        }
    }
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValueError("config: cannot open " + path);
    json user;
    try {
        in >> user;
    } catch (const json::parse_error& e) {
        throw ValueError("config: " + path + ": " + e.what());
    }
    return resolve_config(user);
}

std::string serialize_config(const ExperimentConfig& cfg) { return cfg.doc.dump(2) + "\n"; }

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string s = serialize_config(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string ExperimentConfig::name() const { return doc.at("name").get<std::string>(); }
std::string ExperimentConfig::dataset_kind() const {
    return doc.at("dataset").at("kind").get<std::string>();
}
std::vector<std::uint64_t> ExperimentConfig::seeds() const {
    return doc.at("seeds").get<std::vector<std::uint64_t>>();
}
std::string ExperimentConfig::output_dir() const {
    return doc.at("output_dir").get<std::string>();
}
std::vector<std::string> ExperimentConfig::tasks() const {
    return doc.at("tasks").get<std::vector<std::string>>();
}
std::vector<std::string> ExperimentConfig::models_enabled() const {
    return doc.at("models_enabled").get<std::vector<std::string>>();
}

NetworkSpec ExperimentConfig::base_spec(std::size_t input_dim, std::size_t classes) const {
    NetworkSpec spec;
    spec.input_dim = input_dim;
    spec.hidden = doc.at("models").at("base_hidden").get<std::vector<std::size_t>>();
    spec.output_dim = classes;
    return spec;
}

NetworkSpec ExperimentConfig::mc_dropout_spec(std::size_t input_dim, std::size_t classes) const {
    const json& mcd = doc.at("models").at("mc-dropout");
    NetworkSpec spec;
    spec.input_dim = input_dim;
    spec.hidden = mcd.at("hidden").get<std::vector<std::size_t>>();
    spec.output_dim = classes;
    spec.dropout_rate = mcd.at("rate").get<double>();
    return spec;
}

EnsembleConfig ExperimentConfig::ensemble_config() const {
    const json& de = doc.at("models").at("deep-ensemble");
    EnsembleConfig cfg;
    cfg.members = de.at("members").get<std::size_t>();
    cfg.train = train_from(de);
    return cfg;
}

HmcConfig ExperimentConfig::bnn_config(std::uint64_t seed) const {
    const json& b = doc.at("models").at("bnn");
    HmcConfig cfg;
    cfg.chains = b.at("chains").get<int>();
    cfg.warmup = b.at("warmup").get<int>();
    cfg.samples = b.at("samples").get<int>();
    cfg.init_step = b.at("init_step").get<double>();
    cfg.target_accept = b.at("target_accept").get<double>();
    cfg.max_tree_depth = b.at("max_tree_depth").get<int>();
    cfg.prior_std = b.at("prior_std").get<double>();
    cfg.seed = seed;
    return cfg;
}

SwagConfig ExperimentConfig::swag_config() const {
    const json& s = doc.at("models").at("swag");
    SwagConfig cfg;
    cfg.pretrain.opt = opt_from(s);
    cfg.pretrain.epochs = s.at("pretrain_epochs").get<std::size_t>();
    cfg.pretrain.batch_size = s.at("batch_size").get<std::size_t>();
    cfg.explore_epochs = s.at("explore_epochs").get<std::size_t>();
    cfg.explore_lr = s.at("explore_lr").get<double>();
    cfg.explore_batch = s.at("batch_size").get<std::size_t>();
    cfg.explore_momentum = s.at("explore_momentum").get<double>();
    cfg.explore_weight_decay = s.at("explore_weight_decay").get<double>();
    cfg.rank = s.at("rank").get<std::size_t>();
    return cfg;
}

std::size_t ExperimentConfig::swag_sample_count() const {
    return doc.at("models").at("swag").at("samples").get<std::size_t>();
}
double ExperimentConfig::swag_sample_scale() const {
    return doc.at("models").at("swag").at("sample_scale").get<double>();
}

TrainOptions ExperimentConfig::mc_dropout_train() const {
    return train_from(doc.at("models").at("mc-dropout"));
}
std::size_t ExperimentConfig::mc_dropout_passes() const {
    return doc.at("models").at("mc-dropout").at("passes").get<std::size_t>();
}

DuqConfig ExperimentConfig::duq_config() const {
    const json& d = doc.at("models").at("duq");
    DuqConfig cfg;
    cfg.embedding_dim = d.at("embedding_dim").get<std::size_t>();
    cfg.length_scale = d.at("length_scale").get<double>();
    cfg.centroid_momentum = d.at("centroid_momentum").get<double>();
    cfg.gradient_penalty = d.at("gradient_penalty").get<double>();
    cfg.train = train_from(d);
    return cfg;
}

SngpConfig ExperimentConfig::sngp_config() const {
    const json& s = doc.at("models").at("sngp");
    SngpConfig cfg;
    cfg.norm_bound = s.at("norm_bound").get<double>();
    cfg.power_iterations = s.at("power_iterations").get<int>();
    cfg.feature_count = s.at("features").get<std::size_t>();
    cfg.rff_length_scale = s.at("rff_length_scale").get<double>();
    cfg.sample_count = s.at("samples").get<std::size_t>();
    cfg.beta_ridge = s.at("beta_ridge").get<double>();
    cfg.train = train_from(s);
    return cfg;
}

AttackSpec ExperimentConfig::attack_spec() const {
    const json& a = doc.at("attack");
    AttackSpec spec;
    spec.epsilon = a.at("epsilon").get<double>();
    spec.alpha = a.at("alpha").get<double>();
    spec.iterations = a.at("iterations").get<int>();
    spec.norm = a.at("norm").get<std::string>();
    spec.raw_gradient = a.at("raw_gradient").get<bool>();
    return spec;
}

bool ExperimentConfig::attack_calibrate() const {
    return doc.at("attack").at("calibrate").get<bool>();
}

ProxyFitOptions ExperimentConfig::proxy_options(std::size_t input_dim,
                                                std::size_t classes) const {
    const json& p = doc.at("attack").at("proxy");
    ProxyFitOptions options;
    options.spec.input_dim = input_dim;
    options.spec.hidden = p.at("hidden").get<std::vector<std::size_t>>();
    options.spec.output_dim = classes;
    options.train = TrainOptions{};
    options.train.opt = opt_from(p);
    options.train.epochs = p.at("epochs").get<std::size_t>();
    options.train.batch_size = p.at("batch_size").get<std::size_t>();
    return options;
}

std::vector<double> ExperimentConfig::manifold_strength_grid() const {
    return doc.at("attack").at("manifold").at("strength_grid").get<std::vector<double>>();
}
std::size_t ExperimentConfig::manifold_repeats() const {
    return doc.at("attack").at("manifold").at("repeats").get<std::size_t>();
}
std::size_t ExperimentConfig::field_resolution() const {
    return doc.at("eval").at("field_resolution").get<std::size_t>();
}
double ExperimentConfig::field_expand() const {
    return doc.at("eval").at("field_expand").get<double>();
}
bool ExperimentConfig::write_pgm() const { return doc.at("eval").at("write_pgm").get<bool>(); }

OodPlacement ExperimentConfig::ood_placement() const {
    const json& o = doc.at("dataset").at("ood");
    OodPlacement p;
    p.cluster_count = o.at("clusters").get<std::size_t>();
    p.points_per_cluster = o.at("points_per_cluster").get<std::size_t>();
    p.margin = o.at("margin").get<double>();
    p.spread = o.at("spread").get<double>();
    p.off_manifold = o.at("off_manifold").get<bool>();
    return p;
}

std::size_t ExperimentConfig::train_size() const {
    return doc.at("dataset").at("train_size").get<std::size_t>();
}
std::size_t ExperimentConfig::test_size() const {
    return doc.at("dataset").at("test_size").get<std::size_t>();
}
double ExperimentConfig::half_moons_noise() const {
    return doc.at("dataset").at("noise").get<double>();
}
bool ExperimentConfig::dataset_standardize() const {
    return doc.at("dataset").at("standardize").get<bool>();
}

ToyManifoldParams ExperimentConfig::toy_params() const {
    const json& t = doc.at("dataset").at("toy");
    ToyManifoldParams p;
    p.clusters_per_class = t.at("clusters_per_class").get<std::size_t>();
    p.points_per_cluster = t.at("points_per_cluster").get<std::size_t>();
    p.cluster_spacing = t.at("spacing").get<double>();
    p.std_on = t.at("std_on").get<double>();
    p.std_off = t.at("std_off").get<double>();
    p.line_angle = t.at("angle").get<double>();
    p.line_offset = t.at("offset").get<double>();
    return p;
}
std::size_t ExperimentConfig::toy_test_points_per_cluster() const {
    return doc.at("dataset").at("toy").at("test_points_per_cluster").get<std::size_t>();
}

std::string ExperimentConfig::mnist_data_dir() const {
    std::string dir = doc.at("dataset").at("mnist").at("data_dir").get<std::string>();
    if (dir.empty()) {
        if (const char* env = std::getenv("UQLAB_DATA_DIR")) dir = env;
    }
    return dir;
}
std::size_t ExperimentConfig::mnist_train_subset() const {
    return doc.at("dataset").at("mnist").at("train_subset").get<std::size_t>();
}
std::size_t ExperimentConfig::mnist_test_subset() const {
    return doc.at("dataset").at("mnist").at("test_subset").get<std::size_t>();
}
std::size_t ExperimentConfig::mnist_downsample_factor() const {
    return doc.at("dataset").at("mnist").at("downsample_factor").get<std::size_t>();
}

} // namespace uqlab
