#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "uqlab/checkpoint.hpp"
#include "uqlab/suite.hpp"

namespace fs = std::filesystem;
using namespace uqlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitExecutionError = 3;

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    std::string model_filter;
    std::string dataset_override;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t jobs = 1;
};

void write_error_file(const std::string& out_dir, const std::string& stage,
                      const std::string& message, int code) {
    if (out_dir.empty()) return;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream out(fs::path(out_dir) / "error.json");
    if (!out) return;
    nlohmann::json j{{"stage", stage}, {"error", message}, {"exit_code", code}};
    out << j.dump(2) << "\n";
}

ExperimentConfig load_config(const GlobalArgs& args) {
    if (args.config_path.empty()) throw ValueError("config: --config PATH is required");
    std::ifstream in(args.config_path);
    if (!in) throw ValueError("config: cannot open " + args.config_path);
    nlohmann::json user;
    try {
        in >> user;
    } catch (const nlohmann::json::parse_error& e) {
        throw ValueError("config: " + args.config_path + ": " + e.what());
    }
    if (!args.dataset_override.empty()) {
        user["dataset"]["kind"] = args.dataset_override;
    }
    ExperimentConfig cfg = resolve_config(user);
    if (args.seed_set) {
        cfg.doc["seeds"] = nlohmann::json::array({args.seed});
        cfg.provenance["/seeds"] = "cli";
    }
    if (!args.out_dir.empty()) {
        cfg.doc["output_dir"] = args.out_dir;
        cfg.provenance["/output_dir"] = "cli";
    }
    if (!args.model_filter.empty()) {
        cfg.doc["models_enabled"] = nlohmann::json::array({args.model_filter});
        cfg.provenance["/models_enabled"] = "cli";
    }
    return cfg;
}

std::string out_dir_of(const ExperimentConfig& cfg) { return cfg.output_dir(); }

void ensure_run_dir(const ExperimentConfig& cfg) {
    const std::string dir = out_dir_of(cfg);
    fs::create_directories(dir);
    fs::create_directories(fs::path(dir) / "checkpoints");
    fs::create_directories(fs::path(dir) / "adversarial");
    fs::create_directories(fs::path(dir) / "fields");
    write_manifest(cfg, (fs::path(dir) / "manifest.json").string());
}

int cmd_train(const ExperimentConfig& cfg) {
    ensure_run_dir(cfg);
    const DatasetBundle data = build_dataset(cfg, cfg.seeds().front());
    for (const std::string& name : cfg.models_enabled()) {
        const Model model = train_model(cfg, name, data, cfg.seeds().front());
        const std::string path =
            (fs::path(out_dir_of(cfg)) / "checkpoints" / (name + ".json")).string();
        save_model(model, path);
        std::cout << "trained " << name << " -> " << path << "\n";
    }
    return kExitOk;
}

Model load_checkpoint(const ExperimentConfig& cfg, const std::string& name) {
    const fs::path path = fs::path(out_dir_of(cfg)) / "checkpoints" / (name + ".json");
    if (!fs::exists(path)) {
        throw RuntimeFailure("missing checkpoint " + path.string() + " (run `train` first)");
    }
    return load_model(path.string());
}

int cmd_attack(const ExperimentConfig& cfg) {
    ensure_run_dir(cfg);
    const DatasetBundle data = build_dataset(cfg, cfg.seeds().front());
    std::vector<ExperimentResult> results;
    for (const std::string& name : cfg.models_enabled()) {
        const Model model = load_checkpoint(cfg, name);
        AdversarialBatch batch;
        ExperimentResult r = run_robustness(model, data.train, data.test, cfg.attack_spec(),
                                            cfg.proxy_options(data.input_dim, data.classes),
                                            cfg.seeds().front(), &batch);
        r.dataset = cfg.dataset_kind();
        write_batch_csv(batch,
                        (fs::path(out_dir_of(cfg)) / "adversarial" / (name + ".csv")).string());
        std::cout << name << ": clean " << r.clean_accuracy << " adv "
                  << r.attack.adversarial_accuracy << " proxy " << r.attack.proxy_accuracy
                  << " mean-l2 " << r.attack.mean_l2 << "\n";
        results.push_back(std::move(r));
    }
    write_summary_csv(results, (fs::path(out_dir_of(cfg)) / "summary.csv").string());
    return kExitOk;
}

int cmd_ood(const ExperimentConfig& cfg) {
    ensure_run_dir(cfg);
    const DatasetBundle data = build_dataset(cfg, cfg.seeds().front());
    if (!data.ood) throw RuntimeFailure("dataset has no OoD set");
    std::vector<ExperimentResult> results;
    for (const std::string& name : cfg.models_enabled()) {
        const Model model = load_checkpoint(cfg, name);
        ExperimentResult r;
        r.dataset = cfg.dataset_kind();
        r.model = name;
        r.task = "ood";
        r.ood_auroc = ood_detection(model, data.test.features, *data.ood);
        for (const auto& [channel, v] : r.ood_auroc) {
            std::cout << name << " " << channel << " auroc " << v << "\n";
        }
        results.push_back(std::move(r));
    }
    write_ood_csv(results, (fs::path(out_dir_of(cfg)) / "ood_auroc.csv").string());
    return kExitOk;
}

int cmd_field(const ExperimentConfig& cfg) {
    ensure_run_dir(cfg);
    const DatasetBundle data = build_dataset(cfg, cfg.seeds().front());
    for (const std::string& name : cfg.models_enabled()) {
        const Model model = load_checkpoint(cfg, name);
        const UncertaintyField field =
            uncertainty_field(model, data.train, cfg.field_resolution(), cfg.field_expand());
        for (const auto& [channel, values] : field.channels) {
            (void)values;
            const std::string stem = "field_" + name + "_" + channel;
            write_field_csv(field, channel,
                            (fs::path(out_dir_of(cfg)) / "fields" / (stem + ".csv")).string());
            if (cfg.write_pgm()) {
                write_field_pgm(field, channel,
                                (fs::path(out_dir_of(cfg)) / "fields" / (stem + ".pgm"))
                                    .string());
            }
        }
        std::cout << "fields written for " << name << "\n";
    }
    return kExitOk;
}

int cmd_suite(const ExperimentConfig& cfg, std::size_t jobs) {
    SuiteOptions options;
    options.jobs = jobs;
    const auto results = run_suite(cfg, options);
    for (const auto& r : results) {
        std::cout << r.dataset << " " << r.model << " " << r.task;
        if (!r.error.empty()) {
            std::cout << " ERROR: " << r.error;
        } else if (r.task == "robustness") {
            std::cout << " clean " << r.clean_accuracy << " adv "
                      << r.attack.adversarial_accuracy;
        }
        std::cout << "\n";
    }
    std::cout << "suite artifacts in " << out_dir_of(cfg) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"uncertainty-aware model laboratory"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalArgs args;
    app.add_option("--config", args.config_path, "experiment config (JSON)");
    app.add_option("--seed", args.seed, "override the seed list with a single seed")
        ->each([&](const std::string&) { args.seed_set = true; });
    app.add_option("--out", args.out_dir, "override the output directory");
    app.add_option("--jobs", args.jobs, "parallel training jobs");
    app.add_option("--model", args.model_filter, "restrict to one model");
    app.add_option("--dataset", args.dataset_override, "override the dataset kind");

    auto* train = app.add_subcommand("train", "train models and write checkpoints");
    auto* attack = app.add_subcommand("attack", "proxy + L2-PGD attack on checkpoints");
    auto* ood = app.add_subcommand("ood", "OoD detection AUROC per uncertainty channel");
    auto* field = app.add_subcommand("field", "2-D uncertainty field grids");
    auto* suite = app.add_subcommand("suite", "full cross-product of models and tasks");

    CLI11_PARSE(app, argc, argv);

    ExperimentConfig cfg;
    try {
        cfg = load_config(args);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        write_error_file(args.out_dir, "config", e.what(), kExitConfigError);
        return kExitConfigError;
    }

    try {
        if (train->parsed()) return cmd_train(cfg);
        if (attack->parsed()) return cmd_attack(cfg);
        if (ood->parsed()) return cmd_ood(cfg);
        if (field->parsed()) return cmd_field(cfg);
        if (suite->parsed()) return cmd_suite(cfg, args.jobs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        write_error_file(out_dir_of(cfg), "execution", e.what(), kExitExecutionError);
        return kExitExecutionError;
    }
    return kExitOk;
}
