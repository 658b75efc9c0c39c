#include "uqlab/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "uqlab/checkpoint.hpp"

namespace uqlab {

namespace fs = std::filesystem;

namespace {

LabeledDataset mnist_split(const std::string& dir, const std::string& images_name,
                           const std::string& labels_name, std::size_t subset,
                           std::size_t factor, std::uint64_t seed, const char* split_tag) {
    const fs::path images_path = fs::path(dir) / images_name;
    const fs::path labels_path = fs::path(dir) / labels_name;
    const Tensor images = load_idx(images_path.string());
    const Tensor labels_raw = load_idx(labels_path.string());
    if (images.rank() != 3 || labels_raw.rank() != 1 ||
        images.shape[0] != labels_raw.shape[0]) {
        throw ValueError("mnist: images/labels mismatch in " + dir);
    }
    const std::size_t total = images.shape[0];
    const std::size_t n = subset == 0 ? total : std::min(subset, total);

    // deterministic subset without replacement
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    Rng rng = Rng(seed).split(0x31157);
    for (std::size_t i = total - 1; i > 0; --i) {
        const std::size_t j = rng.integer(i + 1);
        std::swap(order[i], order[j]);
    }

    Tensor selected({n, images.shape[1], images.shape[2]});
    LabeledDataset ds;
    ds.labels.resize(n);
    const std::size_t pixels = images.shape[1] * images.shape[2];
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(&images.values[order[i] * pixels], pixels, &selected.values[i * pixels]);
        ds.labels[i] = static_cast<int>(labels_raw.values[order[i]]);
    }
    ds.features = downsample_images(selected, factor);
    ds.split = split_tag;
    return ds;
}

} // namespace

DatasetBundle build_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
    DatasetBundle bundle;
    const std::string kind = cfg.dataset_kind();
    const Rng base(seed);
    if (kind == "half-moons") {
        bundle.train = make_half_moons(cfg.train_size(), cfg.half_moons_noise(),
                                       base.split(1).raw());
        bundle.test = make_half_moons(cfg.test_size(), cfg.half_moons_noise(),
                                      base.split(2).raw());
        bundle.test.split = "test";
        if (cfg.dataset_standardize()) {
            standardize(bundle.train);
            apply_standardization(bundle.test, bundle.train.feature_mean,
                                  bundle.train.feature_scale);
        }
        bundle.ood = place_ood_clusters(bundle.train, cfg.ood_placement(), base.split(3).raw());
        bundle.input_dim = 2;
        bundle.classes = 2;
        return bundle;
    }
    if (kind == "toy-manifold") {
        ToyManifoldParams params = cfg.toy_params();
        auto [train, meta] = make_toy_manifold(params, base.split(1).raw());
        params.points_per_cluster = cfg.toy_test_points_per_cluster();
        auto [test, meta2] = make_toy_manifold(params, base.split(2).raw());
        (void)meta2;
        bundle.train = std::move(train);
        bundle.test = std::move(test);
        bundle.test.split = "test";
        bundle.meta = meta;
        bundle.ood = place_ood_clusters(bundle.train, cfg.ood_placement(), base.split(3).raw(),
                                        &meta);
        bundle.input_dim = 2;
        bundle.classes = 2;
        return bundle;
    }
    if (kind == "mnist") {
        const std::string dir = cfg.mnist_data_dir();
        if (dir.empty()) {
            throw RuntimeFailure(
                "mnist: no data directory (set dataset.mnist.data_dir or UQLAB_DATA_DIR)");
        }
        const std::size_t factor = cfg.mnist_downsample_factor();
        bundle.train = mnist_split(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                                   cfg.mnist_train_subset(), factor, base.split(1).raw(),
                                   "train");
        bundle.test = mnist_split(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte",
                                  cfg.mnist_test_subset(), factor, base.split(2).raw(), "test");
        // Fashion-MNIST test split as the OoD set
        LabeledDataset fashion =
            mnist_split(dir, "fashion-t10k-images-idx3-ubyte", "fashion-t10k-labels-idx1-ubyte",
                        cfg.mnist_test_subset(), factor, base.split(3).raw(), "ood");
        OoDSet ood;
        ood.features = std::move(fashion.features);
        ood.source = "fashion-mnist";
        bundle.ood = std::move(ood);
        bundle.input_dim = bundle.train.dim();
        bundle.classes = 10;
        return bundle;
    }
    throw ValueError("dataset: unknown kind " + kind);
}

Model train_model(const ExperimentConfig& cfg, const std::string& name,
                  const DatasetBundle& data, std::uint64_t seed) {
    if (name == "deep-ensemble") {
        return train_deep_ensemble(cfg.base_spec(data.input_dim, data.classes), data.train,
                                   cfg.ensemble_config(), seed);
    }
    if (name == "bnn") {
        return hmc_sample_bnn(cfg.base_spec(data.input_dim, data.classes), data.train,
                              cfg.bnn_config(seed));
    }
    if (name == "swag") {
        SwagModel m;
        m.state = swag_fit(cfg.base_spec(data.input_dim, data.classes), data.train,
                           cfg.swag_config(), seed);
        m.sample_count = cfg.swag_sample_count();
        m.sample_scale = cfg.swag_sample_scale();
        m.sample_seed = Rng(seed).split(0x5a).raw();
        return m;
    }
    if (name == "mc-dropout") {
        return train_mc_dropout(cfg.mc_dropout_spec(data.input_dim, data.classes), data.train,
                                cfg.mc_dropout_train(), cfg.mc_dropout_passes(), seed);
    }
    if (name == "duq") {
        return duq_train(cfg.base_spec(data.input_dim, data.classes), data.train,
                         cfg.duq_config(), seed);
    }
    if (name == "sngp") {
        // GP head sits on the last hidden representation
        NetworkSpec backbone = cfg.base_spec(data.input_dim, data.classes);
        backbone.output_dim = backbone.hidden.empty() ? data.input_dim : backbone.hidden.back();
        const SngpConfig sngp_cfg = cfg.sngp_config();
        backbone.dropout_rate =
            cfg.doc.at("models").at("sngp").at("dropout_rate").get<double>();
        return sngp_train(backbone, data.train, sngp_cfg, seed);
    }
    throw ValueError("train: unknown model " + name);
}

namespace {

char fmt_buf[64];
std::string fmt(double v) {
    std::snprintf(fmt_buf, sizeof fmt_buf, "%.17g", v);
    return fmt_buf;
}

struct SuiteCell {
    std::string model_name;
    std::uint64_t seed;
    Model model;
    std::string error;
};

} // namespace

void write_summary_csv(const std::vector<ExperimentResult>& results, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path);
    out << "model,proxy_acc,adv_acc,epsilon,alpha,iterations,mean_l2\n";
    for (const auto& r : results) {
        if (r.task != "robustness") continue;
        out << r.model << ",";
        if (!r.error.empty()) {
            out << ",,,,,error: " << r.error << "\n";
            continue;
        }
        out << fmt(r.attack.proxy_accuracy) << "," << fmt(r.attack.adversarial_accuracy) << ","
            << fmt(r.attack_spec.epsilon) << "," << fmt(r.attack_spec.alpha) << ","
            << r.attack_spec.iterations << "," << fmt(r.attack.mean_l2) << "\n";
    }
}

void write_ood_csv(const std::vector<ExperimentResult>& results, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path);
    out << "model,channel,auroc\n";
    for (const auto& r : results) {
        if (r.task != "ood" || !r.error.empty()) continue;
        for (const auto& [channel, value] : r.ood_auroc) {
            out << r.model << "," << channel << "," << fmt(value) << "\n";
        }
    }
}

void write_manifest(const ExperimentConfig& cfg, const std::string& path) {
    nlohmann::json j;
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    j["config_hash"] = hex;
    j["seeds"] = cfg.seeds();
    j["version"] = kVersion;
    j["name"] = cfg.name();
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path);
    out << j.dump(2) << "\n";
}

std::vector<ExperimentResult> run_suite(const ExperimentConfig& cfg,
                                        const SuiteOptions& options) {
    const std::string out_dir = options.output_dir_override.empty()
                                    ? cfg.output_dir()
                                    : options.output_dir_override;
    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "checkpoints");
    fs::create_directories(fs::path(out_dir) / "adversarial");
    fs::create_directories(fs::path(out_dir) / "fields");
    fs::create_directories(fs::path(out_dir) / "reports");
    write_manifest(cfg, (fs::path(out_dir) / "manifest.json").string());
    {
        std::ofstream cfg_out(fs::path(out_dir) / "config.json");
        cfg_out << serialize_config(cfg);
    }

    const std::vector<std::uint64_t> seeds = cfg.seeds();
    if (seeds.empty()) throw ValueError("suite: no seeds configured");
    const std::vector<std::string> names = cfg.models_enabled();
    const std::vector<std::string> tasks = cfg.tasks();

    // datasets are seed-independent fixtures of the experiment
    const DatasetBundle data = build_dataset(cfg, seeds.front());
    write_dataset_csv(data.train, (fs::path(out_dir) / "dataset_train.csv").string());
    write_dataset_csv(data.test, (fs::path(out_dir) / "dataset_test.csv").string());

    // train every (model, seed) cell, optionally in parallel
    std::vector<SuiteCell> cells(names.size() * seeds.size());
    {
        std::size_t next = 0;
        std::mutex mu;
        auto worker = [&]() {
            for (;;) {
                std::size_t idx;
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (next >= cells.size()) return;
                    idx = next++;
                }
                const std::string& name = names[idx / seeds.size()];
                const std::uint64_t seed = seeds[idx % seeds.size()];
                cells[idx].model_name = name;
                cells[idx].seed = seed;
                try {
                    cells[idx].model = train_model(cfg, name, data, seed);
                } catch (const std::exception& e) {
                    cells[idx].error = e.what();
                }
            }
        };
        const std::size_t jobs = std::max<std::size_t>(options.jobs, 1);
        if (jobs <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
    }

    auto cell_at = [&](std::size_t model_idx, std::size_t seed_idx) -> SuiteCell& {
        return cells[model_idx * seeds.size() + seed_idx];
    };

    // first-seed checkpoints
    for (std::size_t mi = 0; mi < names.size(); ++mi) {
        const SuiteCell& cell = cell_at(mi, 0);
        if (cell.error.empty()) {
            save_model(cell.model,
                       (fs::path(out_dir) / "checkpoints" / (names[mi] + ".json")).string());
        }
    }

    std::vector<ExperimentResult> results;
    for (std::size_t mi = 0; mi < names.size(); ++mi) {
        for (const std::string& task : tasks) {
            const auto t0 = std::chrono::steady_clock::now();
            ExperimentResult agg;
            agg.dataset = cfg.dataset_kind();
            agg.model = names[mi];
            agg.task = task;
            agg.seeds = seeds;
            agg.attack_spec = cfg.attack_spec();
            std::size_t ok = 0;
            for (std::size_t si = 0; si < seeds.size(); ++si) {
                SuiteCell& cell = cell_at(mi, si);
                if (!cell.error.empty()) {
                    agg.error = cell.error;
                    continue;
                }
                try {
                    if (task == "robustness") {
                        AdversarialBatch batch;
                        ExperimentResult one = run_robustness(
                            cell.model, data.train, data.test, cfg.attack_spec(),
                            cfg.proxy_options(data.input_dim, data.classes), cell.seed,
                            si == 0 ? &batch : nullptr);
                        agg.clean_accuracy =
                            (std::isnan(agg.clean_accuracy) ? 0.0 : agg.clean_accuracy) +
                            one.clean_accuracy;
                        agg.attack.adversarial_accuracy += one.attack.adversarial_accuracy;
                        agg.attack.proxy_accuracy =
                            (std::isnan(agg.attack.proxy_accuracy) ? 0.0
                                                                   : agg.attack.proxy_accuracy) +
                            one.attack.proxy_accuracy;
                        agg.attack.mean_l2 += one.attack.mean_l2;
                        if (si == 0) {
                            write_batch_csv(batch, (fs::path(out_dir) / "adversarial" /
                                                    (names[mi] + ".csv"))
                                                       .string());
                        }
                    } else if (task == "ood") {
                        if (!data.ood) throw ValueError("suite: dataset has no OoD set");
                        const auto aurocs =
                            ood_detection(cell.model, data.test.features, *data.ood);
                        for (const auto& [channel, v] : aurocs) agg.ood_auroc[channel] += v;
                        if (si == 0) {
                            write_report_csv(report(cell.model, data.test.features),
                                             (fs::path(out_dir) / "reports" /
                                              (names[mi] + ".csv"))
                                                 .string());
                        }
                    } else if (task == "field") {
                        if (si < 2) {  // first two seeds expose restart sensitivity
                            const UncertaintyField field = uncertainty_field(
                                cell.model, data.train, cfg.field_resolution(),
                                cfg.field_expand());
                            for (const auto& [channel, values] : field.channels) {
                                (void)values;
                                const std::string stem = "field_" + names[mi] + "_" + channel +
                                                         "_s" + std::to_string(cell.seed);
                                write_field_csv(field, channel,
                                                (fs::path(out_dir) / "fields" /
                                                 (stem + ".csv"))
                                                    .string());
                                if (cfg.write_pgm()) {
                                    write_field_pgm(field, channel,
                                                    (fs::path(out_dir) / "fields" /
                                                     (stem + ".pgm"))
                                                        .string());
                                }
                            }
                        }
                    } else if (task == "manifold-sweep") {
                        if (!data.meta) throw ValueError("suite: dataset has no manifold");
                        for (PerturbDirection dir :
                             {PerturbDirection::On, PerturbDirection::Off}) {
                            const auto curve = run_manifold_sweep(
                                cell.model, data.test, *data.meta,
                                cfg.manifold_strength_grid(), dir, cfg.manifold_repeats(),
                                cell.seed);
                            const std::string tag =
                                dir == PerturbDirection::On ? "on" : "off";
                            for (const auto& [eps, acc] : curve) {
                                agg.curves["sweep_" + tag + "_" + fmt(eps)] += acc;
                            }
                        }
                    }
                    ++ok;
                } catch (const std::exception& e) {
                    agg.error = e.what();
                }
            }
            if (ok > 0) {
                const double inv = 1.0 / static_cast<double>(ok);
                agg.clean_accuracy *= inv;
                agg.attack.adversarial_accuracy *= inv;
                agg.attack.proxy_accuracy *= inv;
                agg.attack.mean_l2 *= inv;
                for (auto& [k, v] : agg.ood_auroc) v *= inv;
                for (auto& [k, v] : agg.curves) v *= inv;
            }
            agg.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            results.push_back(std::move(agg));
        }
    }

    std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
        return std::tie(a.dataset, a.model, a.task) < std::tie(b.dataset, b.model, b.task);
    });
    write_summary_csv(results, (fs::path(out_dir) / "summary.csv").string());
    write_ood_csv(results, (fs::path(out_dir) / "ood_auroc.csv").string());

    // manifold sweep curves, one file per direction
    if (std::find(tasks.begin(), tasks.end(), "manifold-sweep") != tasks.end()) {
        for (const char* tag : {"on", "off"}) {
            std::ofstream out(fs::path(out_dir) / (std::string("sweep_") + tag + ".csv"));
            out << "model,epsilon,mean_accuracy\n";
            for (const auto& r : results) {
                if (r.task != "manifold-sweep" || !r.error.empty()) continue;
                const std::string prefix = std::string("sweep_") + tag + "_";
                for (const auto& [key, acc] : r.curves) {
                    if (key.rfind(prefix, 0) == 0) {
                        out << r.model << "," << key.substr(prefix.size()) << "," << fmt(acc)
                            << "\n";
                    }
                }
            }
        }
    }
    return results;
}

} // namespace uqlab
