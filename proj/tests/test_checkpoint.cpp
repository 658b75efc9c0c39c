#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "uqlab/checkpoint.hpp"

using namespace uqlab;
namespace fs = std::filesystem;

namespace {

LabeledDataset blobs(std::uint64_t seed = 3) {
    Rng rng(seed);
    LabeledDataset ds;
    ds.features = Tensor({40, 2});
    ds.labels.resize(40);
    for (std::size_t i = 0; i < 20; ++i) {
        ds.features.at(i, 0) = -1.0 + 0.2 * rng.normal();
        ds.features.at(i, 1) = 0.2 * rng.normal();
        ds.labels[i] = 0;
        ds.features.at(20 + i, 0) = 1.0 + 0.2 * rng.normal();
        ds.features.at(20 + i, 1) = 0.2 * rng.normal();
        ds.labels[20 + i] = 1;
    }
    return ds;
}

TrainOptions quick() {
    TrainOptions t;
    t.opt.kind = OptKind::Adam;
    t.opt.learning_rate = 0.01;
    t.epochs = 25;
    t.batch_size = 16;
    return t;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void roundtrip_check(const Model& model, const char* name) {
    const LabeledDataset data = blobs(9);
    const fs::path path = fs::temp_directory_path() / (std::string("uqlab_ckpt_") + name);
    save_model(model, path.string());
    const Model loaded = load_model(path.string());
    CHECK(model_kind(loaded) == model_kind(model));

    // predictions are bitwise identical through the round trip
    const ProbEnsemble before = predict_ensemble(model, data.features);
    const ProbEnsemble after = predict_ensemble(loaded, data.features);
    CHECK(before.p == after.p);

    // and re-serialization reproduces the file byte for byte
    const fs::path path2 = fs::temp_directory_path() / (std::string("uqlab_ckpt2_") + name);
    save_model(loaded, path2.string());
    CHECK(slurp(path) == slurp(path2));
}

} // namespace

TEST_CASE("deep ensemble checkpoints round-trip") {
    EnsembleConfig cfg;
    cfg.members = 3;
    cfg.train = quick();
    roundtrip_check(train_deep_ensemble({2, {8}, 2, 0.0}, blobs(), cfg, 5), "de");
}

TEST_CASE("bnn checkpoints round-trip") {
    HmcConfig cfg;
    cfg.warmup = 30;
    cfg.samples = 5;
    cfg.init_step = 1e-3;
    cfg.seed = 2;
    roundtrip_check(hmc_sample_bnn({2, {8}, 2, 0.0}, blobs(), cfg), "bnn");
}

TEST_CASE("swag checkpoints round-trip") {
    SwagConfig cfg;
    cfg.pretrain = quick();
    cfg.explore_epochs = 4;
    cfg.explore_lr = 0.02;
    cfg.rank = 2;
    SwagModel m;
    m.state = swag_fit({2, {8}, 2, 0.0}, blobs(), cfg, 3);
    m.sample_count = 5;
    m.sample_seed = 17;
    roundtrip_check(m, "swag");
}

TEST_CASE("mc dropout checkpoints round-trip") {
    NetworkSpec spec{2, {8}, 2, 0.25};
    roundtrip_check(train_mc_dropout(spec, blobs(), quick(), 6, 3), "mcd");
}

TEST_CASE("duq checkpoints round-trip") {
    DuqConfig cfg;
    cfg.embedding_dim = 6;
    cfg.length_scale = 0.5;
    cfg.train = quick();
    roundtrip_check(duq_train({2, {8}, 2, 0.0}, blobs(), cfg, 12), "duq");
}

TEST_CASE("sngp checkpoints round-trip") {
    SngpConfig cfg;
    cfg.feature_count = 32;
    cfg.train = quick();
    roundtrip_check(sngp_train({2, {8}, 8, 0.0}, blobs(), cfg, 7), "sngp");
}

TEST_CASE("loader rejects unknown kinds and versions") {
    const fs::path path = fs::temp_directory_path() / "uqlab_ckpt_bad.json";
    {
        std::ofstream out(path);
        out << R"({"format_version": 1, "kind": "mystery"})";
    }
    CHECK_THROWS_AS(load_model(path.string()), RuntimeFailure);
    {
        std::ofstream out(path);
        out << R"({"format_version": 99, "kind": "duq"})";
    }
    CHECK_THROWS_AS(load_model(path.string()), RuntimeFailure);
    CHECK_THROWS_AS(load_model("/nonexistent/x.json"), RuntimeFailure);
}
