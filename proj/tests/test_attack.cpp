#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "uqlab/attack.hpp"
#include "uqlab/eval.hpp"

using namespace uqlab;

namespace {

LabeledDataset blobs(std::size_t per_class = 50, std::uint64_t seed = 11) {
    Rng rng(seed);
    LabeledDataset ds;
    ds.features = Tensor({2 * per_class, 2});
    ds.labels.resize(2 * per_class);
    for (std::size_t i = 0; i < per_class; ++i) {
        ds.features.at(i, 0) = -1.0 + 0.25 * rng.normal();
        ds.features.at(i, 1) = 0.25 * rng.normal();
        ds.labels[i] = 0;
        ds.features.at(per_class + i, 0) = 1.0 + 0.25 * rng.normal();
        ds.features.at(per_class + i, 1) = 0.25 * rng.normal();
        ds.labels[per_class + i] = 1;
    }
    return ds;
}

Model quick_target(const LabeledDataset& data) {
    EnsembleConfig cfg;
    cfg.members = 3;
    cfg.train.opt.kind = OptKind::Adam;
    cfg.train.opt.learning_rate = 0.01;
    cfg.train.epochs = 80;
    cfg.train.batch_size = 16;
    return train_deep_ensemble({2, {12}, 2, 0.0}, data, cfg, 5);
}

ProxyFitOptions quick_proxy() {
    ProxyFitOptions p;
    p.spec = NetworkSpec{2, {12}, 2, 0.0};
    p.train.opt.kind = OptKind::Adam;
    p.train.opt.learning_rate = 0.01;
    p.train.epochs = 80;
    p.train.batch_size = 16;
    return p;
}

} // namespace

TEST_CASE("attack spec validation") {
    AttackSpec s;
    s.epsilon = 0.0;
    CHECK_THROWS_AS(s.validate(), ValueError);
    s = AttackSpec{};
    s.alpha = -1.0;
    CHECK_THROWS_AS(s.validate(), ValueError);
    s = AttackSpec{};
    s.iterations = 0;
    CHECK_THROWS_AS(s.validate(), ValueError);
    s = AttackSpec{};
    s.norm = "linf";
    CHECK_THROWS_AS(s.validate(), ValueError);
}

TEST_CASE("projection onto the L2 ball is idempotent") {
    Rng rng(4);
    Tensor delta = Tensor::randn({100, 3}, rng, 2.0);
    Tensor once = delta;
    project_l2(once, 0.75);
    Tensor twice = once;
    project_l2(twice, 0.75);
    CHECK(once.values == twice.values);
    for (std::size_t i = 0; i < 100; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < 3; ++j) sq += once.at(i, j) * once.at(i, j);
        CHECK(std::sqrt(sq) <= 0.75 + 1e-9);
    }
}

TEST_CASE("proxy fits the target's predictions, not the labels") {
    LabeledDataset data = blobs();
    Model target = quick_target(data);
    ProxyModel proxy = fit_proxy(target, data, quick_proxy(), 7);
    CHECK(proxy.agreement >= 0.95);
    CHECK(!proxy.low_agreement_warning);
}

TEST_CASE("self-imitation reaches near-perfect agreement") {
    LabeledDataset data = blobs();
    // target with the proxy's own architecture: agreement should be ~100%
    EnsembleConfig cfg;
    cfg.members = 1;
    cfg.train.opt.kind = OptKind::Adam;
    cfg.train.opt.learning_rate = 0.01;
    cfg.train.epochs = 80;
    cfg.train.batch_size = 16;
    Model target = train_deep_ensemble({2, {12}, 2, 0.0}, data, cfg, 7);
    ProxyModel proxy = fit_proxy(target, data, quick_proxy(), 7);
    CHECK(proxy.agreement >= 0.99);
}

TEST_CASE("a constant proxy produces a zero perturbation") {
    LabeledDataset data = blobs();
    ProxyModel proxy;
    proxy.spec = NetworkSpec{2, {4}, 2, 0.0};
    proxy.weights.assign(NetworkSpec{2, {4}, 2, 0.0}.param_count(), 0.0);
    AttackSpec spec;
    spec.epsilon = 0.5;
    spec.alpha = 0.05;
    spec.iterations = 10;
    std::vector<int> preds(data.size(), 0);
    AdversarialBatch batch = l2_pgd(proxy, data.features, preds, spec);
    for (double v : batch.delta.values) CHECK(v == 0.0);
    CHECK(batch.adversarial.values == data.features.values);
}

TEST_CASE("pgd never exceeds the perturbation budget") {
    LabeledDataset data = blobs();
    Model target = quick_target(data);
    ProxyModel proxy = fit_proxy(target, data, quick_proxy(), 7);
    AttackSpec spec;
    spec.epsilon = 0.3;
    spec.alpha = 0.07;
    spec.iterations = 60;  // far more steps than the budget allows
    const std::vector<int> preds = argmax_rows(predict_mean_probs(target, data.features));
    AdversarialBatch batch = l2_pgd(proxy, data.features, preds, spec);
    for (double norm : batch.delta_norm) CHECK(norm <= 0.3 + 1e-9);
}

TEST_CASE("one normalized step on a linear proxy moves exactly alpha") {
    // logits = (w x, 0) with w > 0; class 0 on the positive side
    ProxyModel proxy;
    proxy.spec = NetworkSpec{1, {}, 2, 0.0};
    proxy.weights = {3.0, 0.0, 0.0, 0.0};  // W = [[3, 0]], b = 0
    AttackSpec spec;
    spec.epsilon = 1.0;
    spec.alpha = 0.25;
    spec.iterations = 1;
    Tensor x = Tensor::matrix(1, 1, {0.8});
    AdversarialBatch batch = l2_pgd(proxy, x, {0}, spec);
    // ascent on the loss pushes away from the correct class by exactly alpha
    CHECK(batch.delta.values[0] == doctest::Approx(-0.25).epsilon(1e-12));

    // with a budget smaller than the step, the projection caps the move
    spec.epsilon = 0.1;
    batch = l2_pgd(proxy, x, {0}, spec);
    CHECK(batch.delta.values[0] == doctest::Approx(-0.1).epsilon(1e-12));
}

TEST_CASE("pgd ascends the proxy loss for nearly all data") {
    LabeledDataset data = blobs();
    Model target = quick_target(data);
    ProxyModel proxy = fit_proxy(target, data, quick_proxy(), 7);
    AttackSpec spec;  // defaults: eps 0.6, alpha 0.01, 40 iterations
    const std::vector<int> preds = argmax_rows(predict_mean_probs(target, data.features));
    AdversarialBatch batch = l2_pgd(proxy, data.features, preds, spec);
    std::size_t non_decreasing = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (batch.proxy_loss_final[i] >= batch.proxy_loss_initial[i] - 1e-12) ++non_decreasing;
    }
    CHECK(static_cast<double>(non_decreasing) >= 0.95 * static_cast<double>(data.size()));
}

TEST_CASE("raw-gradient mode reproduces the unnormalized update") {
    ProxyModel proxy;
    proxy.spec = NetworkSpec{1, {}, 2, 0.0};
    proxy.weights = {3.0, 0.0, 0.0, 0.0};
    AttackSpec spec;
    spec.epsilon = 5.0;
    spec.alpha = 0.5;
    spec.iterations = 1;
    spec.raw_gradient = true;
    Tensor x = Tensor::matrix(1, 1, {0.0});
    AdversarialBatch batch = l2_pgd(proxy, x, {0}, spec);
    // dL/ddelta at 0: (p0 - 1) * w = -0.5 * 3; one raw ascent step of alpha*g
    CHECK(batch.delta.values[0] == doctest::Approx(0.5 * (-1.5)).epsilon(1e-12));
}

TEST_CASE("calibration loop lands the proxy accuracy in the band") {
    LabeledDataset data = blobs();
    Model target = quick_target(data);
    ProxyModel proxy = fit_proxy(target, data, quick_proxy(), 7);
    AttackSpec spec;
    spec.epsilon = 1.2;
    spec.alpha = 1e-4;  // deliberately too weak
    spec.iterations = 40;
    ProxyCalibration band;
    band.proxy_accuracy_low = 0.05;
    band.proxy_accuracy_high = 0.6;
    band.max_rounds = 12;
    const std::vector<int> preds = argmax_rows(predict_mean_probs(target, data.features));
    double alpha_used = 0.0;
    AdversarialBatch batch = l2_pgd_calibrated(proxy, data.features, preds, spec, band,
                                               &alpha_used);
    std::size_t fooled = 0;
    for (char f : batch.proxy_fooled) fooled += f;
    const double proxy_acc = 1.0 - static_cast<double>(fooled) / data.size();
    CHECK(proxy_acc >= band.proxy_accuracy_low);
    CHECK(proxy_acc <= band.proxy_accuracy_high);
    CHECK(alpha_used > spec.alpha);
}

TEST_CASE("manifold perturbation moves along the requested axis only") {
    ToyManifoldParams p;
    auto [data, meta] = make_toy_manifold(p, 2);
    AdversarialBatch off = manifold_perturb(data, meta, 1.0, PerturbDirection::Off, 5);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double on_dot = off.delta.at(i, 0) * meta.on_axis[0] +
                              off.delta.at(i, 1) * meta.on_axis[1];
        CHECK(std::abs(on_dot) < 1e-12);
    }
    AdversarialBatch on = manifold_perturb(data, meta, 1.0, PerturbDirection::On, 5);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double off_before = meta.off_coord(data.features.at(i, 0), data.features.at(i, 1));
        const double off_after =
            meta.off_coord(on.adversarial.at(i, 0), on.adversarial.at(i, 1));
        CHECK(off_after == off_before);  // exact: the off coordinate never moves
    }
}

TEST_CASE("zero-strength perturbations are sign-symmetric noise") {
    ToyManifoldParams p;
    p.points_per_cluster = 400;
    auto [data, meta] = make_toy_manifold(p, 2);
    AdversarialBatch batch = manifold_perturb(data, meta, 0.0, PerturbDirection::Off, 5);
    double mean = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) mean += batch.delta.at(i, 1);
    mean /= static_cast<double>(data.size());
    // displacement ~ +-|N(0, 0.5^2)|: mean within 3 sigma / sqrt(N)
    CHECK(std::abs(mean) <= 3.0 * 0.5 / std::sqrt(static_cast<double>(data.size())));
}

TEST_CASE("perturbation magnitudes follow the folded normal") {
    ToyManifoldParams p;
    p.points_per_cluster = 500;
    auto [data, meta] = make_toy_manifold(p, 2);
    AdversarialBatch batch = manifold_perturb(data, meta, 2.0, PerturbDirection::Off, 5);
    double mean_abs = 0.0;
    for (double v : batch.delta_norm) mean_abs += v;
    mean_abs /= static_cast<double>(batch.delta_norm.size());
    // |N(2, 0.5^2)| has mean ~2.0000 for sigma << mu; allow Monte Carlo error
    CHECK(mean_abs == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("evaluating a zero-delta batch recovers clean accuracy") {
    LabeledDataset data = blobs();
    Model target = quick_target(data);
    AdversarialBatch batch;
    batch.clean = data.features;
    batch.delta = Tensor::zeros(data.features.shape);
    batch.adversarial = data.features;
    batch.delta_norm.assign(data.size(), 0.0);
    batch.target_clean_pred = argmax_rows(predict_mean_probs(target, data.features));
    AttackMetrics metrics = evaluate_attack(target, batch, data.labels);
    const double clean = accuracy(predict_mean_probs(target, data.features), data.labels);
    CHECK(metrics.adversarial_accuracy == doctest::Approx(clean));
    CHECK(metrics.mean_l2 == 0.0);
    for (char f : metrics.target_fooled) CHECK(f == 0);

    std::vector<int> short_labels(data.size() - 1);
    CHECK_THROWS_AS(evaluate_attack(target, batch, short_labels), ValueError);
}

TEST_CASE("evaluate-attack is pure") {
    LabeledDataset data = blobs(20);
    Model target = quick_target(data);
    ProxyModel proxy = fit_proxy(target, data, quick_proxy(), 7);
    AttackSpec spec;
    spec.iterations = 5;
    const std::vector<int> preds = argmax_rows(predict_mean_probs(target, data.features));
    AdversarialBatch batch = l2_pgd(proxy, data.features, preds, spec);
    AttackMetrics a = evaluate_attack(target, batch, data.labels);
    AttackMetrics b = evaluate_attack(target, batch, data.labels);
    CHECK(a.adversarial_accuracy == b.adversarial_accuracy);
    CHECK(a.proxy_accuracy == b.proxy_accuracy);
    CHECK(a.mean_l2 == b.mean_l2);
}

TEST_CASE("batch csv carries features, deltas and flags") {
    LabeledDataset data = blobs(5);
    Model target = quick_target(data);
    ProxyModel proxy = fit_proxy(target, data, quick_proxy(), 7);
    AttackSpec spec;
    spec.iterations = 3;
    const std::vector<int> preds = argmax_rows(predict_mean_probs(target, data.features));
    AdversarialBatch batch = l2_pgd(proxy, data.features, preds, spec);
    batch.target_fooled = evaluate_attack(target, batch, data.labels).target_fooled;
    const auto path = std::filesystem::temp_directory_path() / "uqlab_batch.csv";
    write_batch_csv(batch, path.string());
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "x0,x1,d0,d1,l2,proxy_fooled,target_fooled");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == data.size());
}
