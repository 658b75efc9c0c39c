#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "uqlab/metrics.hpp"

using namespace uqlab;

namespace {

ProbEnsemble from_rows(std::size_t m, std::size_t c, const std::vector<double>& rows) {
    ProbEnsemble e(m, 1, c);
    e.p = rows;
    return e;
}

// literal transcription of the metric definitions, kept separate from the
// production path
double oracle_kl_pairs(const ProbEnsemble& e, std::size_t n) {
    const double clamp = 1e-12;
    double total = 0.0;
    for (std::size_t a = 0; a < e.members; ++a) {
        for (std::size_t b = 0; b < e.members; ++b) {
            if (a == b) continue;
            double kl = 0.0;
            for (std::size_t c = 0; c < e.classes; ++c) {
                const double p = e.at(a, n, c), q = e.at(b, n, c);
                kl += p * (std::log(std::max(p, clamp)) - std::log(std::max(q, clamp)));
            }
            total += kl;
        }
    }
    return total / static_cast<double>(e.members * (e.members - 1));
}

ProbEnsemble random_ensemble(Rng& rng, std::size_t max_members = 16,
                             std::size_t max_classes = 10) {
    const std::size_t m = 2 + rng.integer(max_members - 1);
    const std::size_t c = 2 + rng.integer(max_classes - 1);
    ProbEnsemble e(m, 1, c);
    for (std::size_t mm = 0; mm < m; ++mm) {
        double total = 0.0;
        for (std::size_t cc = 0; cc < c; ++cc) {
            // gamma(alpha) draws via sum of exponentials keep some rows spiky
            double g = -std::log(1.0 - rng.uniform());
            if (rng.bernoulli(0.3)) g *= 0.01;
            e.at(mm, 0, cc) = g;
            total += g;
        }
        for (std::size_t cc = 0; cc < c; ++cc) e.at(mm, 0, cc) /= total;
    }
    return e;
}

} // namespace

TEST_CASE("aleatoric entropy of a uniform binary row is ln 2") {
    auto e = from_rows(1, 2, {0.5, 0.5});
    CHECK(aleatoric_entropy(e)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("deterministic members carry zero aleatoric entropy") {
    auto e = from_rows(2, 2, {1.0, 0.0, 0.0, 1.0});
    CHECK(aleatoric_entropy(e)[0] == doctest::Approx(0.0));
}

TEST_CASE("aleatoric entropy averages member entropies") {
    auto e = from_rows(2, 2, {0.9, 0.1, 0.6, 0.4});
    // H(0.9,0.1) = 0.3251, H(0.6,0.4) = 0.6730, mean = 0.4990
    CHECK(aleatoric_entropy(e)[0] == doctest::Approx(0.4990473202).epsilon(1e-9));
}

TEST_CASE("epistemic entropy of maximal disagreement is ln 2") {
    auto e = from_rows(2, 2, {1.0, 0.0, 0.0, 1.0});
    CHECK(epistemic_entropy(e)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("identical members collapse epistemic onto aleatoric entropy") {
    auto e = from_rows(3, 2, {0.8, 0.2, 0.8, 0.2, 0.8, 0.2});
    const double expected = 0.50040242354;  // H(0.8, 0.2)
    CHECK(epistemic_entropy(e)[0] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(aleatoric_entropy(e)[0] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("kl uncertainty is zero for identical members") {
    auto e = from_rows(4, 3, {0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5});
    CHECK(kl_uncertainty(e)[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("kl uncertainty of a symmetric binary pair") {
    auto e = from_rows(2, 2, {0.9, 0.1, 0.1, 0.9});
    const double expected = 0.8 * std::log(9.0);
    CHECK(kl_uncertainty(e)[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kl uncertainty with duplicated members matches the pair formula") {
    // two identical members plus one distinct: (4/6) of the two-direction mean
    auto e = from_rows(3, 2, {0.7, 0.3, 0.7, 0.3, 0.2, 0.8});
    const double kl_ab = 0.7 * std::log(0.7 / 0.2) + 0.3 * std::log(0.3 / 0.8);
    const double kl_ba = 0.2 * std::log(0.2 / 0.7) + 0.8 * std::log(0.8 / 0.3);
    const double expected = (4.0 / 6.0) * 0.5 * (kl_ab + kl_ba);
    CHECK(kl_uncertainty(e)[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(kl_uncertainty(e)[0] == doctest::Approx(oracle_kl_pairs(e, 0)).epsilon(1e-12));
}

TEST_CASE("kl uncertainty is undefined for single-pass predictions") {
    auto e = from_rows(1, 2, {0.5, 0.5});
    CHECK_THROWS_WITH_AS(kl_uncertainty(e),
                         "kl uncertainty: undefined for single-pass predictions (M < 2)",
                         ValueError);
}

TEST_CASE("metric identities hold on random ensembles") {
    Rng rng(2024);
    for (int trial = 0; trial < 3000; ++trial) {
        ProbEnsemble e = random_ensemble(rng);
        e.validate();
        const double ha = aleatoric_entropy(e)[0];
        const double he = epistemic_entropy(e)[0];
        const double kl = kl_uncertainty(e)[0];
        const double lnc = std::log(static_cast<double>(e.classes));
        REQUIRE(ha >= -1e-9);
        REQUIRE(he >= ha - 1e-9);
        REQUIRE(he <= lnc + 1e-9);
        REQUIRE(kl >= -1e-9);
        REQUIRE(std::abs(kl - oracle_kl_pairs(e, 0)) < 1e-12);
    }
}

TEST_CASE("kl is zero iff members coincide") {
    Rng rng(77);
    ProbEnsemble varied = random_ensemble(rng);
    // force genuine disagreement between members 0 and 1
    varied.at(0, 0, 0) = 0.9;
    varied.at(0, 0, 1) = 0.1;
    for (std::size_t c = 2; c < varied.classes; ++c) varied.at(0, 0, c) = 0.0;
    varied.at(1, 0, 0) = 0.1;
    varied.at(1, 0, 1) = 0.9;
    for (std::size_t c = 2; c < varied.classes; ++c) varied.at(1, 0, c) = 0.0;
    CHECK(kl_uncertainty(varied)[0] > 1e-6);

    ProbEnsemble equal(5, 1, 4);
    for (std::size_t m = 0; m < 5; ++m) {
        equal.at(m, 0, 0) = 0.4;
        equal.at(m, 0, 1) = 0.3;
        equal.at(m, 0, 2) = 0.2;
        equal.at(m, 0, 3) = 0.1;
    }
    CHECK(kl_uncertainty(equal)[0] < 1e-9);
}

TEST_CASE("metrics are invariant to member and datum permutations") {
    Rng rng(31);
    ProbEnsemble e(3, 2, 4);
    for (double& v : e.p) v = 0.0;
    for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t n = 0; n < 2; ++n) {
            double total = 0.0;
            for (std::size_t c = 0; c < 4; ++c) {
                e.at(m, n, c) = 0.05 + rng.uniform();
                total += e.at(m, n, c);
            }
            for (std::size_t c = 0; c < 4; ++c) e.at(m, n, c) /= total;
        }
    }
    ProbEnsemble swapped_members = e;
    for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t c = 0; c < 4; ++c) {
            std::swap(swapped_members.p[(0 * 2 + n) * 4 + c],
                      swapped_members.p[(2 * 2 + n) * 4 + c]);
        }
    }
    ProbEnsemble swapped_data = e;
    for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t c = 0; c < 4; ++c) {
            std::swap(swapped_data.p[(m * 2 + 0) * 4 + c], swapped_data.p[(m * 2 + 1) * 4 + c]);
        }
    }
    for (std::size_t n = 0; n < 2; ++n) {
        CHECK(aleatoric_entropy(e)[n] ==
              doctest::Approx(aleatoric_entropy(swapped_members)[n]).epsilon(1e-12));
        CHECK(epistemic_entropy(e)[n] ==
              doctest::Approx(epistemic_entropy(swapped_members)[n]).epsilon(1e-12));
        CHECK(kl_uncertainty(e)[n] ==
              doctest::Approx(kl_uncertainty(swapped_members)[n]).epsilon(1e-12));
        CHECK(aleatoric_entropy(e)[n] ==
              doctest::Approx(aleatoric_entropy(swapped_data)[1 - n]).epsilon(1e-12));
        CHECK(kl_uncertainty(e)[n] ==
              doctest::Approx(kl_uncertainty(swapped_data)[1 - n]).epsilon(1e-12));
    }
}

TEST_CASE("prob ensemble validation catches broken rows") {
    ProbEnsemble e(1, 1, 2);
    e.at(0, 0, 0) = 0.9;
    e.at(0, 0, 1) = 0.2;
    CHECK_THROWS_AS(e.validate(), ValueError);
}

TEST_CASE("report csv leaves undefined channels empty") {
    UncertaintyReport rep;
    rep.model_kind = "duq";
    rep.aleatoric = {0.25, 0.5};
    rep.distance = std::vector<double>{1.5, 2.5};
    const auto path = std::filesystem::temp_directory_path() / "uqlab_report.csv";
    write_report_csv(rep, path.string());
    std::ifstream in(path);
    std::string header, row0;
    std::getline(in, header);
    std::getline(in, row0);
    CHECK(header == "index,H_a,H_e,KL_e,extra");
    CHECK(row0 == "0,0.25,,,1.5");
}
