#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uqlab/tensor.hpp"

namespace uqlab {

/// M x N x C array of per-member class-probability vectors.
struct ProbEnsemble {
    std::size_t members = 0;  // M
    std::size_t count = 0;    // N
    std::size_t classes = 0;  // C
    std::vector<double> p;    // row (m,n) sums to 1

    ProbEnsemble() = default;
    ProbEnsemble(std::size_t m, std::size_t n, std::size_t c)
        : members(m), count(n), classes(c), p(m * n * c, 0.0) {}

    double& at(std::size_t m, std::size_t n, std::size_t c) {
        return p[(m * count + n) * classes + c];
    }
    double at(std::size_t m, std::size_t n, std::size_t c) const {
        return p[(m * count + n) * classes + c];
    }

    /// Wraps an N x C probability matrix as a single-member ensemble.
    static ProbEnsemble from_matrix(const Tensor& probs);
    /// Stacks per-member N x C probability matrices.
    static ProbEnsemble from_members(const std::vector<Tensor>& member_probs);

    /// Member-averaged N x C probability matrix.
    Tensor mean_probs() const;

    /// Checks row sums (1e-9) and entry bounds.
    void validate() const;
};

/// H_a: member-averaged predictive entropy, in nats.
std::vector<double> aleatoric_entropy(const ProbEnsemble& ens);

/// H_e: entropy of the member-averaged prediction, in nats.
std::vector<double> epistemic_entropy(const ProbEnsemble& ens);

/// KL_e: mean KL divergence over all M(M-1) ordered member pairs, with
/// probabilities clamped at 1e-12 inside the logs. Throws for M < 2
/// (undefined for single-pass predictions).
std::vector<double> kl_uncertainty(const ProbEnsemble& ens);

struct UncertaintyReport {
    std::string model_kind;
    std::vector<double> aleatoric;                       // H_a
    std::optional<std::vector<double>> epistemic_entropy; // H_e; absent for DUQ
    std::optional<std::vector<double>> kl;                // KL_e; absent when M = 1
    std::optional<std::vector<double>> distance;          // DUQ centroid distance
    std::vector<std::string> warnings;

    /// The per-model epistemic score used for OoD ranking: centroid
    /// distance for DUQ, H_e otherwise.
    const std::vector<double>& epistemic_score() const;
};

/// CSV with header `index,H_a,H_e,KL_e,extra`; undefined channels stay empty.
void write_report_csv(const UncertaintyReport& report, const std::string& path);

} // namespace uqlab
