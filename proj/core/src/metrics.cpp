#include "uqlab/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace uqlab {

namespace {
constexpr double kLogClamp = 1e-12;

double entropy_nats(const double* p, std::size_t c) {
    double h = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
    }
    return h;
}
} // namespace

ProbEnsemble ProbEnsemble::from_matrix(const Tensor& probs) {
    if (probs.rank() != 2) throw ValueError("prob ensemble: expects N x C matrix");
    ProbEnsemble e(1, probs.shape[0], probs.shape[1]);
    e.p = probs.values;
    return e;
}

ProbEnsemble ProbEnsemble::from_members(const std::vector<Tensor>& member_probs) {
    if (member_probs.empty()) throw ValueError("prob ensemble: no members");
    const Tensor& first = member_probs.front();
    if (first.rank() != 2) throw ValueError("prob ensemble: expects N x C matrices");
    ProbEnsemble e(member_probs.size(), first.shape[0], first.shape[1]);
    for (std::size_t m = 0; m < member_probs.size(); ++m) {
        if (!member_probs[m].same_shape(first)) {
            throw ValueError("prob ensemble: member " + std::to_string(m) + " shape " +
                             shape_str(member_probs[m].shape) + " != " + shape_str(first.shape));
        }
        std::copy(member_probs[m].values.begin(), member_probs[m].values.end(),
                  e.p.begin() + static_cast<std::ptrdiff_t>(m * e.count * e.classes));
    }
    return e;
}

Tensor ProbEnsemble::mean_probs() const {
    Tensor out({count, classes});
    for (std::size_t m = 0; m < members; ++m)
        for (std::size_t i = 0; i < count * classes; ++i)
            out.values[i] += p[m * count * classes + i];
    const double inv = 1.0 / static_cast<double>(members);
    for (double& v : out.values) v *= inv;
    return out;
}

void ProbEnsemble::validate() const {
    if (members == 0 || count == 0 || classes == 0) {
        throw ValueError("prob ensemble: empty dimension");
    }
    if (p.size() != members * count * classes) {
        throw ValueError("prob ensemble: storage size mismatch");
    }
    for (std::size_t m = 0; m < members; ++m) {
        for (std::size_t n = 0; n < count; ++n) {
            double s = 0.0;
            for (std::size_t c = 0; c < classes; ++c) {
                const double v = at(m, n, c);
                if (v < -1e-12 || v > 1.0 + 1e-12) {
                    throw ValueError("prob ensemble: probability out of [0,1]");
                }
                s += v;
            }
            if (std::abs(s - 1.0) > 1e-9) {
                throw ValueError("prob ensemble: row (" + std::to_string(m) + "," +
                                 std::to_string(n) + ") sums to " + std::to_string(s));
            }
        }
    }
}

std::vector<double> aleatoric_entropy(const ProbEnsemble& ens) {
    std::vector<double> out(ens.count, 0.0);
    for (std::size_t n = 0; n < ens.count; ++n) {
        double acc = 0.0;
        for (std::size_t m = 0; m < ens.members; ++m) {
            acc += entropy_nats(&ens.p[(m * ens.count + n) * ens.classes], ens.classes);
        }
        out[n] = acc / static_cast<double>(ens.members);
    }
    return out;
}

std::vector<double> epistemic_entropy(const ProbEnsemble& ens) {
    std::vector<double> out(ens.count, 0.0);
    std::vector<double> mean(ens.classes);
    for (std::size_t n = 0; n < ens.count; ++n) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (std::size_t m = 0; m < ens.members; ++m) {
            const double* row = &ens.p[(m * ens.count + n) * ens.classes];
            for (std::size_t c = 0; c < ens.classes; ++c) mean[c] += row[c];
        }
        const double inv = 1.0 / static_cast<double>(ens.members);
        for (double& v : mean) v *= inv;
        out[n] = entropy_nats(mean.data(), ens.classes);
    }
    return out;
}

std::vector<double> kl_uncertainty(const ProbEnsemble& ens) {
    if (ens.members < 2) {
        throw ValueError("kl uncertainty: undefined for single-pass predictions (M < 2)");
    }
    const std::size_t m = ens.members, c = ens.classes;
    std::vector<double> out(ens.count, 0.0);
    // Mean over ordered pairs via the factorization
    //   sum_{m' != m''} KL(p_{m'}, p_{m''})
    //     = (M-1) * sum_m sum_c p log p  -  (sum_c T_c L_c - sum_m sum_c p log p)
    // with T_c = sum_m p_{mc} and L_c = sum_m log p_{mc}; logs clamped at 1e-12.
    std::vector<long double> tc(c), lc(c);
    for (std::size_t n = 0; n < ens.count; ++n) {
        std::fill(tc.begin(), tc.end(), 0.0L);
        std::fill(lc.begin(), lc.end(), 0.0L);
        long double self = 0.0L;
        for (std::size_t mm = 0; mm < m; ++mm) {
            const double* row = &ens.p[(mm * ens.count + n) * c];
            for (std::size_t cc = 0; cc < c; ++cc) {
                const double pv = row[cc];
                const double lg = std::log(pv > kLogClamp ? pv : kLogClamp);
                tc[cc] += pv;
                lc[cc] += lg;
                self += static_cast<long double>(pv) * lg;
            }
        }
        long double cross = 0.0L;
        for (std::size_t cc = 0; cc < c; ++cc) cross += tc[cc] * lc[cc];
        const long double total =
            static_cast<long double>(m - 1) * self - (cross - self);
        out[n] = static_cast<double>(total / static_cast<long double>(m * (m - 1)));
    }
    return out;
}

const std::vector<double>& UncertaintyReport::epistemic_score() const {
    if (distance) return *distance;
    if (epistemic_entropy) return *epistemic_entropy;
    throw ValueError("uncertainty report: no epistemic channel present");
}

void write_report_csv(const UncertaintyReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path);
    out << "index,H_a,H_e,KL_e,extra\n";
    char buf[64];
    auto cell = [&](const std::optional<std::vector<double>>& col, std::size_t i) {
        if (col) {
            std::snprintf(buf, sizeof buf, "%.17g", (*col)[i]);
            out << buf;
        }
    };
    for (std::size_t i = 0; i < report.aleatoric.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", report.aleatoric[i]);
        out << i << "," << buf << ",";
        cell(report.epistemic_entropy, i);
        out << ",";
        cell(report.kl, i);
        out << ",";
        cell(report.distance, i);
        out << "\n";
    }
}

} // namespace uqlab
