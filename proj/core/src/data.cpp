#include "uqlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

namespace uqlab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::size_t LabeledDataset::class_count() const {
    int mx = -1;
    for (int y : labels) mx = std::max(mx, y);
    return static_cast<std::size_t>(mx + 1);
}

void LabeledDataset::validate() const {
    if (features.rank() != 2) throw ValueError("dataset: features must be N x D");
    if (features.shape[0] != labels.size()) {
        throw ValueError("dataset: " + std::to_string(features.shape[0]) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
    }
    if (!features.all_finite()) throw ValueError("dataset: non-finite feature");
    for (int y : labels)
        if (y < 0) throw ValueError("dataset: negative label");
}

void ManifoldMeta::validate() const {
    auto norm = [](const std::array<double, 2>& v) {
        return std::sqrt(v[0] * v[0] + v[1] * v[1]);
    };
    if (std::abs(norm(on_axis) - 1.0) > 1e-9 || std::abs(norm(off_axis) - 1.0) > 1e-9) {
        throw ValueError("manifold meta: axes must be unit vectors");
    }
    if (std::abs(on_axis[0] * off_axis[0] + on_axis[1] * off_axis[1]) > 1e-12) {
        throw ValueError("manifold meta: axes must be orthogonal");
    }
}

LabeledDataset make_half_moons(std::size_t n, double noise, std::uint64_t seed) {
    if (n < 2) throw ValueError("half moons: need at least 2 points");
    if (n % 2 != 0) throw ValueError("half moons: n must be even");
    if (noise < 0.0) throw ValueError("half moons: negative noise");
    const std::size_t per_class = n / 2;
    Rng rng = Rng(seed).split(0x400d5);

    LabeledDataset ds;
    ds.features = Tensor({n, 2});
    ds.labels.resize(n);
    for (std::size_t i = 0; i < per_class; ++i) {
        const double t = per_class == 1 ? 0.0
                                        : kPi * static_cast<double>(i) /
                                              static_cast<double>(per_class - 1);
        ds.features.at(i, 0) = std::cos(t);
        ds.features.at(i, 1) = std::sin(t);
        ds.labels[i] = 0;
        const std::size_t j = per_class + i;
        ds.features.at(j, 0) = 1.0 - std::cos(t);
        ds.features.at(j, 1) = 0.5 - std::sin(t);
        ds.labels[j] = 1;
    }
    if (noise > 0.0) {
        for (double& v : ds.features.values) v += rng.normal(0.0, noise);
    }
    return ds;
}

std::pair<LabeledDataset, ManifoldMeta> make_toy_manifold(const ToyManifoldParams& params,
                                                          std::uint64_t seed) {
    const std::size_t clusters = 2 * params.clusters_per_class;
    if (clusters < 2) throw ValueError("toy manifold: need at least 2 clusters");
    if (params.std_on < 0.0 || params.std_off < 0.0) {
        throw ValueError("toy manifold: negative spread");
    }
    if (params.std_off > params.std_on && params.std_on > 0.0) {
        throw ValueError("toy manifold: off-axis spread exceeds on-axis spread");
    }
    ManifoldMeta meta;
    meta.on_axis = {std::cos(params.line_angle), std::sin(params.line_angle)};
    meta.off_axis = {-std::sin(params.line_angle), std::cos(params.line_angle)};
    meta.line_offset = params.line_offset;
    meta.validate();

    Rng rng = Rng(seed).split(0x70b37);
    const std::size_t n = clusters * params.points_per_cluster;
    LabeledDataset ds;
    ds.features = Tensor({n, 2});
    ds.labels.resize(n);
    std::size_t row = 0;
    for (std::size_t k = 0; k < clusters; ++k) {
        const double center =
            (static_cast<double>(k) - static_cast<double>(clusters - 1) / 2.0) *
            params.cluster_spacing;
        for (std::size_t i = 0; i < params.points_per_cluster; ++i, ++row) {
            const double on = center + rng.normal(0.0, params.std_on);
            const double off = params.line_offset + rng.normal(0.0, params.std_off);
            ds.features.at(row, 0) = on * meta.on_axis[0] + off * meta.off_axis[0];
            ds.features.at(row, 1) = on * meta.on_axis[1] + off * meta.off_axis[1];
            ds.labels[row] = static_cast<int>(k % 2);
        }
    }
    return {std::move(ds), meta};
}

namespace {

struct BoundingBox {
    double xmin, xmax, ymin, ymax;
    double diag() const { return std::hypot(xmax - xmin, ymax - ymin); }
};

BoundingBox bbox_of(const Tensor& features) {
    BoundingBox b{std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
    const std::size_t n = features.shape[0];
    for (std::size_t i = 0; i < n; ++i) {
        b.xmin = std::min(b.xmin, features.at(i, 0));
        b.xmax = std::max(b.xmax, features.at(i, 0));
        b.ymin = std::min(b.ymin, features.at(i, 1));
        b.ymax = std::max(b.ymax, features.at(i, 1));
    }
    return b;
}

double nearest_train_distance(const Tensor& train, double px, double py) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = train.shape[0];
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = train.at(i, 0) - px;
        const double dy = train.at(i, 1) - py;
        best = std::min(best, dx * dx + dy * dy);
    }
    return std::sqrt(best);
}

} // namespace

double default_ood_margin(const LabeledDataset& train) {
    return 3.0 * bbox_of(train.features).diag() * 0.25;
}

OoDSet place_ood_clusters(const LabeledDataset& train, const OodPlacement& placement,
                          std::uint64_t seed, const ManifoldMeta* meta) {
    train.validate();
    if (train.dim() != 2) throw ValueError("ood placement: only 2-D datasets supported");
    if (placement.cluster_count == 0) throw ValueError("ood placement: zero clusters");
    const double margin =
        placement.margin > 0.0 ? placement.margin : default_ood_margin(train);
    if (margin <= 0.0) throw ValueError("ood placement: margin must be > 0");
    if (placement.off_manifold && meta == nullptr) {
        throw ValueError("ood placement: off-manifold mode needs manifold metadata");
    }

    Rng rng = Rng(seed).split(0x00d5eed);
    const BoundingBox box = bbox_of(train.features);
    const double limit = 10.0 * std::max(box.diag(), 1e-9);
    const std::size_t k = placement.cluster_count;
    const std::size_t per = placement.points_per_cluster;

    OoDSet out;
    out.features = Tensor({k * per, 2});
    out.source = "hand-placed";

    // data centroid
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        cx += train.features.at(i, 0);
        cy += train.features.at(i, 1);
    }
    cx /= static_cast<double>(train.size());
    cy /= static_cast<double>(train.size());

    double data_radius = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        data_radius = std::max(data_radius, std::hypot(train.features.at(i, 0) - cx,
                                                       train.features.at(i, 1) - cy));
    }

    std::size_t row = 0;
    for (std::size_t c = 0; c < k; ++c) {
        double ox = 0.0, oy = 0.0;
        if (placement.off_manifold) {
            // spread cluster anchors along the line, alternating sides
            const double span = box.diag() > 0 ? box.diag() : 1.0;
            const double on_pos =
                meta->on_coord(cx, cy) +
                (k == 1 ? 0.0
                        : (static_cast<double>(c) / static_cast<double>(k - 1) - 0.5) * span);
            const double side = (c % 2 == 0) ? 1.0 : -1.0;
            const double off_pos =
                meta->line_offset + side * (margin + 4.0 * placement.spread);
            ox = on_pos * meta->on_axis[0] + off_pos * meta->off_axis[0];
            oy = on_pos * meta->on_axis[1] + off_pos * meta->off_axis[1];
        } else {
            const double theta = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(k);
            double r = data_radius + margin + 4.0 * placement.spread;
            if (r > limit) {
                throw ValueError("ood placement: cannot satisfy margin within 10x bounds");
            }
            while (nearest_train_distance(train.features, cx + r * std::cos(theta),
                                          cy + r * std::sin(theta)) <
                   margin + 4.0 * placement.spread) {
                r += 0.5 * margin;
                if (r > limit) {
                    throw ValueError("ood placement: cannot satisfy margin within 10x bounds");
                }
            }
            ox = cx + r * std::cos(theta);
            oy = cy + r * std::sin(theta);
        }
        for (std::size_t i = 0; i < per; ++i, ++row) {
            double px = 0.0, py = 0.0;
            for (int attempt = 0;; ++attempt) {
                px = ox + rng.normal(0.0, placement.spread);
                py = oy + rng.normal(0.0, placement.spread);
                const bool margin_ok = nearest_train_distance(train.features, px, py) >= margin;
                const bool off_ok =
                    !placement.off_manifold ||
                    std::abs(meta->off_coord(px, py) - meta->line_offset) >= margin;
                if (margin_ok && off_ok) break;
                if (attempt > 200) {
                    throw ValueError("ood placement: cannot satisfy margin near cluster " +
                                     std::to_string(c));
                }
            }
            out.features.at(row, 0) = px;
            out.features.at(row, 1) = py;
        }
    }
    return out;
}

void standardize(LabeledDataset& ds) {
    ds.validate();
    if (ds.standardized) throw ValueError("standardize: already applied");
    const std::size_t n = ds.size(), d = ds.dim();
    ds.feature_mean.assign(d, 0.0);
    ds.feature_scale.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += ds.features.at(i, j);
        m /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dlt = ds.features.at(i, j) - m;
            var += dlt * dlt;
        }
        var /= static_cast<double>(n);
        ds.feature_mean[j] = m;
        ds.feature_scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            ds.features.at(i, j) = (ds.features.at(i, j) - m) / ds.feature_scale[j];
        }
    }
    ds.standardized = true;
}

void destandardize(LabeledDataset& ds) {
    if (!ds.standardized) throw ValueError("destandardize: dataset is not standardized");
    const std::size_t n = ds.size(), d = ds.dim();
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            ds.features.at(i, j) =
                ds.features.at(i, j) * ds.feature_scale[j] + ds.feature_mean[j];
        }
    }
    ds.standardized = false;
    ds.feature_mean.clear();
    ds.feature_scale.clear();
}

Tensor apply_standardization(const Tensor& features, const std::vector<double>& mean,
                             const std::vector<double>& scale) {
    if (features.rank() != 2 || features.shape[1] != mean.size() || mean.size() != scale.size()) {
        throw ValueError("apply standardization: dimension mismatch");
    }
    Tensor out = features;
    const std::size_t n = out.shape[0], d = out.shape[1];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            out.at(i, j) = (out.at(i, j) - mean[j]) / scale[j];
    return out;
}

void apply_standardization(LabeledDataset& ds, const std::vector<double>& mean,
                           const std::vector<double>& scale) {
    if (ds.standardized) throw ValueError("standardize: already applied");
    ds.features = apply_standardization(ds.features, mean, scale);
    ds.feature_mean = mean;
    ds.feature_scale = scale;
    ds.standardized = true;
}

void write_dataset_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path);
    const std::size_t d = ds.dim();
    for (std::size_t j = 0; j < d; ++j) out << "x" << j << ",";
    out << "label\n";
    char buf[64];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.features.at(i, j));
            out << buf << ",";
        }
        out << ds.labels[i] << "\n";
    }
}

} // namespace uqlab
