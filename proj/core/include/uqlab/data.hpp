#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "uqlab/tensor.hpp"

namespace uqlab {

struct LabeledDataset {
    Tensor features;  // N x D
    std::vector<int> labels;
    std::string split = "train";
    bool standardized = false;
    std::vector<double> feature_mean;   // valid when standardized
    std::vector<double> feature_scale;  // valid when standardized

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.rank() == 2 ? features.shape[1] : 0; }
    std::size_t class_count() const;
    void validate() const;
};

/// Orientation of a 1-D data manifold embedded in the plane.
struct ManifoldMeta {
    std::array<double, 2> on_axis{1.0, 0.0};
    std::array<double, 2> off_axis{0.0, 1.0};
    double line_offset = 0.0;

    void validate() const;
    double on_coord(double x, double y) const { return x * on_axis[0] + y * on_axis[1]; }
    double off_coord(double x, double y) const { return x * off_axis[0] + y * off_axis[1]; }
};

struct OoDSet {
    Tensor features;  // K x D
    std::string source = "hand-placed";
};

/// Two interleaved semicircular arcs, radius 1, the second shifted by
/// (1, 0.5); exactly n/2 points per class.
LabeledDataset make_half_moons(std::size_t n, double noise, std::uint64_t seed);

struct ToyManifoldParams {
    std::size_t clusters_per_class = 3;
    std::size_t points_per_cluster = 100;
    double line_angle = 0.0;   // radians; manifold direction
    double line_offset = 0.0;  // displacement along the off axis
    double cluster_spacing = 1.0;
    double std_on = 0.15;
    double std_off = 0.005;
};

/// Alternating-class Gaussian clusters strung along a line; the off-axis
/// spread is tiny so the data occupies a 1-D sub-manifold of the plane.
std::pair<LabeledDataset, ManifoldMeta> make_toy_manifold(const ToyManifoldParams& params,
                                                          std::uint64_t seed);

struct OodPlacement {
    std::size_t cluster_count = 4;
    std::size_t points_per_cluster = 25;
    double margin = 0.0;  // <= 0 selects default_ood_margin(train)
    double spread = 0.15;
    bool off_manifold = false;  // place along +-off-axis; needs ManifoldMeta
};

/// Hand-placed OoD clusters. In the default mode clusters sit in distinct
/// directions around the data centroid; with off_manifold set each cluster
/// is pushed out along the off-axis so |off coordinate| >= margin.
OoDSet place_ood_clusters(const LabeledDataset& train, const OodPlacement& placement,
                          std::uint64_t seed, const ManifoldMeta* meta = nullptr);

/// 0.75 x the training bounding-box diagonal.
double default_ood_margin(const LabeledDataset& train);

/// Per-feature zero-mean unit-scale transform; throws if applied twice.
void standardize(LabeledDataset& ds);
void destandardize(LabeledDataset& ds);
/// Applies a fitted transform (e.g. train statistics to a test split).
void apply_standardization(LabeledDataset& ds, const std::vector<double>& mean,
                           const std::vector<double>& scale);
Tensor apply_standardization(const Tensor& features, const std::vector<double>& mean,
                             const std::vector<double>& scale);

/// CSV with header `x0,...,xD-1,label`.
void write_dataset_csv(const LabeledDataset& ds, const std::string& path);

/// IDX file reader (big-endian header, magic 0x0000 + type + ndim).
/// Unsigned-byte payloads of rank >= 2 are scaled to [0,1]; rank-1 files
/// (label vectors) are returned as raw integers.
Tensor load_idx(const std::string& path);

/// factor x factor average pooling over [N,H,W]; output is N x (H*W/factor^2).
Tensor downsample_images(const Tensor& images, std::size_t factor);

} // namespace uqlab
