#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "uqlab/common.hpp"

namespace uqlab {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of 64-bit floats. Gradients and tape bookkeeping
/// live on the Tape; this is the plain value type.
struct Tensor {
    Shape shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> v);
    explicit Tensor(Shape s);  // zero-filled

    static Tensor scalar(double v);
    static Tensor zeros(Shape s);
    static Tensor full(Shape s, double v);
    static Tensor row(std::vector<double> v);                  // shape {n}
    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v);
    static Tensor randn(Shape s, Rng& rng, double stddev = 1.0);

    std::size_t numel() const { return values.size(); }
    std::size_t rank() const { return shape.size(); }
    bool is_scalar() const { return numel() == 1; }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t i) { return values[i]; }
    double at(std::size_t i) const { return values[i]; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    bool all_finite() const;
    double l2_norm() const;
};

/// C = A x B for 2-D tensors, no tape involved.
Tensor matmul_plain(const Tensor& a, const Tensor& b);

} // namespace uqlab
