#include "uqlab/tensor.hpp"

#include <cmath>
#include <sstream>

namespace uqlab {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_numel(shape)) {
        throw ValueError("tensor: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape_str(shape));
    }
}

Tensor::Tensor(Shape s) : shape(std::move(s)), values(shape_numel(shape), 0.0) {}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros(Shape s) { return Tensor(std::move(s)); }

Tensor Tensor::full(Shape s, double v) {
    Tensor t(std::move(s));
    for (double& x : t.values) x = v;
    return t;
}

Tensor Tensor::row(std::vector<double> v) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> v) {
    return Tensor({r, c}, std::move(v));
}

Tensor Tensor::randn(Shape s, Rng& rng, double stddev) {
    Tensor t(std::move(s));
    for (double& x : t.values) x = rng.normal(0.0, stddev);
    return t;
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ValueError("tensor: rows() on non-matrix " + shape_str(shape));
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ValueError("tensor: cols() on non-matrix " + shape_str(shape));
    return shape[1];
}

bool Tensor::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::l2_norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

Tensor matmul_plain(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0]) {
        throw ValueError("matmul: incompatible shapes " + shape_str(a.shape) + " and " +
                         shape_str(b.shape));
    }
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = &a.values[i * k];
        double* crow = &c.values[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = &b.values[p * n];
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

} // namespace uqlab
