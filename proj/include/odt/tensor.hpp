#pragma once

#include "odt/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace odt {

/// Dense column-major matrix. Used for W, O, D, T and every Gram product.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tensor modes, numbered as in the usual n-mode product notation.
enum class Mode : int { first = 1, second = 2, third = 3 };

[[nodiscard]] inline std::size_t mode_index(Mode mode) {
    const int m = static_cast<int>(mode);
    if (m < 1 || m > 3)
        throw input_error("mode must be 1, 2 or 3");
    return static_cast<std::size_t>(m - 1);
}

/// Dense third-order tensor.
///
/// Storage is mode-1 fastest: element (x, y, z) lives at
/// x + d1 * (y + d2 * z). Every unfolding and serializer in this library
/// relies on that layout.
class Tensor3 {
public:
    using Dims = std::array<std::size_t, 3>;

    Tensor3() = default;

    explicit Tensor3(Dims dims, double fill = 0.0)
        : dims_(dims), values_(dims[0] * dims[1] * dims[2], fill) {}

    Tensor3(std::size_t d1, std::size_t d2, std::size_t d3, double fill = 0.0)
        : Tensor3(Dims{d1, d2, d3}, fill) {}

    Tensor3(Dims dims, std::vector<double> values)
        : dims_(dims), values_(std::move(values)) {
        if (values_.size() != dims[0] * dims[1] * dims[2])
            throw input_error("tensor value count does not match dims");
    }

    [[nodiscard]] const Dims& dims() const { return dims_; }
    [[nodiscard]] std::size_t dim(Mode mode) const { return dims_[mode_index(mode)]; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] bool empty() const { return values_.empty(); }

    [[nodiscard]] std::size_t offset(std::size_t x, std::size_t y, std::size_t z) const {
        return x + dims_[0] * (y + dims_[1] * z);
    }

    double& operator()(std::size_t x, std::size_t y, std::size_t z) {
        return values_[offset(x, y, z)];
    }
    double operator()(std::size_t x, std::size_t y, std::size_t z) const {
        return values_[offset(x, y, z)];
    }

    /// Bounds-checked access.
    [[nodiscard]] double at(std::size_t x, std::size_t y, std::size_t z) const {
        if (x >= dims_[0] || y >= dims_[1] || z >= dims_[2])
            throw std::out_of_range("tensor index out of range");
        return values_[offset(x, y, z)];
    }

    [[nodiscard]] std::span<double> values() { return values_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] double* data() { return values_.data(); }
    [[nodiscard]] const double* data() const { return values_.data(); }

    /// The storage viewed as a (rows x cols) column-major matrix; rows*cols must equal size().
    [[nodiscard]] Eigen::Map<const Matrix> as_matrix(std::size_t rows, std::size_t cols) const {
        return {values_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
    }
    [[nodiscard]] Eigen::Map<Matrix> as_matrix(std::size_t rows, std::size_t cols) {
        return {values_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
    }

    Tensor3& operator+=(const Tensor3& other) {
        require_same_dims(other, "+=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
        return *this;
    }
    Tensor3& operator-=(const Tensor3& other) {
        require_same_dims(other, "-=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
        return *this;
    }
    Tensor3& operator*=(double s) {
        for (double& v : values_) v *= s;
        return *this;
    }

    friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
    friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
    friend Tensor3 operator*(Tensor3 a, double s) { return a *= s; }
    friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

    void require_same_dims(const Tensor3& other, const char* what) const {
        if (dims_ != other.dims_)
            throw input_error(std::string("tensor shape mismatch in ") + what);
    }

private:
    Dims dims_{0, 0, 0};
    std::vector<double> values_;
};

/// Mode-n unfolding.
///
/// Rows are indexed by the chosen mode; the column index enumerates the
/// remaining two modes with the lower-numbered one fastest:
///   mode 1: (x, y + d2*z)   mode 2: (y, x + d1*z)   mode 3: (z, x + d1*y)
[[nodiscard]] inline Matrix matricize(const Tensor3& t, Mode mode) {
    const auto [d1, d2, d3] = t.dims();
    switch (mode_index(mode)) {
    case 0:
        return t.as_matrix(d1, d2 * d3);
    case 1: {
        Matrix out(d2, d1 * d3);
        for (std::size_t z = 0; z < d3; ++z)
            out.middleCols(z * d1, d1) = t.as_matrix(d1, d2 * d3).middleCols(z * d2, d2).transpose();
        return out;
    }
    default:
        return t.as_matrix(d1 * d2, d3).transpose();
    }
}

/// Inverse of matricize for a tensor of the given dims.
[[nodiscard]] inline Tensor3 fold(const Matrix& m, Mode mode, const Tensor3::Dims& dims) {
    const auto [d1, d2, d3] = dims;
    const std::size_t k = mode_index(mode);
    const std::size_t rows = dims[k];
    const std::size_t cols = d1 * d2 * d3 / (rows == 0 ? 1 : rows);
    if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols)
        throw input_error("fold: matrix shape does not match target dims");
    Tensor3 out(dims);
    switch (k) {
    case 0:
        out.as_matrix(d1, d2 * d3) = m;
        break;
    case 1:
        for (std::size_t z = 0; z < d3; ++z)
            out.as_matrix(d1, d2 * d3).middleCols(z * d2, d2) = m.middleCols(z * d1, d1).transpose();
        break;
    default:
        out.as_matrix(d1 * d2, d3) = m.transpose();
        break;
    }
    return out;
}

/// n-mode product t x_n m: contracts mode n of t against the columns of m.
[[nodiscard]] inline Tensor3 mode_product(const Tensor3& t, const Matrix& m, Mode mode) {
    const std::size_t k = mode_index(mode);
    const auto [d1, d2, d3] = t.dims();
    if (static_cast<std::size_t>(m.cols()) != t.dims()[k])
        throw input_error("mode_product: matrix columns (" + std::to_string(m.cols()) +
                                    ") do not match tensor mode " + std::to_string(k + 1) +
                                    " size (" + std::to_string(t.dims()[k]) + ")");
    Tensor3::Dims out_dims = t.dims();
    out_dims[k] = static_cast<std::size_t>(m.rows());
    Tensor3 out(out_dims);
    const std::size_t r = out_dims[k];
    switch (k) {
    case 0:
        out.as_matrix(r, d2 * d3).noalias() = m * t.as_matrix(d1, d2 * d3);
        break;
    case 1:
        for (std::size_t z = 0; z < d3; ++z) {
            Eigen::Map<const Matrix> slice(t.data() + z * d1 * d2, static_cast<Eigen::Index>(d1),
                                           static_cast<Eigen::Index>(d2));
            Eigen::Map<Matrix> dst(out.data() + z * d1 * r, static_cast<Eigen::Index>(d1),
                                   static_cast<Eigen::Index>(r));
            dst.noalias() = slice * m.transpose();
        }
        break;
    default:
        out.as_matrix(d1 * d2, r).noalias() = t.as_matrix(d1 * d2, d3) * m.transpose();
        break;
    }
    return out;
}

/// t x_1 a x_2 b x_3 c.
[[nodiscard]] inline Tensor3 multi_mode_product(const Tensor3& t, const Matrix& a, const Matrix& b,
                                                const Matrix& c) {
    return mode_product(mode_product(mode_product(t, a, Mode::first), b, Mode::second), c,
                        Mode::third);
}

[[nodiscard]] inline double frobenius_norm_squared(const Tensor3& t) {
    double s = 0.0;
    for (double v : t.values()) s += v * v;
    return s;
}

[[nodiscard]] inline double frobenius_norm(const Tensor3& t) {
    return std::sqrt(frobenius_norm_squared(t));
}

[[nodiscard]] inline double l1_norm(const Tensor3& t) {
    double s = 0.0;
    for (double v : t.values()) s += std::abs(v);
    return s;
}

[[nodiscard]] inline double l1_norm(const Matrix& m) { return m.cwiseAbs().sum(); }

[[nodiscard]] inline Tensor3 hadamard(const Tensor3& a, const Tensor3& b) {
    a.require_same_dims(b, "hadamard");
    Tensor3 out(a.dims());
    auto o = out.values();
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
    return out;
}

[[nodiscard]] inline bool all_finite(const Tensor3& t) {
    for (double v : t.values())
        if (!std::isfinite(v)) return false;
    return true;
}

/// Largest eigenvalue of a symmetric positive-semidefinite matrix.
[[nodiscard]] inline double largest_eigenvalue(const Matrix& sym) {
    if (sym.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

}  // namespace odt
