#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ahr/error.hpp"

namespace ahr {

// Dense row-major matrix of doubles. Products are delegated to Eigen
// (single-threaded, so results are deterministic); everything else is plain
// loops over the flat buffer.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major, rows*cols

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

namespace detail {
using EMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CEMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline CEMap map(const Matrix& m) { return CEMap(m.data.data(), long(m.rows), long(m.cols)); }
inline EMap map(Matrix& m) { return EMap(m.data.data(), long(m.rows), long(m.cols)); }
} // namespace detail

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols == b.rows, "matmul: inner dimensions differ (", a.cols, " vs ", b.rows, ")");
    Matrix c(a.rows, b.cols);
    detail::map(c).noalias() = detail::map(a) * detail::map(b);
    return c;
}

// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require(a.cols == b.cols, "matmul_nt: inner dimensions differ (", a.cols, " vs ", b.cols, ")");
    Matrix c(a.rows, b.rows);
    detail::map(c).noalias() = detail::map(a) * detail::map(b).transpose();
    return c;
}

// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require(a.rows == b.rows, "matmul_tn: inner dimensions differ (", a.rows, " vs ", b.rows, ")");
    Matrix c(a.cols, b.cols);
    detail::map(c).noalias() = detail::map(a).transpose() * detail::map(b);
    return c;
}

inline double squared_distance(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double squared_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

} // namespace ahr
