// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace moctk {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

    std::span<double> row(std::size_t i) { return std::span<double>(values).subspan(i * cols, cols); }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values).subspan(i * cols, cols);
    }

    bool operator==(const Matrix&) const = default;
};

// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    assert(a.cols == b.rows);
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* out = &c.values[i * c.cols];
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double s = a(i, k);
            const double* brow = &b.values[k * b.cols];
            for (std::size_t j = 0; j < b.cols; ++j) out[j] += s * brow[j];
        }
    }
    return c;
}

// a * b^T
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    assert(a.cols == b.cols);
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = &a.values[i * a.cols];
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = &b.values[j * b.cols];
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            c(i, j) = acc;
        }
    }
    return c;
}

// a^T * b
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
    assert(a.rows == b.rows);
    Matrix c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* brow = &b.values[k * b.cols];
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double s = a(k, i);
            double* out = &c.values[i * c.cols];
            for (std::size_t j = 0; j < b.cols; ++j) out[j] += s * brow[j];
        }
    }
    return c;
}

inline void add_inplace(Matrix& a, const Matrix& b) {
    assert(a.values.size() == b.values.size());
    for (std::size_t k = 0; k < a.values.size(); ++k) a.values[k] += b.values[k];
}

inline void add_row_inplace(Matrix& a, std::span<const double> bias) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* r = &a.values[i * a.cols];
        for (std::size_t j = 0; j < a.cols; ++j) r[j] += bias[j];
    }
}

}  // namespace moctk
