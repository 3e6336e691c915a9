#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedbdpl/common.hpp"

namespace fedbdpl {

// Dense row-major matrix of doubles. Small sizes (prompt length x vocabulary),
// so no BLAS; value semantics throughout.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<double> flat() { return {data_.data(), data_.size()}; }
    std::span<const double> flat() const { return {data_.data(), data_.size()}; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Matrix& operator-=(const Matrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

    void require_same_shape(const Matrix& o) const {
        if (!same_shape(o)) throw DimensionError("matrix shape mismatch");
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double frobenius_sq(const Matrix& m) {
    double s = 0.0;
    for (double v : m.flat()) s += v * v;
    return s;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    a.require_same_shape(b);
    double d = 0.0;
    for (std::size_t i = 0; i < a.flat().size(); ++i) {
        double e = a.flat()[i] - b.flat()[i];
        if (e < 0) e = -e;
        if (e > d) d = e;
    }
    return d;
}

}  // namespace fedbdpl
