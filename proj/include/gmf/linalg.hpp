#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace gmf {

using Vec = std::vector<double>;

// Dense row-major matrix. Small enough that we do not need BLAS.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

inline Vec matvec(const Mat& m, const Vec& v) {
    assert(v.size() == m.cols);
    Vec out(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double s = 0.0;
        const double* row = &m.a[r * m.cols];
        for (std::size_t c = 0; c < m.cols; ++c) s += row[c] * v[c];
        out[r] = s;
    }
    return out;
}

// m^T * v
inline Vec matvec_t(const Mat& m, const Vec& v) {
    assert(v.size() == m.rows);
    Vec out(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = &m.a[r * m.cols];
        for (std::size_t c = 0; c < m.cols; ++c) out[c] += row[c] * v[r];
    }
    return out;
}

// grad += u * v^T
inline void add_outer(Mat& grad, const Vec& u, const Vec& v) {
    assert(u.size() == grad.rows && v.size() == grad.cols);
    for (std::size_t r = 0; r < grad.rows; ++r) {
        double* row = &grad.a[r * grad.cols];
        for (std::size_t c = 0; c < grad.cols; ++c) row[c] += u[r] * v[c];
    }
}

inline double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void axpy(Vec& y, double alpha, const Vec& x) {
    assert(y.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace gmf
