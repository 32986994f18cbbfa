#include "densiface/linear_solve.hpp"

#include "densiface/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace densiface {

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += vals[k] * x[cols[k]];
        y[r] = s;
    }
}

DenseMatrix DenseMatrix::from(const SparseMatrix& m) {
    DenseMatrix d(m.n);
    for (std::size_t r = 0; r < m.n; ++r)
        for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) d(r, m.cols[k]) += m.vals[k];
    return d;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

CgResult conjugate_gradient(const SparseMatrix& a, std::span<const double> b, double rel_tol,
                            std::size_t max_iters) {
    const std::size_t n = a.n;
    if (b.size() != n) throw UsageError("conjugate_gradient: right-hand side has wrong length");
    CgResult res;
    res.x.assign(n, 0.0);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    std::vector<double> r(b.begin(), b.end());
    std::vector<double> p = r;
    std::vector<double> ap(n);
    double rs = dot(r, r);
    const double target = rel_tol * bnorm;
    while (std::sqrt(rs) > target && res.iterations < max_iters) {
        a.multiply(p, ap);
        const double curvature = dot(p, ap);
        if (!(curvature > 0.0)) break; // matrix not positive definite along p
        const double alpha = rs / curvature;
        for (std::size_t i = 0; i < n; ++i) {
            res.x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        const double rs_next = dot(r, r);
        const double beta = rs_next / rs;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        rs = rs_next;
        ++res.iterations;
    }
    a.multiply(res.x, ap);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (b[i] - ap[i]) * (b[i] - ap[i]);
    res.relative_residual = std::sqrt(s) / bnorm;
    res.converged = std::sqrt(rs) <= target;
    return res;
}

std::vector<double> solve_dense(DenseMatrix a, std::vector<double> b) {
    const std::size_t n = a.n;
    if (b.size() != n) throw UsageError("solve_dense: right-hand side has wrong length");
    double scale = 0.0;
    for (double v : a.a) scale = std::max(scale, std::abs(v));
    const double tiny = std::numeric_limits<double>::epsilon() * scale;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (!(std::abs(a(piv, col)) > tiny))
            throw SingularityError("solve_dense: matrix is singular to working precision at column " +
                                   std::to_string(col));
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
            std::swap(b[col], b[piv]);
        }
        const double inv = 1.0 / a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) * inv;
            if (f == 0.0) continue;
            a(r, col) = 0.0;
            for (std::size_t c = col + 1; c < n; ++c) a(r, c) -= f * a(col, c);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a(i, c) * x[c];
        x[i] = s / a(i, i);
    }
    return x;
}

} // namespace densiface
