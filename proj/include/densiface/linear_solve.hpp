#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace densiface {

/// Square matrix in compressed sparse row form.
struct SparseMatrix {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::uint32_t> cols;
    std::vector<double> vals;

    std::size_t nnz() const { return vals.size(); }
    void multiply(std::span<const double> x, std::span<double> y) const;
};

/// Row-major square matrix.
struct DenseMatrix {
    std::size_t n = 0;
    std::vector<double> a;

    explicit DenseMatrix(std::size_t size = 0) : n(size), a(size * size, 0.0) {}
    double& operator()(std::size_t r, std::size_t c) { return a[r * n + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * n + c]; }

    static DenseMatrix from(const SparseMatrix& m);
};

struct CgResult {
    std::vector<double> x;
    std::size_t iterations = 0;
    double relative_residual = 0.0; // ||b - A x|| / ||b||, recomputed from x
    bool converged = false;
};

/// Unpreconditioned conjugate gradient from x0 = 0 for symmetric positive definite A.
/// Stops when the recursive residual drops below rel_tol * ||b|| or after max_iters.
CgResult conjugate_gradient(const SparseMatrix& a, std::span<const double> b, double rel_tol,
                            std::size_t max_iters);

/// Gaussian elimination with partial pivoting. Throws SingularityError when a pivot
/// falls below machine epsilon times the largest entry.
std::vector<double> solve_dense(DenseMatrix a, std::vector<double> b);

double norm2(std::span<const double> v);

} // namespace densiface
