#pragma once

// Compressed-sparse-row matrices plus the two linear solvers used by the
// toolkit: a Jacobi-preconditioned conjugate gradient iteration (production
// path) and a dense partial-pivot elimination (oracle path for tests and
// tiny systems).  The CG handles the pure-Neumann nullspace of cell
// problems by projecting the right-hand side onto the range and pinning a
// mean-zero representative.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thinlayer {

/// Thrown when an iterative solve fails to reach its tolerance.
class SolverError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

class SparseMatrix {
  public:
    SparseMatrix() = default;

    /// Builds CSR storage from an unordered triplet list; duplicate (row, col)
    /// entries are summed.  Out-of-range indices are rejected.
    static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
        if (rows < 0 || cols < 0)
            throw std::invalid_argument("SparseMatrix: negative dimensions");
        for (const Triplet& t : triplets) {
            if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
                throw std::invalid_argument("SparseMatrix: triplet index out of range");
        }
        std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });

        SparseMatrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.row_offsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
        m.col_indices_.reserve(triplets.size());
        m.values_.reserve(triplets.size());
        for (std::size_t k = 0; k < triplets.size();) {
            const int r = triplets[k].row;
            const int c = triplets[k].col;
            double sum = 0.0;
            while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c)
                sum += triplets[k++].value;
            m.col_indices_.push_back(c);
            m.values_.push_back(sum);
            m.row_offsets_[static_cast<std::size_t>(r) + 1] = static_cast<int>(m.values_.size());
        }
        for (std::size_t r = 1; r < m.row_offsets_.size(); ++r)
            m.row_offsets_[r] = std::max(m.row_offsets_[r], m.row_offsets_[r - 1]);
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t nonzeros() const { return values_.size(); }

    /// y = A x
    void multiply(const std::vector<double>& x, std::vector<double>& y) const {
        if (static_cast<int>(x.size()) != cols_)
            throw std::invalid_argument("SparseMatrix::multiply: size mismatch");
        y.assign(static_cast<std::size_t>(rows_), 0.0);
        for (int r = 0; r < rows_; ++r) {
            double acc = 0.0;
            for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
                acc += values_[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(k)])];
            y[static_cast<std::size_t>(r)] = acc;
        }
    }

    std::vector<double> multiply(const std::vector<double>& x) const {
        std::vector<double> y;
        multiply(x, y);
        return y;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(static_cast<std::size_t>(std::min(rows_, cols_)), 0.0);
        for (int r = 0; r < static_cast<int>(d.size()); ++r) {
            for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
                if (col_indices_[static_cast<std::size_t>(k)] == r)
                    d[static_cast<std::size_t>(r)] = values_[static_cast<std::size_t>(k)];
            }
        }
        return d;
    }

    double coeff(int r, int c) const {
        for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
            if (col_indices_[static_cast<std::size_t>(k)] == c)
                return values_[static_cast<std::size_t>(k)];
        return 0.0;
    }

    std::vector<double> to_dense() const {
        std::vector<double> a(static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_), 0.0);
        for (int r = 0; r < rows_; ++r)
            for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
                a[static_cast<std::size_t>(r) * cols_ + col_indices_[static_cast<std::size_t>(k)]] += values_[static_cast<std::size_t>(k)];
        return a;
    }

    /// A + alpha * B, matching sparsity patterns merged.
    static SparseMatrix add_scaled(const SparseMatrix& a, double alpha, const SparseMatrix& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
            throw std::invalid_argument("SparseMatrix::add_scaled: shape mismatch");
        std::vector<Triplet> t;
        t.reserve(a.nonzeros() + b.nonzeros());
        for (int r = 0; r < a.rows_; ++r)
            for (int k = a.row_offsets_[r]; k < a.row_offsets_[r + 1]; ++k)
                t.push_back({r, a.col_indices_[static_cast<std::size_t>(k)], a.values_[static_cast<std::size_t>(k)]});
        for (int r = 0; r < b.rows_; ++r)
            for (int k = b.row_offsets_[r]; k < b.row_offsets_[r + 1]; ++k)
                t.push_back({r, b.col_indices_[static_cast<std::size_t>(k)], alpha * b.values_[static_cast<std::size_t>(k)]});
        return from_triplets(a.rows_, a.cols_, std::move(t));
    }

    const std::vector<int>& row_offsets() const { return row_offsets_; }
    const std::vector<int>& col_indices() const { return col_indices_; }
    const std::vector<double>& values() const { return values_; }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<int> row_offsets_{0};
    std::vector<int> col_indices_;
    std::vector<double> values_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] += alpha * x[i];
}

/// Kernel description for singular (pure-Neumann) systems.  `Constants`
/// pins the plain mean of the solution to zero; `WeightedConstants` pins the
/// weighted mean (the discrete zero-mean constraint with quadrature weights).
struct Nullspace {
    enum class Kind { None, Constants, WeightedConstants };

    Kind kind = Kind::None;
    std::vector<double> weights;  // used only for WeightedConstants

    static Nullspace none() { return {}; }
    static Nullspace constants() { return {Kind::Constants, {}}; }
    static Nullspace weighted_constants(std::vector<double> w) {
        if (w.empty())
            throw std::invalid_argument("Nullspace: empty weight vector");
        return {Kind::WeightedConstants, std::move(w)};
    }

    bool active() const { return kind != Kind::None; }

    /// Removes the constant component of a residual-type vector (projection
    /// onto the range of a symmetric operator whose kernel is the constants).
    void project_range(std::vector<double>& v) const {
        if (!active() || v.empty())
            return;
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        for (double& x : v)
            x -= mean;
    }

    /// Picks the zero-(weighted-)mean representative of a solution vector.
    void project_representative(std::vector<double>& v) const {
        if (!active() || v.empty())
            return;
        if (kind == Kind::Constants) {
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            for (double& x : v)
                x -= mean;
        } else {
            if (weights.size() != v.size())
                throw std::invalid_argument("Nullspace: weight vector size mismatch");
            const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
            if (wsum == 0.0)
                throw std::invalid_argument("Nullspace: weights sum to zero");
            const double mean = dot(weights, v) / wsum;
            for (double& x : v)
                x -= mean;
        }
    }
};

struct SolveReport {
    bool converged = false;
    int iterations = 0;
    double relative_residual = 0.0;       // final |r| / |b|
    double rhs_consistency_defect = 0.0;  // |mean component removed from b|
    std::vector<double> residual_history;
};

/// Jacobi-preconditioned conjugate gradients for symmetric positive
/// (semi-)definite systems.  The iterate, residual, and search direction are
/// re-projected every 50 iterations when a nullspace is declared, so the
/// singular direction cannot drift back in through roundoff.
inline std::pair<std::vector<double>, SolveReport> solve_cg(const SparseMatrix& a,
                                                            std::vector<double> b,
                                                            double tol,
                                                            int max_iterations,
                                                            const Nullspace& nullspace = Nullspace::none(),
                                                            const std::vector<double>* x0 = nullptr) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("solve_cg: matrix must be square");
    if (static_cast<int>(b.size()) != a.rows())
        throw std::invalid_argument("solve_cg: rhs size mismatch");
    if (tol <= 0.0 || max_iterations <= 0)
        throw std::invalid_argument("solve_cg: invalid tolerance or iteration budget");

    const std::size_t n = b.size();
    SolveReport report;

    if (nullspace.active()) {
        const double mean = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
        report.rhs_consistency_defect = std::abs(mean) * std::sqrt(static_cast<double>(n));
        nullspace.project_range(b);
    }

    const double bnorm = norm2(b);
    std::vector<double> x(n, 0.0);
    if (bnorm == 0.0) {
        report.converged = true;
        report.residual_history.push_back(0.0);
        return {std::move(x), report};
    }
    if (x0 != nullptr) {
        if (x0->size() != n)
            throw std::invalid_argument("solve_cg: initial guess size mismatch");
        x = *x0;
        if (nullspace.active())
            nullspace.project_representative(x);
    }

    std::vector<double> inv_diag(n, 1.0);
    {
        const std::vector<double> d = a.diagonal();
        for (std::size_t i = 0; i < n; ++i)
            inv_diag[i] = d[i] != 0.0 ? 1.0 / d[i] : 1.0;
    }

    std::vector<double> r(n), z(n), p(n), ap(n);
    a.multiply(x, r);
    for (std::size_t i = 0; i < n; ++i)
        r[i] = b[i] - r[i];
    if (nullspace.active())
        nullspace.project_range(r);

    for (std::size_t i = 0; i < n; ++i)
        z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    double rnorm = norm2(r);
    report.residual_history.push_back(rnorm / bnorm);

    int it = 0;
    while (rnorm > tol * bnorm && it < max_iterations) {
        a.multiply(p, ap);
        const double pap = dot(p, ap);
        if (pap <= 0.0)
            break;  // lost positive definiteness (semidefinite direction)
        const double alpha = rz / pap;
        axpy(alpha, p, x);
        axpy(-alpha, ap, r);
        ++it;
        if (nullspace.active() && it % 50 == 0) {
            nullspace.project_range(r);
            nullspace.project_representative(x);
        }
        for (std::size_t i = 0; i < n; ++i)
            z[i] = inv_diag[i] * r[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] + beta * p[i];
        rnorm = norm2(r);
        report.residual_history.push_back(rnorm / bnorm);
    }

    if (nullspace.active())
        nullspace.project_representative(x);
    report.iterations = it;
    report.relative_residual = rnorm / bnorm;
    report.converged = rnorm <= tol * bnorm;
    return {std::move(x), report};
}

/// Dense Gaussian elimination with partial pivoting on a row-major matrix.
/// Intended as an independent oracle for small systems; throws on numerical
/// singularity.  With `mean_zero` the system is augmented with a Lagrange
/// multiplier enforcing a zero-mean solution of a consistent singular system.
inline std::vector<double> solve_dense_oracle(std::vector<double> a, std::vector<double> b, bool mean_zero = false) {
    const std::size_t n = b.size();
    if (a.size() != n * n)
        throw std::invalid_argument("solve_dense_oracle: shape mismatch");

    std::size_t m = n;
    if (mean_zero) {
        m = n + 1;
        std::vector<double> aug(m * m, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c)
                aug[r * m + c] = a[r * n + c];
            aug[r * m + n] = 1.0;
            aug[n * m + r] = 1.0;
        }
        a = std::move(aug);
        b.push_back(0.0);
    }

    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        double best = std::abs(a[perm[col] * m + col]);
        for (std::size_t r = col + 1; r < m; ++r) {
            const double v = std::abs(a[perm[r] * m + col]);
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best < 1e-300)
            throw std::runtime_error("solve_dense_oracle: singular matrix");
        std::swap(perm[col], perm[pivot]);
        const double piv = a[perm[col] * m + col];
        for (std::size_t r = col + 1; r < m; ++r) {
            const double factor = a[perm[r] * m + col] / piv;
            if (factor == 0.0)
                continue;
            a[perm[r] * m + col] = 0.0;
            for (std::size_t c = col + 1; c < m; ++c)
                a[perm[r] * m + c] -= factor * a[perm[col] * m + c];
            b[perm[r]] -= factor * b[perm[col]];
        }
    }

    std::vector<double> x(m, 0.0);
    for (std::size_t ri = m; ri-- > 0;) {
        double acc = b[perm[ri]];
        for (std::size_t c = ri + 1; c < m; ++c)
            acc -= a[perm[ri] * m + c] * x[c];
        x[ri] = acc / a[perm[ri] * m + ri];
    }
    x.resize(n);
    return x;
}

}  // namespace thinlayer
