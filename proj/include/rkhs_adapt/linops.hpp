#pragma once

// Small dense linear algebra used by the estimator: Lyapunov solves, condition
// numbers, SPD solves and symmetric/generalized eigenvalue bounds. All sizes here
// are small (plant order <= 5, basis count <= a few hundred).

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>

#include "rkhs_adapt/errors.hpp"

namespace rkhs_adapt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linops {

inline void require_square_finite(const Matrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw Error(Errc::invalid_argument, std::string(what) + " must be a non-empty square matrix");
    if (!m.allFinite()) throw Error(Errc::non_finite, std::string(what) + " has non-finite entries");
}

[[nodiscard]] inline double symmetry_defect(const Matrix& m) { return (m - m.transpose()).norm(); }

inline void require_symmetric(const Matrix& m, const char* what, double rel_tol = 1e-12) {
    if (symmetry_defect(m) > rel_tol * m.norm())
        throw Error(Errc::not_symmetric, std::string(what) + " is not symmetric");
}

[[nodiscard]] inline Eigen::VectorXcd eigenvalues(const Matrix& a) {
    require_square_finite(a, "matrix");
    return Eigen::EigenSolver<Matrix>(a, false).eigenvalues();
}

[[nodiscard]] inline double spectral_abscissa(const Matrix& a) { return eigenvalues(a).real().maxCoeff(); }

[[nodiscard]] inline double spectral_radius(const Matrix& a) { return eigenvalues(a).cwiseAbs().maxCoeff(); }

/// True when every eigenvalue has real part below -tol.
[[nodiscard]] inline bool is_hurwitz(const Matrix& a, double tol = 1e-12) { return spectral_abscissa(a) < -tol; }

[[nodiscard]] inline Vector symmetric_eigenvalues(const Matrix& m) {
    require_square_finite(m, "matrix");
    return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues();
}

/// Solves A^T P + P A = -Q for symmetric P.
///
/// The equation is vectorized through the Kronecker identity
/// vec(A^T P + P A) = (I (x) A^T + A^T (x) I) vec(P) and solved densely, which is
/// adequate for the plant orders used here (d^2 unknowns). A few rounds of
/// iterative refinement recover the accuracy lost to badly scaled plants.
[[nodiscard]] inline Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
    require_square_finite(a, "A");
    require_square_finite(q, "Q");
    if (a.rows() != q.rows()) throw Error(Errc::invalid_argument, "A and Q dimensions differ");
    require_symmetric(q, "Q");
    if (!is_hurwitz(a)) throw Error(Errc::not_hurwitz, "A has an eigenvalue with real part >= -1e-12");

    const Eigen::Index d = a.rows();
    const Matrix eye = Matrix::Identity(d, d);
    const Matrix at = a.transpose();
    Matrix kron(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            kron.block(i * d, j * d, d, d) = eye(i, j) * at + at(i, j) * eye;

    const Eigen::FullPivLU<Matrix> lu(kron);
    auto solve_vec = [&](const Matrix& rhs) {
        Vector v = lu.solve(Eigen::Map<const Vector>(rhs.data(), d * d));
        return Matrix(Eigen::Map<Matrix>(v.data(), d, d));
    };

    Matrix p = solve_vec(-q);
    p = 0.5 * (p + p.transpose()).eval();
    for (int round = 0; round < 4; ++round) {
        const Matrix residual = at * p + p * a + q;
        if (residual.norm() <= 1e-13 * q.norm()) break;
        Matrix correction = solve_vec(-residual);
        p += 0.5 * (correction + correction.transpose());
    }
    return p;
}

[[nodiscard]] inline double lyapunov_residual(const Matrix& a, const Matrix& p, const Matrix& q) {
    return (a.transpose() * p + p * a + q).norm();
}

/// 2-norm condition number sigma_max / sigma_min; +infinity once sigma_min < 1e-300.
[[nodiscard]] inline double condition_number_2(const Matrix& m) {
    require_square_finite(m, "matrix");
    const Vector sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin < 1e-300) return std::numeric_limits<double>::infinity();
    return sv(0) / smin;
}

/// Cached Cholesky factor of a symmetric positive definite matrix plus optional ridge.
class SpdFactor {
public:
    SpdFactor() = default;

    explicit SpdFactor(const Matrix& m, double ridge = 0.0) {
        require_square_finite(m, "SPD matrix");
        if (ridge < 0.0) throw Error(Errc::invalid_argument, "ridge must be >= 0");
        require_symmetric(m, "SPD matrix", 1e-10);
        Matrix shifted = m;
        shifted.diagonal().array() += ridge;
        llt_.compute(shifted);
        if (llt_.info() != Eigen::Success)
            throw Error(Errc::not_positive_definite, "Cholesky pivot <= 0 (ridge " + std::to_string(ridge) + ")");
        ridge_ = ridge;
    }

    [[nodiscard]] Vector solve(const Vector& b) const { return llt_.solve(b); }

    template <class Dest>
    void solve_in_place(Dest& b) const { llt_.solveInPlace(b); }

    [[nodiscard]] const Eigen::LLT<Matrix>& llt() const noexcept { return llt_; }
    [[nodiscard]] double ridge() const noexcept { return ridge_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return llt_.rows(); }

private:
    Eigen::LLT<Matrix> llt_;
    double ridge_ = 0.0;
};

[[nodiscard]] inline Vector solve_spd(const Matrix& m, const Vector& b, double ridge = 0.0) {
    if (b.size() != m.rows()) throw Error(Errc::invalid_argument, "right-hand side length mismatch");
    return SpdFactor(m, ridge).solve(b);
}

/// Smallest eigenvalue lambda of M v = lambda K v, with K symmetric positive definite.
[[nodiscard]] inline double min_generalized_eigenvalue(const Matrix& m, const Matrix& k, double ridge = 0.0) {
    require_square_finite(m, "M");
    if (k.rows() != m.rows()) throw Error(Errc::invalid_argument, "M and K dimensions differ");
    const SpdFactor factor(k, ridge);
    const auto& llt = factor.llt();
    // C = L^{-1} M L^{-T}
    Matrix c = llt.matrixL().solve(m);
    c = llt.matrixL().solve(c.transpose()).transpose().eval();
    c = 0.5 * (c + c.transpose()).eval();
    return symmetric_eigenvalues(c).minCoeff();
}

} // namespace linops

using linops::condition_number_2;
using linops::solve_lyapunov;
using linops::solve_spd;
using linops::SpdFactor;

} // namespace rkhs_adapt
