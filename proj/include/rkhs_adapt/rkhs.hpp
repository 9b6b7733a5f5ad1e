#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/core.h>

#include "rkhs_adapt/kernels.hpp"
#include "rkhs_adapt/linops.hpp"

namespace rkhs_adapt {

/// phi(x) = (k(x_1, x), ..., k(x_n, x)) written into `out` (resized as needed).
inline void eval_vector_into(const Kernel& k, const std::vector<double>& centers, double x, Vector& out) {
    out.resize(static_cast<Eigen::Index>(centers.size()));
    std::visit(
        [&](const auto& kk) {
            for (std::size_t i = 0; i < centers.size(); ++i) out(static_cast<Eigen::Index>(i)) = kk(centers[i], x);
        },
        k);
}

[[nodiscard]] inline Vector eval_vector(const Kernel& k, const std::vector<double>& centers, double x) {
    Vector out;
    eval_vector_into(k, centers, x, out);
    return out;
}

/// f = sum_i alpha_i k(x_i, .), an element of span{k_{x_i}}.
class RkhsExpansion {
public:
    RkhsExpansion(Kernel kernel, std::vector<double> centers, Vector coefficients)
        : kernel_(std::move(kernel)), centers_(std::move(centers)), coefficients_(std::move(coefficients)) {
        if (static_cast<Eigen::Index>(centers_.size()) != coefficients_.size())
            throw Error(Errc::invalid_argument, "centers and coefficients differ in length");
        if (!coefficients_.allFinite()) throw Error(Errc::non_finite, "non-finite expansion coefficient");
        for (double c : centers_)
            if (!std::isfinite(c)) throw Error(Errc::non_finite, "non-finite center");
        check_distinct_centers(kernel_, centers_);
    }

    /// The kernel section k_x.
    [[nodiscard]] static RkhsExpansion section(const Kernel& kernel, double x) {
        return {kernel, {x}, Vector::Ones(1)};
    }

    [[nodiscard]] static RkhsExpansion zero(const Kernel& kernel, std::vector<double> centers) {
        const auto n = static_cast<Eigen::Index>(centers.size());
        return {kernel, std::move(centers), Vector::Zero(n)};
    }

    [[nodiscard]] const Kernel& kernel() const noexcept { return kernel_; }
    [[nodiscard]] const std::vector<double>& centers() const noexcept { return centers_; }
    [[nodiscard]] const Vector& coefficients() const noexcept { return coefficients_; }
    [[nodiscard]] std::size_t size() const noexcept { return centers_.size(); }

    [[nodiscard]] double operator()(double x) const {
        return std::visit(
            [&](const auto& kk) {
                double acc = 0.0;
                for (std::size_t i = 0; i < centers_.size(); ++i)
                    acc += coefficients_(static_cast<Eigen::Index>(i)) * kk(centers_[i], x);
                return acc;
            },
            kernel_);
    }

private:
    Kernel kernel_;
    std::vector<double> centers_;
    Vector coefficients_;
};

[[nodiscard]] inline double evaluate(const RkhsExpansion& f, double x) { return f(x); }

/// (f, g)_H = alpha_f^T K_fg alpha_g.
[[nodiscard]] inline double inner_product(const RkhsExpansion& f, const RkhsExpansion& g) {
    if (!(f.kernel() == g.kernel())) throw Error(Errc::kernel_mismatch, "expansions use different kernels");
    if (f.size() == 0 || g.size() == 0) return 0.0;
    if (&f == &g) {
        const Matrix k = cross_grammian(f.kernel(), f.centers(), f.centers());
        return f.coefficients().dot(k * f.coefficients());
    }
    // Symmetrized so that inner_product(f, g) == inner_product(g, f) bit for bit.
    const Matrix kfg = cross_grammian(f.kernel(), f.centers(), g.centers());
    const double a = f.coefficients().dot(kfg * g.coefficients());
    const double b = g.coefficients().dot(kfg.transpose() * f.coefficients());
    return 0.5 * (a + b);
}

[[nodiscard]] inline double norm(const RkhsExpansion& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

struct ProjectOptions {
    double ridge = 0.0;
    double warn_condition = 1e14;
};

namespace detail {

inline Vector solve_grammian(const Matrix& k, const Vector& rhs, const ProjectOptions& opt) {
    const double cond = condition_number_2(k);
    if (!(cond <= opt.warn_condition))
        warn(fmt::format("IllConditioned: Grammian condition number {:.3e} (n = {}, ridge {:g})", cond, k.rows(),
                         opt.ridge));
    if (opt.ridge > 0.0) return SpdFactor(k, opt.ridge).solve(rhs);
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
    // Numerically semidefinite; a pivoted factorization still yields a least-change solve.
    Eigen::LDLT<Matrix> ldlt(k);
    if (ldlt.info() != Eigen::Success) throw Error(Errc::not_positive_definite, "Grammian factorization failed");
    return ldlt.solve(rhs);
}

} // namespace detail

/// H-orthogonal projection of g onto span{k_{x_i}}: beta = K^{-1} c with c_i = (k_{x_i}, g)_H.
[[nodiscard]] inline RkhsExpansion project(const RkhsExpansion& g, const std::vector<double>& centers,
                                           const ProjectOptions& opt = {}) {
    const Matrix k = grammian(g.kernel(), centers);
    const Vector c = cross_grammian(g.kernel(), centers, g.centers()) * g.coefficients();
    return {g.kernel(), centers, detail::solve_grammian(k, c, opt)};
}

/// Projection of a function known through point values; by the reproducing property
/// (k_{x_i}, f)_H = f(x_i), so this is the projection onto span{k_{x_i}} of any
/// H-element with those values, i.e. kernel interpolation.
[[nodiscard]] inline RkhsExpansion project(const std::function<double(double)>& values, const Kernel& kernel,
                                           const std::vector<double>& centers, const ProjectOptions& opt = {}) {
    const Matrix k = grammian(kernel, centers);
    Vector c(static_cast<Eigen::Index>(centers.size()));
    for (std::size_t i = 0; i < centers.size(); ++i) c(static_cast<Eigen::Index>(i)) = values(centers[i]);
    if (!c.allFinite()) throw Error(Errc::non_finite, "value provider returned a non-finite value");
    return {kernel, centers, detail::solve_grammian(k, c, opt)};
}

} // namespace rkhs_adapt
