#pragma once

// Grammian condition numbers in extended precision. Gaussian Grammians on dense
// center sets have smallest eigenvalues far below double epsilon (and eventually
// below the double range), so evaluating them in double yields rounding noise.
// The Grammian is rebuilt entry by entry in MPFR arithmetic and its symmetric
// eigenvalues computed there.

#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <vector>

#include "rkhs_adapt/kernels.hpp"

namespace rkhs_adapt {

using precise_real =
    boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<500, boost::multiprecision::allocate_stack>,
                                  boost::multiprecision::et_off>;

} // namespace rkhs_adapt

// Boost 1.74's NumTraits for MPFR numbers lacks infinity(), which Eigen's generic
// hypot needs; MPFR provides an exact hypot directly.
template <>
struct Eigen::internal::hypot_impl<rkhs_adapt::precise_real> {
    static rkhs_adapt::precise_real run(const rkhs_adapt::precise_real& x, const rkhs_adapt::precise_real& y) {
        return boost::multiprecision::hypot(x, y);
    }
};

namespace rkhs_adapt {

struct PreciseCondition {
    double value = 0.0;  ///< sigma_max / sigma_min, +inf once sigma_min < 1e-300
    double log10 = 0.0;  ///< log10 of the exact ratio; finite even when value overflows
};

namespace detail {

template <class T>
[[nodiscard]] T kernel_eval_as(const Kernel& k, const T& u, const T& v) {
    return std::visit([&](const auto& kk) { return kk.template eval<T>(u, v); }, k);
}

} // namespace detail

/// Condition number of the Grammian of `k` on `centers`, computed at ~500 digits.
[[nodiscard]] inline PreciseCondition precise_grammian_condition(const Kernel& k, const std::vector<double>& centers) {
    check_distinct_centers(k, centers);
    using MatrixP = Eigen::Matrix<precise_real, Eigen::Dynamic, Eigen::Dynamic>;
    const auto n = static_cast<Eigen::Index>(centers.size());
    if (n == 0) throw Error(Errc::invalid_argument, "empty center set");
    MatrixP g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j)
            g(i, j) = g(j, i) = detail::kernel_eval_as<precise_real>(k, precise_real(centers[static_cast<std::size_t>(i)]),
                                                                     precise_real(centers[static_cast<std::size_t>(j)]));
    const Eigen::SelfAdjointEigenSolver<MatrixP> eig(g, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    precise_real smax(0), smin = abs(ev(0));
    for (Eigen::Index i = 0; i < n; ++i) {
        const precise_real a = abs(ev(i));
        if (a > smax) smax = a;
        if (a < smin) smin = a;
    }
    PreciseCondition out;
    if (smin == 0) {
        out.value = out.log10 = std::numeric_limits<double>::infinity();
        return out;
    }
    const precise_real ratio = smax / smin;
    out.log10 = static_cast<double>(boost::multiprecision::log10(ratio));
    out.value = smin < precise_real(1e-300) ? std::numeric_limits<double>::infinity() : static_cast<double>(ratio);
    return out;
}

} // namespace rkhs_adapt
