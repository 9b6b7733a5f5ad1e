#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "rkhs_adapt/errors.hpp"
#include "rkhs_adapt/linops.hpp"

namespace rkhs_adapt {

/// One-dimensional domain [0, length), either periodic (a closed path) or boxed.
struct Domain1D {
    double length = 360.0;
    bool periodic = true;

    void validate() const {
        if (!(length > 0.0) || !std::isfinite(length))
            throw Error(Errc::invalid_argument, "domain length must be positive");
    }

    /// Periodic: reduces into [0, length). Boxed: clamps into [0, length].
    template <class T>
    [[nodiscard]] T reduce(const T& x) const {
        using std::floor;
        const T len(length);
        if (periodic) {
            T r = x - len * floor(x / len);
            if (r >= len) r -= len;
            if (r < T(0)) r = T(0);
            return r;
        }
        if (x < T(0)) return T(0);
        if (x > len) return len;
        return x;
    }

    friend bool operator==(const Domain1D&, const Domain1D&) = default;
};

/// Gaussian kernel exp(-|u - v|^2 / (2 sigma^2)).
///
/// On a periodic domain the difference is reduced to [-L/2, L/2] and periodic
/// images are summed in pairs until a pair drops below the working precision of
/// T. In double with sigma below about L/6 that is the three nearest images; extended
/// precision evaluation picks up the further images the Grammian spectrum needs.
/// The alternative exp(-|u - v|^2 / s^2) convention corresponds to sigma = s / sqrt(2).
class GaussianKernel {
public:
    GaussianKernel(double sigma, Domain1D domain) : sigma_(sigma), domain_(domain) {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(Errc::invalid_argument, "sigma must be positive");
        domain_.validate();
    }

    [[nodiscard]] double sigma() const noexcept { return sigma_; }
    [[nodiscard]] const Domain1D& domain() const noexcept { return domain_; }

    template <class T>
    [[nodiscard]] T eval(const T& u_in, const T& v_in) const {
        using std::exp;
        using std::nearbyint;
        const T u = domain_.reduce(u_in);
        const T v = domain_.reduce(v_in);
        const T two_s2 = T(2) * T(sigma_) * T(sigma_);
        T d = u - v;
        if (!domain_.periodic) return exp(-(d * d) / two_s2);
        const T len(domain_.length);
        d -= len * nearbyint(d / len);
        const T centre = exp(-(d * d) / two_s2);
        const T cutoff = centre * T(std::numeric_limits<T>::epsilon());
        // Images are accumulated separately and added last, so the result is
        // bit-symmetric in (u, v).
        T images(0);
        for (int k = 1; k < 64; ++k) {
            const T a = d + T(k) * len;
            const T b = d - T(k) * len;
            const T pair = exp(-(a * a) / two_s2) + exp(-(b * b) / two_s2);
            if (pair <= cutoff) break;
            images += pair;
        }
        return centre + images;
    }

    [[nodiscard]] double operator()(double u, double v) const { return eval(u, v); }

    friend bool operator==(const GaussianKernel&, const GaussianKernel&) = default;

private:
    double sigma_;
    Domain1D domain_;
};

/// Normalized cardinal B-spline with integer knots: order 1 is the indicator of
/// [0,1), order 2 the hat on [0,2] (the box convolved with itself).
template <class T>
[[nodiscard]] T normalized_bspline(int order, const T& t) {
    if (order == 1) return (t >= T(0) && t < T(1)) ? T(1) : T(0);
    if (order == 2) {
        if (t >= T(0) && t < T(1)) return t;
        if (t >= T(1) && t < T(2)) return T(2) - t;
        return T(0);
    }
    throw Error(Errc::invalid_argument, "only B-spline orders 1 and 2 are supported");
}

/// Translated dilate 2^{j/2} N^r(2^j x / unit - k).
struct BSplineScaling {
    int order = 2;
    int level = 0;
    std::int64_t shift = 0;

    template <class T>
    [[nodiscard]] T operator()(const T& x, double unit = 1.0) const {
        using std::ldexp;
        using std::sqrt;
        const T t = ldexp(x / T(unit), level) - T(static_cast<double>(shift));
        return sqrt(ldexp(T(1), level)) * normalized_bspline(order, t);
    }
};

/// Multiscale kernel sum_{j=0}^{J} 2^{-2rj} sum_k phi_{j,k}(u) phi_{j,k}(v) built from
/// normalized B-splines. `unit` is the level-0 knot spacing in domain units; on a
/// periodic domain it must divide the length and shifts wrap modulo the knot count.
class MultiscaleKernel {
public:
    MultiscaleKernel(int order, double smoothness, int max_level, Domain1D domain, double unit)
        : order_(order), smoothness_(smoothness), max_level_(max_level), domain_(domain), unit_(unit) {
        if (order != 1 && order != 2) throw Error(Errc::invalid_argument, "B-spline order must be 1 or 2");
        if (!(smoothness > 0.5)) throw Error(Errc::invalid_argument, "smoothness r must exceed d/2 = 0.5");
        if (max_level < 0 || max_level > 24) throw Error(Errc::invalid_argument, "max_level must lie in [0, 24]");
        if (!(unit > 0.0) || !std::isfinite(unit)) throw Error(Errc::invalid_argument, "unit must be positive");
        domain_.validate();
        if (domain_.periodic) {
            const double knots = domain_.length / unit_;
            knots_ = static_cast<std::int64_t>(std::llround(knots));
            if (knots_ < 1 || std::abs(knots - static_cast<double>(knots_)) > 1e-9 * knots)
                throw Error(Errc::invalid_argument, "periodic multiscale kernel needs length / unit to be an integer");
        }
    }

    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] double smoothness() const noexcept { return smoothness_; }
    [[nodiscard]] int max_level() const noexcept { return max_level_; }
    [[nodiscard]] double unit() const noexcept { return unit_; }
    [[nodiscard]] const Domain1D& domain() const noexcept { return domain_; }

    /// Weight 2^{-2rj} applied to level j.
    [[nodiscard]] double level_weight(int j) const { return std::exp2(-2.0 * smoothness_ * j); }

    /// Half-width of the support of a kernel section (distance beyond which k(x, .) vanishes).
    [[nodiscard]] double support_radius() const noexcept { return order_ * unit_; }

    /// sum_k phi_{j,k}(u) phi_{j,k}(v) for a single level, without the level weight.
    template <class T>
    [[nodiscard]] T level_sum(int j, const T& u_in, const T& v_in) const {
        const T u = domain_.reduce(u_in);
        const T v = domain_.reduce(v_in);
        const auto a = active_shifts(j, u);
        const auto b = active_shifts(j, v);
        T acc(0);
        for (std::size_t p = 0; p < a.count; ++p)
            for (std::size_t q = 0; q < b.count; ++q)
                if (a.shift[p] == b.shift[q]) acc += a.value[p] * b.value[q];
        using std::ldexp;
        return ldexp(acc, j);
    }

    template <class T>
    [[nodiscard]] T eval(const T& u, const T& v) const {
        T total(0);
        for (int j = 0; j <= max_level_; ++j) total += T(level_weight(j)) * level_sum(j, u, v);
        return total;
    }

    [[nodiscard]] double operator()(double u, double v) const { return eval(u, v); }

    friend bool operator==(const MultiscaleKernel& a, const MultiscaleKernel& b) {
        return a.order_ == b.order_ && a.smoothness_ == b.smoothness_ && a.max_level_ == b.max_level_ &&
               a.domain_ == b.domain_ && a.unit_ == b.unit_;
    }

private:
    // Nonzero N^r(2^j x / unit - k) values at one point, keyed by (wrapped) shift in
    // ascending order; periodic images of the same wrapped shift are merged.
    template <class T>
    struct Active {
        std::array<std::int64_t, 2> shift{};
        std::array<T, 2> value{};
        std::size_t count = 0;
    };

    template <class T>
    [[nodiscard]] Active<T> active_shifts(int j, const T& x) const {
        using std::floor;
        using std::ldexp;
        const T t = ldexp(x / T(unit_), j);
        const auto base = static_cast<std::int64_t>(static_cast<double>(floor(t)));
        const std::int64_t period = domain_.periodic ? (knots_ << j) : 0;
        Active<T> out;
        for (std::int64_t k = base - order_ + 1; k <= base; ++k) {
            const T val = normalized_bspline(order_, t - T(static_cast<double>(k)));
            if (val == T(0)) continue;
            std::int64_t key = k;
            if (period > 0) key = ((k % period) + period) % period;
            std::size_t slot = 0;
            while (slot < out.count && out.shift[slot] != key) ++slot;
            if (slot == out.count) {
                out.shift[slot] = key;
                out.value[slot] = val;
                ++out.count;
            } else {
                out.value[slot] += val;
            }
        }
        if (out.count == 2 && out.shift[1] < out.shift[0]) {
            std::swap(out.shift[0], out.shift[1]);
            std::swap(out.value[0], out.value[1]);
        }
        return out;
    }

    int order_;
    double smoothness_;
    int max_level_;
    Domain1D domain_;
    double unit_;
    std::int64_t knots_ = 0;
};

using Kernel = std::variant<GaussianKernel, MultiscaleKernel>;

template <class K>
concept KernelLike = requires(const K& k, double u, double v) {
    { k(u, v) } -> std::convertible_to<double>;
    { k.domain() } -> std::convertible_to<const Domain1D&>;
};

[[nodiscard]] inline const Domain1D& kernel_domain(const Kernel& k) {
    return std::visit([](const auto& kk) -> const Domain1D& { return kk.domain(); }, k);
}

template <KernelLike K>
[[nodiscard]] double kernel_eval(const K& k, double u, double v) {
    return k(u, v);
}

[[nodiscard]] inline double kernel_eval(const Kernel& k, double u, double v) {
    return std::visit([&](const auto& kk) { return kk(u, v); }, k);
}

/// Kernel section k_x as a one-argument evaluator. The kernel is captured by value.
template <class K>
[[nodiscard]] auto kernel_section(const K& k, double x) {
    return [k, x](double y) { return kernel_eval(k, x, y); };
}

/// max over a uniform grid of sqrt(k(x, x)); the constant in |f(x)| <= C ||f||_H.
template <class K>
[[nodiscard]] double embedding_constant(const K& k, int grid_size) {
    if (grid_size < 2) throw Error(Errc::invalid_argument, "grid_size must be >= 2");
    const Domain1D& dom = [&]() -> const Domain1D& {
        if constexpr (std::is_same_v<K, Kernel>) return kernel_domain(k);
        else return k.domain();
    }();
    const double step = dom.periodic ? dom.length / grid_size : dom.length / (grid_size - 1);
    double best = 0.0;
    for (int i = 0; i < grid_size; ++i) {
        const double x = i * step;
        best = std::max(best, kernel_eval(k, x, x));
    }
    return std::sqrt(best);
}

template <class K>
[[nodiscard]] const Domain1D& domain_of(const K& k) {
    if constexpr (std::is_same_v<K, Kernel>) return kernel_domain(k);
    else return k.domain();
}

/// Throws DuplicateCenters if two centers coincide within 1e-12 L after reduction.
template <class K>
void check_distinct_centers(const K& k, const std::vector<double>& centers) {
    const Domain1D& dom = domain_of(k);
    std::vector<double> reduced(centers.size());
    std::transform(centers.begin(), centers.end(), reduced.begin(), [&](double c) { return dom.reduce(c); });
    std::sort(reduced.begin(), reduced.end());
    const double tol = 1e-12 * dom.length;
    for (std::size_t i = 1; i < reduced.size(); ++i)
        if (reduced[i] - reduced[i - 1] <= tol) throw Error(Errc::duplicate_centers, "two centers coincide");
    if (dom.periodic && reduced.size() > 1 && reduced.front() + dom.length - reduced.back() <= tol)
        throw Error(Errc::duplicate_centers, "two centers coincide across the periodic seam");
}

/// K_ij = k(x_i, x_j).
template <class K>
[[nodiscard]] Matrix grammian(const K& k, const std::vector<double>& centers) {
    check_distinct_centers(k, centers);
    const auto n = static_cast<Eigen::Index>(centers.size());
    Matrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        g(i, i) = kernel_eval(k, centers[i], centers[i]);
        for (Eigen::Index j = i + 1; j < n; ++j) g(i, j) = g(j, i) = kernel_eval(k, centers[i], centers[j]);
    }
    return g;
}

/// (K_ab)_ij = k(a_i, b_j); no distinctness requirement.
template <class K>
[[nodiscard]] Matrix cross_grammian(const K& k, const std::vector<double>& a, const std::vector<double>& b) {
    Matrix g(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kernel_eval(k, a[i], b[j]);
    return g;
}

/// Centers i L / n, i = 0..n-1 (periodic) or i L / (n - 1) (boxed, n > 1).
[[nodiscard]] inline std::vector<double> uniform_centers(const Domain1D& dom, int n) {
    if (n < 1) throw Error(Errc::invalid_argument, "basis count must be >= 1");
    std::vector<double> c(static_cast<std::size_t>(n));
    const double step = dom.periodic ? dom.length / n : (n > 1 ? dom.length / (n - 1) : 0.0);
    for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = i * step;
    return c;
}

} // namespace rkhs_adapt
