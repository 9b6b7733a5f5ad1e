#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <fmt/core.h>

#include "rkhs_adapt/kernels.hpp"
#include "rkhs_adapt/linops.hpp"
#include "rkhs_adapt/rkhs.hpp"

namespace rkhs_adapt {

/// x' = A x + B u with A Hurwitz.
struct LtiPlant {
    Matrix A;
    Vector B;

    LtiPlant(Matrix a, Vector b) : A(std::move(a)), B(std::move(b)) {
        linops::require_square_finite(A, "A");
        if (B.size() != A.rows()) throw Error(Errc::invalid_argument, "B length must match A");
        if (!B.allFinite()) throw Error(Errc::non_finite, "B has non-finite entries");
        if (!linops::is_hurwitz(A)) throw Error(Errc::not_hurwitz, "plant matrix A is not Hurwitz");
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return A.rows(); }
};

enum class LearningMode { euclidean, rkhs_metric };

/// Gradient learning law alpha' = G^{-1} phi B^T P (x - x_hat).
///
/// `gain` holds Gamma: one entry for a scalar gain, or n diagonal entries.
/// euclidean: G = Gamma. rkhs_metric: G = Gamma^{1/2} (K + ridge I) Gamma^{1/2}.
struct LearningLaw {
    LearningMode mode = LearningMode::euclidean;
    Vector gain = Vector::Constant(1, 1.0);
    Matrix P;
    Matrix Q;
    double ridge = 0.0;

    /// Solves A^T P + P A = -Q for the plant and packages the law.
    [[nodiscard]] static LearningLaw make(const LtiPlant& plant, LearningMode mode, Vector gain, const Matrix& q,
                                          double ridge = 0.0) {
        if (gain.size() == 0 || !gain.allFinite() || (gain.array() <= 0.0).any())
            throw Error(Errc::invalid_argument, "gain must be positive");
        if (ridge < 0.0 || !std::isfinite(ridge)) throw Error(Errc::invalid_argument, "ridge must be >= 0");
        if (q.rows() != plant.dim()) throw Error(Errc::invalid_argument, "Q dimension must match the plant");
        LearningLaw law;
        law.mode = mode;
        law.gain = std::move(gain);
        law.Q = q;
        law.P = solve_lyapunov(plant.A, q);
        law.ridge = ridge;
        linops::SpdFactor(law.P); // P > 0 follows from Q > 0 and A Hurwitz; checked anyway
        return law;
    }

    [[nodiscard]] bool scalar_gain() const noexcept { return gain.size() == 1; }

    /// Gamma as an n-vector of diagonal entries.
    [[nodiscard]] Vector gain_diagonal(Eigen::Index n) const {
        if (scalar_gain()) return Vector::Constant(n, gain(0));
        if (gain.size() != n) throw Error(Errc::invalid_argument, "diagonal gain length must equal the basis count");
        return gain;
    }
};

struct EstimatorState {
    double t = 0.0;
    Vector x;
    Vector x_hat;
    Vector alpha_hat;
    double s = 0.0;
};

struct Sample {
    double t = 0.0;
    double s = 0.0;
    Vector x;
    Vector x_hat;
    Vector alpha_hat;
    double V = 0.0;
    double x_err_norm = 0.0;
};

struct SimulationSetup {
    Kernel kernel = GaussianKernel(50.0, Domain1D{});
    std::vector<double> centers;
    double path_speed = 360.0 / 25.0;
    double t_final = 1.0;
    double dt = 1e-4;
    int sample_every = 100;
    double s0 = 0.0;
    std::optional<Vector> x0;         ///< default 0
    std::optional<Vector> x_hat0;     ///< default 0
    std::optional<Vector> alpha_hat0; ///< default 0
};

struct EstimatorRun {
    std::vector<Sample> samples;
    SimulationSetup setup;
    LearningLaw law;
    /// True when V includes the coefficient-error term (alpha* known).
    bool v_complete = false;
    std::optional<Vector> alpha_star;
    RkhsExpansion estimate = RkhsExpansion::zero(GaussianKernel(1.0, Domain1D{}), {});
    double max_x_err = 0.0;
};

/// One classical RK4 step of y' = rhs(t, y). `rhs(t, y, dy)` writes the derivative.
template <class Rhs>
[[nodiscard]] Vector step_rk4(Rhs&& rhs, double t, const Vector& y, double dt) {
    if (!(dt > 0.0)) throw Error(Errc::invalid_argument, "dt must be positive");
    const Eigen::Index m = y.size();
    Vector k1(m), k2(m), k3(m), k4(m);
    auto eval = [&](double tt, const Vector& yy, Vector& out) {
        rhs(tt, yy, out);
        if (!out.allFinite()) throw Error(Errc::non_finite_derivative, fmt::format("derivative non-finite at t = {}", tt));
    };
    eval(t, y, k1);
    eval(t + 0.5 * dt, y + 0.5 * dt * k1, k2);
    eval(t + 0.5 * dt, y + 0.5 * dt * k2, k3);
    eval(t + dt, y + dt * k3, k4);
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Allocation-free RK4 stepping for a fixed state size.
class Rk4Integrator {
public:
    explicit Rk4Integrator(Eigen::Index m) : k1_(m), k2_(m), k3_(m), k4_(m), tmp_(m) {}

    template <class Rhs>
    void step(Rhs&& rhs, double t, Vector& y, double dt) {
        stage(rhs, t, y, k1_);
        tmp_ = y + 0.5 * dt * k1_;
        stage(rhs, t + 0.5 * dt, tmp_, k2_);
        tmp_ = y + 0.5 * dt * k2_;
        stage(rhs, t + 0.5 * dt, tmp_, k3_);
        tmp_ = y + dt * k3_;
        stage(rhs, t + dt, tmp_, k4_);
        y += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
    }

private:
    template <class Rhs>
    static void stage(Rhs& rhs, double t, const Vector& y, Vector& out) {
        rhs(t, y, out);
        if (!out.allFinite()) throw Error(Errc::non_finite_derivative, fmt::format("derivative non-finite at t = {}", t));
    }

    Vector k1_, k2_, k3_, k4_, tmp_;
};

namespace detail {

// phi(s) and f(s) for the most recent path coordinates. RK4 evaluates the midpoint
// twice and the step end again at the next step start, so two slots suffice.
template <class TrueF>
class PathCache {
public:
    PathCache(const Kernel& k, const std::vector<double>& centers, const TrueF& f, const Vector* alpha_star)
        : kernel_(k), centers_(centers), f_(f), alpha_star_(alpha_star) {}

    const Vector& phi(double s) { return lookup(s).phi; }
    double f(double s) { return lookup(s).f; }

private:
    struct Slot {
        double s = std::numeric_limits<double>::quiet_NaN();
        Vector phi;
        double f = 0.0;
    };

    Slot& lookup(double s) {
        for (auto& slot : slots_)
            if (slot.s == s) return slot;
        Slot& slot = slots_[next_];
        next_ ^= 1;
        slot.s = s;
        eval_vector_into(kernel_, centers_, s, slot.phi);
        slot.f = alpha_star_ ? alpha_star_->dot(slot.phi) : static_cast<double>(f_(s));
        return slot;
    }

    const Kernel& kernel_;
    const std::vector<double>& centers_;
    const TrueF& f_;
    const Vector* alpha_star_;
    Slot slots_[2];
    int next_ = 0;
};

template <class F>
std::optional<Vector> coefficients_in_span(const F& f, const SimulationSetup& setup) {
    if constexpr (std::is_same_v<std::decay_t<F>, RkhsExpansion>) {
        if (f.kernel() == setup.kernel && f.centers() == setup.centers) return f.coefficients();
    }
    return std::nullopt;
}

inline Vector init_or_zero(const std::optional<Vector>& v, Eigen::Index n, const char* what) {
    if (!v) return Vector::Zero(n);
    if (v->size() != n) throw Error(Errc::invalid_argument, fmt::format("{} has length {}, expected {}", what, v->size(), n));
    if (!v->allFinite()) throw Error(Errc::non_finite, fmt::format("{} has non-finite entries", what));
    return *v;
}

} // namespace detail

/// Integrates the plant, estimator, learning law and path coordinate:
///   x' = A x + B f(s),  x_hat' = A x_hat + B alpha_hat . phi(s),
///   alpha_hat' = G^{-1} phi(s) B^T P (x - x_hat),  s' = path_speed.
///
/// `true_f` is any callable double(double); when it is an RkhsExpansion on the
/// simulation's own kernel and centers the coefficient error is tracked and V is
/// the full Lyapunov function, otherwise V holds the state-error part only.
template <class F>
[[nodiscard]] EstimatorRun simulate(const LtiPlant& plant, const F& true_f, const LearningLaw& law,
                                    const SimulationSetup& setup) {
    const Eigen::Index d = plant.dim();
    const auto n = static_cast<Eigen::Index>(setup.centers.size());
    if (!(setup.t_final > 0.0) || !std::isfinite(setup.t_final))
        throw Error(Errc::invalid_argument, "t_final must be positive");
    if (!(setup.dt > 0.0) || !std::isfinite(setup.dt)) throw Error(Errc::invalid_argument, "dt must be positive");
    if (!std::isfinite(setup.path_speed)) throw Error(Errc::invalid_argument, "path_speed must be finite");
    if (setup.sample_every < 1) throw Error(Errc::invalid_argument, "sample_every must be >= 1");
    if (n == 0) throw Error(Errc::invalid_argument, "at least one center is required");
    if (law.P.rows() != d) throw Error(Errc::invalid_argument, "learning law does not match the plant");
    // Explicit RK4 is stable for |lambda dt| up to about 2.8; this keeps a wide margin
    // on the plant modes (the coupled gain loop is left to the divergence check below).
    const double rho = linops::spectral_radius(plant.A);
    if (setup.dt * rho >= 0.1)
        throw Error(Errc::invalid_argument,
                    fmt::format("dt = {} too large: dt * spectral_radius(A) = {:.3g} must be < 0.1", setup.dt, setup.dt * rho));
    check_distinct_centers(setup.kernel, setup.centers);

    const Domain1D& dom = kernel_domain(setup.kernel);
    const Vector gamma = law.gain_diagonal(n);
    const Vector gamma_sqrt = gamma.cwiseSqrt();

    // G and its action G^{-1} on the regressor.
    std::optional<linops::SpdFactor> kfactor;
    Matrix g_metric;
    if (law.mode == LearningMode::rkhs_metric) {
        Matrix k = grammian(setup.kernel, setup.centers);
        const double cond = condition_number_2(k);
        if (!(cond <= 1e14)) warn(fmt::format("IllConditioned: Grammian condition number {:.3e} (n = {})", cond, n));
        kfactor.emplace(k, law.ridge);
        k.diagonal().array() += law.ridge;
        g_metric = gamma_sqrt.asDiagonal() * k * gamma_sqrt.asDiagonal();
    }
    const Vector btp = law.P.transpose() * plant.B; // (B^T P)^T

    const std::optional<Vector> alpha_star = detail::coefficients_in_span(true_f, setup);
    detail::PathCache<F> cache(setup.kernel, setup.centers, true_f, alpha_star ? &*alpha_star : nullptr);

    // y = [x, x_hat, alpha_hat, s]
    Vector y(2 * d + n + 1);
    y.segment(0, d) = detail::init_or_zero(setup.x0, d, "x0");
    y.segment(d, d) = detail::init_or_zero(setup.x_hat0, d, "x_hat0");
    y.segment(2 * d, n) = detail::init_or_zero(setup.alpha_hat0, n, "alpha_hat0");
    y(2 * d + n) = dom.reduce(setup.s0);

    Vector scratch(n);
    auto rhs = [&](double, const Vector& yy, Vector& dy) {
        dy.resize(yy.size());
        const double s = yy(2 * d + n);
        const Vector& phi = cache.phi(s);
        const double f = cache.f(s);
        const auto x = yy.segment(0, d);
        const auto xh = yy.segment(d, d);
        const auto a = yy.segment(2 * d, n);
        dy.segment(0, d).noalias() = plant.A * x;
        dy.segment(0, d) += plant.B * f;
        dy.segment(d, d).noalias() = plant.A * xh;
        dy.segment(d, d) += plant.B * a.dot(phi);
        const double e = btp.dot(x - xh);
        if (law.mode == LearningMode::euclidean) {
            dy.segment(2 * d, n) = phi.cwiseQuotient(gamma) * e;
        } else if (law.scalar_gain()) {
            // Gamma^{-1/2} K^{-1} Gamma^{-1/2} = K^{-1} / gamma; same operation order as euclidean.
            scratch = phi;
            kfactor->solve_in_place(scratch);
            dy.segment(2 * d, n) = scratch.cwiseQuotient(gamma) * e;
        } else {
            scratch = phi.cwiseQuotient(gamma_sqrt) * e;
            kfactor->solve_in_place(scratch);
            dy.segment(2 * d, n) = scratch.cwiseQuotient(gamma_sqrt);
        }
        dy(2 * d + n) = setup.path_speed;
    };

    auto lyapunov_value = [&](const Vector& yy) {
        const Vector xt = yy.segment(0, d) - yy.segment(d, d);
        double v = 0.5 * xt.dot(law.P * xt);
        if (alpha_star) {
            const Vector at = *alpha_star - yy.segment(2 * d, n);
            v += 0.5 * (law.mode == LearningMode::euclidean ? at.dot(gamma.cwiseProduct(at)) : at.dot(g_metric * at));
        }
        return v;
    };

    EstimatorRun run;
    run.setup = setup;
    run.law = law;
    run.v_complete = alpha_star.has_value();
    run.alpha_star = alpha_star;

    auto record = [&](double t) {
        Sample smp;
        smp.t = t;
        smp.s = y(2 * d + n);
        smp.x = y.segment(0, d);
        smp.x_hat = y.segment(d, d);
        smp.alpha_hat = y.segment(2 * d, n);
        smp.V = lyapunov_value(y);
        smp.x_err_norm = (smp.x - smp.x_hat).norm();
        run.samples.push_back(std::move(smp));
    };

    const auto steps = static_cast<long long>(std::ceil(setup.t_final / setup.dt - 1e-9));
    run.samples.reserve(static_cast<std::size_t>(steps / setup.sample_every + 2));
    Rk4Integrator rk4(y.size());
    record(0.0);
    double max_err = run.samples.front().x_err_norm;
    for (long long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * setup.dt;
        rk4.step(rhs, t, y, setup.dt);
        y(2 * d + n) = dom.reduce(y(2 * d + n));
        const double state_norm = y.head(2 * d + n).cwiseAbs().maxCoeff();
        if (!(state_norm <= 1e12))
            throw Error(Errc::unstable_integration,
                        fmt::format("state norm {:.3e} exceeds 1e12 at t = {:.6g}; reduce dt or the gain", state_norm,
                                    t + setup.dt));
        max_err = std::max(max_err, (y.segment(0, d) - y.segment(d, d)).norm());
        if ((k + 1) % setup.sample_every == 0 || k + 1 == steps) record(static_cast<double>(k + 1) * setup.dt);
    }
    run.max_x_err = max_err;
    run.estimate = RkhsExpansion(setup.kernel, setup.centers, y.segment(2 * d, n));
    return run;
}

struct TraceReport {
    double max_defect = 0.0;
    std::size_t worst_sample = 0;
    double tolerance = 1e-4;
    bool passed = true;
};

/// Compares the central difference of V against -1/2 x_err^T Q x_err averaged over
/// the same two-sample window (Simpson weights), normalized by 1 + |dV/dt|.
[[nodiscard]] inline TraceReport lyapunov_trace_check(const EstimatorRun& run, double tolerance = 1e-4) {
    if (!run.v_complete)
        throw Error(Errc::not_applicable, "V is partial: the true function is not in the estimator span");
    TraceReport rep;
    rep.tolerance = tolerance;
    const auto& smp = run.samples;
    auto qform = [&](const Sample& s) {
        const Vector e = s.x - s.x_hat;
        return -0.5 * e.dot(run.law.Q * e);
    };
    for (std::size_t k = 1; k + 1 < smp.size(); ++k) {
        const double h = smp[k + 1].t - smp[k - 1].t;
        const double dv = (smp[k + 1].V - smp[k - 1].V) / h;
        const double avg = (qform(smp[k - 1]) + 4.0 * qform(smp[k]) + qform(smp[k + 1])) / 6.0;
        const double defect = std::abs(dv - avg) / (1.0 + std::abs(dv));
        if (defect > rep.max_defect) {
            rep.max_defect = defect;
            rep.worst_sample = k;
        }
    }
    rep.passed = rep.max_defect <= tolerance;
    return rep;
}

/// M = integral over [t0, t0 + delta] of phi(s(t)) phi(s(t))^T dt (trapezoid rule on the samples).
[[nodiscard]] inline Matrix pe_matrix(const EstimatorRun& run, double t0, double delta, const Kernel& kernel,
                                      const std::vector<double>& centers) {
    const auto& smp = run.samples;
    if (!(delta > 0.0)) throw Error(Errc::invalid_argument, "delta must be positive");
    if (smp.size() < 2) throw Error(Errc::window_out_of_range, "run has fewer than two samples");
    const double t1 = t0 + delta;
    const double slack = 1e-9 * std::max(1.0, std::abs(smp.back().t));
    if (t0 < smp.front().t - slack || t1 > smp.back().t + slack)
        throw Error(Errc::window_out_of_range,
                    fmt::format("window [{}, {}] outside run [{}, {}]", t0, t1, smp.front().t, smp.back().t));

    const Domain1D& dom = kernel_domain(kernel);
    // s at an arbitrary time by linear interpolation, unwrapping across the periodic seam.
    auto s_at = [&](double t) {
        auto it = std::lower_bound(smp.begin(), smp.end(), t, [](const Sample& a, double v) { return a.t < v; });
        if (it == smp.begin()) return it->s;
        if (it == smp.end()) return smp.back().s;
        const Sample& b = *it;
        const Sample& a = *(it - 1);
        double ds = b.s - a.s;
        if (dom.periodic) ds -= dom.length * std::nearbyint(ds / dom.length);
        const double w = (t - a.t) / (b.t - a.t);
        return dom.reduce(a.s + w * ds);
    };

    std::vector<std::pair<double, double>> nodes; // (t, s)
    nodes.emplace_back(t0, s_at(t0));
    for (const auto& s : smp)
        if (s.t > t0 + slack && s.t < t1 - slack) nodes.emplace_back(s.t, s.s);
    nodes.emplace_back(t1, s_at(t1));
    if (nodes.size() < 50)
        throw Error(Errc::invalid_argument,
                    fmt::format("only {} samples in the window; at least 50 are needed", nodes.size()));

    const auto n = static_cast<Eigen::Index>(centers.size());
    Matrix m = Matrix::Zero(n, n);
    Vector prev = eval_vector(kernel, centers, nodes.front().second);
    Vector cur(n);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        eval_vector_into(kernel, centers, nodes[i].second, cur);
        const double h = nodes[i].first - nodes[i - 1].first;
        m.noalias() += (0.5 * h) * (prev * prev.transpose() + cur * cur.transpose());
        std::swap(prev, cur);
    }
    return 0.5 * (m + m.transpose());
}

/// Smallest gamma with alpha^T M alpha >= gamma alpha^T K alpha on H_n.
[[nodiscard]] inline double pe_lower_bound(const Matrix& m, const Matrix& k, double ridge = 0.0) {
    const double cond = condition_number_2(k);
    if (!(cond <= 1e14)) warn(fmt::format("IllConditioned: Grammian condition number {:.3e}", cond));
    return linops::min_generalized_eigenvalue(m, k, ridge);
}

} // namespace rkhs_adapt
