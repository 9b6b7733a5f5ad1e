#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <numbers>

#include "rkhs_adapt/dynamics.hpp"
#include "rkhs_adapt/vehicle.hpp"

using namespace rkhs_adapt;

namespace {

const LtiPlant& plant() {
    static const LtiPlant p = build_plant({});
    return p;
}

Matrix q_shape(double scale) { return Vector(Eigen::Vector4d(1e-4, 1.0, 1e-4, 1.0) * scale).asDiagonal(); }

LearningLaw law(double scale = 4e-5, LearningMode mode = LearningMode::euclidean) {
    return LearningLaw::make(plant(), mode, Vector::Constant(1, 1e-3), q_shape(scale));
}

SimulationSetup small_setup(int n, double t_final) {
    SimulationSetup st;
    st.centers = uniform_centers(Domain1D{}, n);
    st.t_final = t_final;
    st.path_speed = 144.0;
    st.sample_every = 10;
    return st;
}

RkhsExpansion sine_in_span(const SimulationSetup& st) {
    return project([](double s) { return 2.0 * std::sin(2.0 * std::numbers::pi * s / 360.0); }, st.kernel, st.centers);
}

} // namespace

TEST(Rk4, Examples) {
    const Vector y0 = Vector::Constant(3, 1.25);
    auto zero = [](double, const Vector& y, Vector& dy) { dy = Vector::Zero(y.size()); };
    EXPECT_EQ(step_rk4(zero, 0.0, y0, 0.1), y0);
    auto decay = [](double, const Vector& y, Vector& dy) { dy = -y; };
    const Vector y1 = step_rk4(decay, 0.0, Vector::Ones(1), 0.1);
    // 1 - h + h^2/2 - h^3/6 + h^4/24 at h = 0.1
    EXPECT_NEAR(y1(0), 0.9048375, 1e-15);
}

TEST(Rk4, FifthOrderOneStepError) {
    Matrix a(3, 3);
    a << -1.0, 2.0, 0.0, -2.0, -1.0, 0.5, 0.0, 0.3, -0.4;
    const Vector y0 = Vector(Eigen::Vector3d(1.0, -0.5, 2.0));
    auto rhs = [&](double, const Vector& y, Vector& dy) { dy = a * y; };
    auto err = [&](double h) { return (step_rk4(rhs, 0.0, y0, h) - (a * h).exp() * y0).norm(); };
    const double ratio = err(0.02) / err(0.01);
    EXPECT_NEAR(ratio, 32.0, 1.5);
}

TEST(Rk4, NonFiniteDerivative) {
    auto bad = [](double, const Vector& y, Vector& dy) { dy = y / 0.0; };
    try {
        (void)step_rk4(bad, 0.0, Vector::Ones(2), 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::non_finite_derivative);
    }
    EXPECT_THROW((void)step_rk4(bad, 0.0, Vector::Ones(2), 0.0), Error);
}

TEST(LearningLawMake, SolvesLyapunov) {
    const LearningLaw l = law();
    EXPECT_LE(linops::lyapunov_residual(plant().A, l.P, l.Q), 1e-10 * l.Q.norm());
    EXPECT_THROW((void)LearningLaw::make(plant(), LearningMode::euclidean, Vector::Constant(1, -1.0), q_shape(1)), Error);
    EXPECT_THROW((void)LearningLaw::make(plant(), LearningMode::euclidean, Vector(), q_shape(1)), Error);
    EXPECT_THROW((void)LearningLaw::make(plant(), LearningMode::euclidean, Vector::Ones(1), Matrix::Identity(3, 3)), Error);
    EXPECT_EQ(l.gain_diagonal(4), Vector::Constant(4, 1e-3));
    EXPECT_THROW((void)LearningLaw::make(plant(), LearningMode::euclidean, Vector::Ones(3), q_shape(1)).gain_diagonal(4),
                 Error);
}

TEST(Simulate, ZeroErrorEquilibrium) {
    SimulationSetup st = small_setup(6, 1.0);
    const auto truth = sine_in_span(st);
    st.alpha_hat0 = truth.coefficients();
    const Vector x0 = Vector(Eigen::Vector4d(0.1, -0.02, 0.05, 0.01));
    st.x0 = x0;
    st.x_hat0 = x0;
    const auto run = simulate(plant(), truth, law(), st);
    ASSERT_TRUE(run.v_complete);
    for (const auto& s : run.samples) {
        ASSERT_LE(s.x_err_norm, 1e-10);
        ASSERT_LE((s.alpha_hat - truth.coefficients()).norm(), 1e-10);
    }
    const auto rep = lyapunov_trace_check(run);
    EXPECT_EQ(rep.max_defect, 0.0);
}

TEST(Simulate, StationaryConstantInputSteadyState) {
    SimulationSetup st = small_setup(3, 3.0);
    st.path_speed = 0.0;
    st.s0 = 10.0;
    const double c = 0.7;
    const auto run = simulate(plant(), [c](double) { return c; }, law(4e-2), st);
    const Vector oracle = -plant().A.fullPivLu().solve(plant().B * c);
    EXPECT_LE((run.samples.back().x - oracle).norm(), 1e-9 * oracle.norm());
    EXPECT_LE(run.samples.back().x_err_norm, 1e-3 * run.max_x_err);
}

TEST(Simulate, SamplesAndPathCoordinate) {
    SimulationSetup st = small_setup(4, 5.05);
    st.sample_every = 333;
    const auto run = simulate(plant(), [](double s) { return std::cos(s); }, law(), st);
    EXPECT_EQ(run.samples.front().t, 0.0);
    EXPECT_NEAR(run.samples.back().t, 5.05, 1e-12);
    for (std::size_t i = 1; i < run.samples.size(); ++i) {
        ASSERT_GT(run.samples[i].t, run.samples[i - 1].t);
        ASSERT_GE(run.samples[i].s, 0.0);
        ASSERT_LT(run.samples[i].s, 360.0);
    }
    EXPECT_NEAR(run.samples.back().s, std::fmod(144.0 * 5.05, 360.0), 1e-8);
    EXPECT_FALSE(run.v_complete);
    EXPECT_THROW((void)lyapunov_trace_check(run), Error);
}

TEST(Simulate, Guards) {
    SimulationSetup st = small_setup(4, 0.1);
    auto f = [](double) { return 0.0; };
    st.dt = 2e-3; // dt * spectral radius > 0.1
    EXPECT_THROW((void)simulate(plant(), f, law(), st), Error);
    st = small_setup(4, 0.1);
    st.t_final = 0.0;
    EXPECT_THROW((void)simulate(plant(), f, law(), st), Error);
    st = small_setup(4, 0.1);
    st.centers = {1.0, 1.0};
    EXPECT_THROW((void)simulate(plant(), f, law(), st), Error);
    st = small_setup(4, 0.1);
    st.x0 = Vector::Ones(3);
    EXPECT_THROW((void)simulate(plant(), f, law(), st), Error);
}

TEST(Simulate, DivergenceIsReported) {
    SimulationSetup st = small_setup(10, 5.0);
    const LearningLaw wild = LearningLaw::make(plant(), LearningMode::euclidean, Vector::Constant(1, 1e-9), q_shape(1e3));
    try {
        (void)simulate(plant(), [](double s) { return std::sin(s); }, wild, st);
        FAIL();
    } catch (const Error& e) {
        EXPECT_TRUE(e.code() == Errc::unstable_integration || e.code() == Errc::non_finite_derivative) << e.what();
    }
}

TEST(LyapunovTrace, IdentityAndMonotoneV) {
    SimulationSetup st = small_setup(8, 3.0);
    const auto truth = sine_in_span(st);
    double previous = 0.0;
    for (double dt : {1e-4, 5e-5}) {
        st.dt = dt;
        const auto run = simulate(plant(), truth, law(), st);
        const auto rep = lyapunov_trace_check(run);
        EXPECT_TRUE(rep.passed);
        EXPECT_LE(rep.max_defect, 1e-4);
        if (previous > 0.0) {
            EXPECT_GE(previous / rep.max_defect, 1.8);
        }
        previous = rep.max_defect;
        const double v0 = run.samples.front().V;
        EXPECT_GT(v0, 0.0);
        for (std::size_t k = 1; k < run.samples.size(); ++k) ASSERT_LE(run.samples[k].V, run.samples[k - 1].V + 1e-8 * v0);
    }
}

TEST(LearningModes, RkhsMetricMatchesEuclideanForOrthonormalSections) {
    for (bool periodic : {false, true}) {
        SimulationSetup st;
        st.kernel = MultiscaleKernel(1, 0.6, 0, Domain1D{10.0, periodic}, 1.0);
        for (int i = 0; i < 10; ++i) st.centers.push_back(i + 0.5);
        ASSERT_EQ(grammian(st.kernel, st.centers), Matrix::Identity(10, 10));
        st.path_speed = 4.0;
        st.t_final = 2.0;
        st.sample_every = 50;
        auto road = [](double s) { return std::sin(s); };
        const auto a = simulate(plant(), road, law(4e-2, LearningMode::euclidean), st);
        const auto b = simulate(plant(), road, law(4e-2, LearningMode::rkhs_metric), st);
        ASSERT_EQ(a.samples.size(), b.samples.size());
        for (std::size_t k = 0; k < a.samples.size(); ++k) {
            ASSERT_EQ(a.samples[k].x, b.samples[k].x);
            ASSERT_EQ(a.samples[k].x_hat, b.samples[k].x_hat);
            ASSERT_EQ(a.samples[k].alpha_hat, b.samples[k].alpha_hat);
        }
    }
}

TEST(LearningModes, RkhsMetricLyapunovIdentity) {
    SimulationSetup st = small_setup(6, 2.0);
    st.kernel = MultiscaleKernel(2, 1.5, 4, {}, 90.0);
    const auto truth = sine_in_span(st);
    const auto run = simulate(plant(), truth, law(0.2, LearningMode::rkhs_metric), st);
    EXPECT_LE(lyapunov_trace_check(run).max_defect, 1e-4);
    const double v0 = run.samples.front().V;
    for (std::size_t k = 1; k < run.samples.size(); ++k) ASSERT_LE(run.samples[k].V, run.samples[k - 1].V + 1e-8 * v0);
}

TEST(LearningModes, GainScalingKeepsStationaryPoints) {
    // At a stationary point (x = x_hat, alpha_hat = alpha*) both gains keep alpha_hat fixed;
    // away from it the first-step coefficient change scales as 1 / c, up to the RK4 stage
    // coupling (second order in 1 / c) and the cancellation against alpha*.
    SimulationSetup st = small_setup(5, 1e-4);
    st.sample_every = 1;
    const auto truth = sine_in_span(st);
    st.alpha_hat0 = truth.coefficients();
    for (double c : {0.1, 3.0, 50.0}) {
        const LearningLaw base = law(4e-5), scaled = LearningLaw::make(plant(), LearningMode::euclidean,
                                                                       Vector::Constant(1, c * 1e-3), q_shape(4e-5));
        EXPECT_EQ(simulate(plant(), truth, base, st).estimate.coefficients(), truth.coefficients());
        EXPECT_EQ(simulate(plant(), truth, scaled, st).estimate.coefficients(), truth.coefficients());
        SimulationSetup moved = st;
        moved.x0 = Vector(Eigen::Vector4d(0.0, 1e-3, 0.0, 2e-3));
        const Vector da = simulate(plant(), truth, base, moved).estimate.coefficients() - truth.coefficients();
        const Vector db = simulate(plant(), truth, scaled, moved).estimate.coefficients() - truth.coefficients();
        ASSERT_GT(da.norm(), 0.0);
        EXPECT_LE((db * c - da).norm(), 1e-5 * da.norm());
    }
}

TEST(Excitation, StationaryPathIsRankOne) {
    SimulationSetup st = small_setup(3, 1.0);
    st.path_speed = 0.0;
    st.s0 = 30.0;
    const auto run = simulate(plant(), [](double) { return 1.0; }, law(), st);
    const Matrix m = pe_matrix(run, 0.2, 0.5, st.kernel, st.centers);
    const Vector phi = eval_vector(st.kernel, st.centers, 30.0);
    EXPECT_LE((m - 0.5 * phi * phi.transpose()).norm(), 1e-12 * m.norm());
    EXPECT_NEAR(pe_lower_bound(m, grammian(st.kernel, st.centers)), 0.0, 1e-10);
}

TEST(Excitation, FullLapMatchesQuadratureOracle) {
    SimulationSetup st = small_setup(3, 5.0);
    const auto run = simulate(plant(), [](double) { return 0.0; }, law(), st);
    const double lap = 2.5;
    const Matrix m = pe_matrix(run, 0.0, lap, st.kernel, st.centers);
    // Dense midpoint rule over one lap in s.
    Matrix oracle = Matrix::Zero(3, 3);
    const int nodes = 200000;
    for (int i = 0; i < nodes; ++i) {
        const Vector phi = eval_vector(st.kernel, st.centers, (i + 0.5) * 360.0 / nodes);
        oracle += phi * phi.transpose();
    }
    oracle *= lap / nodes;
    EXPECT_LE((m - oracle).norm(), 1e-4 * oracle.norm());
    const Matrix k = grammian(st.kernel, st.centers);
    const double gamma = pe_lower_bound(m, k);
    EXPECT_GT(linops::symmetric_eigenvalues(m).minCoeff(), 0.0);
    EXPECT_GT(gamma, 0.0);
    EXPECT_NEAR(gamma / linops::min_generalized_eigenvalue(oracle, k), 1.0, 1e-2);
    // Two laps give twice the excitation.
    const Matrix m2 = pe_matrix(run, 0.0, 2 * lap, st.kernel, st.centers);
    EXPECT_LE((m2 - 2.0 * m).norm(), 1e-2 * m2.norm());
    EXPECT_NEAR(pe_lower_bound(m2, k) / gamma, 2.0, 2e-2);
}

TEST(Excitation, WindowErrors) {
    SimulationSetup st = small_setup(3, 1.0);
    const auto run = simulate(plant(), [](double) { return 0.0; }, law(), st);
    try {
        (void)pe_matrix(run, 0.5, 1.0, st.kernel, st.centers);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::window_out_of_range);
    }
    EXPECT_THROW((void)pe_matrix(run, -0.1, 0.5, st.kernel, st.centers), Error);
    EXPECT_THROW((void)pe_matrix(run, 0.0, 0.0, st.kernel, st.centers), Error);
    EXPECT_THROW((void)pe_matrix(run, 0.0, 0.02, st.kernel, st.centers), Error); // too few samples
}
