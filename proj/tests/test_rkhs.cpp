#include <gtest/gtest.h>

#include <random>

#include "rkhs_adapt/rkhs.hpp"

using namespace rkhs_adapt;

namespace {

struct Fixture {
    Kernel kernel;
    const char* name;
};

std::vector<Fixture> fixtures() {
    return {{GaussianKernel(50.0, {}), "gauss-circle"},
            {GaussianKernel(1.5, Domain1D{10.0, false}), "gauss-box"},
            {MultiscaleKernel(2, 1.5, 6, {}, 90.0), "bspline2"},
            {MultiscaleKernel(1, 0.6, 5, {}, 90.0), "bspline1"}};
}

RkhsExpansion random_expansion(std::mt19937_64& rng, const Kernel& k, int n) {
    std::uniform_real_distribution<double> pos(0.0, kernel_domain(k).length);
    std::normal_distribution<double> coef;
    std::vector<double> c(static_cast<std::size_t>(n));
    for (auto& x : c) x = pos(rng);
    Vector a(n);
    for (int i = 0; i < n; ++i) a(i) = coef(rng);
    return {k, c, a};
}

// Scale against which rounding in sum_i a_i k(x_i, x) is measured.
double magnitude(const RkhsExpansion& f, double x) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        m += std::abs(f.coefficients()(static_cast<Eigen::Index>(i))) * kernel_eval(f.kernel(), f.centers()[i], x);
    return m;
}

} // namespace

TEST(Evaluate, Examples) {
    const Kernel g = GaussianKernel(1.0, Domain1D{100.0, false});
    const auto zero = RkhsExpansion::zero(g, {1.0, 2.0, 3.0});
    for (double x : {0.0, 1.5, 7.0}) EXPECT_EQ(evaluate(zero, x), 0.0);
    EXPECT_EQ(evaluate(RkhsExpansion::section(g, 4.0), 4.0), 1.0);
    const RkhsExpansion f(g, {0.0, 1.0}, Vector(Eigen::Vector2d(1.0, -2.0)));
    EXPECT_NEAR(evaluate(f, 0.5), -std::exp(-0.125), 1e-15);
}

TEST(Expansion, Validation) {
    const Kernel g = GaussianKernel(1.0, {});
    EXPECT_THROW(RkhsExpansion(g, {1.0, 2.0}, Vector::Ones(3)), Error);
    EXPECT_THROW(RkhsExpansion(g, {1.0, 1.0}, Vector::Ones(2)), Error);
    EXPECT_THROW(RkhsExpansion(g, {1.0, std::nan("")}, Vector::Ones(2)), Error);
    Vector bad = Vector::Ones(2);
    bad(1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(RkhsExpansion(g, {1.0, 2.0}, bad), Error);
}

TEST(InnerProduct, SectionsGiveKernelValues) {
    for (const auto& fx : fixtures()) {
        const double x = 13.0, y = 41.5;
        EXPECT_DOUBLE_EQ(inner_product(RkhsExpansion::section(fx.kernel, x), RkhsExpansion::section(fx.kernel, y)),
                         kernel_eval(fx.kernel, x, y))
            << fx.name;
    }
}

TEST(InnerProduct, SymmetricAndDefinite) {
    std::mt19937_64 rng(3);
    const Kernel g = GaussianKernel(50.0, {});
    for (int t = 0; t < 100; ++t) {
        const auto f = random_expansion(rng, g, 1 + t % 6);
        const auto h = random_expansion(rng, g, 1 + t % 4);
        ASSERT_NEAR(inner_product(f, h), inner_product(h, f), 1e-14 * (norm(f) * norm(h)));
        ASSERT_GT(inner_product(f, f), 0.0);
    }
    EXPECT_EQ(inner_product(RkhsExpansion::zero(g, {1.0, 50.0}), RkhsExpansion::zero(g, {1.0, 50.0})), 0.0);
    EXPECT_EQ(norm(RkhsExpansion::zero(g, {1.0})), 0.0);
    EXPECT_NEAR(norm(RkhsExpansion::section(g, 20.0)), std::sqrt(1.0 + 2.0 * std::exp(-25.92)), 1e-15);
}

TEST(InnerProduct, KernelMismatch) {
    const auto f = RkhsExpansion::section(GaussianKernel(50.0, {}), 1.0);
    const auto g = RkhsExpansion::section(GaussianKernel(40.0, {}), 1.0);
    try {
        (void)inner_product(f, g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::kernel_mismatch);
    }
}

TEST(RkhsProperties, ReproducingProperty) {
    std::mt19937_64 rng(10);
    int checked = 0;
    for (const auto& fx : fixtures()) {
        std::uniform_real_distribution<double> pos(0.0, kernel_domain(fx.kernel).length);
        for (int t = 0; t < 250; ++t, ++checked) {
            const auto f = random_expansion(rng, fx.kernel, 1 + t % 12);
            const double x = pos(rng);
            const double via_inner = inner_product(RkhsExpansion::section(fx.kernel, x), f);
            ASSERT_LE(std::abs(via_inner - evaluate(f, x)), 1e-12 * magnitude(f, x)) << fx.name;
        }
    }
    EXPECT_EQ(checked, 1000);
}

TEST(RkhsProperties, UniformEmbeddingBound) {
    std::mt19937_64 rng(12);
    int violations = 0, checked = 0;
    for (const auto& fx : fixtures()) {
        const int grid = 720;
        const double c = embedding_constant(fx.kernel, grid);
        const Domain1D& dom = kernel_domain(fx.kernel);
        const double step = dom.periodic ? dom.length / grid : dom.length / (grid - 1);
        std::uniform_int_distribution<int> idx(0, grid - 1);
        for (int t = 0; t < 250; ++t, ++checked) {
            const auto f = random_expansion(rng, fx.kernel, 1 + t % 10);
            const double x = idx(rng) * step;
            const double nf = norm(f);
            if (std::abs(evaluate(f, x)) > c * nf * (1 + 1e-12) + 1e-14 * magnitude(f, x)) ++violations;
            // Cauchy-Schwarz with the pointwise constant at an arbitrary point.
            const double y = std::uniform_real_distribution<double>(0.0, dom.length)(rng);
            if (std::abs(evaluate(f, y)) > std::sqrt(kernel_eval(fx.kernel, y, y)) * nf * (1 + 1e-12) + 1e-14 * magnitude(f, y))
                ++violations;
        }
    }
    EXPECT_EQ(checked, 1000);
    EXPECT_EQ(violations, 0);
}

TEST(EvalVector, Examples) {
    const Kernel g = GaussianKernel(50.0, {});
    const std::vector<double> c{0.0, 90.0, 180.0};
    EXPECT_NEAR(eval_vector(g, c, 90.0)(1), 1.0 + 2.0 * std::exp(-25.92), 1e-15);
    EXPECT_EQ(eval_vector(g, {}, 3.0).size(), 0);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 100; ++t) {
        const auto f = random_expansion(rng, g, 1 + t % 9);
        const double x = 3.6 * t;
        ASSERT_NEAR(eval_vector(g, f.centers(), x).dot(f.coefficients()), evaluate(f, x), 1e-14 * (1 + magnitude(f, x)));
    }
}

TEST(Project, IdempotentOnSpan) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> coef;
    for (const auto& fx : fixtures()) {
        const auto c = uniform_centers(kernel_domain(fx.kernel), 8);
        Vector a(8);
        for (int i = 0; i < 8; ++i) a(i) = coef(rng);
        const RkhsExpansion g(fx.kernel, c, a);
        const auto p = project(g, c);
        EXPECT_LE((p.coefficients() - a).norm(), 1e-8 * a.norm()) << fx.name;
    }
    const Kernel g = GaussianKernel(50.0, {});
    EXPECT_NEAR(project(RkhsExpansion::section(g, 77.0), {77.0}).coefficients()(0), 1.0, 1e-15);
}

TEST(Project, TwoByTwoHandSolve) {
    const Kernel g = GaussianKernel(1.0, Domain1D{50.0, false});
    const double x1 = 0.0, x2 = 1.0, y = 0.3;
    const double a = std::exp(-0.5);
    const double c1 = std::exp(-0.3 * 0.3 / 2), c2 = std::exp(-0.7 * 0.7 / 2);
    // [[1, a], [a, 1]]^{-1} = [[1, -a], [-a, 1]] / (1 - a^2)
    const double b1 = (c1 - a * c2) / (1 - a * a), b2 = (c2 - a * c1) / (1 - a * a);
    const auto p = project(RkhsExpansion::section(g, y), {x1, x2});
    EXPECT_NEAR(p.coefficients()(0), b1, 1e-14);
    EXPECT_NEAR(p.coefficients()(1), b2, 1e-14);
}

TEST(RkhsProperties, ProjectionOrthogonalContractiveParseval) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> coef;
    for (const auto& fx : fixtures()) {
        const Domain1D& dom = kernel_domain(fx.kernel);
        const auto sub = uniform_centers(dom, 6);
        for (int t = 0; t < 50; ++t) {
            // g lives on the projection centers plus a few extra ones.
            std::vector<double> all = sub;
            for (int e = 0; e < 4; ++e) all.push_back(sub[static_cast<std::size_t>(e)] + dom.length / 6 * (0.2 + 0.15 * e));
            Vector a(static_cast<Eigen::Index>(all.size()));
            for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = coef(rng);
            const RkhsExpansion g(fx.kernel, all, a);
            const auto p = project(g, sub);
            Vector diff = a;
            diff.head(6) -= p.coefficients();
            const RkhsExpansion r(fx.kernel, all, diff);
            const double ng = norm(g);
            for (double x : sub)
                ASSERT_LE(std::abs(inner_product(r, RkhsExpansion::section(fx.kernel, x))), 1e-8 * ng) << fx.name;
            ASSERT_LE(norm(p), ng + 1e-8);
            const double lhs = ng * ng, rhs = std::pow(norm(p), 2) + std::pow(norm(r), 2);
            ASSERT_NEAR(lhs, rhs, 1e-6 * lhs) << fx.name;
        }
    }
}

TEST(Project, ValuesProviderInterpolates) {
    const Kernel g = GaussianKernel(50.0, {});
    const auto c = uniform_centers(kernel_domain(g), 10);
    const auto f = project([](double s) { return std::sin(s * std::numbers::pi / 180.0); }, g, c);
    for (double x : c) EXPECT_NEAR(f(x), std::sin(x * std::numbers::pi / 180.0), 1e-9);
    EXPECT_THROW((void)project([](double) { return std::nan(""); }, g, c), Error);
}

TEST(Project, IllConditionedWarnsAndRidgeSolves) {
    std::vector<std::string> seen;
    auto saved = warning_handler();
    warning_handler() = [&](std::string_view m) { seen.emplace_back(m); };
    const Kernel g = GaussianKernel(50.0, {});
    const auto c = uniform_centers(kernel_domain(g), 30);
    const auto f = project([](double s) { return std::cos(s * std::numbers::pi / 180.0); }, g, c);
    const auto fr = project([](double s) { return std::cos(s * std::numbers::pi / 180.0); }, g, c, {.ridge = 1e-8});
    warning_handler() = saved;
    ASSERT_EQ(seen.size(), 2u);
    EXPECT_NE(seen[0].find("IllConditioned"), std::string::npos);
    for (double x : {0.0, 45.0, 200.0}) {
        EXPECT_NEAR(f(x), std::cos(x * std::numbers::pi / 180.0), 1e-6);
        EXPECT_NEAR(fr(x), std::cos(x * std::numbers::pi / 180.0), 1e-4);
    }
}
