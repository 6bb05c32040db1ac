#include <gtest/gtest.h>

#include <unsupported/Eigen/Polynomials>

#include <cmath>
#include <random>

#include "jpm/analytic.hpp"
#include "jpm/chi.hpp"
#include "support/oracles.hpp"

using namespace jpm;
using namespace jpm::analytic;

TEST(FiniteDifference, KnownWeightsAndPolynomialExactness) {
    const auto st = fd::central_stencil(2, 2);
    ASSERT_EQ(st.half_width, 1);
    EXPECT_NEAR(st.weights[0], 1.0, 1e-15);
    EXPECT_NEAR(st.weights[1], -2.0, 1e-15);
    EXPECT_NEAR(st.weights[2], 1.0, 1e-15);
    const auto d1 = fd::central_stencil(1, 2);
    EXPECT_NEAR(d1.weights[0], -0.5, 1e-15);
    EXPECT_NEAR(d1.weights[2], 0.5, 1e-15);
    EXPECT_THROW(fd::central_stencil(1, 3), PreconditionError);

    // accuracy-8 stencils differentiate degree <= order + 7 polynomials exactly
    for (std::size_t order = 1; order <= 4; ++order) {
        const auto s = fd::central_stencil(order, 8);
        std::vector<double> series;
        const double h = 0.1;
        for (int i = 0; i < 2 * s.half_width + 1; ++i) {
            const double t = (i - s.half_width) * h + 0.3;
            series.push_back(std::pow(t, 5) - 2.0 * t * t + 1.0);
        }
        const double got = fd::apply_stencil(s, series, static_cast<std::size_t>(s.half_width)) / std::pow(h, double(order));
        const double t = 0.3;
        const double exact[] = {0.0, 5 * std::pow(t, 4) - 4 * t, 20 * std::pow(t, 3) - 4, 60 * t * t, 120 * t};
        EXPECT_NEAR(got, exact[order], 1e-6 * std::max(1.0, std::abs(exact[order])));
    }
}

TEST(BackAction, CompletenessAndLoweringIdentity) {
    const std::size_t nc = 8;
    EXPECT_EQ(subtraction_operator(nc) * sqrt_number(nc), lowering(nc));
    for (double t : {0.0, 0.3, 1.7, 12.6}) {
        const Matrix B0 = no_tunneling_backaction(1.0, t, Outcome::ground, nc).matrix;
        const Matrix B1 = no_tunneling_backaction(1.0, t, Outcome::excited, nc).matrix;
        const Matrix sum = B0.adjoint() * B0 + B1.adjoint() * B1;
        EXPECT_LT((sum - Matrix::Identity(nc, nc)).cwiseAbs().maxCoeff(), 1e-15);
    }
    EXPECT_THROW(no_tunneling_backaction(1.0, 1.0, Outcome::measured, nc), PreconditionError);
    EXPECT_THROW(no_tunneling_backaction(1.0, -1.0, Outcome::ground, nc), PreconditionError);
}

TEST(BackAction, MatchesNumericalChannelWithoutTunneling) {
    ModelParams p;
    p.gamma1 = 0.0;
    p.n_cutoff = 6;
    const Propagator prop(assemble_superoperator(p), TimeGrid{3.0, 7});
    const Matrix rho = oracle::random_density(6, 77);
    for (std::size_t k = 0; k < prop.size(); ++k) {
        for (Outcome o : {Outcome::ground, Outcome::excited}) {
            const Matrix B = no_tunneling_backaction(1.0, prop.time(k), o, 6).matrix;
            const Matrix expect = B * rho * B.adjoint();
            EXPECT_LT((conditional_channel(prop, k, o).apply(rho) - expect).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(BackAction, ShortTimeBound) {
    const double dev = short_time_bound(1.0, 0.01, 5);
    const double theta = std::sqrt(5.0) * 0.01;
    EXPECT_GT(dev, 0.0);
    EXPECT_GE(theta * theta * theta / dev, 5.0);
    for (double gt : {1e-4, 1e-3, 0.05, 0.099}) EXPECT_NO_THROW(short_time_bound(1.0, gt, 9));
    EXPECT_THROW(short_time_bound(1.0, 0.2, 9), PreconditionError);
}

TEST(BackAction, IdealBeta) {
    EXPECT_DOUBLE_EQ(ideal_beta(IdealOperator::lowering, 2, 3), std::sqrt(6.0));
    EXPECT_DOUBLE_EQ(ideal_beta(IdealOperator::subtraction, 2, 3), 1.0);
    EXPECT_THROW(ideal_beta(IdealOperator::lowering, 0, 1), PreconditionError);
}

TEST(StrongDephasing, CaptureRateAndRoots) {
    EXPECT_DOUBLE_EQ(capture_rate(1.0, 1e4, 2), 8e-4);
    EXPECT_THROW(capture_rate(1.0, 0.0, 1), PreconditionError);
    const auto p = LowT2Params::make(1, 1.0, 1.0);
    EXPECT_NEAR(p.s_plus, -0.38197, 1e-5);
    EXPECT_NEAR(p.s_minus, -2.61803, 1e-5);
    EXPECT_THROW(LowT2Params::make(0, 1.0, 1.0), PreconditionError);
    EXPECT_THROW(LowT2Params::make(1, 0.0, 1.0), PreconditionError);
    ModelParams m;
    m.t2_inv = 1e4;
    EXPECT_DOUBLE_EQ(LowT2Params::from_model(m, 1).gamma2, 4e-4);
}

TEST(StrongDephasing, RootIdentitiesProperty) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-4.0, 4.0);
    for (int i = 0; i < 200; ++i) {
        const double g1 = std::pow(10.0, U(rng)), g2 = std::pow(10.0, U(rng));
        const std::size_t n = 1 + static_cast<std::size_t>(i % 4);
        const auto p = LowT2Params::make(n, g1, g2);
        const double sum = g1 + 2.0 * g2 * n, prod = g1 * g2 * n;
        EXPECT_NEAR((p.s_plus + p.s_minus) / -sum, 1.0, 1e-12);
        EXPECT_NEAR(p.s_plus * p.s_minus / prod, 1.0, 1e-12);
        EXPECT_LT(p.s_plus, 0.0);
        EXPECT_LT(p.s_minus, p.s_plus);
    }
}

TEST(StrongDephasing, ClosedFormAgainstRateEquationRk4) {
    for (double g2 : {0.01, 0.5, 3.0}) {
        for (std::size_t n : {1u, 2u}) {
            const auto p = LowT2Params::make(n, 1.0, g2);
            for (double t : {0.5, 2.0, 10.0}) {
                EXPECT_NEAR(pauli_detection_probability(p, t), oracle::pauli_rk4(g2 * n, 1.0, t), 1e-10);
                const auto pop = pauli_populations(p, t);
                EXPECT_NEAR(pop.measured, pauli_detection_probability(p, t), 1e-12);
                EXPECT_NEAR(pop.ground + pop.excited + pop.measured, 1.0, 1e-15);
            }
        }
    }
}

TEST(StrongDephasing, MonotoneAndBoundedProperty) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double ratio = std::pow(10.0, U(rng));
        const auto p = LowT2Params::make(1, 1.0, ratio);
        double prev = 0.0;
        EXPECT_NEAR(pauli_detection_probability(p, 0.0), 0.0, 1e-12);
        for (int k = 1; k <= 200; ++k) {
            const double t = 0.05 * k * (1.0 + 1.0 / ratio);
            const double v = pauli_detection_probability(p, t);
            EXPECT_GE(v, prev - 1e-12);
            EXPECT_LE(v, 1.0 + 1e-12);
            prev = v;
        }
    }
}

TEST(StrongDephasing, LimitingRegimes) {
    std::vector<double> times;
    for (int k = 0; k <= 400; ++k) times.push_back(0.1 * k);
    const auto fast = LowT2Params::make(1, 1.0, 100.0);
    EXPECT_LE(limiting_regime_gap(fast, Regime::tunneling_limited, times), 0.05);
    const auto slow = LowT2Params::make(1, 1.0, 0.01);
    std::vector<double> long_times;
    for (int k = 0; k <= 400; ++k) long_times.push_back(2.0 * k);
    EXPECT_LE(limiting_regime_gap(slow, Regime::capture_limited, long_times), 0.05);
    EXPECT_THROW(limiting_regime(LowT2Params::make(1, 1.0, 1.0), 1.0, Regime::tunneling_limited), RegimeViolation);
    EXPECT_THROW(limiting_regime(fast, 1.0, Regime::capture_limited), RegimeViolation);
}

TEST(Laplace, PartialFractionsAgree) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-5.0, 5.0);
    const auto p = LowT2Params::make(2, 1.0, 0.7);
    for (int i = 0; i < 50; ++i) {
        const Complex s(U(rng), U(rng));
        const Complex a = laplace_Pm(s, p), b = laplace_Pm_partial(s, p);
        EXPECT_LT(std::abs(a - b), 1e-12 * std::max(1.0, std::abs(a)));
    }
    EXPECT_THROW(laplace_Pm(Complex(0.0), p), PoleEvaluation);
    EXPECT_THROW(laplace_Pm_partial(Complex(p.s_plus), p), PoleEvaluation);
}

TEST(Laplace, TalbotInversionMatchesTimeDomain) {
    for (double g2 : {0.1, 1.0, 10.0}) {
        const auto p = LowT2Params::make(1, 1.0, g2);
        for (double t : {0.5, 1.0, 5.0}) {
            const double inv = oracle::talbot_inverse([&](Complex s) { return laplace_Pm(s, p); }, t);
            EXPECT_NEAR(inv, pauli_detection_probability(p, t), 1e-6);
        }
    }
}

TEST(Laplace, FinalValue) {
    const auto p = LowT2Params::make(1, 1.0, 2.0);
    for (double eps : {1e-6, 1e-8, 1e-10}) {
        const Complex s(eps * std::abs(p.s_plus), 0.0);
        EXPECT_NEAR(std::real(s * laplace_Pm(s, p)), 1.0, 10.0 * eps);
    }
}

TEST(Laplace, XVanishesForGroundStartAndDetectsPoles) {
    for (double re : {-1.0, 0.5, 2.0}) EXPECT_EQ(laplace_X(Complex(re, 0.3), 1, 0.0, 1.0, 1.0, 10.0), Complex(0.0));
    EXPECT_NE(laplace_X(Complex(0.5, 0.3), 1, 1.0, 1.0, 1.0, 10.0), Complex(0.0));
    // with kappa2 = 0 the denominator is s^4: s = 0 is a pole
    EXPECT_THROW(laplace_X(Complex(0.0), 1, 1.0, 1.0, 1.0, 0.0), PoleEvaluation);
}

TEST(Residuals, RequireReducedModel) {
    ModelParams p;
    p.t1_inv = 0.1;
    EXPECT_THROW(ResidualModel::from(p), PreconditionError);
}

TEST(Residuals, ZeroSeriesAndShortSeries) {
    const ResidualModel m{1.0, 1.0, 0.0};
    const std::vector<double> zeros(50, 0.0);
    const auto r = ode_residual_scalar(zeros, 0.1, 0, m, ResidualEquation::scalar_quartic);
    EXPECT_EQ(r.max_abs_residual, 0.0);
    EXPECT_EQ(r.relative_residual, 0.0);
    EXPECT_THROW(ode_residual_scalar(std::vector<double>(5, 1.0), 0.1, 0, m, ResidualEquation::scalar_quartic), GridTooCoarse);
}

TEST(Residuals, CoarseGridRaises) {
    const ResidualModel m{1.0, 1.0, 0.0};
    std::vector<double> x;
    for (int i = 0; i < 40; ++i) x.push_back(std::sin(3.0 * i));   // h = 1, freq 3: unresolved
    EXPECT_THROW(ode_residual_scalar(x, 1.0, 0, m, ResidualEquation::scalar_quartic), GridTooCoarse);
}

TEST(Residuals, ScalarQuarticHasExponentialSolutions) {
    // every root lambda of the characteristic polynomial gives x = Re e^{lambda t}; the residual must vanish
    const ResidualModel m{1.0, 1.0, 2.0};
    const std::size_t n = 1;
    const auto q = analytic::detail::scalar_quartic(m, double(n));
    Eigen::Matrix<double, 5, 1> coeffs;
    coeffs << q.c0, q.c1, q.c2, q.c3, 1.0;
    Eigen::PolynomialSolver<double, 4> solver(coeffs);
    const double h = 0.01;
    for (Eigen::Index r = 0; r < 4; ++r) {
        const Complex lam = solver.roots()(r);
        std::vector<double> x;
        for (int i = 0; i < 400; ++i) x.push_back(std::real(std::exp(lam * (h * i))));
        const auto rep = ode_residual_scalar(x, h, n, m, ResidualEquation::scalar_quartic);
        EXPECT_LT(rep.relative_residual, 1e-6) << lam;
    }
}

TEST(Residuals, SimulatedDataSatisfiesEquations) {
    for (double k2 : {0.0, 10.0}) {
        ModelParams p;
        p.t2_inv = k2;
        p.n_cutoff = 4;
        const auto rho = fock_state(1, 4);
        for (auto which : {ResidualEquation::block_system, ResidualEquation::operator_quartic, ResidualEquation::scalar_quartic}) {
            const auto rep = simulated_residual(p, rho, which, 10.0, 400, 0);
            EXPECT_LE(rep.relative_residual, 1e-3) << to_string(which) << " kappa2 = " << k2;
            EXPECT_GT(rep.scale, 0.0);
        }
        // a superposition input exercises the off-diagonal cavity elements of the operator form
        Matrix sup = Matrix::Zero(4, 4);
        sup(1, 1) = sup(2, 2) = sup(1, 2) = sup(2, 1) = 0.5;
        EXPECT_LE(simulated_residual(p, CavityDensity{sup, true}, ResidualEquation::operator_quartic, 10.0).relative_residual, 1e-3);
    }
}

TEST(Residuals, ReducedFormIsDiagnosticOnly) {
    ModelParams p;
    p.t2_inv = 10.0;
    p.n_cutoff = 4;
    const auto rep = simulated_residual(p, fock_state(1, 4), ResidualEquation::reduced_quartic, 10.0, 400, 0);
    EXPECT_GT(rep.relative_residual, 1e-3);
    EXPECT_TRUE(std::isfinite(rep.relative_residual));
}
