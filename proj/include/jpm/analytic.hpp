// analytic.hpp: Closed-form limits used to validate the numerical engine
//
//  * no-tunneling back-action operators B^0(t), B^1(t) and their short-time form
//  * lowering / subtraction operators and their ideal chi signatures
//  * strong-dephasing (Pauli) detection probability, its limiting regimes and
//    its Laplace-domain form
//  * finite-difference residuals of the reduced block ODEs on simulated data

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "jpm/chi.hpp"
#include "jpm/errors.hpp"
#include "jpm/finite_difference.hpp"
#include "jpm/liouville.hpp"
#include "jpm/model.hpp"

namespace jpm::analytic {

// ------------------------------ back action ---------------------------------

enum class BackActionKind { no_click, click, lowering, subtraction };

struct BackActionOp {
    Matrix matrix;
    BackActionKind kind{BackActionKind::click};
    double time{0.0};
};

// sum_{n >= 1} |n-1><n|
inline Matrix subtraction_operator(std::size_t nc) {
    Matrix B = Matrix::Zero(nc, nc);
    for (std::size_t n = 1; n < nc; ++n) B(n - 1, n) = 1.0;
    return B;
}

inline Matrix sqrt_number(std::size_t nc) {
    Matrix S = Matrix::Zero(nc, nc);
    for (std::size_t n = 0; n < nc; ++n) S(n, n) = std::sqrt(static_cast<double>(n));
    return S;
}

// B^1(t) = -i sum sin(g t sqrt n)|n-1><n|,  B^0(t) = sum cos(g t sqrt n)|n><n|
inline BackActionOp no_tunneling_backaction(double g, double t, Outcome which, std::size_t nc) {
    if (t < 0.0) throw PreconditionError("no_tunneling_backaction: t must be >= 0");
    if (which != Outcome::ground && which != Outcome::excited) {
        throw PreconditionError("no_tunneling_backaction: outcome must be 0 or 1");
    }
    Matrix B = Matrix::Zero(nc, nc);
    for (std::size_t n = 0; n < nc; ++n) {
        const double phase = g * t * std::sqrt(static_cast<double>(n));
        if (which == Outcome::ground) {
            B(n, n) = std::cos(phase);
        } else if (n >= 1) {
            B(n - 1, n) = Complex(0.0, -std::sin(phase));
        }
    }
    return {std::move(B), which == Outcome::ground ? BackActionKind::no_click : BackActionKind::click, t};
}

// max |B^1(t) - (-i g t a)|, asserted against (sqrt(N_c) g t)^3.
inline double short_time_bound(double g, double t, std::size_t nc) {
    const double theta = std::sqrt(static_cast<double>(nc)) * g * t;
    if (t < 0.0 || theta > 0.3) {
        throw PreconditionError("short_time_bound: requires 0 <= g t sqrt(N_c) <= 0.3");
    }
    const Matrix B1 = no_tunneling_backaction(g, t, Outcome::excited, nc).matrix;
    const Matrix approx = Complex(0.0, -g * t) * lowering(nc);
    const double dev = (B1 - approx).cwiseAbs().maxCoeff();
    if (dev > theta * theta * theta) {
        throw InvariantViolation("short_time_bound: cubic bound violated");
    }
    return dev;
}

enum class IdealOperator { lowering, subtraction };

inline double ideal_beta(IdealOperator kind, std::size_t j, std::size_t k) {
    if (j < 1 || k < 1) throw PreconditionError("ideal_beta: j, k must be >= 1");
    return kind == IdealOperator::lowering ? std::sqrt(static_cast<double>(j * k)) : 1.0;
}

// ---------------------------- strong dephasing ------------------------------

// Incoherent capture rate n -> n-1 photons into the excited detector, 4 n g^2 T2.
inline double capture_rate(double g, double t2_inv, std::size_t n) {
    if (!(t2_inv > 0.0)) throw PreconditionError("capture_rate: requires finite T2");
    return 4.0 * static_cast<double>(n) * g * g / t2_inv;
}

struct LowT2Params {
    std::size_t n{1};
    double gamma1{1.0};
    double gamma2{1.0};   // (2g)^2 T2
    double s_plus{0.0};
    double s_minus{0.0};
    bool degenerate{false};

    static LowT2Params make(std::size_t n, double gamma1, double gamma2) {
        if (n < 1) throw PreconditionError("LowT2Params: n must be >= 1");
        if (!(gamma1 > 0.0) || !(gamma2 > 0.0) || !std::isfinite(gamma1) || !std::isfinite(gamma2)) {
            throw PreconditionError("LowT2Params: rates must be positive and finite");
        }
        LowT2Params p;
        p.n = n;
        p.gamma1 = gamma1;
        p.gamma2 = gamma2;
        const double capture = gamma2 * static_cast<double>(n);
        const double disc = std::hypot(gamma1, 2.0 * capture);
        p.s_minus = -0.5 * (gamma1 + 2.0 * capture + disc);
        p.s_plus = gamma1 * capture / p.s_minus;   // product of roots, no cancellation
        p.degenerate = std::abs(p.s_plus - p.s_minus) < 1e-12 * std::abs(p.s_plus);
        return p;
    }

    static LowT2Params from_model(const ModelParams& m, std::size_t n) {
        if (!(m.t2_inv > 0.0)) throw PreconditionError("LowT2Params: model needs finite T2");
        return make(n, m.gamma1, 4.0 * m.g * m.g / m.t2_inv);
    }

    double capture() const noexcept { return gamma2 * static_cast<double>(n); }
};

inline double pauli_detection_probability(const LowT2Params& p, double t) {
    const double c = p.gamma1 * p.capture();
    if (t < 0.0) throw PreconditionError("pauli_detection_probability: t must be >= 0");
    if (p.degenerate) {
        const double s = p.s_plus;
        return 1.0 - (1.0 - s * t) * std::exp(s * t) * (c / (s * s));
    }
    return 1.0 + c / (p.s_plus - p.s_minus) *
                     (std::exp(p.s_plus * t) / p.s_plus - std::exp(p.s_minus * t) / p.s_minus);
}

struct PauliPopulations {
    double ground{1.0};    // P_{n,0}
    double excited{0.0};   // P_{n-1,1}
    double measured{0.0};  // P_{n-1,m}
};

// Solution of the three Pauli rate equations from the 2x2 eigen-decomposition.
inline PauliPopulations pauli_populations(const LowT2Params& p, double t) {
    const double k = p.capture();
    const double ep = std::exp(p.s_plus * t);
    const double em = std::exp(p.s_minus * t);
    const double gap = p.s_plus - p.s_minus;
    PauliPopulations out;
    if (p.degenerate) {
        const double s = p.s_plus;
        out.ground = (1.0 + (s + k) * t) * std::exp(s * t);
        out.excited = k * t * std::exp(s * t);
    } else {
        out.ground = ((-k - p.s_minus) * ep + (p.s_plus + k) * em) / gap;
        out.excited = k * (ep - em) / gap;
    }
    out.measured = 1.0 - out.ground - out.excited;
    return out;
}

enum class Regime { tunneling_limited, capture_limited };

inline double regime_ratio(const LowT2Params& p, Regime r) {
    return r == Regime::tunneling_limited ? p.gamma1 / p.capture() : p.capture() / p.gamma1;
}

inline double limiting_regime(const LowT2Params& p, double t, Regime r, double max_ratio = 0.01) {
    if (regime_ratio(p, r) > max_ratio * (1.0 + 1e-12)) {
        throw RegimeViolation(std::string("limiting_regime: ratio ") + std::to_string(regime_ratio(p, r)) +
                              " outside declared regime");
    }
    return r == Regime::tunneling_limited ? -std::expm1(-0.5 * p.gamma1 * t) : -std::expm1(-p.capture() * t);
}

// Sup over `times` of |limiting form - Pauli solution|; asserted <= 5 x ratio.
inline double limiting_regime_gap(const LowT2Params& p, Regime r, const std::vector<double>& times,
                                  double max_ratio = 0.01) {
    double gap = 0.0;
    for (double t : times) gap = std::max(gap, std::abs(limiting_regime(p, t, r, max_ratio) - pauli_detection_probability(p, t)));
    if (gap > 5.0 * regime_ratio(p, r)) {
        throw InvariantViolation("limiting_regime_gap: gap " + std::to_string(gap) + " exceeds 5 x ratio");
    }
    return gap;
}

// ------------------------------ Laplace domain ------------------------------

// X(s) from the strong-dephasing quartic, transcribed as printed. It is
// proportional to x0 = <n|rho11(0)|n>, which vanishes for a detector starting in |0>.
inline Complex laplace_X(Complex s, std::size_t n, double x0, double g, double gamma1, double kappa2) {
    const double np1 = static_cast<double>(n) + 1.0;
    const Complex s2 = s * s;
    const Complex den = s2 * s2 + kappa2 * s2 * s + 0.25 * (kappa2 * kappa2 * s2 + kappa2 * kappa2 * gamma1 * s) +
                        kappa2 * g * g * gamma1 * np1;
    const double mag = std::norm(s2) + kappa2 * std::abs(s2 * s) + 0.25 * kappa2 * kappa2 * (std::abs(s2) + gamma1 * std::abs(s)) +
                       kappa2 * g * g * gamma1 * np1;
    if (std::abs(den) <= 1e-14 * mag) throw PoleEvaluation("laplace_X: s is a pole");
    return 2.0 * g * g * np1 * x0 * (s + 0.5 * (kappa2 - 3.0 * gamma1)) / den;
}

namespace detail {
inline void check_pole(Complex s, const LowT2Params& p, const char* who) {
    const double scale = std::max({std::abs(s), std::abs(p.s_minus), 1e-300});
    if (std::abs(s) <= 1e-14 * scale || std::abs(s - p.s_plus) <= 1e-14 * scale ||
        std::abs(s - p.s_minus) <= 1e-14 * scale) {
        throw PoleEvaluation(std::string(who) + ": s is a pole");
    }
}
} // namespace detail

// Rational form n g1 g2 / (s (s^2 + s (2 n g2 + g1) + n g1 g2)).
inline Complex laplace_Pm(Complex s, const LowT2Params& p) {
    detail::check_pole(s, p, "laplace_Pm");
    const double c = p.gamma1 * p.capture();
    return c / (s * (s * s + s * (2.0 * p.capture() + p.gamma1) + c));
}

// Partial-fraction form 1/s + c/(s+ - s-) (1/(s+ (s - s+)) - 1/(s- (s - s-))).
inline Complex laplace_Pm_partial(Complex s, const LowT2Params& p) {
    detail::check_pole(s, p, "laplace_Pm_partial");
    const double c = p.gamma1 * p.capture();
    return 1.0 / s + c / (p.s_plus - p.s_minus) *
                         (1.0 / (p.s_plus * (s - p.s_plus)) - 1.0 / (p.s_minus * (s - p.s_minus)));
}

// ------------------------------ ODE residuals -------------------------------

enum class ResidualEquation {
    block_system,       // four first-order block equations
    operator_quartic,   // fourth-order equation for rho11
    scalar_quartic,     // same, projected on <n|.|n>
    reduced_quartic     // leading terms in 1/T2 only (diagnostic)
};

inline std::string to_string(ResidualEquation e) {
    switch (e) {
        case ResidualEquation::block_system: return "block_system";
        case ResidualEquation::operator_quartic: return "operator_quartic";
        case ResidualEquation::scalar_quartic: return "scalar_quartic";
        case ResidualEquation::reduced_quartic: return "reduced_quartic";
    }
    return "?";
}

struct ResidualReport {
    ResidualEquation which{ResidualEquation::block_system};
    double max_abs_residual{0.0};
    double scale{0.0};              // largest single term magnitude
    double relative_residual{0.0};
    double stencil_error{0.0};      // |order-8 - order-6| estimate, absolute
    std::size_t points{0};
};

struct ResidualModel {
    double g{1.0};
    double gamma1{1.0};
    double kappa2{0.0};

    static ResidualModel from(const ModelParams& p) {
        if (p.gamma0 != 0.0 || p.t1_inv != 0.0) {
            throw PreconditionError("ode_residual: the reduced equations need gamma0 = 0 and 1/T1 = 0");
        }
        return {p.g, p.gamma1, p.t2_inv};
    }
};

// Block series rho_ij(t) = <i|xi(t)|j>_d on a uniform grid of spacing h.
struct BlockSeries {
    double h{0.0};
    std::vector<Matrix> r00, r01, r10, r11;

    std::size_t size() const noexcept { return r11.size(); }

    static BlockSeries from_states(const std::vector<JointDensity>& states, double h) {
        BlockSeries s;
        s.h = h;
        for (const auto& xi : states) {
            s.r00.push_back(xi.block(Detector::ground, Detector::ground));
            s.r01.push_back(xi.block(Detector::ground, Detector::excited));
            s.r10.push_back(xi.block(Detector::excited, Detector::ground));
            s.r11.push_back(xi.block(Detector::excited, Detector::excited));
        }
        return s;
    }
};

namespace detail {

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }
inline double max_abs(double v) { return std::abs(v); }
inline double max_abs(Complex v) { return std::abs(v); }

// Precomputed centered stencils for derivative orders 1..4 at accuracy 6 and 8.
struct StencilSet {
    fd::Stencil st[5][2];
    int half_width{0};

    StencilSet() {
        for (std::size_t d = 1; d <= 4; ++d) {
            st[d][0] = fd::central_stencil(d, 6);
            st[d][1] = fd::central_stencil(d, 8);
            half_width = std::max({half_width, st[d][0].half_width, st[d][1].half_width});
        }
    }
};

template <typename T>
T deriv(const std::vector<T>& series, std::size_t i, const fd::Stencil& st, double h, std::size_t order) {
    return fd::apply_stencil(st, series, i) * (1.0 / std::pow(h, static_cast<double>(order)));
}

// Evaluates `equations(i, accuracy_slot)` (each equation a list of additive terms)
// at every interior point with both stencil accuracies.
template <typename T>
ResidualReport scan(ResidualEquation which, std::size_t n, const StencilSet& set, double tol,
                    const std::function<std::vector<std::vector<T>>(std::size_t, int)>& equations) {
    ResidualReport rep;
    rep.which = which;
    const auto hw = static_cast<std::size_t>(set.half_width);
    if (n < 2 * hw + 1) throw GridTooCoarse("ode_residual: series too short for the stencil");
    for (std::size_t i = hw; i + hw < n; ++i) {
        const auto hi = equations(i, 1);
        const auto lo = equations(i, 0);
        for (std::size_t e = 0; e < hi.size(); ++e) {
            T sum_hi = hi[e].front() * 0.0;
            T sum_lo = sum_hi;
            for (const auto& term : hi[e]) {
                rep.scale = std::max(rep.scale, max_abs(term));
                sum_hi = sum_hi + term;
            }
            for (const auto& term : lo[e]) sum_lo = sum_lo + term;
            rep.max_abs_residual = std::max(rep.max_abs_residual, max_abs(sum_hi));
            rep.stencil_error = std::max(rep.stencil_error, max_abs(T(sum_hi - sum_lo)));
        }
        ++rep.points;
    }
    rep.relative_residual = rep.scale > 0.0 ? rep.max_abs_residual / rep.scale : 0.0;
    if (rep.scale > 0.0 && rep.stencil_error > 0.1 * tol * rep.scale) {
        throw GridTooCoarse("ode_residual: stencil error estimate " + std::to_string(rep.stencil_error / rep.scale) +
                            " (relative) exceeds 0.1 x tolerance");
    }
    return rep;
}

struct QuarticCoefficients {
    double c3, c2, c1, c0;
};

// Scalar quartic for x(t) = <n|rho11|n>, coupling to <n+1|rho00|n+1>.
inline QuarticCoefficients scalar_quartic(const ResidualModel& m, double n) {
    const double g2 = m.g * m.g, g4 = g2 * g2;
    const double gm = 0.5 * (m.kappa2 + m.gamma1);
    QuarticCoefficients q;
    q.c3 = m.kappa2 + 2.0 * m.gamma1;
    q.c2 = gm * 0.5 * (m.kappa2 + 5.0 * m.gamma1) + 4.0 * g2 * n + 4.0 * g2;
    q.c1 = (m.kappa2 + 2.0 * m.gamma1) * (2.0 * g2 + 2.0 * g2 * n) + m.gamma1 * gm * gm;
    q.c0 = 4.0 * g4 + 4.0 * g4 * n * n + 2.0 * g2 * m.gamma1 * gm + 8.0 * g4 * n + 2.0 * g2 * n * m.gamma1 * gm -
           4.0 * g4 * (n + 1.0) * (n + 1.0);
    return q;
}

inline QuarticCoefficients reduced_quartic(const ResidualModel& m, double n) {
    const double k = m.kappa2;
    return {k, 0.25 * k * k, 0.25 * m.gamma1 * k * k, k * m.g * m.g * m.gamma1 * (1.0 + n)};
}

} // namespace detail

// Four first-order block equations for (rho11, rho00, rho01, rho10).
inline ResidualReport ode_residual(const BlockSeries& s, const ResidualModel& m, double tol = 1e-3) {
    static const detail::StencilSet set;
    const std::size_t nc = s.r11.empty() ? 0 : static_cast<std::size_t>(s.r11.front().rows());
    const Matrix a = lowering(nc);
    const Matrix ad = a.adjoint();
    const Complex ig(0.0, m.g);
    const double gm = 0.5 * (m.gamma1 + m.kappa2);
    auto eqs = [&](std::size_t i, int slot) {
        auto d = [&](const std::vector<Matrix>& x) { return detail::deriv(x, i, set.st[1][slot], s.h, 1); };
        const Matrix& r00 = s.r00[i];
        const Matrix& r01 = s.r01[i];
        const Matrix& r10 = s.r10[i];
        const Matrix& r11 = s.r11[i];
        std::vector<std::vector<Matrix>> out(4);
        out[0] = {d(s.r11), -ig * (r10 * ad), ig * (a * r01), m.gamma1 * r11};
        out[1] = {d(s.r00), -ig * (r01 * a), ig * (ad * r10)};
        out[2] = {d(s.r01), -ig * (r00 * ad), ig * (ad * r11), gm * r01};
        out[3] = {d(s.r10), -ig * (r11 * a), ig * (a * r00), gm * r10};
        return out;
    };
    return detail::scan<Matrix>(ResidualEquation::block_system, s.size(), set, tol, eqs);
}

// Fourth-order operator equation for rho11 with D0[f] = g^2 {a^dag a, f}.
inline ResidualReport ode_residual_operator(const std::vector<Matrix>& r11, double h, const ResidualModel& m,
                                            double tol = 1e-3) {
    static const detail::StencilSet set;
    const std::size_t nc = r11.empty() ? 0 : static_cast<std::size_t>(r11.front().rows());
    const Matrix N = number_operator(nc);
    const Matrix A = lowering(nc) * lowering(nc).adjoint();
    const double g2 = m.g * m.g, g4 = g2 * g2;
    const double gm = 0.5 * (m.kappa2 + m.gamma1);
    const double c3 = m.kappa2 + 2.0 * m.gamma1;
    auto D0 = [&](const Matrix& f) -> Matrix { return g2 * (N * f + f * N); };
    auto eqs = [&](std::size_t i, int slot) {
        const Matrix d1 = detail::deriv(r11, i, set.st[1][slot], h, 1);
        const Matrix d2 = detail::deriv(r11, i, set.st[2][slot], h, 2);
        const Matrix d3 = detail::deriv(r11, i, set.st[3][slot], h, 3);
        const Matrix d4 = detail::deriv(r11, i, set.st[4][slot], h, 4);
        const Matrix& x = r11[i];
        std::vector<std::vector<Matrix>> out(1);
        out[0] = {d4,
                  c3 * d3,
                  (gm * 0.5 * (m.kappa2 + 5.0 * m.gamma1) + 4.0 * g2) * d2,
                  2.0 * D0(d2),
                  c3 * (2.0 * g2 * d1 + D0(d1)),
                  m.gamma1 * gm * gm * d1,
                  (4.0 * g4 + 2.0 * g2 * m.gamma1 * gm) * x,
                  D0(D0(x)),
                  4.0 * g2 * D0(x),
                  m.gamma1 * gm * D0(x),
                  -4.0 * g4 * (A * x * A)};
        return out;
    };
    return detail::scan<Matrix>(ResidualEquation::operator_quartic, r11.size(), set, tol, eqs);
}

// Scalar quartic (full or reduced) for x(t) = <n|rho11(t)|n>.
inline ResidualReport ode_residual_scalar(const std::vector<double>& x, double h, std::size_t n,
                                          const ResidualModel& m, ResidualEquation which, double tol = 1e-3) {
    static const detail::StencilSet set;
    if (which != ResidualEquation::scalar_quartic && which != ResidualEquation::reduced_quartic) {
        throw PreconditionError("ode_residual_scalar: scalar equation required");
    }
    const auto q = which == ResidualEquation::scalar_quartic ? detail::scalar_quartic(m, static_cast<double>(n))
                                                             : detail::reduced_quartic(m, static_cast<double>(n));
    auto eqs = [&](std::size_t i, int slot) {
        std::vector<std::vector<double>> out(1);
        out[0] = {detail::deriv(x, i, set.st[4][slot], h, 4), q.c3 * detail::deriv(x, i, set.st[3][slot], h, 3),
                  q.c2 * detail::deriv(x, i, set.st[2][slot], h, 2), q.c1 * detail::deriv(x, i, set.st[1][slot], h, 1),
                  q.c0 * x[i]};
        return out;
    };
    if (which == ResidualEquation::reduced_quartic) {
        // diagnostic only: no stencil-accuracy gate
        return detail::scan<double>(which, x.size(), set, std::numeric_limits<double>::infinity(), eqs);
    }
    return detail::scan<double>(which, x.size(), set, tol, eqs);
}

// Simulates `rho_c` on successively doubled grids until the stencil error is
// small enough, then evaluates the requested equation. For the scalar forms
// `n` is the cavity index of x(t) = <n|rho11|n>.
inline ResidualReport simulated_residual(const ModelParams& p, const CavityDensity& rho_c, ResidualEquation which,
                                         double t_max, std::size_t steps = 400, std::size_t n = 0,
                                         double tol = 1e-3, int max_doublings = 6) {
    const ResidualModel m = ResidualModel::from(p);
    const Superoperator S = assemble_superoperator(p);
    const JointDensity xi0 = initial_state(rho_c);
    for (int attempt = 0;; ++attempt) {
        const TimeGrid grid{t_max, steps};
        const Propagator prop(S, grid);
        const auto states = evolve_state(prop, xi0);
        try {
            switch (which) {
                case ResidualEquation::block_system:
                    return ode_residual(BlockSeries::from_states(states, grid.spacing()), m, tol);
                case ResidualEquation::operator_quartic: {
                    std::vector<Matrix> r11;
                    for (const auto& xi : states) r11.push_back(xi.block(Detector::excited, Detector::excited));
                    return ode_residual_operator(r11, grid.spacing(), m, tol);
                }
                case ResidualEquation::scalar_quartic:
                case ResidualEquation::reduced_quartic: {
                    if (n >= p.n_cutoff) throw PreconditionError("simulated_residual: n out of range");
                    std::vector<double> x;
                    for (const auto& xi : states) x.push_back(xi.matrix(JointIndex{n, Detector::excited}.flat(), JointIndex{n, Detector::excited}.flat()).real());
                    return ode_residual_scalar(x, grid.spacing(), n, m, which, tol);
                }
            }
        } catch (const GridTooCoarse&) {
            if (attempt >= max_doublings) throw;
        }
        steps = 2 * steps - 1;
    }
}

} // namespace jpm::analytic
