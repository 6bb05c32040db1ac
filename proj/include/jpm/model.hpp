// model.hpp: Truncated cavity ⊗ three-level detector space, operators and states
//
// Joint basis ordering: detector index is the fast index, flat = 3*n + d with
// d = 0 (ground), 1 (excited), 2 (measured). Units: hbar = 1, rates usually in
// units of gamma1.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "jpm/errors.hpp"

namespace jpm {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr std::size_t kDetectorLevels = 3;

enum class Detector : std::size_t { ground = 0, excited = 1, measured = 2 };

inline constexpr std::size_t level(Detector d) noexcept { return static_cast<std::size_t>(d); }

struct ModelParams {
    double g{1.0};          // cavity-detector coupling
    double gamma0{0.0};     // dark-count tunneling rate out of |0>
    double gamma1{1.0};     // tunneling rate out of |1>
    double t1_inv{0.0};     // 1/T1, zero means T1 = infinity
    double t2_inv{0.0};     // 1/T2 (pure dephasing), zero means T2 = infinity
    std::size_t n_cutoff{10};

    std::size_t cavity_dim() const noexcept { return n_cutoff; }
    std::size_t joint_dim() const noexcept { return kDetectorLevels * n_cutoff; }

    void validate() const {
        auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
        if (!finite_nonneg(g)) throw PreconditionError("ModelParams: g must be finite and >= 0");
        if (!finite_nonneg(gamma0) || !finite_nonneg(gamma1) || !finite_nonneg(t1_inv) ||
            !finite_nonneg(t2_inv)) {
            throw PreconditionError("ModelParams: rates must be finite and >= 0");
        }
        if (n_cutoff < 2) throw PreconditionError("ModelParams: n_cutoff must be >= 2");
    }

    bool operator==(const ModelParams&) const = default;
};

struct JointIndex {
    std::size_t n{0};
    Detector d{Detector::ground};

    std::size_t flat() const noexcept { return kDetectorLevels * n + level(d); }

    static JointIndex from_flat(std::size_t flat) noexcept {
        return {flat / kDetectorLevels, static_cast<Detector>(flat % kDetectorLevels)};
    }
};

// ------------------------------ cavity operators ----------------------------

inline Matrix lowering(std::size_t nc) {
    Matrix a = Matrix::Zero(nc, nc);
    for (std::size_t n = 1; n < nc; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline Matrix number_operator(std::size_t nc) {
    Matrix N = Matrix::Zero(nc, nc);
    for (std::size_t n = 0; n < nc; ++n) N(n, n) = static_cast<double>(n);
    return N;
}

// |to><from| on the detector
inline Matrix detector_transition(Detector to, Detector from) {
    Matrix m = Matrix::Zero(kDetectorLevels, kDetectorLevels);
    m(level(to), level(from)) = 1.0;
    return m;
}

inline Matrix embed(const Matrix& cavity, const Matrix& detector) {
    return Eigen::kroneckerProduct(cavity, detector).eval();
}

inline Matrix embed_detector(const Matrix& detector, std::size_t nc) {
    return embed(Matrix::Identity(nc, nc), detector);
}

// ------------------------------ joint operators -----------------------------

// g (a^dag sigma^- + a sigma^+)
inline Matrix build_hamiltonian(const ModelParams& p) {
    p.validate();
    const std::size_t nc = p.cavity_dim();
    const Matrix a = lowering(nc);
    const Matrix sigma_minus = detector_transition(Detector::ground, Detector::excited);
    const Matrix sigma_plus = detector_transition(Detector::excited, Detector::ground);
    return p.g * (embed(a.adjoint(), sigma_minus) + embed(a, sigma_plus));
}

// N (x) I + I (x) |1><1|
inline Matrix total_excitation(std::size_t nc) {
    return embed(number_operator(nc), Matrix::Identity(kDetectorLevels, kDetectorLevels)) +
           embed_detector(detector_transition(Detector::excited, Detector::excited), nc);
}

struct JumpOperator {
    std::string label;
    double rate{0.0};
    Matrix matrix;   // already scaled by sqrt(rate)
};

// Only processes with nonzero rate are returned, in the order J1, J0, J2, J3.
inline std::vector<JumpOperator> build_jump_operators(const ModelParams& p) {
    p.validate();
    const std::size_t nc = p.cavity_dim();
    std::vector<JumpOperator> ops;
    auto add = [&](const char* label, double rate, Detector to, Detector from) {
        if (rate == 0.0) return;
        ops.push_back({label, rate, std::sqrt(rate) * embed_detector(detector_transition(to, from), nc)});
    };
    add("tunnel_excited", p.gamma1, Detector::measured, Detector::excited);
    add("dark_count", p.gamma0, Detector::measured, Detector::ground);
    add("dephasing", p.t2_inv, Detector::excited, Detector::excited);
    add("relaxation", p.t1_inv, Detector::ground, Detector::excited);
    return ops;
}

// ------------------------------ density matrices ----------------------------

struct DensityTolerances {
    double hermitian{1e-12};
    double psd{1e-10};
    double trace{1e-10};
};

// Throws InvariantViolation with `what` prefix on failure.
inline void check_density(const Matrix& rho, bool normalized, const std::string& what,
                          const DensityTolerances& tol = {}) {
    if (rho.rows() != rho.cols() || rho.rows() == 0) {
        throw InvariantViolation(what + ": density matrix must be square and non-empty");
    }
    if (!rho.allFinite()) throw InvariantViolation(what + ": non-finite entries");
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (herm > tol.hermitian) {
        throw InvariantViolation(what + ": not Hermitian (deviation " + std::to_string(herm) + ")");
    }
    const double tr = rho.trace().real();
    if (normalized ? std::abs(tr - 1.0) > tol.trace : (tr < -tol.trace || tr > 1.0 + tol.trace)) {
        throw InvariantViolation(what + ": trace " + std::to_string(tr) + " out of range");
    }
    const Matrix herm_part = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm_part, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -tol.psd) {
        throw InvariantViolation(what + ": not positive semidefinite (min eigenvalue " +
                                 std::to_string(min_eig) + ")");
    }
}

struct CavityDensity {
    Matrix matrix;
    bool normalized{true};

    std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
    double trace() const { return matrix.trace().real(); }
    void validate(const DensityTolerances& tol = {}) const {
        check_density(matrix, normalized, "CavityDensity", tol);
    }
};

struct JointDensity {
    Matrix matrix;
    bool normalized{true};

    std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
    std::size_t cavity_dim() const noexcept { return dim() / kDetectorLevels; }
    double trace() const { return matrix.trace().real(); }
    void validate(const DensityTolerances& tol = {}) const {
        check_density(matrix, normalized, "JointDensity", tol);
    }

    // <i|_d xi |j>_d as a cavity matrix
    Matrix block(Detector i, Detector j) const {
        const std::size_t nc = cavity_dim();
        Matrix out(nc, nc);
        for (std::size_t a = 0; a < nc; ++a)
            for (std::size_t b = 0; b < nc; ++b)
                out(a, b) = matrix(JointIndex{a, i}.flat(), JointIndex{b, j}.flat());
        return out;
    }

    double population(Detector s) const { return block(s, s).trace().real(); }
};

inline CavityDensity fock_state(std::size_t n, std::size_t nc) {
    if (n >= nc) throw PreconditionError("fock_state: n must be < n_cutoff");
    CavityDensity rho{Matrix::Zero(nc, nc), true};
    rho.matrix(n, n) = 1.0;
    return rho;
}

// Poisson tail sum_{k >= nc} |alpha|^{2k} e^{-|alpha|^2} / k!
inline double coherent_tail(Complex alpha, std::size_t nc) {
    const double mean = std::norm(alpha);
    if (mean == 0.0) return 0.0;
    // log-space first term, then forward recursion until terms are negligible
    double term = std::exp(-mean + static_cast<double>(nc) * std::log(mean) -
                           std::lgamma(static_cast<double>(nc) + 1.0));
    double tail = 0.0;
    for (std::size_t k = nc; k < nc + 10000; ++k) {
        tail += term;
        if (term < 1e-300 || (static_cast<double>(k) > mean && term < tail * 1e-17)) break;
        term *= mean / static_cast<double>(k + 1);
    }
    return tail;
}

inline CavityDensity coherent_density(Complex alpha, std::size_t nc, double tail_tol = 1e-10) {
    if (nc < 1) throw PreconditionError("coherent_density: n_cutoff must be >= 1");
    if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) {
        throw PreconditionError("coherent_density: alpha must be finite");
    }
    const double tail = coherent_tail(alpha, nc);
    if (tail > tail_tol) {
        throw TruncationError("coherent_density: Fock tail " + std::to_string(tail) +
                              " exceeds tolerance for n_cutoff = " + std::to_string(nc));
    }
    Vector amp(nc);
    Complex c = std::exp(-0.5 * std::norm(alpha));
    for (std::size_t k = 0; k < nc; ++k) {
        amp(k) = c;
        c *= alpha / std::sqrt(static_cast<double>(k + 1));
    }
    amp /= amp.norm();
    CavityDensity rho{amp * amp.adjoint(), true};
    return rho;
}

// xi(0) = rho_c (x) |0><0|_d
inline JointDensity initial_state(const CavityDensity& rho_c) {
    if (!rho_c.normalized) throw PreconditionError("initial_state: cavity state must be normalized");
    try {
        rho_c.validate();
    } catch (const InvariantViolation& e) {
        throw PreconditionError(std::string("initial_state: ") + e.what());
    }
    return {embed(rho_c.matrix, detector_transition(Detector::ground, Detector::ground)), true};
}

} // namespace jpm
