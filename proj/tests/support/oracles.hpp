// oracles.hpp: Independent reference computations used only by the tests
//
// Nothing here calls into the library's propagation path: matrix exponentials
// are power series, master equations are integrated with RK4 on the density
// matrix itself, inverse Laplace transforms use a fixed Talbot contour.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

// exp(A) by scaling, Taylor series with 1e-16 term cutoff, squaring.
inline Matrix taylor_expm(const Matrix& A) {
    const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    double scale = 1.0;
    while (norm * scale > 0.5) {
        scale *= 0.5;
        ++squarings;
    }
    const Matrix X = A * scale;
    Matrix term = Matrix::Identity(A.rows(), A.cols());
    Matrix sum = term;
    for (int k = 1; k < 200; ++k) {
        term = (term * X) / static_cast<double>(k);
        sum += term;
        if (term.cwiseAbs().maxCoeff() < 1e-16 * sum.cwiseAbs().maxCoeff()) break;
    }
    for (int i = 0; i < squarings; ++i) sum = (sum * sum).eval();
    return sum;
}

// Lindblad right-hand side evaluated on the matrix, no vectorization.
inline Matrix lindblad_rhs(const Matrix& H, const std::vector<Matrix>& jumps, const Matrix& rho) {
    const Complex I(0.0, 1.0);
    Matrix d = -I * (H * rho - rho * H);
    for (const auto& J : jumps) {
        const Matrix JdJ = J.adjoint() * J;
        d += J * rho * J.adjoint() - 0.5 * (JdJ * rho + rho * JdJ);
    }
    return d;
}

// Classic RK4 on the density matrix with `substeps` per output interval.
inline std::vector<Matrix> rk4_evolve(const Matrix& H, const std::vector<Matrix>& jumps, const Matrix& rho0,
                                      const std::vector<double>& times, int substeps_per_unit = 400) {
    std::vector<Matrix> out;
    Matrix rho = rho0;
    double t = 0.0;
    for (double target : times) {
        const int n = std::max(1, static_cast<int>(std::ceil((target - t) * substeps_per_unit)));
        const double h = (target - t) / n;
        for (int i = 0; i < n; ++i) {
            const Matrix k1 = lindblad_rhs(H, jumps, rho);
            const Matrix k2 = lindblad_rhs(H, jumps, rho + 0.5 * h * k1);
            const Matrix k3 = lindblad_rhs(H, jumps, rho + 0.5 * h * k2);
            const Matrix k4 = lindblad_rhs(H, jumps, rho + h * k3);
            rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t = target;
        out.push_back(rho);
    }
    return out;
}

// Fixed Talbot inversion (Abate-Valko) with M nodes.
inline double talbot_inverse(const std::function<Complex(Complex)>& F, double t, int M = 32) {
    const double r = 2.0 * M / (5.0 * t);
    double acc = 0.5 * std::real(F(Complex(r, 0.0)) * std::exp(r * t));
    for (int k = 1; k < M; ++k) {
        const double theta = k * M_PI / M;
        const double cot = std::cos(theta) / std::sin(theta);
        const Complex s(r * theta * cot, r * theta);
        const double sigma = theta + (theta * cot - 1.0) * cot;
        acc += std::real(std::exp(t * s) * F(s) * Complex(1.0, sigma));
    }
    return r / M * acc;
}

// Random channel on dimension d from K Kraus operators (columns of a random isometry).
inline std::vector<Matrix> random_kraus(std::size_t d, std::size_t K, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    Matrix G(static_cast<Eigen::Index>(K * d), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < G.rows(); ++i)
        for (Eigen::Index j = 0; j < G.cols(); ++j) G(i, j) = Complex(N(rng), N(rng));
    Eigen::HouseholderQR<Matrix> qr(G);
    const Matrix Q = qr.householderQ() * Matrix::Identity(G.rows(), G.cols());
    std::vector<Matrix> ks;
    for (std::size_t k = 0; k < K; ++k) ks.push_back(Q.block(static_cast<Eigen::Index>(k * d), 0, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
    return ks;
}

// Row-major vec: vec(A X B)(D a + b) uses (A (x) B^T); channel sum_k A X A^dag.
inline Matrix kraus_liouville(const std::vector<Matrix>& ks) {
    const auto d = ks.front().rows();
    Matrix T = Matrix::Zero(d * d, d * d);
    for (const auto& A : ks)
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = 0; b < d; ++b)
                for (Eigen::Index c = 0; c < d; ++c)
                    for (Eigen::Index e = 0; e < d; ++e) T(a * d + b, c * d + e) += A(a, c) * std::conj(A(b, e));
    return T;
}

inline Matrix random_density(std::size_t d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    Matrix G(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < G.rows(); ++i)
        for (Eigen::Index j = 0; j < G.cols(); ++j) G(i, j) = Complex(N(rng), N(rng));
    Matrix rho = G * G.adjoint();
    return rho / rho.trace().real();
}

inline Matrix random_hermitian(std::size_t d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    Matrix G(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < G.rows(); ++i)
        for (Eigen::Index j = 0; j < G.cols(); ++j) G(i, j) = Complex(N(rng), N(rng));
    return 0.5 * (G + G.adjoint());
}

// Single excitation, detector starting in |0>, with tunneling gamma1 out of |1>:
//   c0' = -i g c1,  c1' = -i g c0 - (gamma1 / 2) c1.
struct ThreeLevel {
    double p0, p1, pm;
};

inline ThreeLevel three_level_fock1(double g, double gamma1, double t) {
    const Complex w = std::sqrt(Complex(g * g - gamma1 * gamma1 / 16.0, 0.0));
    const double decay = std::exp(-gamma1 * t / 4.0);
    Complex c0, c1;
    if (std::abs(w) < 1e-12) {
        c0 = decay * (1.0 + gamma1 * t / 4.0);
        c1 = Complex(0.0, -g * t) * decay;
    } else {
        c0 = decay * (std::cos(w * t) + gamma1 / (4.0 * w) * std::sin(w * t));
        c1 = Complex(0.0, -g) / w * decay * std::sin(w * t);
    }
    const double p0 = std::norm(c0), p1 = std::norm(c1);
    return {p0, p1, 1.0 - p0 - p1};
}

// |1,0> -> |0,1> amplitude rate equations of the strong-dephasing limit, solved by RK4:
//   P0' = -k P0 + k P1,  P1' = k P0 - (k + gamma1) P1,  Pm' = gamma1 P1,  k = gamma2 n.
inline double pauli_rk4(double k, double gamma1, double t, int steps = 20000) {
    double p0 = 1.0, p1 = 0.0, pm = 0.0;
    const double h = t / steps;
    auto f = [&](double a, double b) { return std::array<double, 3>{-k * a + k * b, k * a - (k + gamma1) * b, gamma1 * b}; };
    for (int i = 0; i < steps; ++i) {
        const auto k1 = f(p0, p1);
        const auto k2 = f(p0 + 0.5 * h * k1[0], p1 + 0.5 * h * k1[1]);
        const auto k3 = f(p0 + 0.5 * h * k2[0], p1 + 0.5 * h * k2[1]);
        const auto k4 = f(p0 + h * k3[0], p1 + h * k3[1]);
        p0 += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
        p1 += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
        pm += h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
    }
    return pm;
}

} // namespace oracle
