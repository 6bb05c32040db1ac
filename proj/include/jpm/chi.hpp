// chi.hpp: Process (chi) matrices, outcome-conditioned cavity channels and named elements
//
// Full chi in the standard basis E_{mu(a,b)} = |a><b|, mu(a,b) = D a + b:
//   chi_{(a,b),(c,d)} = <a| T[|b><d|] |c> = T_{(a,c),(b,d)}.
// A conditional channel for outcome s fixes the detector input to |0><0| and
// projects the output on |s><s|; its chi^s is the corresponding cavity block.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "jpm/errors.hpp"
#include "jpm/liouville.hpp"
#include "jpm/model.hpp"

namespace jpm {

enum class Outcome { ground, excited, measured, no_click };

inline std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::ground: return "0";
        case Outcome::excited: return "1";
        case Outcome::measured: return "m";
        case Outcome::no_click: return "no-click";
    }
    return "?";
}

struct ChiMatrix {
    Matrix matrix;         // D^2 x D^2
    std::size_t dim{0};    // D
    double time{0.0};

    Complex at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return matrix(vec_index(dim, a, b), vec_index(dim, c, d));
    }
};

// Pure reindexing chi_{(a,b),(c,d)} = T_{(a,c),(b,d)}; self-inverse.
inline Matrix permute_liouville_chi(const Matrix& M, std::size_t dim) {
    const std::size_t n = dim * dim;
    if (static_cast<std::size_t>(M.rows()) != n || static_cast<std::size_t>(M.cols()) != n) {
        throw PreconditionError("permute_liouville_chi: size mismatch");
    }
    Matrix out(n, n);
    for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = 0; b < dim; ++b)
            for (std::size_t c = 0; c < dim; ++c)
                for (std::size_t d = 0; d < dim; ++d)
                    out(vec_index(dim, a, b), vec_index(dim, c, d)) = M(vec_index(dim, a, c), vec_index(dim, b, d));
    return out;
}

inline ChiMatrix chi_from_map(const Matrix& T, std::size_t dim, double time = 0.0) {
    return {permute_liouville_chi(T, dim), dim, time};
}

inline Matrix map_from_chi(const ChiMatrix& chi) { return permute_liouville_chi(chi.matrix, chi.dim); }

inline ChiMatrix chi_from_propagator(const Propagator& prop, std::size_t k) {
    return chi_from_map(prop.map(k), prop.dim(), prop.time(k));
}

// Cavity superoperator for one detector outcome, row-major vectorized on the cavity.
struct ConditionalChannel {
    Outcome outcome{Outcome::measured};
    Matrix map;                  // N_c^2 x N_c^2
    std::size_t cavity_dim{0};
    double time{0.0};

    Matrix apply(const Matrix& rho_c) const { return unvectorize(map * vectorize(rho_c), cavity_dim); }

    double probability_of(const CavityDensity& rho_c) const { return apply(rho_c.matrix).trace().real(); }

    // chi^s_{(a,b),(c,d)}: coefficient of |a><c| in the image of |b><d|
    Complex chi(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return map(vec_index(cavity_dim, a, c), vec_index(cavity_dim, b, d));
    }

    Matrix chi_matrix() const { return permute_liouville_chi(map, cavity_dim); }
};

namespace detail {

inline std::vector<std::size_t> outcome_rows(std::size_t nc, Detector s) {
    const std::size_t D = kDetectorLevels * nc;
    std::vector<std::size_t> rows;
    rows.reserve(nc * nc);
    for (std::size_t a = 0; a < nc; ++a)
        for (std::size_t c = 0; c < nc; ++c) rows.push_back(vec_index(D, JointIndex{a, s}.flat(), JointIndex{c, s}.flat()));
    return rows;
}

inline std::vector<Detector> outcome_levels(Outcome o) {
    switch (o) {
        case Outcome::ground: return {Detector::ground};
        case Outcome::excited: return {Detector::excited};
        case Outcome::measured: return {Detector::measured};
        case Outcome::no_click: return {Detector::ground, Detector::excited};
    }
    return {};
}

} // namespace detail

inline ConditionalChannel conditional_channel(const ChiMatrix& chi, Outcome outcome) {
    const std::size_t D = chi.dim;
    if (D % kDetectorLevels != 0) throw PreconditionError("conditional_channel: dimension not 3*N_c");
    const std::size_t nc = D / kDetectorLevels;
    ConditionalChannel ch{outcome, Matrix::Zero(nc * nc, nc * nc), nc, chi.time};
    for (Detector s : detail::outcome_levels(outcome)) {
        for (std::size_t a = 0; a < nc; ++a)
            for (std::size_t b = 0; b < nc; ++b)
                for (std::size_t c = 0; c < nc; ++c)
                    for (std::size_t d = 0; d < nc; ++d)
                        ch.map(vec_index(nc, a, c), vec_index(nc, b, d)) +=
                            chi.at(JointIndex{a, s}.flat(), JointIndex{b, Detector::ground}.flat(),
                                   JointIndex{c, s}.flat(), JointIndex{d, Detector::ground}.flat());
    }
    return ch;
}

// Same channel read directly from the propagator without materializing chi.
inline ConditionalChannel conditional_channel(const Propagator& prop, std::size_t k, Outcome outcome) {
    const std::size_t nc = prop.dim() / kDetectorLevels;
    const auto cols = detail::outcome_rows(nc, Detector::ground);
    ConditionalChannel ch{outcome, Matrix::Zero(nc * nc, nc * nc), nc, prop.time(k)};
    for (Detector s : detail::outcome_levels(outcome)) {
        const auto rows = detail::outcome_rows(nc, s);
        ch.map += prop.restricted(k, rows, cols);
    }
    return ch;
}

inline CavityDensity normalize_conditioned(const ConditionalChannel& ch, const CavityDensity& rho_c,
                                           double p_floor = 1e-12) {
    Matrix out = ch.apply(rho_c.matrix);
    const double p = out.trace().real();
    if (!(p >= p_floor)) {
        throw ZeroProbabilityOutcome("normalize_conditioned: outcome " + to_string(ch.outcome) +
                                     " has probability " + std::to_string(p));
    }
    out /= p;
    out = 0.5 * (out + out.adjoint()).eval();
    return {std::move(out), true};
}

// ------------------------------ named elements ------------------------------

// Shifts s = b - a = d - c allowed in the detection-conditioned chi:
// s = 1 always (beta), s >= 2 with relaxation (beta^(r), r = s - 1), s = 0 with dark counts.
struct SelectionRule {
    bool relaxation{false};
    bool dark_counts{false};

    static SelectionRule for_model(const ModelParams& p) { return {p.t1_inv > 0.0, p.gamma0 > 0.0}; }

    bool allows(long shift) const {
        if (shift == 1) return true;
        if (shift == 0) return dark_counts;
        if (shift >= 2) return relaxation;
        return false;
    }
};

struct ChiElements {
    double time{0.0};
    std::size_t cavity_dim{0};
    // beta_r[r](j-1, k-1) = chi^m_{j-1, j+r, k-1, k+r}; zero where j+r or k+r >= N_c
    std::vector<Matrix> beta_r;
    // dark(j, k) = chi^m_{j, j, k, k}
    Matrix dark;
    // max modulus on each shift s = 0..N_c-1 (equal-shift entries only)
    std::vector<double> shift_max;
    double residual_offrule{0.0};

    const Matrix& beta() const { return beta_r.front(); }
    Complex alpha(std::size_t j, std::size_t r = 0) const { return beta_r.at(r)(j - 1, j - 1); }
};

inline ChiElements extract_elements(const ConditionalChannel& measured, const SelectionRule& rule) {
    const std::size_t nc = measured.cavity_dim;
    ChiElements el;
    el.time = measured.time;
    el.cavity_dim = nc;
    el.beta_r.assign(nc - 1, Matrix::Zero(nc - 1, nc - 1));
    el.dark = Matrix::Zero(nc, nc);
    el.shift_max.assign(nc, 0.0);

    for (std::size_t a = 0; a < nc; ++a)
        for (std::size_t b = 0; b < nc; ++b)
            for (std::size_t c = 0; c < nc; ++c)
                for (std::size_t d = 0; d < nc; ++d) {
                    const Complex v = measured.chi(a, b, c, d);
                    const double m = std::abs(v);
                    const long s1 = static_cast<long>(b) - static_cast<long>(a);
                    const long s2 = static_cast<long>(d) - static_cast<long>(c);
                    if (s1 != s2 || !rule.allows(s1)) {
                        el.residual_offrule = std::max(el.residual_offrule, m);
                    }
                    if (s1 == s2 && s1 >= 0) {
                        el.shift_max[static_cast<std::size_t>(s1)] = std::max(el.shift_max[static_cast<std::size_t>(s1)], m);
                        if (s1 >= 1) el.beta_r[static_cast<std::size_t>(s1 - 1)](a, c) = v;
                        else if (a == b && c == d) el.dark(a, c) = v;
                    }
                }
    return el;
}

inline std::vector<ChiElements> extract_series(const Propagator& prop, const SelectionRule& rule) {
    std::vector<ChiElements> out;
    out.reserve(prop.size());
    for (std::size_t k = 0; k < prop.size(); ++k) {
        out.push_back(extract_elements(conditional_channel(prop, k, Outcome::measured), rule));
    }
    return out;
}

// Plateau test on |alpha_j| at the end of a series: |d alpha / dt| < tol (backward difference).
inline bool plateau_reached(const std::vector<ChiElements>& series, std::size_t j, double tol) {
    if (series.size() < 2) return false;
    const auto& last = series.back();
    const auto& prev = series[series.size() - 2];
    const double dt = last.time - prev.time;
    return std::abs(std::abs(last.alpha(j)) - std::abs(prev.alpha(j))) / dt < tol;
}

// ---------------------------- detection probability -------------------------

struct DetectionSeries {
    std::vector<double> times;
    std::vector<double> p0, p1, pm;
    bool tunneling{true};   // false: no escape channel, detection means |1>

    const std::vector<double>& detection() const { return tunneling ? pm : p1; }
};

inline DetectionSeries detection_probability(const Propagator& prop, const CavityDensity& rho_c) {
    const JointDensity xi0 = initial_state(rho_c);
    const Vector v0 = vectorize(xi0.matrix);
    DetectionSeries out;
    for (std::size_t k = 0; k < prop.size(); ++k) {
        const JointDensity xi{unvectorize(prop.apply(k, v0), prop.dim()), false};
        out.times.push_back(prop.time(k));
        out.p0.push_back(xi.population(Detector::ground));
        out.p1.push_back(xi.population(Detector::excited));
        out.pm.push_back(xi.population(Detector::measured));
    }
    return out;
}

inline DetectionSeries detection_probability(const ModelParams& p, const CavityDensity& rho_c,
                                             const TimeGrid& grid) {
    const Propagator prop(assemble_superoperator(p), grid);
    DetectionSeries out = detection_probability(prop, rho_c);
    out.tunneling = p.gamma1 > 0.0 || p.gamma0 > 0.0;
    return out;
}

} // namespace jpm
