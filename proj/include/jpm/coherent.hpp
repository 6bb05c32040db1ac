// coherent.hpp: Coherent-state power-scaling test of the detector back action
//
// For a coherent input the lowering operator gives a click probability
// proportional to |alpha|^2, the subtraction operator to 1 - exp(-|alpha|^2).
// Both references are rescaled to the simulated value at the smallest alpha and
// the simulated curve is labelled by its distance to each.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "jpm/chi.hpp"
#include "jpm/errors.hpp"
#include "jpm/liouville.hpp"
#include "jpm/model.hpp"

namespace jpm::coherent {

struct ReferenceProbabilities {
    double low{0.0};
    double sub{0.0};
};

inline ReferenceProbabilities reference_probabilities(Complex alpha) {
    if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) {
        throw PreconditionError("reference_probabilities: alpha must be finite");
    }
    const double n = std::norm(alpha);
    return {n, -std::expm1(-n)};
}

// P~(alpha) = P(alpha) * P_data(alpha0) / P(alpha0)
inline std::vector<double> rescale(const std::vector<double>& curve, double reference_at_anchor,
                                   double data_at_anchor) {
    if (reference_at_anchor == 0.0) throw AnchorDegenerate("rescale: reference vanishes at the anchor");
    const double f = data_at_anchor / reference_at_anchor;
    std::vector<double> out(curve.size());
    std::transform(curve.begin(), curve.end(), out.begin(), [f](double v) { return v * f; });
    return out;
}

// 0.01, 0.02, ..., 1.00
inline std::vector<double> default_alpha_grid() {
    std::vector<double> a;
    for (int i = 1; i <= 100; ++i) a.push_back(static_cast<double>(i) / 100.0);
    return a;
}

struct ScalingCurve {
    std::vector<double> alphas;
    std::vector<double> p_data;
    std::vector<double> p_low_scaled;
    std::vector<double> p_sub_scaled;
    double alpha0{0.0};
    double t_m{0.0};   // in units of 1/g

    std::size_t size() const noexcept { return alphas.size(); }
};

inline void check_alpha_grid(const std::vector<double>& alphas) {
    if (alphas.empty()) throw PreconditionError("coherent sweep: empty alpha grid");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!std::isfinite(alphas[i]) || alphas[i] < 0.0) {
            throw PreconditionError("coherent sweep: alphas must be finite and >= 0");
        }
        if (i > 0 && !(alphas[i] > alphas[i - 1])) {
            throw PreconditionError("coherent sweep: alpha grid must be strictly increasing");
        }
    }
}

// Attaches rescaled references to simulated data, anchored at the first alpha.
inline ScalingCurve make_curve(std::vector<double> alphas, std::vector<double> p_data, double t_m) {
    check_alpha_grid(alphas);
    if (p_data.size() != alphas.size()) throw PreconditionError("make_curve: size mismatch");
    ScalingCurve c;
    c.alpha0 = alphas.front();
    c.t_m = t_m;
    std::vector<double> low, sub;
    for (double a : alphas) {
        const auto r = reference_probabilities(a);
        low.push_back(r.low);
        sub.push_back(r.sub);
    }
    c.p_low_scaled = rescale(low, low.front(), p_data.front());
    c.p_sub_scaled = rescale(sub, sub.front(), p_data.front());
    c.p_low_scaled.front() = p_data.front();
    c.p_sub_scaled.front() = p_data.front();
    c.alphas = std::move(alphas);
    c.p_data = std::move(p_data);
    return c;
}

// One propagation to t_m/g shared by every alpha; each alpha is a separate initial state.
inline ScalingCurve run_coherent_sweep(const ModelParams& p, double t_m, const std::vector<double>& alphas) {
    p.validate();
    check_alpha_grid(alphas);
    if (!(p.g > 0.0)) throw PreconditionError("run_coherent_sweep: t_m is in units of 1/g, g must be > 0");
    if (!(t_m > 0.0) || !std::isfinite(t_m)) throw PreconditionError("run_coherent_sweep: t_m must be > 0");
    const Propagator prop(assemble_superoperator(p), TimeGrid{t_m / p.g, 2});
    const Detector click = (p.gamma1 > 0.0 || p.gamma0 > 0.0) ? Detector::measured : Detector::excited;
    std::vector<double> data;
    data.reserve(alphas.size());
    for (double a : alphas) {
        const JointDensity xi0 = initial_state(coherent_density(a, p.cavity_dim()));
        const JointDensity xi{unvectorize(prop.apply(1, vectorize(xi0.matrix)), prop.dim()), false};
        data.push_back(std::clamp(xi.population(click), 0.0, 1.0));
    }
    return make_curve(alphas, std::move(data), t_m);
}

enum class Label { lowering, subtraction, intermediate, sub_subtraction };

inline std::string to_string(Label l) {
    switch (l) {
        case Label::lowering: return "lowering";
        case Label::subtraction: return "subtraction";
        case Label::intermediate: return "intermediate";
        case Label::sub_subtraction: return "sub-subtraction";
    }
    return "?";
}

struct ClassifyOptions {
    double margin{1e-3};         // below-subtraction margin
    double below_fraction{0.5};  // fraction of grid points required below p_sub - margin
    double band{0.25};           // nearest-reference band, as a fraction of the reference separation
};

struct RegimeClassification {
    double distance_low{0.0};
    double distance_sub{0.0};
    double separation{0.0};      // L2 distance between the two scaled references
    double fraction_below{0.0};
    Label label{Label::intermediate};
};

inline double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline RegimeClassification classify(const ScalingCurve& c, const ClassifyOptions& opt = {}) {
    if (c.size() == 0 || c.p_data.size() != c.size() || c.p_low_scaled.size() != c.size() ||
        c.p_sub_scaled.size() != c.size()) {
        throw PreconditionError("classify: incomplete curve");
    }
    RegimeClassification r;
    r.distance_low = l2_distance(c.p_data, c.p_low_scaled);
    r.distance_sub = l2_distance(c.p_data, c.p_sub_scaled);
    r.separation = l2_distance(c.p_low_scaled, c.p_sub_scaled);
    std::size_t below = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c.p_data[i] < c.p_sub_scaled[i] - opt.margin) ++below;
    }
    r.fraction_below = static_cast<double>(below) / static_cast<double>(c.size());
    if (r.fraction_below >= opt.below_fraction) {
        r.label = Label::sub_subtraction;
    } else if (r.distance_low <= r.distance_sub && r.distance_low <= opt.band * r.separation) {
        r.label = Label::lowering;
    } else if (r.distance_sub < r.distance_low && r.distance_sub <= opt.band * r.separation) {
        r.label = Label::subtraction;
    } else {
        r.label = Label::intermediate;
    }
    return r;
}

} // namespace jpm::coherent
