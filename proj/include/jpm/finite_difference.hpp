// finite_difference.hpp: Centered finite-difference stencils on uniform grids

#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "jpm/errors.hpp"

namespace jpm::fd {

// Fornberg's recursion: weights[d][j] for the d-th derivative at x0 using nodes x[j].
inline std::vector<std::vector<double>> fornberg_weights(double x0, const std::vector<double>& x,
                                                         std::size_t max_order) {
    const std::size_t n = x.size();
    std::vector<std::vector<double>> c(max_order + 1, std::vector<double>(n, 0.0));
    double c1 = 1.0;
    double c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t mn = std::min(i, max_order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - x0;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (std::size_t k = mn; k >= 1; --k) {
                    c[k][i] = c1 * (static_cast<double>(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (std::size_t k = mn; k >= 1; --k) {
                c[k][j] = (c4 * c[k][j] - static_cast<double>(k) * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

// Centered stencil for derivative `order` with formal accuracy `accuracy` (even), unit spacing.
struct Stencil {
    int half_width{0};
    std::vector<double> weights;   // index j corresponds to offset j - half_width
};

inline Stencil central_stencil(std::size_t order, std::size_t accuracy) {
    if (order == 0 || accuracy == 0 || accuracy % 2 != 0) {
        throw PreconditionError("central_stencil: need order >= 1 and even accuracy");
    }
    const std::size_t points = 2 * ((order + 1) / 2) - 1 + accuracy;
    const int hw = static_cast<int>(points / 2);
    std::vector<double> nodes;
    for (int j = -hw; j <= hw; ++j) nodes.push_back(static_cast<double>(j));
    auto w = fornberg_weights(0.0, nodes, order);
    return {hw, std::move(w[order])};
}

// Apply a stencil at sample index i of a series (values of any vector-space type T).
template <typename T>
T apply_stencil(const Stencil& st, const std::vector<T>& series, std::size_t i) {
    T acc = series[i] * 0.0;
    for (std::size_t j = 0; j < st.weights.size(); ++j) {
        acc = acc + series[i + j - static_cast<std::size_t>(st.half_width)] * st.weights[j];
    }
    return acc;
}

template <typename T>
T derivative(const std::vector<T>& series, std::size_t i, double h, std::size_t order, std::size_t accuracy) {
    const Stencil st = central_stencil(order, accuracy);
    if (i < static_cast<std::size_t>(st.half_width) || i + st.half_width >= series.size()) {
        throw PreconditionError("derivative: stencil exceeds series bounds");
    }
    double hp = 1.0;
    for (std::size_t k = 0; k < order; ++k) hp *= h;
    return apply_stencil(st, series, i) * (1.0 / hp);
}

} // namespace jpm::fd
