// liouville.hpp: Liouville supermatrix assembly and propagation T(t) = exp(S t)
//
// Vectorization is row-major: vec(X)[D*a + b] = X(a, b), so that
// vec(A X B) = (A (x) B^T) vec(X). The generator is therefore
//   S = -i (H (x) I - I (x) H^T)
//       + sum_mu ( J (x) conj(J) - 1/2 J^dag J (x) I - 1/2 I (x) (J^dag J)^T ).
//
// Propagation splits S into invariant blocks (connected components of its
// sparsity graph; exact, no thresholding) and diagonalizes each block once.
// Blocks whose eigenvector matrix is ill-conditioned are exponentiated per
// time point with Pade scaling-and-squaring instead.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "jpm/errors.hpp"
#include "jpm/model.hpp"

namespace jpm {

inline std::size_t vec_index(std::size_t dim, std::size_t row, std::size_t col) noexcept {
    return dim * row + col;
}

inline Vector vectorize(const Matrix& m) {
    const auto rows = m.rows();
    const auto cols = m.cols();
    Vector v(rows * cols);
    for (Eigen::Index a = 0; a < rows; ++a)
        for (Eigen::Index b = 0; b < cols; ++b) v(a * cols + b) = m(a, b);
    return v;
}

inline Matrix unvectorize(const Vector& v, std::size_t dim) {
    if (static_cast<std::size_t>(v.size()) != dim * dim) {
        throw PreconditionError("unvectorize: size mismatch");
    }
    Matrix m(dim, dim);
    const auto d = static_cast<Eigen::Index>(dim);
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) m(a, b) = v(a * d + b);
    return m;
}

struct Superoperator {
    Matrix matrix;         // D^2 x D^2
    std::size_t dim{0};    // D

    std::size_t superdim() const noexcept { return dim * dim; }

    Matrix apply(const Matrix& xi) const { return unvectorize(matrix * vectorize(xi), dim); }
};

namespace detail {

// S += coeff * (A (x) B), visiting only nonzeros of A and B
inline void add_kron(Matrix& S, Complex coeff, const Matrix& A, const Matrix& B) {
    const Eigen::Index d = A.rows();
    std::vector<std::pair<Eigen::Index, Eigen::Index>> nzb;
    for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l)
            if (B(k, l) != Complex(0.0)) nzb.emplace_back(k, l);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const Complex aij = A(i, j);
            if (aij == Complex(0.0)) continue;
            for (const auto& [k, l] : nzb) S(i * d + k, j * d + l) += coeff * aij * B(k, l);
        }
    }
}

} // namespace detail

inline Superoperator assemble_superoperator(const Matrix& H, const std::vector<JumpOperator>& jumps) {
    if (H.rows() != H.cols()) throw PreconditionError("assemble_superoperator: H must be square");
    const std::size_t dim = static_cast<std::size_t>(H.rows());
    const Matrix I = Matrix::Identity(H.rows(), H.cols());
    Superoperator S{Matrix::Zero(dim * dim, dim * dim), dim};
    const Complex mi(0.0, -1.0);
    detail::add_kron(S.matrix, mi, H, I);
    detail::add_kron(S.matrix, -mi, I, H.transpose());
    for (const auto& J : jumps) {
        if (J.matrix.rows() != H.rows() || J.matrix.cols() != H.cols()) {
            throw PreconditionError("assemble_superoperator: jump operator dimension mismatch");
        }
        const Matrix JdJ = J.matrix.adjoint() * J.matrix;
        detail::add_kron(S.matrix, 1.0, J.matrix, J.matrix.conjugate());
        detail::add_kron(S.matrix, -0.5, JdJ, I);
        detail::add_kron(S.matrix, -0.5, I, JdJ.transpose());
    }
    return S;
}

inline Superoperator assemble_superoperator(const ModelParams& p) {
    return assemble_superoperator(build_hamiltonian(p), build_jump_operators(p));
}

struct TimeGrid {
    double t_max{1.0};
    std::size_t steps{400};

    void validate() const {
        if (!(t_max > 0.0) || !std::isfinite(t_max)) throw PreconditionError("TimeGrid: t_max must be > 0");
        if (steps < 2) throw PreconditionError("TimeGrid: steps must be >= 2");
    }
    double spacing() const noexcept { return t_max / static_cast<double>(steps - 1); }
    double at(std::size_t k) const noexcept {
        return k + 1 == steps ? t_max : static_cast<double>(k) * spacing();
    }
    std::vector<double> times() const {
        std::vector<double> t(steps);
        for (std::size_t k = 0; k < steps; ++k) t[k] = at(k);
        return t;
    }
};

// Connected components of the undirected sparsity graph of a square matrix.
// Components are returned sorted by their smallest index; indices ascending.
inline std::vector<std::vector<std::size_t>> invariant_blocks(const Matrix& S) {
    const std::size_t n = static_cast<std::size_t>(S.rows());
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j || S(i, j) == Complex(0.0)) continue;
            const std::size_t ri = find(i), rj = find(j);
            if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
        }
    }
    std::vector<std::vector<std::size_t>> blocks;
    std::vector<std::size_t> slot(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = find(i);
        if (slot[r] == n) {
            slot[r] = blocks.size();
            blocks.emplace_back();
        }
        blocks[slot[r]].push_back(i);
    }
    return blocks;
}

struct PropagatorOptions {
    double condition_threshold{1e8};
};

// Emitted whenever a block leaves the spectral path.
struct SpectralFallback {
    std::size_t block{0};
    std::size_t block_size{0};
    double condition{0.0};
};

class Propagator {
public:
    // One invariant subspace of S: either T = V e^{lambda t} V^-1 or per-grid maps.
    struct Block {
        std::vector<std::size_t> idx;
        Matrix generator;
        bool spectral{true};
        Matrix V, Vinv;
        Vector lambda;
        std::vector<Matrix> grid_maps;   // fallback only
    };

    Propagator(const Superoperator& S, TimeGrid grid, PropagatorOptions opts = {})
        : grid_(grid), dim_(S.dim) {
        grid_.validate();
        if (static_cast<std::size_t>(S.matrix.rows()) != S.superdim()) {
            throw PreconditionError("Propagator: superoperator dimension mismatch");
        }
        const auto parts = invariant_blocks(S.matrix);
        blocks_.reserve(parts.size());
        owner_.assign(S.superdim(), 0);
        local_.assign(S.superdim(), 0);
        for (std::size_t b = 0; b < parts.size(); ++b) {
            Block blk;
            blk.idx = parts[b];
            const auto m = static_cast<Eigen::Index>(blk.idx.size());
            blk.generator.resize(m, m);
            for (Eigen::Index i = 0; i < m; ++i) {
                owner_[blk.idx[i]] = b;
                local_[blk.idx[i]] = static_cast<std::size_t>(i);
                for (Eigen::Index j = 0; j < m; ++j) blk.generator(i, j) = S.matrix(blk.idx[i], blk.idx[j]);
            }
            diagonalize(blk, b, opts);
            blocks_.push_back(std::move(blk));
        }
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return grid_.steps; }
    double time(std::size_t k) const noexcept { return grid_.at(k); }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t superdim() const noexcept { return dim_ * dim_; }
    std::size_t block_count() const noexcept { return blocks_.size(); }
    const std::vector<SpectralFallback>& fallbacks() const noexcept { return fallbacks_; }
    const std::vector<Block>& blocks() const noexcept { return blocks_; }

    // Rebuilds a propagator from stored blocks (snapshot loading); no recomputation.
    static Propagator restore(TimeGrid grid, std::size_t dim, std::vector<Block> blocks,
                              std::vector<SpectralFallback> fallbacks = {}) {
        grid.validate();
        Propagator p;
        p.grid_ = grid;
        p.dim_ = dim;
        const std::size_t n = dim * dim;
        p.owner_.assign(n, n);
        p.local_.assign(n, 0);
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const Block& blk = blocks[b];
            const auto m = static_cast<Eigen::Index>(blk.idx.size());
            if (blk.generator.rows() != m || blk.generator.cols() != m) {
                throw PreconditionError("Propagator::restore: block generator size mismatch");
            }
            if (blk.spectral ? (blk.V.rows() != m || blk.V.cols() != m || blk.Vinv.rows() != m ||
                                blk.Vinv.cols() != m || blk.lambda.size() != m)
                             : blk.grid_maps.size() != grid.steps) {
                throw PreconditionError("Propagator::restore: block factorization size mismatch");
            }
            for (Eigen::Index i = 0; i < m; ++i) {
                const std::size_t g = blk.idx[static_cast<std::size_t>(i)];
                if (g >= n || p.owner_[g] != n) throw PreconditionError("Propagator::restore: blocks do not partition the space");
                p.owner_[g] = b;
                p.local_[g] = static_cast<std::size_t>(i);
            }
        }
        if (std::find(p.owner_.begin(), p.owner_.end(), n) != p.owner_.end()) {
            throw PreconditionError("Propagator::restore: blocks do not cover the space");
        }
        p.blocks_ = std::move(blocks);
        p.fallbacks_ = std::move(fallbacks);
        return p;
    }

    Vector apply(std::size_t k, const Vector& v) const { return apply_impl(v, k, grid_.at(k)); }
    Vector apply_at(double t, const Vector& v) const { return apply_impl(v, npos, t); }

    Matrix map(std::size_t k) const { return map_impl(k, grid_.at(k)); }
    Matrix map_at(double t) const { return map_impl(npos, t); }

    // T(t_k) restricted to the given output rows and input columns.
    Matrix restricted(std::size_t k, std::span<const std::size_t> rows,
                      std::span<const std::size_t> cols) const {
        check_index(k);
        const double t = grid_.at(k);
        Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
        std::vector<std::vector<std::size_t>> rb(blocks_.size()), cb(blocks_.size());
        for (std::size_t r = 0; r < rows.size(); ++r) rb[owner_.at(rows[r])].push_back(r);
        for (std::size_t c = 0; c < cols.size(); ++c) cb[owner_.at(cols[c])].push_back(c);
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            if (rb[b].empty() || cb[b].empty()) continue;
            const Block& blk = blocks_[b];
            const auto nr = static_cast<Eigen::Index>(rb[b].size());
            const auto ncol = static_cast<Eigen::Index>(cb[b].size());
            Matrix sub;
            if (blk.spectral && t != 0.0) {
                const auto m = static_cast<Eigen::Index>(blk.idx.size());
                Matrix left(nr, m), right(m, ncol);
                const Vector e = exp_eigen(blk, t);
                for (Eigen::Index i = 0; i < nr; ++i)
                    left.row(i) = blk.V.row(local_[rows[rb[b][i]]]).cwiseProduct(e.transpose());
                for (Eigen::Index j = 0; j < ncol; ++j) right.col(j) = blk.Vinv.col(local_[cols[cb[b][j]]]);
                sub = left * right;
            } else {
                const Matrix full = block_map(blk, k, t);
                sub.resize(nr, ncol);
                for (Eigen::Index i = 0; i < nr; ++i)
                    for (Eigen::Index j = 0; j < ncol; ++j)
                        sub(i, j) = full(local_[rows[rb[b][i]]], local_[cols[cb[b][j]]]);
            }
            for (Eigen::Index i = 0; i < nr; ++i)
                for (Eigen::Index j = 0; j < ncol; ++j) out(rb[b][i], cb[b][j]) = sub(i, j);
        }
        return out;
    }

private:
    Propagator() = default;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    static constexpr std::size_t kPadeStride = 16;

    void check_index(std::size_t k) const {
        if (k >= grid_.steps) throw PreconditionError("Propagator: time index out of range");
    }

    void diagonalize(Block& blk, std::size_t b, const PropagatorOptions& opts) {
        const auto m = blk.generator.rows();
        if (m == 1) {
            blk.V = Matrix::Identity(1, 1);
            blk.Vinv = blk.V;
            blk.lambda = blk.generator.diagonal();
            return;
        }
        Eigen::ComplexEigenSolver<Matrix> es(blk.generator, true);
        double cond = std::numeric_limits<double>::infinity();
        if (es.info() == Eigen::Success) {
            blk.V = es.eigenvectors();
            blk.lambda = es.eigenvalues();
            Eigen::PartialPivLU<Matrix> lu(blk.V);
            blk.Vinv = lu.inverse();
            const double n1 = blk.V.cwiseAbs().colwise().sum().maxCoeff();
            const double n1i = blk.Vinv.cwiseAbs().colwise().sum().maxCoeff();
            cond = n1 * n1i;
            if (!std::isfinite(cond)) cond = std::numeric_limits<double>::infinity();
        }
        if (cond <= opts.condition_threshold) return;
        blk.spectral = false;
        blk.V.resize(0, 0);
        blk.Vinv.resize(0, 0);
        blk.lambda.resize(0);
        fallbacks_.push_back({b, static_cast<std::size_t>(m), cond});
        // Pade at every kPadeStride-th point and at t_max, one-step products in between
        blk.grid_maps.reserve(grid_.steps);
        const Matrix step = pade_exp(blk.generator, grid_.spacing());
        for (std::size_t k = 0; k < grid_.steps; ++k) {
            if (k % kPadeStride == 0 || k + 1 == grid_.steps) blk.grid_maps.push_back(pade_exp(blk.generator, grid_.at(k)));
            else blk.grid_maps.push_back(blk.grid_maps.back() * step);
        }
    }

    static Matrix pade_exp(const Matrix& A, double t) {
        if (t == 0.0) return Matrix::Identity(A.rows(), A.cols());
        return (A * t).exp();
    }

    static Vector exp_eigen(const Block& blk, double t) {
        return (blk.lambda * t).array().exp().matrix();
    }

    Matrix block_map(const Block& blk, std::size_t k, double t) const {
        const auto m = static_cast<Eigen::Index>(blk.idx.size());
        if (t == 0.0) return Matrix::Identity(m, m);
        if (blk.spectral) return blk.V * exp_eigen(blk, t).asDiagonal() * blk.Vinv;
        if (k != npos) return blk.grid_maps[k];
        return pade_exp(blk.generator, t);
    }

    Vector apply_impl(const Vector& v, std::size_t k, double t) const {
        if (k != npos) check_index(k);
        if (static_cast<std::size_t>(v.size()) != superdim()) throw PreconditionError("Propagator: vector size mismatch");
        Vector out = Vector::Zero(v.size());
        for (const Block& blk : blocks_) {
            const auto m = static_cast<Eigen::Index>(blk.idx.size());
            Vector x(m);
            bool any = false;
            for (Eigen::Index i = 0; i < m; ++i) {
                x(i) = v(blk.idx[i]);
                any = any || x(i) != Complex(0.0);
            }
            if (!any) continue;
            Vector y;
            if (t == 0.0) {
                y = x;
            } else if (blk.spectral) {
                y = blk.V * (exp_eigen(blk, t).cwiseProduct(blk.Vinv * x));
            } else {
                y = block_map(blk, k, t) * x;
            }
            for (Eigen::Index i = 0; i < m; ++i) out(blk.idx[i]) = y(i);
        }
        return out;
    }

    Matrix map_impl(std::size_t k, double t) const {
        if (k != npos) check_index(k);
        Matrix T = Matrix::Zero(superdim(), superdim());
        for (const Block& blk : blocks_) {
            const Matrix B = block_map(blk, k, t);
            const auto m = static_cast<Eigen::Index>(blk.idx.size());
            for (Eigen::Index i = 0; i < m; ++i)
                for (Eigen::Index j = 0; j < m; ++j) T(blk.idx[i], blk.idx[j]) = B(i, j);
        }
        return T;
    }

    TimeGrid grid_;
    std::size_t dim_{0};
    std::vector<Block> blocks_;
    std::vector<std::size_t> owner_, local_;
    std::vector<SpectralFallback> fallbacks_;
};

inline Propagator propagate(const Superoperator& S, const TimeGrid& grid, PropagatorOptions opts = {}) {
    return Propagator(S, grid, opts);
}

struct EvolveTolerances {
    double hermitian{1e-8};
    double trace{1e-8};
    double psd{1e-8};
};

// Propagated state after drift checks; output is re-symmetrized.
inline JointDensity checked_state(const Vector& v, std::size_t dim, double trace0, std::size_t k,
                                  const EvolveTolerances& tol) {
    Matrix xi = unvectorize(v, dim);
    const double herm = (xi - xi.adjoint()).cwiseAbs().maxCoeff();
    const double tr = xi.trace().real();
    if (herm > tol.hermitian || std::abs(tr - trace0) > tol.trace || !xi.allFinite()) {
        throw InvariantViolation("evolve_state: drift at grid point " + std::to_string(k) +
                                 " (hermiticity " + std::to_string(herm) + ", trace " +
                                 std::to_string(tr - trace0) + ")");
    }
    xi = 0.5 * (xi + xi.adjoint()).eval();
    JointDensity out{std::move(xi), false};
    try {
        check_density(out.matrix, false, "JointDensity", {1e-12, tol.psd, tol.trace});
    } catch (const InvariantViolation& e) {
        throw InvariantViolation("evolve_state: grid point " + std::to_string(k) + ": " + e.what());
    }
    out.normalized = std::abs(tr - 1.0) <= 1e-10;
    return out;
}

inline std::vector<JointDensity> evolve_state(const Propagator& prop, const JointDensity& xi0,
                                              const EvolveTolerances& tol = {}) {
    if (xi0.dim() != prop.dim()) throw PreconditionError("evolve_state: dimension mismatch");
    xi0.validate();
    const Vector v0 = vectorize(xi0.matrix);
    const double tr0 = xi0.trace();
    std::vector<JointDensity> out;
    out.reserve(prop.size());
    for (std::size_t k = 0; k < prop.size(); ++k) {
        out.push_back(checked_state(prop.apply(k, v0), prop.dim(), tr0, k, tol));
    }
    return out;
}

} // namespace jpm
