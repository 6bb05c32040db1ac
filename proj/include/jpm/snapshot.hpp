// snapshot.hpp: Binary cache of a factorized propagator
//
// Layout (little-endian):
//   "JPMSNAP\0"  u32 version  u32 flags(0)
//   u64 D  u64 steps  f64 t_max
//   f64 g, gamma0, gamma1, t1_inv, t2_inv  u64 n_cutoff
//   u64 block_count, then per block:
//     u64 m  u64 spectral  u64 idx[m]  generator (m x m)
//     spectral: V (m x m), Vinv (m x m), lambda (m)
//     otherwise: steps maps (m x m)
//   u64 FNV-1a checksum of every preceding byte
// Complex entries are (re, im) float64 pairs, matrices row-major.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jpm/chi.hpp"
#include "jpm/errors.hpp"
#include "jpm/io.hpp"
#include "jpm/liouville.hpp"
#include "jpm/model.hpp"

namespace jpm::snapshot {

static_assert(std::endian::native == std::endian::little, "snapshot format assumes a little-endian host");

inline constexpr char kMagic[8] = {'J', 'P', 'M', 'S', 'N', 'A', 'P', '\0'};
inline constexpr std::uint32_t kVersion = 1;

inline std::uint64_t fnv1a(const char* data, std::size_t n) {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ULL;
    }
    return h;
}

namespace detail {

class Writer {
public:
    template <typename T>
    void pod(const T& v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        buf_.append(p, sizeof(T));
    }
    void matrix(const Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                pod(m(i, j).real());
                pod(m(i, j).imag());
            }
    }
    void vector(const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            pod(v(i).real());
            pod(v(i).imag());
        }
    }
    std::string finish() {
        pod(fnv1a(buf_.data(), buf_.size()));
        return std::move(buf_);
    }
    void raw(const char* p, std::size_t n) { buf_.append(p, n); }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(const std::string& bytes) : b_(bytes) {}

    template <typename T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, b_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    Matrix matrix(std::size_t rows, std::size_t cols) {
        need(rows * cols * 16);
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
                const double re = pod<double>();
                const double im = pod<double>();
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = Complex(re, im);
            }
        return m;
    }
    Vector vector(std::size_t n) {
        need(n * 16);
        Vector v(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const double re = pod<double>();
            const double im = pod<double>();
            v(static_cast<Eigen::Index>(i)) = Complex(re, im);
        }
        return v;
    }
    std::size_t position() const noexcept { return pos_; }
    void need(std::size_t n) const {
        if (n > b_.size() || pos_ > b_.size() - n) throw SnapshotError("snapshot: truncated file");
    }

private:
    const std::string& b_;
    std::size_t pos_{0};
};

} // namespace detail

struct Header {
    std::uint32_t version{kVersion};
    std::uint64_t dim{0};
    TimeGrid grid;
    ModelParams model;
};

inline std::string serialize(const Propagator& prop, const ModelParams& model) {
    detail::Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.pod(kVersion);
    w.pod(std::uint32_t{0});
    w.pod(static_cast<std::uint64_t>(prop.dim()));
    w.pod(static_cast<std::uint64_t>(prop.grid().steps));
    w.pod(prop.grid().t_max);
    w.pod(model.g);
    w.pod(model.gamma0);
    w.pod(model.gamma1);
    w.pod(model.t1_inv);
    w.pod(model.t2_inv);
    w.pod(static_cast<std::uint64_t>(model.n_cutoff));
    w.pod(static_cast<std::uint64_t>(prop.blocks().size()));
    for (const auto& blk : prop.blocks()) {
        w.pod(static_cast<std::uint64_t>(blk.idx.size()));
        w.pod(static_cast<std::uint64_t>(blk.spectral ? 1 : 0));
        for (std::size_t i : blk.idx) w.pod(static_cast<std::uint64_t>(i));
        w.matrix(blk.generator);
        if (blk.spectral) {
            w.matrix(blk.V);
            w.matrix(blk.Vinv);
            w.vector(blk.lambda);
        } else {
            for (const auto& m : blk.grid_maps) w.matrix(m);
        }
    }
    return w.finish();
}

inline void save(const std::filesystem::path& path, const Propagator& prop, const ModelParams& model) {
    io::atomic_write(path, serialize(prop, model));
}

struct Loaded {
    Header header;
    Propagator propagator;
};

// Format errors raise SnapshotError; a payload whose checksum does not match raises InvariantViolation.
inline Loaded deserialize(const std::string& bytes) {
    detail::Reader r(bytes);
    r.need(sizeof(kMagic));
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw SnapshotError("snapshot: bad magic");
    for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.pod<char>();
    Header h;
    h.version = r.pod<std::uint32_t>();
    if (h.version != kVersion) throw SnapshotError("snapshot: unsupported version " + std::to_string(h.version));
    r.pod<std::uint32_t>();
    if (bytes.size() < sizeof(std::uint64_t)) throw SnapshotError("snapshot: truncated file");
    const std::size_t body = bytes.size() - sizeof(std::uint64_t);
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body, sizeof(stored));
    if (fnv1a(bytes.data(), body) != stored) throw InvariantViolation("snapshot: checksum mismatch (corrupted payload)");

    h.dim = r.pod<std::uint64_t>();
    h.grid.steps = r.pod<std::uint64_t>();
    h.grid.t_max = r.pod<double>();
    h.model.g = r.pod<double>();
    h.model.gamma0 = r.pod<double>();
    h.model.gamma1 = r.pod<double>();
    h.model.t1_inv = r.pod<double>();
    h.model.t2_inv = r.pod<double>();
    h.model.n_cutoff = r.pod<std::uint64_t>();
    if (h.dim != h.model.joint_dim()) throw SnapshotError("snapshot: dimension inconsistent with model");
    const std::size_t n = h.dim * h.dim;
    const auto count = r.pod<std::uint64_t>();
    if (count > n) throw SnapshotError("snapshot: block count out of range");
    std::vector<Propagator::Block> blocks(count);
    for (auto& blk : blocks) {
        const auto m = r.pod<std::uint64_t>();
        if (m == 0 || m > n) throw SnapshotError("snapshot: block size out of range");
        blk.spectral = r.pod<std::uint64_t>() != 0;
        blk.idx.resize(m);
        for (auto& i : blk.idx) i = r.pod<std::uint64_t>();
        blk.generator = r.matrix(m, m);
        if (blk.spectral) {
            blk.V = r.matrix(m, m);
            blk.Vinv = r.matrix(m, m);
            blk.lambda = r.vector(m);
        } else {
            r.need(h.grid.steps * m * m * 16);
            for (std::size_t k = 0; k < h.grid.steps; ++k) blk.grid_maps.push_back(r.matrix(m, m));
        }
    }
    if (r.position() != body) throw SnapshotError("snapshot: trailing bytes");
    try {
        return {h, Propagator::restore(h.grid, h.dim, std::move(blocks))};
    } catch (const PreconditionError& e) {
        throw SnapshotError(std::string("snapshot: ") + e.what());
    }
}

inline Loaded load(const std::filesystem::path& path) {
    std::string bytes;
    try {
        bytes = io::read_file(path);
    } catch (const Error& e) {
        throw SnapshotError(std::string("snapshot: ") + e.what());
    }
    return deserialize(bytes);
}

// ------------------------------ state series ----------------------------------
//
//   "JPMSTATE"  u32 version  u32 flags(0)  u64 D  u64 steps  f64 t_max
//   steps states (D x D)  u64 checksum

inline constexpr char kStateMagic[8] = {'J', 'P', 'M', 'S', 'T', 'A', 'T', 'E'};

inline std::string serialize_states(const std::vector<JointDensity>& states, const TimeGrid& grid) {
    if (states.size() != grid.steps) throw PreconditionError("serialize_states: one state per grid point required");
    detail::Writer w;
    w.raw(kStateMagic, sizeof(kStateMagic));
    w.pod(kVersion);
    w.pod(std::uint32_t{0});
    w.pod(static_cast<std::uint64_t>(states.empty() ? 0 : states.front().dim()));
    w.pod(static_cast<std::uint64_t>(grid.steps));
    w.pod(grid.t_max);
    for (const auto& s : states) w.matrix(s.matrix);
    return w.finish();
}

inline std::vector<JointDensity> deserialize_states(const std::string& bytes, TimeGrid* grid = nullptr) {
    detail::Reader r(bytes);
    r.need(sizeof(kStateMagic) + 8);
    if (std::memcmp(bytes.data(), kStateMagic, sizeof(kStateMagic)) != 0) throw SnapshotError("states: bad magic");
    for (std::size_t i = 0; i < sizeof(kStateMagic); ++i) r.pod<char>();
    if (r.pod<std::uint32_t>() != kVersion) throw SnapshotError("states: unsupported version");
    r.pod<std::uint32_t>();
    const std::size_t body = bytes.size() - sizeof(std::uint64_t);
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body, sizeof(stored));
    if (fnv1a(bytes.data(), body) != stored) throw InvariantViolation("states: checksum mismatch (corrupted payload)");
    const auto D = r.pod<std::uint64_t>();
    TimeGrid g;
    g.steps = r.pod<std::uint64_t>();
    g.t_max = r.pod<double>();
    r.need(g.steps * D * D * 16);
    std::vector<JointDensity> out;
    for (std::size_t k = 0; k < g.steps; ++k) out.push_back({r.matrix(D, D), false});
    if (r.position() != body) throw SnapshotError("states: trailing bytes");
    if (grid) *grid = g;
    return out;
}

// ------------------------------ physical checks ------------------------------

struct ChannelCheck {
    double identity_deviation{0.0};   // |T(0) - I|
    double trace_deviation{0.0};      // worst trace-preservation defect
    double generator_deviation{0.0};  // |S_blocks - factorization| at the stored generators
    double choi_min_eigenvalue{0.0};  // at the last grid point
};

// Trace preservation of T: sum_a T((a,a), nu) = [nu is diagonal].
inline double trace_defect(const Matrix& T, std::size_t dim) {
    double worst = 0.0;
    for (std::size_t b = 0; b < dim; ++b)
        for (std::size_t d = 0; d < dim; ++d) {
            Complex s = 0.0;
            for (std::size_t a = 0; a < dim; ++a) s += T(vec_index(dim, a, a), vec_index(dim, b, d));
            worst = std::max(worst, std::abs(s - (b == d ? 1.0 : 0.0)));
        }
    return worst;
}

inline double choi_min_eigenvalue(const Matrix& T, std::size_t dim) {
    const Matrix chi = permute_liouville_chi(T, dim);
    const Matrix h = 0.5 * (chi + chi.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Throws InvariantViolation naming the first failed property.
inline ChannelCheck check_channel(const Propagator& prop, double tol = 1e-9) {
    ChannelCheck c;
    const std::size_t D = prop.dim();
    const std::size_t n = D * D;
    c.identity_deviation = (prop.map(0) - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
    for (const auto& blk : prop.blocks()) {
        if (!blk.spectral) continue;
        const Matrix rebuilt = blk.V * blk.lambda.asDiagonal() * blk.Vinv;
        const double scale = std::max(1.0, blk.generator.cwiseAbs().maxCoeff());
        c.generator_deviation = std::max(c.generator_deviation, (rebuilt - blk.generator).cwiseAbs().maxCoeff() / scale);
    }
    const std::size_t last = prop.size() - 1;
    for (std::size_t k : {prop.size() / 2, last}) c.trace_deviation = std::max(c.trace_deviation, trace_defect(prop.map(k), D));
    c.choi_min_eigenvalue = choi_min_eigenvalue(prop.map(last), D);
    if (!(c.identity_deviation <= tol)) throw InvariantViolation("propagator: T(0) is not the identity");
    if (!(c.generator_deviation <= 1e-8)) throw InvariantViolation("propagator: factorization does not reproduce the generator");
    if (!(c.trace_deviation <= tol)) throw InvariantViolation("propagator: trace not preserved");
    if (!(c.choi_min_eigenvalue >= -tol)) throw InvariantViolation("propagator: Choi matrix not positive semidefinite");
    return c;
}

// Cached propagator for (model, grid) if the file matches and passes the checks.
inline std::optional<Propagator> load_matching(const std::filesystem::path& path, const ModelParams& model,
                                               const TimeGrid& grid) {
    if (!std::filesystem::exists(path)) return std::nullopt;
    Loaded l = load(path);
    if (!(l.header.model == model) || l.header.grid.steps != grid.steps || l.header.grid.t_max != grid.t_max) {
        return std::nullopt;
    }
    check_channel(l.propagator);
    return std::move(l.propagator);
}

} // namespace jpm::snapshot
