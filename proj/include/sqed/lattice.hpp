#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "sqed/errors.hpp"

namespace sqed {

// Cubic periodic lattice, spacing a = 1. The photon mass is tied to the
// extent (1/L) so the zero-momentum photon mode stays regular.
struct LatticeConfig {
    int dim = 3;
    int extent = 2;
    double scalar_mass = 1.0;

    double photon_mass() const { return 1.0 / static_cast<double>(extent); }

    std::int64_t sites() const {
        std::int64_t n = 1;
        for (int i = 0; i < dim; ++i) n *= extent;
        return n;
    }
    std::int64_t scalar_modes() const { return 2 * sites(); }
    std::int64_t photon_modes() const { return dim * sites(); }
    std::int64_t total_modes() const { return (2 + dim) * sites(); }

    void validate() const {
        if (dim < 1 || dim > 3) throw ConfigError("dim must be 1, 2 or 3");
        if (extent < 1) throw ConfigError("extent must be >= 1");
        if (scalar_mass < 0) throw ConfigError("scalar_mass must be >= 0");
    }
};

// Integer coordinate tuple with row-major flat indexing; index arithmetic is
// shared by sites and momenta (they live on dual lattices of the same shape).
struct Coords {
    std::array<int, 3> c{0, 0, 0};

    static Coords from_flat(const LatticeConfig& cfg, std::int64_t flat) {
        Coords out;
        for (int i = 0; i < cfg.dim; ++i) {
            out.c[i] = static_cast<int>(flat % cfg.extent);
            flat /= cfg.extent;
        }
        return out;
    }
    std::int64_t flat(const LatticeConfig& cfg) const {
        std::int64_t f = 0;
        for (int i = cfg.dim - 1; i >= 0; --i) f = f * cfg.extent + c[i];
        return f;
    }
    Coords shifted(const LatticeConfig& cfg, int axis, int step) const {
        Coords out = *this;
        int v = (out.c[axis] + step) % cfg.extent;
        if (v < 0) v += cfg.extent;
        out.c[axis] = v;
        return out;
    }
    Coords negated(const LatticeConfig& cfg) const {
        Coords out = *this;
        for (int i = 0; i < cfg.dim; ++i) out.c[i] = (cfg.extent - out.c[i]) % cfg.extent;
        return out;
    }
    bool operator==(const Coords& o) const { return c == o.c; }
};

using SiteIndex = Coords;
using MomentumIndex = Coords;

// physical momentum components k_i = 2*pi*n_i / L
inline double momentum_component(const LatticeConfig& cfg, const MomentumIndex& k, int axis) {
    return 2.0 * std::numbers::pi * k.c[axis] / cfg.extent;
}

inline double dispersion(const LatticeConfig& cfg, const MomentumIndex& k, double mass) {
    double s = mass * mass;
    for (int i = 0; i < cfg.dim; ++i) {
        double half = 0.5 * momentum_component(cfg, k, i);
        double sn = std::sin(half);
        s += 4.0 * sn * sn;
    }
    return std::sqrt(s);
}

inline double scalar_omega(const LatticeConfig& cfg, const MomentumIndex& k) {
    return dispersion(cfg, k, cfg.scalar_mass);
}
inline double photon_omega(const LatticeConfig& cfg, const MomentumIndex& k) {
    return dispersion(cfg, k, cfg.photon_mass());
}

enum class FieldKind { Scalar1, Scalar2, Photon };

// Global mode ordering shared by every backend: scalar-1 block, scalar-2
// block, then one block per photon component. Within a block, modes are
// indexed by the flat coordinate index (site for position-space oscillators,
// momentum for particle modes; both run over the same range).
struct ModeLayout {
    LatticeConfig cfg;

    std::int64_t block_offset(FieldKind kind, int component = 0) const {
        const std::int64_t v = cfg.sites();
        switch (kind) {
            case FieldKind::Scalar1: return 0;
            case FieldKind::Scalar2: return v;
            case FieldKind::Photon: return (2 + component) * v;
        }
        return 0;
    }
    std::int64_t mode(FieldKind kind, const Coords& x, int component = 0) const {
        return block_offset(kind, component) + x.flat(cfg);
    }
    struct ModeId {
        FieldKind kind;
        int component;
        Coords coords;
    };
    ModeId inverse(std::int64_t flat_mode) const {
        const std::int64_t v = cfg.sites();
        const std::int64_t block = flat_mode / v;
        const Coords x = Coords::from_flat(cfg, flat_mode % v);
        if (block == 0) return {FieldKind::Scalar1, 0, x};
        if (block == 1) return {FieldKind::Scalar2, 0, x};
        return {FieldKind::Photon, static_cast<int>(block - 2), x};
    }
    std::int64_t total() const { return cfg.total_modes(); }
};

inline ModeLayout mode_layout(const LatticeConfig& cfg) {
    cfg.validate();
    return ModeLayout{cfg};
}

inline std::string kind_name(FieldKind k) {
    switch (k) {
        case FieldKind::Scalar1: return "scalar";
        case FieldKind::Scalar2: return "antiscalar";
        case FieldKind::Photon: return "photon";
    }
    return "?";
}

}  // namespace sqed
