#include "sqed/modes.hpp"

#include <cmath>
#include <numbers>

namespace sqed {

namespace {

void embed_block(CMat& target, const CMat& block, Eigen::Index offset) {
    target.block(offset, offset, block.rows(), block.cols()) = block;
}

double pair_omega(const LatticeConfig& cfg, FieldKind kind, const MomentumIndex& k) {
    return kind == FieldKind::Photon ? photon_omega(cfg, k) : scalar_omega(cfg, k);
}

}  // namespace

CMat dft_unitary(const LatticeConfig& cfg) {
    const Eigen::Index v = cfg.sites();
    const double norm = 1.0 / std::sqrt(static_cast<double>(v));
    CMat u(v, v);
    for (Eigen::Index kf = 0; kf < v; ++kf) {
        const MomentumIndex k = Coords::from_flat(cfg, kf);
        for (Eigen::Index xf = 0; xf < v; ++xf) {
            const SiteIndex x = Coords::from_flat(cfg, xf);
            double kx = 0.0;
            for (int i = 0; i < cfg.dim; ++i) kx += momentum_component(cfg, k, i) * x.c[i];
            u(kf, xf) = norm * std::exp(cplx(0.0, -kx));
        }
    }
    return u;
}

ModeMap fourier_mode_map(const LatticeConfig& cfg, FieldKind kind) {
    cfg.validate();
    const ModeLayout layout = mode_layout(cfg);
    const Eigen::Index n = layout.total();
    ModeMap m = ModeMap::identity(n);
    const CMat dft = dft_unitary(cfg);
    const int ncomp = kind == FieldKind::Photon ? cfg.dim : 1;
    for (int c = 0; c < ncomp; ++c) embed_block(m.E, dft, layout.block_offset(kind, c));
    return m;
}

SymplecticOp fourier_symplectic(const LatticeConfig& cfg, FieldKind kind) {
    return to_symplectic(fourier_mode_map(cfg, kind));
}

ModeMap fourier_all(const LatticeConfig& cfg) {
    cfg.validate();
    const ModeLayout layout = mode_layout(cfg);
    ModeMap m = ModeMap::identity(layout.total());
    const CMat dft = dft_unitary(cfg);
    embed_block(m.E, dft, layout.block_offset(FieldKind::Scalar1));
    embed_block(m.E, dft, layout.block_offset(FieldKind::Scalar2));
    for (int c = 0; c < cfg.dim; ++c) embed_block(m.E, dft, layout.block_offset(FieldKind::Photon, c));
    return m;
}

std::vector<SqueezeEntry> squeeze_parameters(const LatticeConfig& cfg) {
    cfg.validate();
    std::vector<SqueezeEntry> out;
    for (std::int64_t kf = 0; kf < cfg.sites(); ++kf) {
        const MomentumIndex k = Coords::from_flat(cfg, kf);
        out.push_back({FieldKind::Scalar1, 0, k, std::log(scalar_omega(cfg, k))});
    }
    for (int c = 0; c < cfg.dim; ++c)
        for (std::int64_t kf = 0; kf < cfg.sites(); ++kf) {
            const MomentumIndex k = Coords::from_flat(cfg, kf);
            out.push_back({FieldKind::Photon, c, k, std::log(photon_omega(cfg, k))});
        }
    return out;
}

std::vector<SqueezePair> squeeze_pairs(const LatticeConfig& cfg) {
    cfg.validate();
    const ModeLayout layout = mode_layout(cfg);
    std::vector<SqueezePair> out;
    for (std::int64_t kf = 0; kf < cfg.sites(); ++kf) {
        const MomentumIndex k = Coords::from_flat(cfg, kf);
        out.push_back({layout.mode(FieldKind::Scalar1, k),
                       layout.mode(FieldKind::Scalar2, k.negated(cfg)),
                       0.5 * std::log(scalar_omega(cfg, k))});
    }
    for (int c = 0; c < cfg.dim; ++c)
        for (std::int64_t kf = 0; kf < cfg.sites(); ++kf) {
            const MomentumIndex k = Coords::from_flat(cfg, kf);
            const std::int64_t nf = k.negated(cfg).flat(cfg);
            if (kf > nf) continue;
            out.push_back({layout.mode(FieldKind::Photon, k, c),
                           layout.mode(FieldKind::Photon, Coords::from_flat(cfg, nf), c),
                           0.5 * std::log(photon_omega(cfg, k))});
        }
    return out;
}

ModeMap squeeze_mode_map(const LatticeConfig& cfg) {
    const Eigen::Index n = mode_layout(cfg).total();
    ModeMap m = ModeMap::identity(n);
    for (const SqueezePair& sp : squeeze_pairs(cfg)) {
        m.E(sp.slot_a, sp.slot_a) = std::cosh(sp.r);
        m.E(sp.slot_b, sp.slot_b) = std::cosh(sp.r);
        m.F(sp.slot_a, sp.slot_b) = std::sinh(sp.r);
        m.F(sp.slot_b, sp.slot_a) = std::sinh(sp.r);
    }
    return m;
}

ModeMapCoefficients mode_map_coefficients(const LatticeConfig& cfg) {
    cfg.validate();
    const ModeLayout layout = mode_layout(cfg);
    ModeMapCoefficients out;
    auto push = [&](FieldKind kind, int c, const MomentumIndex& k, FieldKind pkind, int pc) {
        const double w = pair_omega(cfg, kind, k);
        BogoliubovEntry e;
        e.kind = kind;
        e.component = c;
        e.k = k;
        e.field_factor = std::sqrt(0.5 * w);
        e.momentum_factor = 1.0 / std::sqrt(2.0 * w);
        e.u = (e.field_factor + e.momentum_factor) / std::numbers::sqrt2;
        e.v = (e.field_factor - e.momentum_factor) / std::numbers::sqrt2;
        e.slot = layout.mode(kind, k, c);
        e.partner_slot = layout.mode(pkind, k.negated(cfg), pc);
        out.push_back(e);
    };
    for (std::int64_t kf = 0; kf < cfg.sites(); ++kf) {
        const MomentumIndex k = Coords::from_flat(cfg, kf);
        push(FieldKind::Scalar1, 0, k, FieldKind::Scalar2, 0);
        push(FieldKind::Scalar2, 0, k, FieldKind::Scalar1, 0);
    }
    for (int c = 0; c < cfg.dim; ++c)
        for (std::int64_t kf = 0; kf < cfg.sites(); ++kf)
            push(FieldKind::Photon, c, Coords::from_flat(cfg, kf), FieldKind::Photon, c);
    return out;
}

ModeMap groundstate_mode_map(const LatticeConfig& cfg) {
    return compose(squeeze_mode_map(cfg), fourier_all(cfg));
}

SymplecticOp groundstate_unitary(const LatticeConfig& cfg) {
    SymplecticOp op = to_symplectic(groundstate_mode_map(cfg));
    require_symplectic(op);
    return op;
}

Vec mode_frequencies(const LatticeConfig& cfg) {
    cfg.validate();
    const ModeLayout layout = mode_layout(cfg);
    Vec w(layout.total());
    for (Eigen::Index m = 0; m < w.size(); ++m) {
        const ModeLayout::ModeId id = layout.inverse(m);
        w(m) = pair_omega(cfg, id.kind, id.coords);
    }
    return w;
}

double zero_point_energy(const LatticeConfig& cfg) { return 0.5 * mode_frequencies(cfg).sum(); }

std::vector<QuadTerm> field_linear_form(const ModeLayout& layout, FieldVar var,
                                        const SiteIndex& x, int component) {
    const Eigen::Index n = layout.total();
    const Eigen::Index b = layout.mode(FieldKind::Scalar1, x);
    const Eigen::Index c = layout.mode(FieldKind::Scalar2, x);
    const double s = 1.0 / std::numbers::sqrt2;
    switch (var) {
        case FieldVar::Phi1: return {{b, s}, {c, s}};
        case FieldVar::Phi2: return {{n + b, s}, {n + c, -s}};
        case FieldVar::Pi1: return {{n + b, s}, {n + c, s}};
        case FieldVar::Pi2: return {{c, s}, {b, -s}};
        case FieldVar::Photon: return {{layout.mode(FieldKind::Photon, x, component), 1.0}};
        case FieldVar::PhotonMomentum:
            return {{n + layout.mode(FieldKind::Photon, x, component), 1.0}};
    }
    return {};
}

Mat free_quadratic_form(const LatticeConfig& cfg) {
    cfg.validate();
    const ModeLayout layout = mode_layout(cfg);
    const Eigen::Index n = layout.total();
    Mat w = Mat::Zero(2 * n, 2 * n);
    auto add_sq = [&](const std::vector<QuadTerm>& form, double scale) {
        for (const QuadTerm& a : form)
            for (const QuadTerm& b : form) w(a.quad_index, b.quad_index) += scale * a.coef * b.coef;
    };
    auto diff = [](std::vector<QuadTerm> fwd, const std::vector<QuadTerm>& here) {
        for (const QuadTerm& t : here) fwd.push_back({t.quad_index, -t.coef});
        return fwd;
    };
    const double m2 = cfg.scalar_mass * cfg.scalar_mass;
    const double mg2 = cfg.photon_mass() * cfg.photon_mass();
    for (std::int64_t xf = 0; xf < cfg.sites(); ++xf) {
        const SiteIndex x = Coords::from_flat(cfg, xf);
        for (FieldVar f : {FieldVar::Phi1, FieldVar::Phi2}) {
            add_sq(field_linear_form(layout, f, x), m2);
            for (int i = 0; i < cfg.dim; ++i)
                add_sq(diff(field_linear_form(layout, f, x.shifted(cfg, i, 1)),
                            field_linear_form(layout, f, x)),
                       1.0);
        }
        add_sq(field_linear_form(layout, FieldVar::Pi1, x), 1.0);
        add_sq(field_linear_form(layout, FieldVar::Pi2, x), 1.0);
        for (int c = 0; c < cfg.dim; ++c) {
            add_sq(field_linear_form(layout, FieldVar::Photon, x, c), mg2);
            add_sq(field_linear_form(layout, FieldVar::PhotonMomentum, x, c), 1.0);
            for (int i = 0; i < cfg.dim; ++i)
                add_sq(diff(field_linear_form(layout, FieldVar::Photon, x.shifted(cfg, i, 1), c),
                            field_linear_form(layout, FieldVar::Photon, x, c)),
                       1.0);
        }
    }
    return w;
}

}  // namespace sqed
