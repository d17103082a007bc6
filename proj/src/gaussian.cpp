#include "sqed/gaussian.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "sqed/modes.hpp"

namespace sqed {

GaussianState vacuum(Eigen::Index n_modes) {
    if (n_modes < 1) throw DimensionMismatch("vacuum needs at least one mode");
    return {Vec::Zero(2 * n_modes), 0.5 * Mat::Identity(2 * n_modes, 2 * n_modes)};
}

double uncertainty_defect(const GaussianState& state) {
    const Eigen::Index n = state.n_modes();
    CMat c = state.cov.cast<cplx>() + cplx(0.0, 0.5) * omega_matrix(n).cast<cplx>();
    Eigen::SelfAdjointEigenSolver<CMat> es(c, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void require_valid(const GaussianState& state) {
    if (state.cov.rows() != state.mean.size() || state.cov.cols() != state.mean.size())
        throw DimensionMismatch("state moments disagree in size");
    if ((state.cov - state.cov.transpose()).norm() > 1e-9)
        throw DimensionMismatch("covariance not symmetric");
    if (uncertainty_defect(state) < -1e-9)
        throw DimensionMismatch("covariance violates the uncertainty relation");
}

GaussianState apply(const GaussianState& state, const SymplecticOp& op) {
    if (op.matrix.rows() != state.mean.size())
        throw DimensionMismatch("state and operator sizes disagree");
    return {op.matrix * state.mean + op.displacement,
            op.matrix * state.cov * op.matrix.transpose()};
}

SymplecticOp quadratic_flow(const Mat& w, double t) {
    const Eigen::Index n = w.rows() / 2;
    Mat gen = t * (omega_matrix(n) * w);
    return {gen.exp(), Vec::Zero(2 * n)};
}

SymplecticOp free_evolution(const LatticeConfig& cfg, double t) {
    cfg.validate();
    const Eigen::Index n = mode_layout(cfg).total();
    const Vec freq = mode_frequencies(cfg);
    Mat rot = Mat::Zero(2 * n, 2 * n);
    for (Eigen::Index m = 0; m < n; ++m) {
        const double th = freq(m) * t;
        rot(m, m) = rot(n + m, n + m) = std::cos(th);
        rot(m, n + m) = std::sin(th);
        rot(n + m, m) = -std::sin(th);
    }
    const Mat su = groundstate_unitary(cfg).matrix;
    const Mat sui = inverse({su, Vec::Zero(2 * n)}).matrix;
    return {sui * rot * su, Vec::Zero(2 * n)};
}

SymplecticOp counterterm_evolution(const LatticeConfig& cfg, double delta_m, double dt) {
    cfg.validate();
    const ModeLayout layout = mode_layout(cfg);
    const Eigen::Index n = layout.total();
    if (delta_m == 0.0) return SymplecticOp::identity(n);
    Mat w = Mat::Zero(2 * n, 2 * n);
    for (std::int64_t xf = 0; xf < cfg.sites(); ++xf) {
        const SiteIndex x = Coords::from_flat(cfg, xf);
        for (FieldVar f : {FieldVar::Phi1, FieldVar::Phi2})
            for (const QuadTerm& a : field_linear_form(layout, f, x))
                for (const QuadTerm& b : field_linear_form(layout, f, x))
                    w(a.quad_index, b.quad_index) += 0.5 * delta_m * a.coef * b.coef;
    }
    return quadratic_flow(w, dt);
}

SymplecticOp displacement(Eigen::Index n_modes, Eigen::Index mode, cplx alpha) {
    if (mode < 0 || mode >= n_modes) throw DimensionMismatch("displacement mode index");
    SymplecticOp op = SymplecticOp::identity(n_modes);
    op.displacement(mode) = std::numbers::sqrt2 * alpha.real();
    op.displacement(n_modes + mode) = std::numbers::sqrt2 * alpha.imag();
    return op;
}

double number_mean(const GaussianState& state, Eigen::Index mode) {
    const Eigen::Index n = state.n_modes();
    if (mode < 0 || mode >= n) throw DimensionMismatch("number_mean mode index");
    const double tr = state.cov(mode, mode) + state.cov(n + mode, n + mode);
    const double m2 = state.mean(mode) * state.mean(mode) +
                      state.mean(n + mode) * state.mean(n + mode);
    return 0.5 * tr + 0.5 * m2 - 0.5;
}

Vec number_means(const GaussianState& state) {
    Vec out(state.n_modes());
    for (Eigen::Index m = 0; m < out.size(); ++m) out(m) = number_mean(state, m);
    return out;
}

GaussianState ground_state(const LatticeConfig& cfg) {
    const SymplecticOp u = groundstate_unitary(cfg);
    return apply(vacuum(u.n_modes()), inverse(u));
}

std::string snapshot(const GaussianState& state) {
    const Eigen::Index d = state.mean.size();
    char buf[32];
    std::string out = "modes " + std::to_string(d / 2) + "\n";
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g%c", v, sep);
        out += buf;
    };
    for (Eigen::Index i = 0; i < d; ++i) put(state.mean(i), i + 1 == d ? '\n' : ' ');
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) put(state.cov(r, c), c + 1 == d ? '\n' : ' ');
    return out;
}

GaussianState parse_snapshot(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    Eigen::Index n = 0;
    if (!(in >> word >> n) || word != "modes" || n < 1)
        throw ConfigError("snapshot: bad header");
    GaussianState state{Vec(2 * n), Mat(2 * n, 2 * n)};
    for (Eigen::Index i = 0; i < 2 * n; ++i)
        if (!(in >> state.mean(i))) throw ConfigError("snapshot: truncated mean");
    for (Eigen::Index r = 0; r < 2 * n; ++r)
        for (Eigen::Index c = 0; c < 2 * n; ++c)
            if (!(in >> state.cov(r, c))) throw ConfigError("snapshot: truncated covariance");
    return state;
}

}  // namespace sqed
