#include "sqed/fock.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "sqed/errors.hpp"

namespace sqed {

namespace {

constexpr double kEntryDropTol = 1e-15;
constexpr double kHermitianTol = 1e-12;

using Triplet = Eigen::Triplet<cplx>;

void prune_small(SpMat& m) {
    m.prune([](const SpMat::StorageIndex&, const SpMat::StorageIndex&, const cplx& v) {
        return std::abs(v) > kEntryDropTol;
    });
    m.makeCompressed();
}

SpMat hermitized(const SpMat& m) {
    SpMat adj = SpMat(m.adjoint());
    double scale = std::max(1.0, m.norm());
    if (SpMat(m - adj).norm() > kHermitianTol * scale)
        throw Error("operator expected hermitian is not");
    SpMat out = 0.5 * (m + adj);
    prune_small(out);
    return out;
}

// symmetrized product of hermitian factors; equals ab when the factors
// commute, and stays hermitian under truncation when they only commute in
// the untruncated algebra
SpMat sym_product(const SpMat& a, const SpMat& b) {
    SpMat out = 0.5 * (SpMat(a * b) + SpMat(b * a));
    prune_small(out);
    return out;
}

// sum_m cx[m] x_m + cp[m] p_m as a one-pass ladder assembly
SpMat quad_combination(const FockSpace& space, const CVec& coeffs) {
    const Eigen::Index n = space.n_modes;
    if (coeffs.size() != 2 * n) throw DimensionMismatch("quadrature coefficient size");
    const double s2 = 1.0 / std::numbers::sqrt2;
    const cplx im(0.0, 1.0);
    std::vector<Eigen::Index> active;
    for (Eigen::Index m = 0; m < n; ++m)
        if (std::abs(coeffs(m)) > kEntryDropTol || std::abs(coeffs(n + m)) > kEntryDropTol)
            active.push_back(m);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(space.dim) * active.size() * 2);
    for (Eigen::Index m : active) {
        const cplx lower = (coeffs(m) - im * coeffs(n + m)) * s2;  // coefficient of a_m
        const cplx raise = (coeffs(m) + im * coeffs(n + m)) * s2;  // coefficient of a_m^dag
        const std::int64_t stride = space.stride(m);
        for (std::int64_t i = 0; i < space.dim; ++i) {
            const int occ = space.occupation(i, m);
            if (occ > 0 && std::abs(lower) > kEntryDropTol)
                trips.emplace_back(static_cast<int>(i - stride), static_cast<int>(i),
                                   lower * std::sqrt(double(occ)));
            if (occ < space.n_max && std::abs(raise) > kEntryDropTol)
                trips.emplace_back(static_cast<int>(i + stride), static_cast<int>(i),
                                   raise * std::sqrt(double(occ + 1)));
        }
    }
    SpMat out(static_cast<int>(space.dim), static_cast<int>(space.dim));
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

CVec basis_frame_coefficients(const FockSpace& space, const std::vector<QuadTerm>& form) {
    Vec w = Vec::Zero(2 * space.n_modes);
    for (const auto& t : form) w(t.quad_index) += t.coef;
    Vec c = space.form_transform * w;
    return c.cast<cplx>();
}

std::vector<QuadTerm> scaled_form(const std::vector<QuadTerm>& form, double s) {
    std::vector<QuadTerm> out = form;
    for (auto& t : out) t.coef *= s;
    return out;
}

std::vector<QuadTerm> merged(std::vector<QuadTerm> a, const std::vector<QuadTerm>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// centered lattice difference of a site-indexed form family
std::vector<QuadTerm> centered_difference(const ModeLayout& layout, const LatticeConfig& cfg,
                                          FieldVar var, const SiteIndex& x, int axis) {
    const SiteIndex fwd = x.shifted(cfg, axis, +1);
    const SiteIndex bwd = x.shifted(cfg, axis, -1);
    return merged(scaled_form(field_linear_form(layout, var, fwd), 0.5),
                  scaled_form(field_linear_form(layout, var, bwd), -0.5));
}

// transverse projector over photon x-quadratures; zero-momentum column dropped
Mat transverse_photon_matrix(const LatticeConfig& cfg) {
    const Eigen::Index nph = static_cast<Eigen::Index>(cfg.photon_modes());
    const auto layout = mode_layout(cfg);
    const Eigen::Index base = layout.block_offset(FieldKind::Photon);
    Mat out = Mat::Zero(nph, nph);
    const double vol = double(cfg.sites());
    for (std::int64_t kf = 0; kf < cfg.sites(); ++kf) {
        const MomentumIndex k = MomentumIndex::from_flat(cfg, kf);
        Vec kappa = Vec::Zero(cfg.dim);
        for (int i = 0; i < cfg.dim; ++i) kappa(i) = momentum_component(cfg, k, i);
        const double k2 = kappa.squaredNorm();
        if (k2 <= 0.0) continue;
        Mat proj = Mat::Identity(cfg.dim, cfg.dim) - (kappa * kappa.transpose()) / k2;
        for (std::int64_t xf = 0; xf < cfg.sites(); ++xf) {
            const SiteIndex x = SiteIndex::from_flat(cfg, xf);
            for (std::int64_t yf = 0; yf < cfg.sites(); ++yf) {
                const SiteIndex y = SiteIndex::from_flat(cfg, yf);
                double phase = 0.0;
                for (int i = 0; i < cfg.dim; ++i)
                    phase += momentum_component(cfg, k, i) * double(x.c[i] - y.c[i]);
                const double w = std::cos(phase) / vol;
                for (int i = 0; i < cfg.dim; ++i)
                    for (int j = 0; j < cfg.dim; ++j)
                        out(layout.mode(FieldKind::Photon, x, i) - base,
                            layout.mode(FieldKind::Photon, y, j) - base) += w * proj(i, j);
            }
        }
    }
    return out;
}

std::vector<QuadTerm> photon_form(const FockSpace& space, const Mat* transverse,
                                  const SiteIndex& x, int component) {
    const auto direct = field_linear_form(space.layout, FieldVar::Photon, x, component);
    if (transverse == nullptr) return direct;
    const Eigen::Index base = space.layout.block_offset(FieldKind::Photon);
    const Eigen::Index row = space.layout.mode(FieldKind::Photon, x, component) - base;
    std::vector<QuadTerm> out;
    for (Eigen::Index c = 0; c < transverse->cols(); ++c) {
        const double v = (*transverse)(row, c);
        if (std::abs(v) > kEntryDropTol) out.push_back({base + c, v});
    }
    return out;
}

// e^{-i t H} v by Lanczos with full reorthogonalization and adaptive substeps
CVec lanczos_expmv(const SpMat& h, double t, CVec v, double tol) {
    const double vnorm0 = v.norm();
    if (vnorm0 <= 0.0) throw ZeroNorm("evolution of a null vector");
    if (t == 0.0) return v;
    const Eigen::Index dim = h.rows();
    const int m_max = static_cast<int>(std::min<Eigen::Index>(dim, dim > 200000 ? 24 : 48));
    const cplx im(0.0, 1.0);
    double done = 0.0;
    const double total = t;
    int guard = 0;
    Eigen::MatrixXcd basis(dim, m_max);
    while (std::abs(total - done) > 1e-15 * std::abs(total)) {
        if (++guard > 100000) throw Error("evolution oracle failed to converge");
        const double beta0 = v.norm();
        Vec alpha = Vec::Zero(m_max), beta = Vec::Zero(m_max);
        basis.col(0) = v / beta0;
        int m = m_max;
        bool breakdown = false;
        for (int j = 0; j < m_max; ++j) {
            CVec w = h * basis.col(j);
            alpha(j) = w.dot(basis.col(j)).real();
            w -= alpha(j) * basis.col(j);
            if (j > 0) w -= beta(j - 1) * basis.col(j - 1);
            for (int pass = 0; pass < 2; ++pass) {
                CVec proj = basis.leftCols(j + 1).adjoint() * w;
                w -= basis.leftCols(j + 1) * proj;
            }
            const double b = w.norm();
            if (b < 1e-13 * std::max(1.0, std::abs(alpha(j)))) {
                m = j + 1;
                breakdown = true;
                break;
            }
            beta(j) = b;
            if (j >= 1) {
                // a-posteriori estimate for the remaining window; once it is
                // converged a deeper basis cannot improve the step
                Mat tri = Mat::Zero(j + 1, j + 1);
                for (int i = 0; i <= j; ++i) {
                    tri(i, i) = alpha(i);
                    if (i < j) tri(i, i + 1) = tri(i + 1, i) = beta(i);
                }
                Eigen::SelfAdjointEigenSolver<Mat> small(tri);
                CVec phase(j + 1);
                for (int i = 0; i <= j; ++i)
                    phase(i) = std::exp(-im * small.eigenvalues()(i) * (total - done));
                const CMat u = small.eigenvectors().cast<cplx>();
                const CVec y = u * phase.cwiseProduct(CVec(u.adjoint().col(0)));
                if (beta(j) * std::abs(y(j)) <= 0.25 * tol) {
                    m = j + 1;
                    break;
                }
            }
            if (j + 1 < m_max) basis.col(j + 1) = w / b;
        }
        Mat tri = Mat::Zero(m, m);
        for (int j = 0; j < m; ++j) {
            tri(j, j) = alpha(j);
            if (j + 1 < m) tri(j, j + 1) = tri(j + 1, j) = beta(j);
        }
        Eigen::SelfAdjointEigenSolver<Mat> eig(tri);
        const Vec theta = eig.eigenvalues();
        const CMat u = eig.eigenvectors().cast<cplx>();
        const CVec weights = u.adjoint().col(0);
        double dt = total - done;
        for (;;) {
            CVec phase(m);
            for (int j = 0; j < m; ++j) phase(j) = std::exp(-im * theta(j) * dt);
            CVec y = u * phase.cwiseProduct(weights);
            const double err = breakdown ? 0.0 : beta(m - 1) * std::abs(y(m - 1));
            if (err <= tol || std::abs(dt) < 1e-14 * std::abs(total)) {
                v = basis.leftCols(m) * (beta0 * y);
                done += dt;
                break;
            }
            dt *= 0.5;
        }
    }
    return v;
}

CVec dense_expmv(const SpMat& h, double t, const CVec& v) {
    CMat dense = CMat(h);
    Eigen::SelfAdjointEigenSolver<CMat> eig(dense);
    const cplx im(0.0, 1.0);
    CVec phases(eig.eigenvalues().size());
    for (Eigen::Index j = 0; j < phases.size(); ++j)
        phases(j) = std::exp(-im * eig.eigenvalues()(j) * t);
    return eig.eigenvectors() * phases.cwiseProduct(eig.eigenvectors().adjoint() * v);
}

// Lowest two eigenvalues of H = (alpha x^2 + beta p^2) / 2 on a truncated
// number basis.  x^2 and -p^2 = K^2 (p = iK, K real antisymmetric) are real,
// so the problem is real symmetric.
std::pair<double, double> truncated_mode_levels(double alpha, double beta, int cutoff) {
    const int d = cutoff + 1;
    Mat x = Mat::Zero(d, d);
    Mat k = Mat::Zero(d, d);
    const double s2 = 1.0 / std::numbers::sqrt2;
    for (int n = 0; n + 1 < d; ++n) {
        const double r = std::sqrt(double(n + 1)) * s2;
        x(n, n + 1) = r;
        x(n + 1, n) = r;
        k(n, n + 1) = -r;
        k(n + 1, n) = r;
    }
    const Mat h = 0.5 * alpha * x * x - 0.5 * beta * k * k;
    Eigen::SelfAdjointEigenSolver<Mat> eig(h);
    return {eig.eigenvalues()(0), eig.eigenvalues()(1)};
}

}  // namespace

FockSpace FockSpace::make(const LatticeConfig& cfg, int n_max, Rep rep) {
    cfg.validate();
    if (n_max < 1) throw CutoffTooSmall("occupation cutoff must be at least 1");
    FockSpace space;
    space.cfg = cfg;
    space.layout = mode_layout(cfg);
    space.n_max = n_max;
    space.rep = rep;
    space.n_modes = static_cast<Eigen::Index>(cfg.total_modes());
    std::int64_t dim = 1;
    for (Eigen::Index m = 0; m < space.n_modes; ++m) {
        dim *= (n_max + 1);
        if (dim > kKrylovOracleLimit)
            throw OracleTooLarge("truncated space exceeds the evolution oracle limit");
    }
    space.dim = dim;
    if (rep == Rep::Particle) {
        const Mat s = to_symplectic(groundstate_mode_map(cfg)).matrix;
        space.form_transform = s.inverse().transpose();
    } else {
        space.form_transform = Mat::Identity(2 * space.n_modes, 2 * space.n_modes);
    }
    return space;
}

int FockSpace::occupation(std::int64_t index, Eigen::Index mode) const {
    return static_cast<int>((index / stride(mode)) % (n_max + 1));
}

std::int64_t FockSpace::stride(Eigen::Index mode) const {
    std::int64_t s = 1;
    for (Eigen::Index m = 0; m < mode; ++m) s *= (n_max + 1);
    return s;
}

FockState basis_state(const FockSpace& space, const std::vector<int>& occupations) {
    if (static_cast<Eigen::Index>(occupations.size()) != space.n_modes)
        throw DimensionMismatch("occupation list length");
    std::int64_t index = 0;
    for (Eigen::Index m = 0; m < space.n_modes; ++m) {
        if (occupations[m] < 0 || occupations[m] > space.n_max)
            throw CutoffTooSmall("basis occupation outside cutoff");
        index += occupations[m] * space.stride(m);
    }
    FockState psi;
    psi.amp = CVec::Zero(space.dim);
    psi.amp(index) = 1.0;
    return psi;
}

FockState vacuum_state(const FockSpace& space) {
    return basis_state(space, std::vector<int>(space.n_modes, 0));
}

CVec apply(const FockOperator& op, const FockState& psi) { return op.mat * psi.amp; }

double expectation(const FockOperator& op, const FockState& psi) {
    return (psi.amp.dot(op.mat * psi.amp)).real();
}

SpMat lowering_op(const FockSpace& space, Eigen::Index mode) {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(space.dim));
    const std::int64_t stride = space.stride(mode);
    for (std::int64_t i = 0; i < space.dim; ++i) {
        const int occ = space.occupation(i, mode);
        if (occ > 0)
            trips.emplace_back(static_cast<int>(i - stride), static_cast<int>(i),
                               std::sqrt(double(occ)));
    }
    SpMat out(static_cast<int>(space.dim), static_cast<int>(space.dim));
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

SpMat quad_op(const FockSpace& space, Eigen::Index quad_index) {
    CVec c = CVec::Zero(2 * space.n_modes);
    c(quad_index) = 1.0;
    return quad_combination(space, c);
}

SpMat form_op(const FockSpace& space, const std::vector<QuadTerm>& form) {
    return quad_combination(space, basis_frame_coefficients(space, form));
}

Vec number_diagonal(const FockSpace& space, Eigen::Index mode) {
    Vec out(space.dim);
    for (std::int64_t i = 0; i < space.dim; ++i) out(i) = double(space.occupation(i, mode));
    return out;
}

namespace {

FockOperator hermitian_form(const FockSpace& space, const std::vector<QuadTerm>& form) {
    return {form_op(space, form), true};
}

}  // namespace

FockOperator QuadratureOps::phi1(const SiteIndex& x) const {
    return hermitian_form(*space, field_linear_form(space->layout, FieldVar::Phi1, x));
}
FockOperator QuadratureOps::phi2(const SiteIndex& x) const {
    return hermitian_form(*space, field_linear_form(space->layout, FieldVar::Phi2, x));
}
FockOperator QuadratureOps::pi1(const SiteIndex& x) const {
    return hermitian_form(*space, field_linear_form(space->layout, FieldVar::Pi1, x));
}
FockOperator QuadratureOps::pi2(const SiteIndex& x) const {
    return hermitian_form(*space, field_linear_form(space->layout, FieldVar::Pi2, x));
}
FockOperator QuadratureOps::photon(const SiteIndex& x, int component) const {
    return hermitian_form(*space,
                          field_linear_form(space->layout, FieldVar::Photon, x, component));
}
FockOperator QuadratureOps::photon_momentum(const SiteIndex& x, int component) const {
    return hermitian_form(
        *space, field_linear_form(space->layout, FieldVar::PhotonMomentum, x, component));
}
FockOperator QuadratureOps::phi(const SiteIndex& x) const {
    const double s2 = 1.0 / std::numbers::sqrt2;
    const cplx im(0.0, 1.0);
    CVec c = basis_frame_coefficients(*space, field_linear_form(space->layout, FieldVar::Phi1, x));
    c += im * basis_frame_coefficients(*space,
                                       field_linear_form(space->layout, FieldVar::Phi2, x));
    return {quad_combination(*space, (c * s2).eval()), false};
}
FockOperator QuadratureOps::pi(const SiteIndex& x) const {
    const double s2 = 1.0 / std::numbers::sqrt2;
    const cplx im(0.0, 1.0);
    CVec c = basis_frame_coefficients(*space, field_linear_form(space->layout, FieldVar::Pi1, x));
    c -= im * basis_frame_coefficients(*space,
                                       field_linear_form(space->layout, FieldVar::Pi2, x));
    return {quad_combination(*space, (c * s2).eval()), false};
}

QuadratureOps build_quadrature_ops(const FockSpace& space) { return {&space}; }

FockOperator mode_annihilation_op(const FockSpace& space, Eigen::Index slot) {
    if (slot < 0 || slot >= space.n_modes) throw DimensionMismatch("mode slot out of range");
    if (space.rep == Rep::Particle) return {lowering_op(space, slot), false};
    const ModeMap map = groundstate_mode_map(space.cfg);
    const Eigen::Index n = space.n_modes;
    const double s2 = 1.0 / std::numbers::sqrt2;
    const cplx im(0.0, 1.0);
    CVec c = CVec::Zero(2 * n);
    for (Eigen::Index r = 0; r < n; ++r) {
        c(r) = (map.E(slot, r) + map.F(slot, r)) * s2;
        c(n + r) = im * (map.E(slot, r) - map.F(slot, r)) * s2;
    }
    return {quad_combination(space, c), false};
}

FockOperator build_H0(const FockSpace& space) {
    if (space.rep == Rep::Particle) {
        const Vec omega = mode_frequencies(space.cfg);
        std::vector<Triplet> trips;
        trips.reserve(static_cast<std::size_t>(space.dim));
        for (std::int64_t i = 0; i < space.dim; ++i) {
            double energy = 0.0;
            for (Eigen::Index m = 0; m < space.n_modes; ++m)
                energy += omega(m) * space.occupation(i, m);
            if (energy != 0.0)
                trips.emplace_back(static_cast<int>(i), static_cast<int>(i), energy);
        }
        SpMat mat(static_cast<int>(space.dim), static_cast<int>(space.dim));
        mat.setFromTriplets(trips.begin(), trips.end());
        mat.makeCompressed();
        return {mat, true};
    }
    const Mat w = free_quadratic_form(space.cfg);
    std::vector<SpMat> quads(2 * space.n_modes);
    for (Eigen::Index q = 0; q < 2 * space.n_modes; ++q) quads[q] = quad_op(space, q);
    SpMat acc(static_cast<int>(space.dim), static_cast<int>(space.dim));
    for (Eigen::Index a = 0; a < w.rows(); ++a)
        for (Eigen::Index b = 0; b < w.cols(); ++b) {
            if (std::abs(w(a, b)) < kEntryDropTol) continue;
            acc += SpMat(0.5 * w(a, b) * (quads[a] * quads[b]));
        }
    const double zp = zero_point_energy(space.cfg);
    SpMat shift(static_cast<int>(space.dim), static_cast<int>(space.dim));
    shift.setIdentity();
    acc -= SpMat(zp * shift);
    prune_small(acc);
    return {hermitized(acc), true};
}

std::pair<FockOperator, FockOperator> build_HI_parts(const FockSpace& space,
                                                     InteractionVariant variant) {
    const LatticeConfig& cfg = space.cfg;
    const ModeLayout& layout = space.layout;
    Mat transverse;
    const Mat* proj = nullptr;
    if (variant == InteractionVariant::Transverse) {
        transverse = transverse_photon_matrix(cfg);
        proj = &transverse;
    }
    const int n = static_cast<int>(space.dim);
    SpMat cubic(n, n), quartic(n, n);
    for (std::int64_t xf = 0; xf < cfg.sites(); ++xf) {
        const SiteIndex x = SiteIndex::from_flat(cfg, xf);
        const SpMat p1 = form_op(space, field_linear_form(layout, FieldVar::Phi1, x));
        const SpMat p2 = form_op(space, field_linear_form(layout, FieldVar::Phi2, x));
        SpMat a2_sum(n, n);
        for (int i = 0; i < cfg.dim; ++i) {
            const SpMat ai = form_op(space, photon_form(space, proj, x, i));
            SpMat ai2 = SpMat(ai * ai);
            prune_small(ai2);
            a2_sum += ai2;
            const SpMat dp1 = form_op(space, centered_difference(layout, cfg, FieldVar::Phi1, x, i));
            const SpMat dp2 = form_op(space, centered_difference(layout, cfg, FieldVar::Phi2, x, i));
            if (dp1.nonZeros() == 0 && dp2.nonZeros() == 0) continue;
            SpMat current = sym_product(p1, dp2) - sym_product(p2, dp1);
            prune_small(current);
            if (current.nonZeros() == 0) continue;
            SpMat term = SpMat(ai * current);
            prune_small(term);
            cubic -= term;
        }
        if (a2_sum.nonZeros() == 0) continue;
        SpMat dens = SpMat(p1 * p1) + SpMat(p2 * p2);
        prune_small(dens);
        SpMat term = SpMat(a2_sum * dens);
        prune_small(term);
        quartic -= 0.5 * term;
    }
    prune_small(cubic);
    prune_small(quartic);
    FockOperator c{cubic.nonZeros() ? hermitized(cubic) : cubic, true};
    FockOperator q{quartic.nonZeros() ? hermitized(quartic) : quartic, true};
    return {std::move(c), std::move(q)};
}

FockOperator build_HI(const FockSpace& space, double e, InteractionVariant variant) {
    auto [cubic, quartic] = build_HI_parts(space, variant);
    SpMat mat = SpMat(e * cubic.mat) + SpMat(e * e * quartic.mat);
    prune_small(mat);
    return {std::move(mat), true};
}

FockOperator build_Hct(const FockSpace& space, double delta_m) {
    const int n = static_cast<int>(space.dim);
    SpMat acc(n, n);
    for (std::int64_t xf = 0; xf < space.cfg.sites(); ++xf) {
        const SiteIndex x = SiteIndex::from_flat(space.cfg, xf);
        const SpMat p1 = form_op(space, field_linear_form(space.layout, FieldVar::Phi1, x));
        const SpMat p2 = form_op(space, field_linear_form(space.layout, FieldVar::Phi2, x));
        acc += SpMat(p1 * p1) + SpMat(p2 * p2);
    }
    SpMat mat = SpMat((delta_m / 4.0) * acc);
    prune_small(mat);
    return {hermitized(mat), true};
}

FockOperator charge_op(const FockSpace& space) {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(space.dim));
    for (std::int64_t i = 0; i < space.dim; ++i) {
        double q = 0.0;
        for (Eigen::Index m = 0; m < space.n_modes; ++m) {
            const auto id = space.layout.inverse(m);
            if (id.kind == FieldKind::Scalar1) q += space.occupation(i, m);
            if (id.kind == FieldKind::Scalar2) q -= space.occupation(i, m);
        }
        if (q != 0.0) trips.emplace_back(static_cast<int>(i), static_cast<int>(i), q);
    }
    SpMat mat(static_cast<int>(space.dim), static_cast<int>(space.dim));
    mat.setFromTriplets(trips.begin(), trips.end());
    mat.makeCompressed();
    return {std::move(mat), true};
}

FockOperator gauss_constraint_op(const FockSpace& space, const MomentumIndex& k) {
    const int n = static_cast<int>(space.dim);
    SpMat acc(n, n);
    for (int i = 0; i < space.cfg.dim; ++i) {
        const double kappa = momentum_component(space.cfg, k, i);
        if (kappa == 0.0) continue;
        const Eigen::Index slot = space.layout.mode(FieldKind::Photon, k, i);
        acc += SpMat(kappa * mode_annihilation_op(space, slot).mat);
    }
    prune_small(acc);
    return {std::move(acc), false};
}

FockOperator gauss_law_op(const FockSpace& space, const SiteIndex& x, double e) {
    const LatticeConfig& cfg = space.cfg;
    const ModeLayout& layout = space.layout;
    std::vector<QuadTerm> divergence;
    for (int i = 0; i < cfg.dim; ++i)
        divergence =
            merged(divergence, centered_difference(layout, cfg, FieldVar::PhotonMomentum, x, i));
    SpMat mat = form_op(space, divergence);
    if (e != 0.0) {
        const SpMat p1 = form_op(space, field_linear_form(layout, FieldVar::Phi1, x));
        const SpMat p2 = form_op(space, field_linear_form(layout, FieldVar::Phi2, x));
        const SpMat q1 = form_op(space, field_linear_form(layout, FieldVar::Pi1, x));
        const SpMat q2 = form_op(space, field_linear_form(layout, FieldVar::Pi2, x));
        mat -= SpMat(e * (sym_product(q2, p1) - sym_product(q1, p2)));
    }
    prune_small(mat);
    return {hermitized(mat), true};
}

FockState exact_evolve(const FockOperator& h, double t, const FockState& psi) {
    if (!h.hermitian) throw ConfigError("evolution oracle needs a hermitian generator");
    if (h.mat.rows() != psi.amp.size()) throw DimensionMismatch("state/operator size");
    if (psi.amp.size() > kKrylovOracleLimit)
        throw OracleTooLarge("state exceeds the evolution oracle limit");
    FockState out;
    if (psi.amp.size() <= 512)
        out.amp = dense_expmv(h.mat, t, psi.amp);
    else
        out.amp = lanczos_expmv(h.mat, t, psi.amp, 1e-12);
    return out;
}

std::pair<double, CVec> lowest_eigenpair(const FockOperator& h, double tol, int max_restarts) {
    if (!h.hermitian) throw ConfigError("eigenpair oracle needs a hermitian operator");
    const Eigen::Index dim = h.mat.rows();
    if (dim > kKrylovOracleLimit) throw OracleTooLarge("operator exceeds the oracle limit");
    if (dim <= 2048) {
        Eigen::SelfAdjointEigenSolver<CMat> eig(CMat(h.mat));
        return {eig.eigenvalues()(0), eig.eigenvectors().col(0)};
    }
    const int m = static_cast<int>(std::min<Eigen::Index>(dim, 64));
    const int keep = 8;
    std::mt19937_64 rng(0x5eed5eedULL);
    auto uniform = [&rng]() { return double(rng() >> 11) * 0x1.0p-53 - 0.5; };
    CVec start(dim);
    for (Eigen::Index i = 0; i < dim; ++i) start(i) = cplx(uniform(), uniform());
    start.normalize();

    Eigen::MatrixXcd basis(dim, m + 1);
    Mat small = Mat::Zero(m, m);
    int locked = 0;
    basis.col(0) = start;
    Vec ritz_vals;
    for (int restart = 0; restart < max_restarts; ++restart) {
        int j = locked;
        double beta = 0.0;
        for (; j < m; ++j) {
            CVec w = h.mat * basis.col(j);
            const double alpha = w.dot(basis.col(j)).real();
            small(j, j) = alpha;
            for (int pass = 0; pass < 2; ++pass) {
                CVec proj = basis.leftCols(j + 1).adjoint() * w;
                w -= basis.leftCols(j + 1) * proj;
            }
            beta = w.norm();
            if (beta < 1e-14) break;
            if (j + 1 < m) {
                small(j, j + 1) = small(j + 1, j) = beta;
                basis.col(j + 1) = w / beta;
            } else {
                basis.col(m) = w / beta;
            }
        }
        const int active = std::min(j + 1, m);
        Eigen::SelfAdjointEigenSolver<Mat> eig(small.topLeftCorner(active, active));
        ritz_vals = eig.eigenvalues();
        const Mat u = eig.eigenvectors();
        const double resid = beta * std::abs(u(active - 1, 0));
        const double scale = std::max(1.0, ritz_vals.cwiseAbs().maxCoeff());
        if (resid <= tol * scale || beta < 1e-14) {
            CVec vec = basis.leftCols(active) * u.col(0).cast<cplx>();
            vec.normalize();
            return {ritz_vals(0), vec};
        }
        if (restart == max_restarts - 1) break;
        const int nk = std::min(keep, active - 1);
        Eigen::MatrixXcd kept = basis.leftCols(active) * u.leftCols(nk).cast<cplx>();
        Mat next = Mat::Zero(m, m);
        for (int c = 0; c < nk; ++c) {
            next(c, c) = ritz_vals(c);
            next(c, nk) = next(nk, c) = beta * u(active - 1, c);
        }
        basis.leftCols(nk) = kept;
        basis.col(nk) = basis.col(m).eval();
        small = next;
        locked = nk;
    }
    throw Error("eigenpair oracle failed to converge");
}

namespace {

// hermitian generators of the passive and squeezing layers
SpMat passive_generator(const FockSpace& space, const CMat& h) {
    std::vector<Triplet> trips;
    const Eigen::Index n = space.n_modes;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) {
            const cplx v = h(j, k);
            if (std::abs(v) < kEntryDropTol) continue;
            const std::int64_t sj = space.stride(j), sk = space.stride(k);
            for (std::int64_t i = 0; i < space.dim; ++i) {
                const int nk = space.occupation(i, k);
                if (nk == 0) continue;
                if (j == k) {
                    trips.emplace_back(static_cast<int>(i), static_cast<int>(i),
                                       v * double(nk));
                    continue;
                }
                const int nj = space.occupation(i, j);
                if (nj >= space.n_max) continue;
                trips.emplace_back(static_cast<int>(i - sk + sj), static_cast<int>(i),
                                   v * std::sqrt(double(nk) * double(nj + 1)));
            }
        }
    SpMat out(static_cast<int>(space.dim), static_cast<int>(space.dim));
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

SpMat squeeze_generator(const FockSpace& space) {
    const auto pairs = squeeze_pairs(space.cfg);
    const cplx im(0.0, 1.0);
    std::vector<Triplet> trips;
    for (const auto& pr : pairs) {
        if (std::abs(pr.r) < kEntryDropTol) continue;
        if (pr.slot_a != pr.slot_b) {
            const std::int64_t sa = space.stride(pr.slot_a), sb = space.stride(pr.slot_b);
            for (std::int64_t i = 0; i < space.dim; ++i) {
                const int na = space.occupation(i, pr.slot_a);
                const int nb = space.occupation(i, pr.slot_b);
                if (na < space.n_max && nb < space.n_max)
                    trips.emplace_back(static_cast<int>(i + sa + sb), static_cast<int>(i),
                                       im * pr.r * std::sqrt(double(na + 1) * double(nb + 1)));
                if (na > 0 && nb > 0)
                    trips.emplace_back(static_cast<int>(i - sa - sb), static_cast<int>(i),
                                       -im * pr.r * std::sqrt(double(na) * double(nb)));
            }
        } else {
            const std::int64_t sa = space.stride(pr.slot_a);
            for (std::int64_t i = 0; i < space.dim; ++i) {
                const int na = space.occupation(i, pr.slot_a);
                if (na + 2 <= space.n_max)
                    trips.emplace_back(static_cast<int>(i + 2 * sa), static_cast<int>(i),
                                       im * 0.5 * pr.r *
                                           std::sqrt(double(na + 1) * double(na + 2)));
                if (na >= 2)
                    trips.emplace_back(static_cast<int>(i - 2 * sa), static_cast<int>(i),
                                       -im * 0.5 * pr.r * std::sqrt(double(na) * double(na - 1)));
            }
        }
    }
    SpMat out(static_cast<int>(space.dim), static_cast<int>(space.dim));
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

}  // namespace

FockState apply_groundstate_unitary(const FockSpace& space, const FockState& psi, bool dagger) {
    if (space.rep != Rep::Position)
        throw ConfigError("ground-state unitary acts on the position register");
    const CMat p = fourier_all(space.cfg).E;
    const CMat hmat = cplx(0.0, 1.0) * p.log();
    FockOperator hp{passive_generator(space, hmat), true};
    FockOperator hz{squeeze_generator(space), true};
    FockState out = psi;
    // The register-frame normal-mode matrix factors as S_Z * S_F, and conjugation
    // composes in the reverse order of the operator product, so the unitary is
    // exp(-i H_Z) * exp(-i H_P).
    if (!dagger) {
        out = exact_evolve(hp, 1.0, out);
        out = exact_evolve(hz, 1.0, out);
    } else {
        out = exact_evolve(hz, -1.0, out);
        out = exact_evolve(hp, -1.0, out);
    }
    return out;
}

FockState prepare_ground(const FockSpace& space) {
    if (space.rep == Rep::Particle) return vacuum_state(space);
    return apply_groundstate_unitary(space, vacuum_state(space), true);
}

FockState prepare_excited(const FockSpace& space, const FockState& ground,
                          const std::vector<CreationProfile>& profiles) {
    FockState psi = ground;
    for (const auto& profile : profiles) {
        if (profile.kind == FieldKind::Photon)
            throw ConfigError("in-states are built from scalar quanta only");
        const int n = static_cast<int>(space.dim);
        SpMat lower(n, n);
        for (const auto& [k, f] : profile.amplitudes) {
            const Eigen::Index slot = space.layout.mode(profile.kind, k);
            lower += SpMat(std::conj(f) * mode_annihilation_op(space, slot).mat);
        }
        psi.amp = SpMat(lower.adjoint()) * psi.amp;
        const double norm = psi.amp.norm();
        if (norm < 1e-12) throw ZeroNorm("creation profile annihilated the state");
        psi.amp /= norm;
    }
    return psi;
}

TrotterStepper::TrotterStepper(const FockSpace& space, InteractionVariant variant, int sign)
    : space_(&space), sign_(sign) {
    h0_ = build_H0(space);
    auto [cubic, quartic] = build_HI_parts(space, variant);
    cubic_ = std::move(cubic);
    quartic_ = std::move(quartic);
    hct_unit_ = build_Hct(space, 1.0);
    if (space.rep == Rep::Particle) {
        diagonal_h0_ = true;
        h0_diag_ = Vec::Zero(space.dim);
        for (int k = 0; k < h0_.mat.outerSize(); ++k)
            for (SpMat::InnerIterator it(h0_.mat, k); it; ++it)
                if (it.row() == it.col()) h0_diag_(it.row()) = it.value().real();
    }
}

FockState TrotterStepper::step(double e, double delta_m, double dt, const FockState& psi) const {
    FockState out = psi;
    if (delta_m != 0.0) out = exact_evolve(hct_unit_, -sign_ * dt * delta_m, out);
    if (e != 0.0) {
        const bool has_cubic = cubic_.mat.nonZeros() > 0;
        const bool has_quartic = quartic_.mat.nonZeros() > 0;
        if (has_cubic && has_quartic) {
            SpMat hi = SpMat(e * cubic_.mat) + SpMat(e * e * quartic_.mat);
            out = exact_evolve({std::move(hi), true}, -sign_ * dt, out);
        } else if (has_cubic) {
            out = exact_evolve(cubic_, -sign_ * e * dt, out);
        } else if (has_quartic) {
            out = exact_evolve(quartic_, -sign_ * e * e * dt, out);
        }
    }
    if (diagonal_h0_) {
        const cplx im(0.0, 1.0);
        for (std::int64_t i = 0; i < space_->dim; ++i)
            out.amp(i) *= std::exp(im * double(sign_) * dt * h0_diag_(i));
    } else {
        out = exact_evolve(h0_, -sign_ * dt, out);
    }
    return out;
}

FockState trotter_step(const FockSpace& space, double e, double delta_m, double dt,
                       const FockState& psi, int sign) {
    return TrotterStepper(space, InteractionVariant::Full, sign).step(e, delta_m, dt, psi);
}

NumberMeasurement measure_numbers(const FockSpace& space, const FockState& psi, int n_samples,
                                  std::uint64_t seed) {
    NumberMeasurement out;
    out.marginals = Mat::Zero(space.n_modes, space.n_max + 1);
    for (std::int64_t i = 0; i < space.dim; ++i) {
        const double w = std::norm(psi.amp(i));
        if (w == 0.0) continue;
        for (Eigen::Index m = 0; m < space.n_modes; ++m)
            out.marginals(m, space.occupation(i, m)) += w;
    }
    const double total = psi.amp.squaredNorm();
    if (total > 0.0) out.marginals /= total;
    out.mean = Vec::Zero(space.n_modes);
    for (Eigen::Index m = 0; m < space.n_modes; ++m)
        for (int n = 0; n <= space.n_max; ++n) out.mean(m) += n * out.marginals(m, n);
    if (n_samples > 0) {
        std::vector<double> cumulative(static_cast<std::size_t>(space.dim));
        double acc = 0.0;
        for (std::int64_t i = 0; i < space.dim; ++i) {
            acc += std::norm(psi.amp(i));
            cumulative[static_cast<std::size_t>(i)] = acc;
        }
        std::mt19937_64 rng(seed);
        out.samples.reserve(static_cast<std::size_t>(n_samples));
        for (int s = 0; s < n_samples; ++s) {
            const double u = double(rng() >> 11) * 0x1.0p-53 * acc;
            const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
            const std::int64_t idx =
                std::min<std::int64_t>(space.dim - 1, it - cumulative.begin());
            NumberMeasurement::Sample sample;
            sample.occupations.resize(static_cast<std::size_t>(space.n_modes));
            for (Eigen::Index m = 0; m < space.n_modes; ++m) {
                const int occ = space.occupation(idx, m);
                sample.occupations[static_cast<std::size_t>(m)] = occ;
                switch (space.layout.inverse(m).kind) {
                    case FieldKind::Scalar1: sample.scalars += occ; break;
                    case FieldKind::Scalar2: sample.antiscalars += occ; break;
                    case FieldKind::Photon: sample.photons += occ; break;
                }
            }
            out.samples.push_back(std::move(sample));
        }
    }
    return out;
}

std::pair<double, double> factorized_free_spectrum(const LatticeConfig& cfg, int local_cutoff) {
    if (local_cutoff < 2) throw CutoffTooSmall("sector cutoff must be at least 2");
    const Mat sz = to_symplectic(squeeze_mode_map(cfg)).matrix;
    const Vec omega = mode_frequencies(cfg);
    const Eigen::Index n = omega.size();
    Mat d = Mat::Zero(2 * n, 2 * n);
    for (Eigen::Index m = 0; m < n; ++m) d(m, m) = d(n + m, n + m) = omega(m);
    const Mat mtilde = sz.transpose() * d * sz;

    double e0 = 0.0;
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& pr : squeeze_pairs(cfg)) {
        std::vector<Eigen::Index> slots{pr.slot_a};
        if (pr.slot_b != pr.slot_a) slots.push_back(pr.slot_b);
        const Eigen::Index nm = static_cast<Eigen::Index>(slots.size());
        Mat axx(nm, nm), app(nm, nm);
        for (Eigen::Index a = 0; a < nm; ++a)
            for (Eigen::Index b = 0; b < nm; ++b) {
                const Eigen::Index qa = slots[static_cast<std::size_t>(a)];
                const Eigen::Index qb = slots[static_cast<std::size_t>(b)];
                axx(a, b) = mtilde(qa, qb);
                app(a, b) = mtilde(n + qa, n + qb);
            }
        // Paired slots share a frequency, so the x and p blocks commute and the
        // orthogonal basis that diagonalizes one diagonalizes both: the sector
        // splits into independent single-mode oscillators.
        Eigen::SelfAdjointEigenSolver<Mat> rot(axx);
        const Mat app_rot = rot.eigenvectors().transpose() * app * rot.eigenvectors();
        if (nm > 1 && std::abs(app_rot(0, 1)) > 1e-10 * app_rot.norm())
            throw Error("pair sector does not decouple");
        double shift = 0.0;
        for (Eigen::Index s : slots) shift += 0.5 * omega(s);
        double sector_e0 = -shift;
        for (Eigen::Index a = 0; a < nm; ++a) {
            const auto [lo, hi] =
                truncated_mode_levels(rot.eigenvalues()(a), app_rot(a, a), local_cutoff);
            sector_e0 += lo;
            gap = std::min(gap, hi - lo);
        }
        e0 += sector_e0;
    }
    return {e0, gap};
}

}  // namespace sqed
