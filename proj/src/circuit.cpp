#include "sqed/circuit.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "sqed/modes.hpp"

namespace sqed {

namespace {

constexpr double kDropTol = 1e-12;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_mode(const ModeMap& m, Eigen::Index i) {
    if (i < 0 || i >= m.n_modes()) throw DimensionMismatch("circuit element mode index");
}

}  // namespace

void apply_element(ModeMap& m, const CircuitElement& el) {
    const auto update_pair = [&](Eigen::Index i, Eigen::Index j, const Eigen::Matrix2cd& e2,
                                 const Eigen::Matrix2cd& f2) {
        check_mode(m, i);
        check_mode(m, j);
        CMat eold(2, m.E.cols()), fold(2, m.F.cols());
        eold << m.E.row(i), m.E.row(j);
        fold << m.F.row(i), m.F.row(j);
        CMat enew = e2 * eold + f2 * fold.conjugate();
        CMat fnew = e2 * fold + f2 * eold.conjugate();
        m.E.row(i) = enew.row(0);
        m.E.row(j) = enew.row(1);
        m.F.row(i) = fnew.row(0);
        m.F.row(j) = fnew.row(1);
    };
    if (const auto* ps = std::get_if<PhaseShifter>(&el)) {
        check_mode(m, ps->mode);
        const cplx ph = std::exp(cplx(0.0, ps->theta));
        m.E.row(ps->mode) *= ph;
        m.F.row(ps->mode) *= ph;
    } else if (const auto* bs = std::get_if<BeamSplitter>(&el)) {
        if (bs->i == bs->j) throw DimensionMismatch("beam splitter needs two distinct modes");
        Eigen::Matrix2cd e2;
        const double c = std::cos(bs->theta), s = std::sin(bs->theta);
        const cplx ph = std::exp(cplx(0.0, bs->phi));
        e2 << c, -ph * s, s / ph, c;
        update_pair(bs->i, bs->j, e2, Eigen::Matrix2cd::Zero());
    } else if (const auto* tms = std::get_if<TwoModeSqueezer>(&el)) {
        if (tms->i == tms->j) throw DimensionMismatch("two-mode squeezer needs two distinct modes");
        Eigen::Matrix2cd e2 = Eigen::Matrix2cd::Identity() * std::cosh(tms->xi);
        Eigen::Matrix2cd f2;
        f2 << 0.0, std::sinh(tms->xi), std::sinh(tms->xi), 0.0;
        update_pair(tms->i, tms->j, e2, f2);
    } else if (const auto* sms = std::get_if<SingleModeSqueezer>(&el)) {
        check_mode(m, sms->mode);
        const cplx ph = std::exp(cplx(0.0, sms->phi));
        CVec erow = m.E.row(sms->mode), frow = m.F.row(sms->mode);
        m.E.row(sms->mode) = std::cosh(sms->r) * erow.transpose() +
                             ph * std::sinh(sms->r) * frow.conjugate().transpose();
        m.F.row(sms->mode) = std::cosh(sms->r) * frow.transpose() +
                             ph * std::sinh(sms->r) * erow.conjugate().transpose();
    }
}

ModeMap circuit_mode_map(const OpticalCircuit& circuit) {
    ModeMap m = ModeMap::identity(circuit.n_modes);
    for (const CircuitElement& el : circuit.elements) apply_element(m, el);
    return m;
}

SymplecticOp recompose(const OpticalCircuit& circuit) {
    return to_symplectic(circuit_mode_map(circuit));
}

std::vector<CircuitElement> reck_elements(const CMat& unitary) {
    const Eigen::Index n = unitary.rows();
    CMat m = unitary;
    struct Givens {
        Eigen::Index i, j;
        double theta, phi;
    };
    std::vector<Givens> rots;
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index r = c + 1; r < n; ++r) {
            const cplx x = m(c, c), y = m(r, c);
            if (std::abs(y) < 1e-15) continue;
            double theta, phi;
            if (std::abs(x) < 1e-15) {
                theta = std::numbers::pi / 2.0;
                phi = 0.0;
            } else {
                theta = std::atan2(std::abs(y), std::abs(x));
                phi = std::arg(x) - std::arg(y) - std::numbers::pi;
            }
            const double cs = std::cos(theta), sn = std::sin(theta);
            const cplx ph = std::exp(cplx(0.0, phi));
            Eigen::RowVectorXcd rc = m.row(c), rr = m.row(r);
            m.row(c) = cs * rc - ph * sn * rr;
            m.row(r) = (sn / ph) * rc + cs * rr;
            rots.push_back({c, r, theta, phi});
        }
    }
    std::vector<CircuitElement> out;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double gamma = std::arg(m(k, k));
        if (std::abs(gamma) > kDropTol) out.push_back(PhaseShifter{k, gamma});
    }
    for (auto it = rots.rbegin(); it != rots.rend(); ++it)
        out.push_back(BeamSplitter{it->i, it->j, -it->theta, it->phi});
    return out;
}

CMat takagi(const CMat& a, Vec& sigma) {
    const Eigen::Index n = a.rows();
    if ((a - a.transpose()).norm() > 1e-10 * (1.0 + a.norm()))
        throw DimensionMismatch("takagi needs a symmetric matrix");
    Mat t(2 * n, 2 * n);
    const Mat br = a.real(), bi = a.imag();
    t << br, bi, bi, -br;
    Eigen::SelfAdjointEigenSolver<Mat> es(t);
    const Vec ev = es.eigenvalues();  // ascending
    const double tol = 1e-12 * std::max(1.0, std::abs(ev.cwiseAbs().maxCoeff()));

    CMat w(n, n);
    sigma.resize(n);
    Eigen::Index col = 0;
    // positive eigenvalues, largest first
    for (Eigen::Index idx = 2 * n - 1; idx >= 0 && ev(idx) > tol; --idx) {
        const Vec q = es.eigenvectors().col(idx);
        w.col(col).real() = q.head(n);
        w.col(col).imag() = q.tail(n);
        sigma(col) = ev(idx);
        ++col;
    }
    // kernel: pick one vector per (q, Jq) pair, J(u;v) = (v;-u)
    std::vector<Vec> picked;
    for (Eigen::Index idx = 0; idx < 2 * n && col + static_cast<Eigen::Index>(picked.size()) < n;
         ++idx) {
        if (std::abs(ev(idx)) > tol) continue;
        Vec q = es.eigenvectors().col(idx);
        for (const Vec& s : picked) {
            q -= s.dot(q) * s;
            Vec js(2 * n);
            js << s.tail(n), -s.head(n);
            q -= js.dot(q) * js;
        }
        if (q.norm() < 1e-8) continue;
        q.normalize();
        picked.push_back(q);
    }
    for (const Vec& q : picked) {
        w.col(col).real() = q.head(n);
        w.col(col).imag() = q.tail(n);
        sigma(col) = 0.0;
        ++col;
    }
    if (col != n) throw Error("takagi: eigenspace pairing failed");
    if ((a - w * sigma.asDiagonal() * w.transpose()).norm() > 1e-9 * (1.0 + a.norm()))
        throw Error("takagi: reconstruction failed");
    return w;
}

namespace {

bool match_single_tms(const ModeMap& m, OpticalCircuit& out) {
    const Eigen::Index n = m.n_modes();
    Eigen::Index pi = -1, pj = -1;
    for (Eigen::Index i = 0; i < n && pi < 0; ++i)
        for (Eigen::Index j = i + 1; j < n && pi < 0; ++j)
            if (std::abs(m.F(i, j)) > 1e-10) {
                pi = i;
                pj = j;
            }
    if (pi < 0) return false;
    const cplx fv = m.F(pi, pj);
    if (std::abs(fv.imag()) > 1e-10) return false;
    const double xi = std::asinh(fv.real());
    ModeMap expect = ModeMap::identity(n);
    expect.E(pi, pi) = expect.E(pj, pj) = std::cosh(xi);
    expect.F(pi, pj) = expect.F(pj, pi) = std::sinh(xi);
    if ((m.E - expect.E).cwiseAbs().maxCoeff() > 1e-10) return false;
    if ((m.F - expect.F).cwiseAbs().maxCoeff() > 1e-10) return false;
    out.elements.push_back(TwoModeSqueezer{pi, pj, xi});
    return true;
}

}  // namespace

OpticalCircuit decompose_to_circuit(const SymplecticOp& op) {
    require_symplectic(op, 1e-10);
    const Eigen::Index n = op.n_modes();
    OpticalCircuit circuit{n, {}};
    if ((op.matrix - Mat::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff() < 1e-10) return circuit;

    const ModeMap m = from_symplectic(op);
    if (match_single_tms(m, circuit)) return circuit;

    CMat q = m.E.partialPivLu().solve(m.F);
    q = 0.5 * (q + q.transpose()).eval();
    Vec tanh_r;
    const CMat v = takagi(q, tanh_r);
    Vec r(n), cosh_r(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (tanh_r(k) >= 1.0 - 1e-14) throw NonSymplectic("unbounded squeeze in factorization");
        r(k) = std::atanh(tanh_r(k));
        cosh_r(k) = std::cosh(r(k));
    }
    const CMat w_pass = m.E * v * cosh_r.cwiseInverse().asDiagonal();
    if ((w_pass * w_pass.adjoint() - CMat::Identity(n, n)).norm() > 1e-8)
        throw Error("factorization: passive stage not unitary");

    for (const CircuitElement& el : reck_elements(v.adjoint())) circuit.elements.push_back(el);
    for (Eigen::Index k = 0; k < n; ++k)
        if (r(k) > kDropTol) circuit.elements.push_back(SingleModeSqueezer{k, r(k), 0.0});
    for (const CircuitElement& el : reck_elements(w_pass)) circuit.elements.push_back(el);

    if ((recompose(circuit).matrix - op.matrix).norm() > 1e-8)
        throw Error("factorization: round-trip check failed");
    return circuit;
}

OpticalCircuit groundstate_circuit(const LatticeConfig& cfg) {
    cfg.validate();
    const ModeLayout layout = mode_layout(cfg);
    OpticalCircuit circuit{layout.total(), {}};
    const CMat dft = dft_unitary(cfg);
    std::vector<Eigen::Index> offsets{layout.block_offset(FieldKind::Scalar1),
                                      layout.block_offset(FieldKind::Scalar2)};
    for (int c = 0; c < cfg.dim; ++c) offsets.push_back(layout.block_offset(FieldKind::Photon, c));
    for (Eigen::Index off : offsets)
        for (CircuitElement el : reck_elements(dft)) {
            if (auto* ps = std::get_if<PhaseShifter>(&el)) ps->mode += off;
            if (auto* bs = std::get_if<BeamSplitter>(&el)) {
                bs->i += off;
                bs->j += off;
            }
            circuit.elements.push_back(el);
        }
    for (const SqueezePair& p : squeeze_pairs(cfg)) {
        if (std::abs(p.r) < kDropTol) continue;
        if (p.slot_a == p.slot_b)
            circuit.elements.push_back(SingleModeSqueezer{p.slot_a, p.r, 0.0});
        else
            circuit.elements.push_back(TwoModeSqueezer{p.slot_a, p.slot_b, p.r});
    }
    return circuit;
}

std::string serialize(const OpticalCircuit& circuit) {
    std::string out = "# modes " + std::to_string(circuit.n_modes) + "\n";
    for (const CircuitElement& el : circuit.elements) {
        if (const auto* bs = std::get_if<BeamSplitter>(&el))
            out += "BS " + std::to_string(bs->i) + " " + std::to_string(bs->j) + " " +
                   fmt(bs->theta) + " " + fmt(bs->phi) + "\n";
        else if (const auto* ps = std::get_if<PhaseShifter>(&el))
            out += "PS " + std::to_string(ps->mode) + " " + fmt(ps->theta) + "\n";
        else if (const auto* tms = std::get_if<TwoModeSqueezer>(&el))
            out += "TMS " + std::to_string(tms->i) + " " + std::to_string(tms->j) + " " +
                   fmt(tms->xi) + "\n";
        else if (const auto* sms = std::get_if<SingleModeSqueezer>(&el))
            out += "SMS " + std::to_string(sms->mode) + " " + fmt(sms->r) + " " + fmt(sms->phi) +
                   "\n";
    }
    return out;
}

OpticalCircuit parse_circuit(const std::string& text) {
    OpticalCircuit circuit;
    Eigen::Index max_mode = -1;
    bool have_header = false;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& why) {
        throw ConfigError("circuit line " + std::to_string(lineno) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "#") {
            std::string word;
            long long n;
            if (ls >> word >> n && word == "modes") {
                circuit.n_modes = n;
                have_header = true;
            }
            continue;
        }
        auto idx = [&]() {
            long long i;
            if (!(ls >> i) || i < 0) fail("bad mode index");
            max_mode = std::max<Eigen::Index>(max_mode, i);
            return static_cast<Eigen::Index>(i);
        };
        auto num = [&]() {
            double v;
            if (!(ls >> v) || !std::isfinite(v)) fail("bad parameter");
            return v;
        };
        if (tag == "BS") {
            Eigen::Index i = idx(), j = idx();
            double theta = num(), phi = num();
            if (i == j) fail("BS modes must differ");
            circuit.elements.push_back(BeamSplitter{i, j, theta, phi});
        } else if (tag == "PS") {
            Eigen::Index i = idx();
            circuit.elements.push_back(PhaseShifter{i, num()});
        } else if (tag == "TMS") {
            Eigen::Index i = idx(), j = idx();
            double xi = num();
            if (i == j) fail("TMS modes must differ");
            circuit.elements.push_back(TwoModeSqueezer{i, j, xi});
        } else if (tag == "SMS") {
            Eigen::Index i = idx();
            double r = num(), phi = num();
            circuit.elements.push_back(SingleModeSqueezer{i, r, phi});
        } else {
            fail("unknown element '" + tag + "'");
        }
        std::string rest;
        if (ls >> rest) fail("trailing tokens");
    }
    if (!have_header) circuit.n_modes = max_mode + 1;
    if (circuit.n_modes <= max_mode) throw ConfigError("circuit: mode index beyond declared size");
    return circuit;
}

}  // namespace sqed
