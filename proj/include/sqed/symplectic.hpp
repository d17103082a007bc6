#pragma once

#include <Eigen/Dense>
#include <complex>

#include "sqed/errors.hpp"

namespace sqed {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

// Quadrature ordering is xxpp: R = (x_1..x_N, p_1..p_N), with
// x = (a + a^dag)/sqrt2, p = -i(a - a^dag)/sqrt2 and vacuum covariance I/2.
inline Mat omega_matrix(Eigen::Index n_modes) {
    Mat om = Mat::Zero(2 * n_modes, 2 * n_modes);
    om.topRightCorner(n_modes, n_modes) = Mat::Identity(n_modes, n_modes);
    om.bottomLeftCorner(n_modes, n_modes) = -Mat::Identity(n_modes, n_modes);
    return om;
}

struct SymplecticOp {
    Mat matrix;        // 2N x 2N
    Vec displacement;  // 2N, zero unless stated

    Eigen::Index n_modes() const { return matrix.rows() / 2; }

    static SymplecticOp identity(Eigen::Index n_modes) {
        return {Mat::Identity(2 * n_modes, 2 * n_modes), Vec::Zero(2 * n_modes)};
    }
};

inline double symplectic_defect(const Mat& s) {
    const Eigen::Index n = s.rows() / 2;
    const Mat om = omega_matrix(n);
    return (s * om * s.transpose() - om).norm();
}

inline void require_symplectic(const SymplecticOp& op, double tol = 1e-10) {
    const double d = symplectic_defect(op.matrix);
    if (!(d <= tol)) throw NonSymplectic("defect " + std::to_string(d));
}

// op2 after op1
inline SymplecticOp compose(const SymplecticOp& op2, const SymplecticOp& op1) {
    if (op1.matrix.rows() != op2.matrix.rows()) throw DimensionMismatch("compose");
    return {op2.matrix * op1.matrix, op2.matrix * op1.displacement + op2.displacement};
}

inline SymplecticOp inverse(const SymplecticOp& op) {
    const Eigen::Index n = op.n_modes();
    const Mat om = omega_matrix(n);
    // S^-1 = -Omega S^T Omega  (Omega^-1 = -Omega = Omega^T)
    Mat si = -om * op.matrix.transpose() * om;
    return {si, -(si * op.displacement)};
}

// Bogoliubov map b = E a + F a^dag. Bosonic iff E E^dag - F F^dag = I and
// E F^T symmetric; passive iff F = 0 and E unitary.
struct ModeMap {
    CMat E;
    CMat F;

    Eigen::Index n_modes() const { return E.rows(); }

    static ModeMap identity(Eigen::Index n) {
        return {CMat::Identity(n, n), CMat::Zero(n, n)};
    }
    static ModeMap passive(const CMat& unitary) {
        return {unitary, CMat::Zero(unitary.rows(), unitary.cols())};
    }

    double bosonic_defect() const {
        const Eigen::Index n = n_modes();
        double d1 = (E * E.adjoint() - F * F.adjoint() - CMat::Identity(n, n)).norm();
        double d2 = (E * F.transpose() - (E * F.transpose()).transpose()).norm();
        return d1 + d2;
    }

    ModeMap inverse_map() const { return {E.adjoint(), -F.transpose()}; }
};

// map2 after map1
inline ModeMap compose(const ModeMap& m2, const ModeMap& m1) {
    return {m2.E * m1.E + m2.F * m1.F.conjugate(), m2.E * m1.F + m2.F * m1.E.conjugate()};
}

inline SymplecticOp to_symplectic(const ModeMap& m) {
    const Eigen::Index n = m.n_modes();
    Mat s(2 * n, 2 * n);
    s.topLeftCorner(n, n) = (m.E + m.F).real();
    s.topRightCorner(n, n) = -(m.E - m.F).imag();
    s.bottomLeftCorner(n, n) = (m.E + m.F).imag();
    s.bottomRightCorner(n, n) = (m.E - m.F).real();
    return {s, Vec::Zero(2 * n)};
}

inline ModeMap from_symplectic(const SymplecticOp& op) {
    const Eigen::Index n = op.n_modes();
    const Mat a = op.matrix.topLeftCorner(n, n);
    const Mat b = op.matrix.topRightCorner(n, n);
    const Mat c = op.matrix.bottomLeftCorner(n, n);
    const Mat d = op.matrix.bottomRightCorner(n, n);
    ModeMap m{CMat(n, n), CMat(n, n)};
    m.E.real() = 0.5 * (a + d);
    m.E.imag() = 0.5 * (c - b);
    m.F.real() = 0.5 * (a - d);
    m.F.imag() = 0.5 * (c + b);
    return m;
}

}  // namespace sqed
