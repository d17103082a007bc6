#pragma once

#include <vector>

#include "sqed/lattice.hpp"
#include "sqed/symplectic.hpp"

namespace sqed {

// Register convention: the position-space register holds one oscillator per
// mode of the canonical fields B(x) (scalar block), C(x) (antiscalar block)
// and A_i(x) (photon blocks), in ModeLayout order. The particle register
// (image under the ground-state unitary) holds b(k), c(k), a_i(k) with the
// same layout, indexed by momentum.

// V x V discrete Fourier transform, entry (k, x) = L^{-d/2} exp(-i k.x)
CMat dft_unitary(const LatticeConfig& cfg);

// DFT embedded on every component block of the given field kind, identity on
// the rest of the register.
ModeMap fourier_mode_map(const LatticeConfig& cfg, FieldKind kind);
SymplecticOp fourier_symplectic(const LatticeConfig& cfg, FieldKind kind);

// DFT on all blocks at once (the first stage of the ground-state unitary)
ModeMap fourier_all(const LatticeConfig& cfg);

struct SqueezeEntry {
    FieldKind kind;
    int component;
    MomentumIndex k;
    double xi;  // exp(xi) = omega
};
std::vector<SqueezeEntry> squeeze_parameters(const LatticeConfig& cfg);

// One squeezer of the second stage, in register slots. Scalars pair the
// B-block mode at k with the C-block mode at -k; photon components pair k
// with -k within their own block and degenerate to a single-mode squeeze
// when k = -k mod 2pi. r = xi/2.
struct SqueezePair {
    Eigen::Index slot_a;
    Eigen::Index slot_b;  // == slot_a for a single-mode squeeze
    double r;
};
std::vector<SqueezePair> squeeze_pairs(const LatticeConfig& cfg);
ModeMap squeeze_mode_map(const LatticeConfig& cfg);

// Bogoliubov coefficients of the particle modes: each particle operator is
// sum_x U_FT(k,x) [u (own field mode at x) + v (partner mode dagger at x)].
struct BogoliubovEntry {
    FieldKind kind;
    int component;
    MomentumIndex k;
    double field_factor;     // sqrt(omega/2), multiplies the field
    double momentum_factor;  // 1/sqrt(2 omega), multiplies the conjugate momentum
    double u;                // (field_factor + momentum_factor)/sqrt(2) = cosh(xi/2)
    double v;                // (field_factor - momentum_factor)/sqrt(2) = sinh(xi/2)
    Eigen::Index slot;
    Eigen::Index partner_slot;
};
using ModeMapCoefficients = std::vector<BogoliubovEntry>;
ModeMapCoefficients mode_map_coefficients(const LatticeConfig& cfg);

// Full ground-state construction: squeezers after the blockwise DFT. The
// returned map sends register annihilation operators to particle operators;
// the matching unitary U satisfies b = U^dag B U and |ground> = U^dag |0>.
ModeMap groundstate_mode_map(const LatticeConfig& cfg);
SymplecticOp groundstate_unitary(const LatticeConfig& cfg);

// Frequencies per particle slot (scalar blocks: omega(k); photon blocks:
// omega_gamma(k)), and the summed zero-point constant of the free energy.
Vec mode_frequencies(const LatticeConfig& cfg);
double zero_point_energy(const LatticeConfig& cfg);

// Field variables as linear forms over register quadratures R = (x.., p..).
enum class FieldVar { Phi1, Phi2, Pi1, Pi2, Photon, PhotonMomentum };
struct QuadTerm {
    Eigen::Index quad_index;  // index into R
    double coef;
};
std::vector<QuadTerm> field_linear_form(const ModeLayout& layout, FieldVar var,
                                        const SiteIndex& x, int component = 0);

// Quadratic form W of the free Hamiltonian in register quadratures:
// H0 = (1/2) R^T W R - zero_point_energy. Equals S_U^T diag(omega) S_U for
// the ground-state unitary (checked in tests).
Mat free_quadratic_form(const LatticeConfig& cfg);

}  // namespace sqed
