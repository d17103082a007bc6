#pragma once

#include <Eigen/SparseCore>

#include <cstdint>
#include <utility>
#include <vector>

#include "sqed/lattice.hpp"
#include "sqed/modes.hpp"
#include "sqed/symplectic.hpp"

namespace sqed {

using SpMat = Eigen::SparseMatrix<cplx>;

// Which modes the truncated register holds. Position: one oscillator per
// B(x), C(x), A_i(x); the ground state must be prepared by a squeezing
// unitary and is subject to truncation. Particle: one oscillator per b(k),
// c(k), a_i(k); the free Hamiltonian is diagonal and the ground state is the
// bare vacuum. Field operators exist in both (related by the exact mode map),
// so the two backends cross-check each other.
enum class Rep { Position, Particle };

struct FockSpace {
    LatticeConfig cfg;
    ModeLayout layout;
    int n_max = 0;
    Rep rep = Rep::Position;
    Eigen::Index n_modes = 0;
    std::int64_t dim = 0;
    // maps register-frame quadrature form coefficients into the basis frame;
    // identity for Position, inverse-transpose of the mode-map symplectic for Particle
    Mat form_transform;

    static FockSpace make(const LatticeConfig& cfg, int n_max, Rep rep);

    int occupation(std::int64_t index, Eigen::Index mode) const;
    std::int64_t stride(Eigen::Index mode) const;
};

struct FockOperator {
    SpMat mat;
    bool hermitian = false;
};

struct FockState {
    CVec amp;

    double norm() const { return amp.norm(); }
};

FockState basis_state(const FockSpace& space, const std::vector<int>& occupations);
FockState vacuum_state(const FockSpace& space);

CVec apply(const FockOperator& op, const FockState& psi);
double expectation(const FockOperator& op, const FockState& psi);

// ladder and quadrature primitives
SpMat lowering_op(const FockSpace& space, Eigen::Index mode);
SpMat quad_op(const FockSpace& space, Eigen::Index quad_index);  // x_m, then p_m
SpMat form_op(const FockSpace& space, const std::vector<QuadTerm>& form);
Vec number_diagonal(const FockSpace& space, Eigen::Index mode);

// field operators (hermitian components and the complex combinations)
struct QuadratureOps {
    const FockSpace* space;

    FockOperator phi1(const SiteIndex& x) const;
    FockOperator phi2(const SiteIndex& x) const;
    FockOperator pi1(const SiteIndex& x) const;
    FockOperator pi2(const SiteIndex& x) const;
    FockOperator photon(const SiteIndex& x, int component) const;
    FockOperator photon_momentum(const SiteIndex& x, int component) const;
    FockOperator phi(const SiteIndex& x) const;  // (phi1 + i phi2)/sqrt2
    FockOperator pi(const SiteIndex& x) const;   // (pi1 - i pi2)/sqrt2
};
QuadratureOps build_quadrature_ops(const FockSpace& space);

// particle-mode annihilation operator for a register slot (b, c or a_i at k)
FockOperator mode_annihilation_op(const FockSpace& space, Eigen::Index slot);

// Hamiltonian pieces
FockOperator build_H0(const FockSpace& space);

enum class InteractionVariant {
    Full,        // photon field as written
    Transverse,  // photon field projected onto its transverse part
};
FockOperator build_HI(const FockSpace& space, double e,
                      InteractionVariant variant = InteractionVariant::Full);
// e-linear (cubic) and e^2 (quartic) parts, H_I(e) = e*first + e^2*second
std::pair<FockOperator, FockOperator> build_HI_parts(
    const FockSpace& space, InteractionVariant variant = InteractionVariant::Full);
FockOperator build_Hct(const FockSpace& space, double delta_m);

// conserved charge sum_k (b^dag b - c^dag c); diagonal in both representations
FockOperator charge_op(const FockSpace& space);

// momentum-space constraint C(k) = sum_i k_i a_i(k)
FockOperator gauss_constraint_op(const FockSpace& space, const MomentumIndex& k);
// site-space law G(x) = div(photon momentum) - e (pi2 phi1 - pi1 phi2)
FockOperator gauss_law_op(const FockSpace& space, const SiteIndex& x, double e);

// brute-force evolution oracle e^{-iHt}
inline constexpr std::int64_t kDenseOracleLimit = 200000;
inline constexpr std::int64_t kKrylovOracleLimit = 5000000;
FockState exact_evolve(const FockOperator& h, double t, const FockState& psi);

// lowest eigenpair by thick-restart Lanczos
std::pair<double, CVec> lowest_eigenpair(const FockOperator& h, double tol = 1e-10,
                                         int max_restarts = 200);

// ground-state unitary as an actual Fock-space unitary (Position rep only)
FockState apply_groundstate_unitary(const FockSpace& space, const FockState& psi, bool dagger);

// ground state of the register: particle vacuum, or the squeezed state
FockState prepare_ground(const FockSpace& space);

// excited-state preparation: product of smeared creation operators
struct CreationProfile {
    FieldKind kind;  // Scalar1 (particle) or Scalar2 (antiparticle)
    std::vector<std::pair<MomentumIndex, cplx>> amplitudes;
};
FockState prepare_excited(const FockSpace& space, const FockState& ground,
                          const std::vector<CreationProfile>& profiles);

// one first-order step psi <- e^{i s dt H0} e^{i s dt H_I} e^{i s dt H_ct} psi
// (rightmost factor first; s is the global sign convention)
class TrotterStepper {
  public:
    TrotterStepper(const FockSpace& space, InteractionVariant variant = InteractionVariant::Full,
                   int sign = +1);

    FockState step(double e, double delta_m, double dt, const FockState& psi) const;
    const FockOperator& h0() const { return h0_; }

  private:
    const FockSpace* space_;
    int sign_;
    FockOperator h0_, cubic_, quartic_, hct_unit_;
    Vec h0_diag_;  // particle rep fast path
    bool diagonal_h0_ = false;
};

FockState trotter_step(const FockSpace& space, double e, double delta_m, double dt,
                       const FockState& psi, int sign = +1);

// number-resolved measurement
struct NumberMeasurement {
    Mat marginals;  // n_modes x (n_max + 1), rows sum to 1
    Vec mean;
    struct Sample {
        std::vector<int> occupations;
        int scalars = 0, antiscalars = 0, photons = 0;
    };
    std::vector<Sample> samples;
};
NumberMeasurement measure_numbers(const FockSpace& space, const FockState& psi,
                                  int n_samples = 0, std::uint64_t seed = 0);

// free-spectrum oracle factorized over momentum pair sectors; returns the
// summed ground energy (should vanish after normal ordering) and the gap
std::pair<double, double> factorized_free_spectrum(const LatticeConfig& cfg, int local_cutoff = 64);

}  // namespace sqed
