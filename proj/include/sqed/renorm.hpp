#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sqed/errors.hpp"
#include "sqed/symplectic.hpp"

namespace sqed {

// One-loop lattice integrals in lattice units (a = 1). Every Minkowski
// energy integral is done analytically by residues / Euclidean rotation;
// only smooth 2-4 dimensional momentum integrals reach the quadrature
// engine. Values scale as 1/a^2 (delta_m) resp. log(1/m^2 a^2) (delta_e)
// when a physical spacing is restored; the CLI prints that footnote.

using Momentum = std::array<double, 3>;

struct LoopParams {
    double m = 0.0;
    int dim = 3;
    std::string variant;
};

struct LoopIntegralResult {
    double value = 0.0;
    double abs_error_estimate = 0.0;
    std::int64_t evaluations = 0;
    LoopParams parameters;
    // independent quasi-Monte-Carlo estimate, filled when
    // CubatureOptions::cross_check is set (std_error < 0 means absent)
    double qmc_value = 0.0;
    double qmc_std_error = -1.0;
};

struct CubatureOptions {
    double abs_tol = 1e-6;
    std::int64_t max_evaluations = 30'000'000;
    bool cross_check = false;
    std::uint64_t seed = 20260818ULL;
};

// Free lattice propagators at continuous momentum (large-extent limit,
// massless photon): G(E, p) = i / (E^2 - w^2(p)) with poles at E = +-w,
// and the Euclidean rotation 1 / (E_E^2 + w^2(p)) > 0.
struct PropagatorKernel {
    double m = 0.0;

    static double photon_frequency_sq(const Momentum& p);
    double scalar_frequency_sq(const Momentum& p) const;
    cplx scalar(double energy, const Momentum& p) const;
    cplx photon(double energy, const Momentum& p) const;
    double euclidean_scalar(double euclidean_energy, const Momentum& p) const;
    double euclidean_photon(double euclidean_energy, const Momentum& p) const;
};

// Axis-aligned integration box; the first `dim` entries are used.
struct Box {
    std::array<double, 4> lo{};
    std::array<double, 4> hi{};
};

using Integrand = std::function<double(const double*)>;

// Globally adaptive degree-7 cubature (embedded degree-5 error estimate)
// over 2..4 dimensions. Deterministic: regions are refined worst-first with
// insertion-order tie break and summed in a fixed order, so repeated runs
// are bit-identical. Throws QuadratureNotConverged when the budget runs out
// above the tolerance.
LoopIntegralResult adaptive_cubature(const Integrand& f, int dim, const Box& domain,
                                     const CubatureOptions& opt = {});
LoopIntegralResult adaptive_cubature(const Integrand& f, int dim, const std::vector<Box>& domains,
                                     const CubatureOptions& opt = {});

struct QmcResult {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t evaluations = 0;
};

// Randomized quasi-Monte-Carlo over one box: Halton points with seeded
// random shifts; the spread over shifts gives the standard error.
QmcResult qmc_integrate(const Integrand& f, int dim, const Box& domain,
                        std::int64_t points_per_shift, int shifts, std::uint64_t seed);

// J(m) = int d3l/(2pi)^3 1/(2 w_m(l)), the residue of a single propagator.
LoopIntegralResult inverse_frequency_integral(double m, const CubatureOptions& opt = {});

// Mass counterterm delta_m = -6 e^2 J(m); -1.36 e^2 + O(m^2) at small m.
LoopIntegralResult delta_m(double e, double m, const CubatureOptions& opt = {});

// Photon tadpole coefficient: the polarization contribution is
// e^2 zeta1.zeta2 times this value, -2 J(m). Its magnitude is the constant
// that cancels the zero-momentum bubble in the continuum limit.
LoopIntegralResult tadpole_polarization(double m, const CubatureOptions& opt = {});

// The printed Feynman-parameter denominator combines the frequencies
// linearly under an exponent 1/2; the squared reading combines the squared
// frequencies under 3/2. Both are implemented; the squared reading is the
// one whose small-m expansion reproduces the reference constants.
enum class FrequencyReading { Squared, Literal };

struct PolarizationExpansion {
    // Feynman-parameter bubble evaluated at the requested kinematics
    LoopIntegralResult at_kinematics;
    // expansion value + (k0)^2 pi1 + k^2 pi2 + ..., extracted by finite
    // differences with Richardson extrapolation
    double pi0 = 0.0;
    double pi0_error = 0.0;
    double pi1 = 0.0;
    double pi1_error = 0.0;
    double pi2 = 0.0;
    double pi2_error = 0.0;
    FrequencyReading reading = FrequencyReading::Squared;
    bool reproduces_reference_constants = false;
    std::int64_t evaluations = 0;
    // cross-check of pi1 (std_error < 0 means absent)
    double pi1_qmc = 0.0;
    double pi1_qmc_std_error = -1.0;
};

// Transverse vacuum-polarization bubble with numerator (zeta.l)^2,
// zeta = e1, external momentum shift along e3. pi2 carries the boundary
// correction that restores pi1 = -pi2 on the finite momentum cube
// (Squared reading only; the Literal reading has no such identity).
// Requires m > 0 and kinematics below the pair threshold.
PolarizationExpansion vacuum_polarization(double k0, const Momentum& k, double m,
                                          FrequencyReading reading = FrequencyReading::Squared,
                                          const CubatureOptions& opt = {});

// Charge shift delta_e = pi1(m) e^4, so e0^2 = e^2 + delta_e. Informational
// only; it is never inserted back into a Hamiltonian.
double delta_e(double e, double m, const CubatureOptions& opt = {});

struct SelfEnergy {
    LoopIntegralResult sigma1;  // photon-exchange bubble
    LoopIntegralResult sigma2;  // photon tadpole, k-independent
    double sum() const { return sigma1.value + sigma2.value; }
};

// Scalar self-energy at external (k0, k). The energy integral is reduced by
// residues, leaving a 3d integrand with denominator (w_gamma(l) +
// w_phi(l+k))^2 - k0^2. Kinematics at or above that pair threshold put a
// pole inside the domain; a principal-value prescription would be needed
// there, which is not provided, so a deterministic pre-scan throws
// PoleProximity instead. At k = 0, m = 0 the two terms sum to delta_m / e^2.
SelfEnergy scalar_self_energy(double k0, const Momentum& k, double m, double e,
                              const CubatureOptions& opt = {});

}  // namespace sqed
