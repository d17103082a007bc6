#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sqed/fock.hpp"
#include "sqed/lattice.hpp"
#include "sqed/symplectic.hpp"

namespace sqed {

// Adiabatic coupling window over t in [-T, T]: e^2(t) ramps linearly from 0
// at t = -T to e_target^2 at t = -T1, holds on [-T1, T1], and retraces the
// ramp back to 0 at t = +T. The mass counterterm follows the same path,
// delta_m(t) = coefficient * e^2(t).
struct ScheduleParams {
    double half_window = 2.0;          // T
    double plateau_half_window = 1.0;  // T1
    double dt = 0.02;
    double e_target = 0.1;
    // coefficient of e^2(t) in delta_m(t); unset means the one-loop mass
    // shift per unit coupling at the given scalar mass (from renorm)
    std::optional<double> delta_m_coefficient;
};

struct CouplingSchedule {
    double T = 0.0;
    double T1 = 0.0;
    double dt = 0.0;
    double e_target = 0.0;
    double delta_m_coefficient = 0.0;
    std::int64_t steps = 0;  // across the full window [-T, T]

    double e_squared(double t) const;
    double e(double t) const;
    double delta_m(double t) const { return delta_m_coefficient * e_squared(t); }
    double midpoint(std::int64_t step) const { return -T + (double(step) + 0.5) * dt; }
};

// Validates the window ordering and that dt divides each segment (ramp,
// plateau, ramp) to within 1e-9; throws InvalidWindow otherwise.
CouplingSchedule build_schedule(const ScheduleParams& params, double scalar_mass = 0.0);
void validate_schedule(const CouplingSchedule& schedule);

// In-state description: a product of smeared creation operators acting on
// the interacting ground state, one profile per quantum.
struct WavepacketProfile {
    FieldKind kind = FieldKind::Scalar1;  // Scalar1: particle, Scalar2: antiparticle
    MomentumIndex peak{};
    std::vector<std::pair<MomentumIndex, cplx>> amplitudes;
};

struct WavepacketSpec {
    std::vector<WavepacketProfile> profiles;
};

// Normalizes every profile to unit weight in place. Throws ConfigError for
// photon profiles, empty or out-of-range momenta; ZeroNorm for zero weight.
// Returns one warning per profile holding less than 90% of its weight on the
// declared peak and its nearest-neighbor shell.
std::vector<std::string> validate_wavepacket(const LatticeConfig& cfg, WavepacketSpec& spec);
// weight fraction on the peak's nearest-neighbor shell (profile need not be
// normalized)
double peak_shell_fraction(const LatticeConfig& cfg, const WavepacketProfile& profile);

struct ScatterOptions {
    int n_max = 4;
    // Particle: modes of the register are the free quanta, preparation and
    // readout are exact and the uncompute stage is absorbed by the frame.
    // Position: site oscillators; the ground state is prepared by the
    // squeezing unitary and the readout applies its inverse explicitly
    // (subject to truncation).
    Rep rep = Rep::Particle;
    InteractionVariant variant = InteractionVariant::Full;
    // stepper phase convention; -1 evolves forward with e^{-i dt H}
    int sign = -1;
    std::uint64_t seed = 20260818ULL;
    int n_samples = 64;
    double constraint_epsilon = 1e-3;
    bool truncation_check = true;  // repeat occupations at n_max + 1
};

struct TraceRow {
    double t = 0;
    double e = 0;
    double delta_m = 0;
    double norm = 0;
    double energy = 0;
    double constraint_max = 0;  // max_k ||C(k) psi||
    double charge = 0;
    double gauss_max = 0;  // max_x ||G(x) psi||, with the instantaneous e(t)
};

struct ModeOccupation {
    FieldKind kind = FieldKind::Scalar1;
    int component = 0;
    MomentumIndex momentum{};
    double mean = 0;
    std::vector<double> distribution;  // P(n), n = 0..n_max
};

struct ScatteringReport {
    std::string version;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    LatticeConfig lattice;
    int n_max = 0;
    int n_samples = 0;
    std::string representation;  // "particle" | "position"
    std::string interaction;     // "full" | "transverse"
    CouplingSchedule schedule;
    WavepacketSpec in_state;  // normalized echo
    std::vector<double> peak_fractions;
    std::vector<std::string> warnings;

    std::vector<TraceRow> trace;  // initial row, then one row per step
    double constraint_max = 0;
    double constraint_final = 0;
    double constraint_epsilon = 0;
    bool constraint_ok = true;
    double gauss_max = 0;
    double charge_initial = 0;
    double charge_final = 0;
    double charge_max_drift = 0;
    double norm_max_drift = 0;
    double energy_initial = 0;
    double energy_final = 0;

    std::vector<ModeOccupation> occupations;  // out-state, after uncompute
    std::vector<double> in_occupations;       // same readout of the unevolved in-state
    double survival = 0;                      // |<in|psi(T)>|^2
    double total_scalars = 0;
    double total_antiscalars = 0;
    double total_photons = 0;

    bool truncation_checked = false;
    int truncation_n_max = 0;
    double truncation_delta = 0;        // max occupation-mean shift under n_max + 1
    std::string truncation_verdict;     // "converged" | "insufficient cutoff"
    std::vector<NumberMeasurement::Sample> samples;
};

ScatteringReport run_scattering(const LatticeConfig& cfg, const CouplingSchedule& schedule,
                                const WavepacketSpec& in_state, const ScatterOptions& opt = {});

// <out| U(T, -T) |in> in the truncated space; the batch overload evolves the
// in-state once and overlaps it with every out-state.
cplx amplitude_overlap(const LatticeConfig& cfg, const CouplingSchedule& schedule,
                       const WavepacketSpec& in_state, const WavepacketSpec& out_state,
                       const ScatterOptions& opt = {});
std::vector<cplx> amplitude_overlaps(const LatticeConfig& cfg, const CouplingSchedule& schedule,
                                     const WavepacketSpec& in_state,
                                     const std::vector<WavepacketSpec>& out_states,
                                     const ScatterOptions& opt = {});

// deterministic serializations; identical (config, seed) give identical bytes
std::string report_json(const ScatteringReport& report);
std::string trace_csv(const ScatteringReport& report);

}  // namespace sqed
