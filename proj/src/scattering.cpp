#include "sqed/scattering.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "sqed/errors.hpp"
#include "sqed/renorm.hpp"
#include "sqed/version.hpp"

namespace sqed {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string rep_name(Rep rep) { return rep == Rep::Particle ? "particle" : "position"; }

std::string variant_name(InteractionVariant v) {
    return v == InteractionVariant::Full ? "full" : "transverse";
}

std::vector<CreationProfile> creation_profiles(const WavepacketSpec& spec) {
    std::vector<CreationProfile> out;
    out.reserve(spec.profiles.size());
    for (const auto& p : spec.profiles) out.push_back({p.kind, p.amplitudes});
    return out;
}

ordered_json momentum_json(const LatticeConfig& cfg, const MomentumIndex& k) {
    ordered_json j = ordered_json::array();
    for (int i = 0; i < cfg.dim; ++i) j.push_back(k.c[i]);
    return j;
}

ordered_json config_echo(const ScatteringReport& r) {
    ordered_json j;
    j["lattice"] = {{"dim", r.lattice.dim},
                    {"extent", r.lattice.extent},
                    {"scalar_mass", r.lattice.scalar_mass}};
    j["backend"] = {{"n_max", r.n_max},
                    {"representation", r.representation},
                    {"interaction", r.interaction}};
    j["schedule"] = {{"half_window", r.schedule.T},
                     {"plateau_half_window", r.schedule.T1},
                     {"dt", r.schedule.dt},
                     {"e_target", r.schedule.e_target},
                     {"delta_m_coefficient", r.schedule.delta_m_coefficient},
                     {"steps", r.schedule.steps}};
    ordered_json profiles = ordered_json::array();
    for (const auto& p : r.in_state.profiles) {
        ordered_json amps = ordered_json::array();
        for (const auto& [k, f] : p.amplitudes)
            amps.push_back({{"k", momentum_json(r.lattice, k)}, {"re", f.real()}, {"im", f.imag()}});
        profiles.push_back({{"kind", kind_name(p.kind)},
                            {"peak", momentum_json(r.lattice, p.peak)},
                            {"amplitudes", amps}});
    }
    j["in_state"] = profiles;
    j["run"] = {{"seed", r.seed},
                {"samples", r.n_samples},
                {"constraint_epsilon", r.constraint_epsilon},
                {"truncation_check", r.truncation_checked}};
    return j;
}

void validate_options(const ScatterOptions& opt) {
    if (opt.sign != 1 && opt.sign != -1) throw ConfigError("sign must be +1 or -1");
    if (opt.n_samples < 0) throw ConfigError("n_samples must be >= 0");
    if (!(opt.constraint_epsilon > 0)) throw ConfigError("constraint_epsilon must be positive");
}

// per-site Gauss law split as G(x; e) = div - e * rho, so one build serves
// every coupling along the schedule
struct GaussProbe {
    SpMat div;
    SpMat rho;
};

std::vector<GaussProbe> gauss_probes(const FockSpace& space) {
    std::vector<GaussProbe> out;
    for (std::int64_t xf = 0; xf < space.cfg.sites(); ++xf) {
        const SiteIndex x = SiteIndex::from_flat(space.cfg, xf);
        SpMat d = gauss_law_op(space, x, 0.0).mat;
        SpMat rho = SpMat(d - gauss_law_op(space, x, 1.0).mat);
        out.push_back({std::move(d), std::move(rho)});
    }
    return out;
}

double gauss_law_max(const std::vector<GaussProbe>& probes, double e, const FockState& psi) {
    double mx = 0.0;
    for (const auto& p : probes) {
        CVec g = p.div * psi.amp;
        if (e != 0.0) g -= cplx(e, 0.0) * (p.rho * psi.amp);
        mx = std::max(mx, g.norm());
    }
    return mx;
}

double constraint_max_norm(const std::vector<FockOperator>& cons, const FockState& psi) {
    double mx = 0.0;
    for (const auto& c : cons) mx = std::max(mx, (c.mat * psi.amp).norm());
    return mx;
}

FockState evolve_schedule(const TrotterStepper& stepper, const CouplingSchedule& s,
                          FockState psi) {
    for (std::int64_t n = 0; n < s.steps; ++n) {
        const double e2 = s.e_squared(s.midpoint(n));
        psi = stepper.step(std::sqrt(e2), s.delta_m_coefficient * e2, s.dt, psi);
    }
    return psi;
}

}  // namespace

double CouplingSchedule::e_squared(double t) const {
    const double e2 = e_target * e_target;
    if (t <= -T || t >= T) return 0.0;
    if (t < -T1) return e2 * (T + t) / (T - T1);
    if (t <= T1) return e2;
    return e2 * (T - t) / (T - T1);
}

double CouplingSchedule::e(double t) const { return std::sqrt(e_squared(t)); }

static std::int64_t segment_steps(double length, double dt, const char* name) {
    const std::int64_t n = std::llround(length / dt);
    if (n <= 0 || std::abs(double(n) * dt - length) > 1e-9)
        throw InvalidWindow(std::string(name) + " segment is not a whole number of steps");
    return n;
}

CouplingSchedule build_schedule(const ScheduleParams& params, double scalar_mass) {
    if (!(params.plateau_half_window > 0.0) ||
        !(params.half_window > params.plateau_half_window))
        throw InvalidWindow("window must satisfy 0 < T1 < T");
    if (!(params.dt > 0.0)) throw InvalidWindow("dt must be positive");
    if (params.e_target < 0.0) throw InvalidWindow("e_target must be >= 0");

    CouplingSchedule s;
    s.T = params.half_window;
    s.T1 = params.plateau_half_window;
    s.dt = params.dt;
    s.e_target = params.e_target;
    const std::int64_t ramp = segment_steps(s.T - s.T1, s.dt, "ramp");
    const std::int64_t plateau = segment_steps(2.0 * s.T1, s.dt, "plateau");
    s.steps = 2 * ramp + plateau;
    s.delta_m_coefficient = params.delta_m_coefficient
                                ? *params.delta_m_coefficient
                                : delta_m(1.0, scalar_mass).value;
    return s;
}

void validate_schedule(const CouplingSchedule& s) {
    if (!(s.T1 > 0.0) || !(s.T > s.T1)) throw InvalidWindow("window must satisfy 0 < T1 < T");
    if (!(s.dt > 0.0)) throw InvalidWindow("dt must be positive");
    if (s.e_target < 0.0) throw InvalidWindow("e_target must be >= 0");
    if (!std::isfinite(s.delta_m_coefficient))
        throw InvalidWindow("delta_m coefficient must be finite");
    const std::int64_t expect = 2 * segment_steps(s.T - s.T1, s.dt, "ramp") +
                                segment_steps(2.0 * s.T1, s.dt, "plateau");
    if (s.steps != expect) throw InvalidWindow("step count does not match the window");
}

double peak_shell_fraction(const LatticeConfig& cfg, const WavepacketProfile& profile) {
    auto in_shell = [&](const MomentumIndex& k) {
        if (k == profile.peak) return true;
        for (int axis = 0; axis < cfg.dim; ++axis)
            for (int step : {-1, +1})
                if (k == profile.peak.shifted(cfg, axis, step)) return true;
        return false;
    };
    double total = 0.0, shell = 0.0;
    for (const auto& [k, f] : profile.amplitudes) {
        const double w = std::norm(f);
        total += w;
        if (in_shell(k)) shell += w;
    }
    return total > 0.0 ? shell / total : 0.0;
}

std::vector<std::string> validate_wavepacket(const LatticeConfig& cfg, WavepacketSpec& spec) {
    cfg.validate();
    std::vector<std::string> warnings;
    auto check_momentum = [&](const MomentumIndex& k) {
        for (int i = 0; i < 3; ++i) {
            const int bound = i < cfg.dim ? cfg.extent : 1;
            if (k.c[i] < 0 || k.c[i] >= bound)
                throw ConfigError("momentum index out of range");
        }
    };
    for (std::size_t ip = 0; ip < spec.profiles.size(); ++ip) {
        auto& p = spec.profiles[ip];
        if (p.kind == FieldKind::Photon)
            throw ConfigError("in-states are built from scalar quanta only");
        if (p.amplitudes.empty()) throw ConfigError("empty wavepacket profile");
        check_momentum(p.peak);
        double w2 = 0.0;
        for (const auto& [k, f] : p.amplitudes) {
            check_momentum(k);
            w2 += std::norm(f);
        }
        if (w2 < 1e-24) throw ZeroNorm("wavepacket profile has zero weight");
        const double inv = 1.0 / std::sqrt(w2);
        for (auto& [k, f] : p.amplitudes) f *= inv;
        const double frac = peak_shell_fraction(cfg, p);
        if (frac < 0.9) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "profile %zu: only %.1f%% of the weight lies on the peak's "
                          "nearest-neighbor shell",
                          ip, 100.0 * frac);
            warnings.emplace_back(buf);
        }
    }
    return warnings;
}

ScatteringReport run_scattering(const LatticeConfig& cfg, const CouplingSchedule& schedule,
                                const WavepacketSpec& in_state, const ScatterOptions& opt) {
    cfg.validate();
    validate_schedule(schedule);
    validate_options(opt);

    ScatteringReport r;
    r.version = kVersion;
    r.seed = opt.seed;
    r.lattice = cfg;
    r.n_max = opt.n_max;
    r.n_samples = opt.n_samples;
    r.representation = rep_name(opt.rep);
    r.interaction = variant_name(opt.variant);
    r.schedule = schedule;
    r.in_state = in_state;
    r.warnings = validate_wavepacket(cfg, r.in_state);
    for (const auto& p : r.in_state.profiles) r.peak_fractions.push_back(peak_shell_fraction(cfg, p));
    r.constraint_epsilon = opt.constraint_epsilon;

    const FockSpace space = FockSpace::make(cfg, opt.n_max, opt.rep);
    const TrotterStepper stepper(space, opt.variant, opt.sign);
    auto [cubic, quartic] = build_HI_parts(space, opt.variant);
    const FockOperator hct_unit = build_Hct(space, 1.0);
    const FockOperator charge = charge_op(space);
    std::vector<FockOperator> constraints;
    for (std::int64_t kf = 0; kf < cfg.sites(); ++kf)
        constraints.push_back(gauss_constraint_op(space, MomentumIndex::from_flat(cfg, kf)));
    const std::vector<GaussProbe> probes = gauss_probes(space);

    const FockState ground = prepare_ground(space);
    const FockState psi_in = prepare_excited(space, ground, creation_profiles(r.in_state));

    auto energy_at = [&](const FockState& psi, double e, double dm) {
        double val = expectation(stepper.h0(), psi) + dm * expectation(hct_unit, psi);
        if (e != 0.0)
            val += e * expectation(cubic, psi) + e * e * expectation(quartic, psi);
        return val;
    };
    auto record = [&](double t, double e, double dm, const FockState& psi) {
        TraceRow row;
        row.t = t;
        row.e = e;
        row.delta_m = dm;
        row.norm = psi.norm();
        row.energy = energy_at(psi, e, dm);
        row.constraint_max = constraint_max_norm(constraints, psi);
        row.charge = expectation(charge, psi);
        row.gauss_max = gauss_law_max(probes, e, psi);
        r.trace.push_back(row);
    };

    FockState psi = psi_in;
    record(-schedule.T, 0.0, 0.0, psi);
    for (std::int64_t n = 0; n < schedule.steps; ++n) {
        const double e2 = schedule.e_squared(schedule.midpoint(n));
        const double e = std::sqrt(e2);
        const double dm = schedule.delta_m_coefficient * e2;
        psi = stepper.step(e, dm, schedule.dt, psi);
        record(-schedule.T + double(n + 1) * schedule.dt, e, dm, psi);
    }

    const TraceRow& first = r.trace.front();
    r.charge_initial = first.charge;
    r.energy_initial = first.energy;
    r.charge_final = r.trace.back().charge;
    r.energy_final = r.trace.back().energy;
    r.constraint_final = r.trace.back().constraint_max;
    for (const auto& row : r.trace) {
        r.constraint_max = std::max(r.constraint_max, row.constraint_max);
        r.gauss_max = std::max(r.gauss_max, row.gauss_max);
        r.charge_max_drift = std::max(r.charge_max_drift, std::abs(row.charge - first.charge));
        r.norm_max_drift = std::max(r.norm_max_drift, std::abs(row.norm - 1.0));
    }
    r.constraint_ok = r.constraint_max <= opt.constraint_epsilon;
    if (!r.constraint_ok) {
        char buf[120];
        std::snprintf(buf, sizeof(buf),
                      "constraint trace max %.3e exceeds epsilon %.1e", r.constraint_max,
                      opt.constraint_epsilon);
        r.warnings.emplace_back(buf);
    }
    r.survival = std::norm(psi_in.amp.dot(psi.amp));

    // readout frame: on the position register the inverse preparation is an
    // explicit (truncated) unitary; on the particle register it is absorbed
    // by the representation
    FockState out_read = psi, in_read = psi_in;
    if (opt.rep == Rep::Position) {
        out_read = apply_groundstate_unitary(space, out_read, false);
        in_read = apply_groundstate_unitary(space, in_read, false);
    }
    const NumberMeasurement m_out = measure_numbers(space, out_read, opt.n_samples, opt.seed);
    const NumberMeasurement m_in = measure_numbers(space, in_read);
    for (Eigen::Index mode = 0; mode < space.n_modes; ++mode) {
        const ModeLayout::ModeId id = space.layout.inverse(mode);
        ModeOccupation occ;
        occ.kind = id.kind;
        occ.component = id.component;
        occ.momentum = id.coords;
        occ.mean = m_out.mean(mode);
        occ.distribution.assign(m_out.marginals.row(mode).begin(),
                                m_out.marginals.row(mode).end());
        r.occupations.push_back(std::move(occ));
        switch (id.kind) {
            case FieldKind::Scalar1: r.total_scalars += m_out.mean(mode); break;
            case FieldKind::Scalar2: r.total_antiscalars += m_out.mean(mode); break;
            case FieldKind::Photon: r.total_photons += m_out.mean(mode); break;
        }
    }
    r.in_occupations.assign(m_in.mean.begin(), m_in.mean.end());
    r.samples = m_out.samples;

    if (opt.truncation_check) {
        ScatterOptions probe = opt;
        probe.n_max = opt.n_max + 1;
        probe.truncation_check = false;
        probe.n_samples = 0;
        try {
            const ScatteringReport finer = run_scattering(cfg, schedule, in_state, probe);
            r.truncation_checked = true;
            r.truncation_n_max = probe.n_max;
            for (std::size_t i = 0; i < r.occupations.size(); ++i)
                r.truncation_delta =
                    std::max(r.truncation_delta,
                             std::abs(r.occupations[i].mean - finer.occupations[i].mean));
            r.truncation_verdict = r.truncation_delta <= 1e-3 ? "converged" : "insufficient cutoff";
        } catch (const OracleTooLarge& err) {
            r.warnings.emplace_back(std::string("cutoff check skipped: ") + err.what());
        }
    }

    r.config_hash = fnv1a64(config_echo(r).dump());
    return r;
}

std::vector<cplx> amplitude_overlaps(const LatticeConfig& cfg, const CouplingSchedule& schedule,
                                     const WavepacketSpec& in_state,
                                     const std::vector<WavepacketSpec>& out_states,
                                     const ScatterOptions& opt) {
    cfg.validate();
    validate_schedule(schedule);
    validate_options(opt);
    WavepacketSpec in = in_state;
    validate_wavepacket(cfg, in);

    const FockSpace space = FockSpace::make(cfg, opt.n_max, opt.rep);
    const TrotterStepper stepper(space, opt.variant, opt.sign);
    const FockState ground = prepare_ground(space);
    const FockState psi =
        evolve_schedule(stepper, schedule, prepare_excited(space, ground, creation_profiles(in)));

    std::vector<cplx> amps;
    amps.reserve(out_states.size());
    for (const auto& out_state : out_states) {
        WavepacketSpec out = out_state;
        validate_wavepacket(cfg, out);
        const FockState phi = prepare_excited(space, ground, creation_profiles(out));
        amps.push_back(phi.amp.dot(psi.amp));
    }
    return amps;
}

cplx amplitude_overlap(const LatticeConfig& cfg, const CouplingSchedule& schedule,
                       const WavepacketSpec& in_state, const WavepacketSpec& out_state,
                       const ScatterOptions& opt) {
    return amplitude_overlaps(cfg, schedule, in_state, {out_state}, opt).front();
}

std::string report_json(const ScatteringReport& r) {
    char hash[20];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(r.config_hash));
    ordered_json j;
    j["version"] = r.version;
    j["config_hash"] = hash;
    j["seed"] = r.seed;
    j["config"] = config_echo(r);
    j["warnings"] = r.warnings;
    j["peak_fractions"] = r.peak_fractions;
    j["constraint"] = {{"max", r.constraint_max},
                       {"final", r.constraint_final},
                       {"epsilon", r.constraint_epsilon},
                       {"ok", r.constraint_ok}};
    j["gauss_max"] = r.gauss_max;
    j["charge"] = {{"initial", r.charge_initial},
                   {"final", r.charge_final},
                   {"max_drift", r.charge_max_drift}};
    j["norm_max_drift"] = r.norm_max_drift;
    j["energy"] = {{"initial", r.energy_initial}, {"final", r.energy_final}};
    j["survival"] = r.survival;
    ordered_json occs = ordered_json::array();
    for (const auto& occ : r.occupations) {
        occs.push_back({{"kind", kind_name(occ.kind)},
                        {"component", occ.component},
                        {"momentum", momentum_json(r.lattice, occ.momentum)},
                        {"mean", occ.mean},
                        {"occupied", occ.mean > 1e-3},
                        {"distribution", occ.distribution}});
    }
    j["occupations"] = occs;
    j["in_occupations"] = r.in_occupations;
    j["totals"] = {{"scalars", r.total_scalars},
                   {"antiscalars", r.total_antiscalars},
                   {"photons", r.total_photons}};
    ordered_json trunc;
    trunc["checked"] = r.truncation_checked;
    if (r.truncation_checked) {
        trunc["n_max"] = r.truncation_n_max;
        trunc["max_occupation_delta"] = r.truncation_delta;
        trunc["verdict"] = r.truncation_verdict;
    }
    j["truncation"] = trunc;
    ordered_json samples = ordered_json::array();
    for (const auto& s : r.samples)
        samples.push_back({{"occupations", s.occupations},
                           {"scalars", s.scalars},
                           {"antiscalars", s.antiscalars},
                           {"photons", s.photons}});
    j["samples"] = samples;
    j["trace_rows"] = r.trace.size();
    return j.dump(2) + "\n";
}

std::string trace_csv(const ScatteringReport& r) {
    std::string out = "t,e,delta_m,norm,energy,constraint_max,charge,gauss_max\n";
    char buf[256];
    for (const auto& row : r.trace) {
        std::snprintf(buf, sizeof(buf),
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.t, row.e,
                      row.delta_m, row.norm, row.energy, row.constraint_max, row.charge,
                      row.gauss_max);
        out += buf;
    }
    return out;
}

}  // namespace sqed
