#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sqed/circuit.hpp"
#include "sqed/config.hpp"
#include "sqed/errors.hpp"
#include "sqed/fock.hpp"
#include "sqed/gaussian.hpp"
#include "sqed/lattice.hpp"
#include "sqed/modes.hpp"
#include "sqed/renorm.hpp"
#include "sqed/scattering.hpp"
#include "sqed/version.hpp"

namespace {

using ojson = nlohmann::ordered_json;
using namespace sqed;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitOracle = 3;
constexpr int kExitConfig = 4;

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::fputs(text.c_str(), stdout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file " + path);
    out << text;
}

int thread_budget() {
    if (const char* env = std::getenv("SQED_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

void require_budget(const LatticeConfig& lat, int n_max, std::int64_t max_dim) {
    const double dim =
        std::pow(static_cast<double>(n_max + 1), static_cast<double>(lat.total_modes()));
    if (!(dim <= static_cast<double>(max_dim)))
        throw OracleTooLarge("Fock dimension " + std::to_string(dim) +
                             " exceeds the configured budget " + std::to_string(max_dim));
}

std::vector<CreationProfile> creation_profiles(const WavepacketSpec& spec) {
    std::vector<CreationProfile> out;
    out.reserve(spec.profiles.size());
    for (const WavepacketProfile& p : spec.profiles) out.push_back({p.kind, p.amplitudes});
    return out;
}

// ---------------------------------------------------------------- renorm --

struct RenormRow {
    std::string name;
    bool computed = false;
    double value = 0.0;
    double error = 0.0;
    std::optional<double> reference;
    std::string flag;  // e.g. log-divergence marker
    std::optional<std::pair<double, double>> qmc;
};

struct RenormArgs {
    std::string constant = "all";
    double tol = 1e-6;
    double spacing = 0.0;  // 0: lattice units, no footnote
    bool cross_check = false;
    bool csv = false;
    std::string out_path;
};

std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {slope, (sy - slope * sx) / n};
}

int cmd_renorm(const RunConfig& cfg, const RenormArgs& args) {
    CubatureOptions opt;
    opt.abs_tol = args.tol;
    opt.cross_check = args.cross_check;
    opt.seed = cfg.output.seed;

    const bool all = args.constant == "all";
    auto wanted = [&](const char* name) { return all || args.constant == name; };
    const double m = cfg.lattice.scalar_mass;
    std::vector<RenormRow> rows;

    if (wanted("j0")) {
        const LoopIntegralResult r = inverse_frequency_integral(m, opt);
        RenormRow row{"j0", true, r.value, r.abs_error_estimate, {}, "", {}};
        if (r.qmc_std_error >= 0) row.qmc = {r.qmc_value, r.qmc_std_error};
        rows.push_back(row);
    }
    if (wanted("delta_m")) {
        const LoopIntegralResult r = delta_m(1.0, m, opt);
        RenormRow row{"delta_m/e^2", true, r.value, r.abs_error_estimate, {}, "", {}};
        if (m == 0.0) row.reference = -1.36;
        if (r.qmc_std_error >= 0) row.qmc = {r.qmc_value, r.qmc_std_error};
        rows.push_back(row);
    }
    if (wanted("pi0")) {
        const LoopIntegralResult r = tadpole_polarization(m, opt);
        RenormRow row{"pi0", true, -r.value, r.abs_error_estimate, {}, "", {}};
        if (m == 0.0) row.reference = 0.455;
        if (r.qmc_std_error >= 0) row.qmc = {-r.qmc_value, r.qmc_std_error};
        rows.push_back(row);
    }
    if (wanted("pi1") || wanted("pi2") || wanted("delta_e")) {
        if (m > 0.0) {
            const PolarizationExpansion p =
                vacuum_polarization(0.0, {0.0, 0.0, 0.0}, m, FrequencyReading::Squared, opt);
            if (wanted("pi1")) {
                RenormRow row{"pi1", true, p.pi1, p.pi1_error, {}, "log(1/m^2)", {}};
                if (p.pi1_qmc_std_error >= 0) row.qmc = {p.pi1_qmc, p.pi1_qmc_std_error};
                rows.push_back(row);
            }
            if (wanted("pi2"))
                rows.push_back({"pi2", true, p.pi2, p.pi2_error, {}, "log(1/m^2)", {}});
            if (wanted("delta_e"))
                rows.push_back(
                    {"delta_e(e=1)", true, delta_e(1.0, m, opt), p.pi1_error, {}, "log(1/m^2)", {}});
        } else {
            auto log_div_row = [&](const char* name) {
                rows.push_back({name, false, 0.0, 0.0, {}, "divergent at m=0: log(1/m^2)", {}});
            };
            if (wanted("pi1")) log_div_row("pi1");
            if (wanted("pi2")) log_div_row("pi2");
            if (wanted("delta_e")) log_div_row("delta_e(e=1)");
        }
    }
    if (wanted("slope")) {
        const std::vector<double> masses{0.1, 0.01, 0.001};
        std::vector<double> xs, ys;
        for (double mi : masses) {
            const PolarizationExpansion p =
                vacuum_polarization(0.0, {0.0, 0.0, 0.0}, mi, FrequencyReading::Squared, opt);
            xs.push_back(std::log(1.0 / (mi * mi)));
            ys.push_back(p.pi1);
        }
        const auto [slope, intercept] = fit_line(xs, ys);
        const double ref_slope = 1.0 / (48.0 * std::numbers::pi * std::numbers::pi);
        rows.push_back({"pi1_log_slope", true, slope, 0.0, ref_slope, "", {}});
        rows.push_back({"pi1_log_intercept", true, intercept, 0.0, 0.003, "", {}});
    }
    if (rows.empty())
        throw ConfigError("unknown constant " + args.constant +
                          " (expected all, j0, delta_m, pi0, pi1, pi2, delta_e, slope)");

    std::ostringstream out;
    out << "# sqed " << kVersion << "\n";
    out << "# config " << hash_hex(config_hash(cfg)) << "\n";
    out << "# seed " << cfg.output.seed << "\n";
    out << "# m " << m << ", tol " << args.tol << "\n";
    char line[256];
    if (args.csv) {
        out << "name,value,error,reference,deviation,flag";
        if (args.cross_check) out << ",qmc,qmc_error";
        out << "\n";
        for (const RenormRow& r : rows) {
            if (r.computed)
                std::snprintf(line, sizeof(line), "%s,%.10g,%.3g", r.name.c_str(), r.value,
                              r.error);
            else
                std::snprintf(line, sizeof(line), "%s,,", r.name.c_str());
            out << line;
            if (r.reference)
                std::snprintf(line, sizeof(line), ",%.10g,%.3g", *r.reference,
                              r.value - *r.reference);
            else
                std::snprintf(line, sizeof(line), ",,");
            out << line << "," << r.flag;
            if (args.cross_check) {
                if (r.qmc)
                    std::snprintf(line, sizeof(line), ",%.10g,%.3g", r.qmc->first,
                                  r.qmc->second);
                else
                    std::snprintf(line, sizeof(line), ",,");
                out << line;
            }
            out << "\n";
        }
    } else {
        std::snprintf(line, sizeof(line), "%-18s %14s %10s %11s %11s  %s\n", "name", "value",
                      "error", "reference", "deviation", "flag");
        out << line;
        for (const RenormRow& r : rows) {
            if (r.computed)
                std::snprintf(line, sizeof(line), "%-18s %14.8f %10.2e", r.name.c_str(),
                              r.value, r.error);
            else
                std::snprintf(line, sizeof(line), "%-18s %14s %10s", r.name.c_str(), "-", "-");
            out << line;
            if (r.reference)
                std::snprintf(line, sizeof(line), " %11.6g %11.2e", *r.reference,
                              r.value - *r.reference);
            else
                std::snprintf(line, sizeof(line), " %11s %11s", "-", "-");
            out << line << "  " << r.flag << "\n";
            if (r.qmc) {
                std::snprintf(line, sizeof(line), "%-18s %14.8f %10.2e %11s %11s  %s\n",
                              (r.name + " (qmc)").c_str(), r.qmc->first, r.qmc->second, "-",
                              "-", "independent check");
                out << line;
            }
        }
    }
    if (args.spacing > 0.0) {
        const double a = args.spacing;
        for (const RenormRow& r : rows) {
            if (r.name == "delta_m/e^2" && r.computed) {
                std::snprintf(line, sizeof(line),
                              "# spacing a=%g: delta_m/e^2 scales as 1/a^2 -> %.8f\n", a,
                              r.value / (a * a));
                out << line;
            }
        }
        const double shift =
            std::log(1.0 / (a * a)) / (48.0 * std::numbers::pi * std::numbers::pi);
        std::snprintf(line, sizeof(line),
                      "# spacing a=%g: log-divergent entries shift by log(1/(m a)^2) terms, "
                      "pi1 += %.8f\n",
                      a, shift);
        out << line;
    }
    write_output(args.out_path.empty() ? cfg.output.report_path : args.out_path, out.str());
    return kExitOk;
}

// ----------------------------------------------------------- groundstate --

struct GroundstateArgs {
    std::string emit_circuit;
    std::string out_path;
};

int cmd_groundstate(const RunConfig& cfg, const GroundstateArgs& args) {
    ojson root;
    root["version"] = kVersion;
    root["config_hash"] = hash_hex(config_hash(cfg));
    root["seed"] = cfg.output.seed;
    root["lattice"] = {{"d", cfg.lattice.dim},
                       {"L", cfg.lattice.extent},
                       {"m", cfg.lattice.scalar_mass}};
    root["backend"] = backend_name(cfg.backend.kind);

    if (cfg.backend.kind == Backend::Gaussian) {
        const GaussianState ground = ground_state(cfg.lattice);
        const SymplecticOp u = groundstate_unitary(cfg.lattice);
        const GaussianState undressed = apply(ground, u);
        root["modes"] = cfg.lattice.total_modes();
        root["uncertainty_defect"] = uncertainty_defect(ground);
        root["symplectic_defect"] = symplectic_defect(u.matrix);
        // pushing the ground state through the dressing unitary must land on
        // the particle vacuum
        root["number_mean_max"] = number_means(undressed).cwiseAbs().maxCoeff();
    } else {
        require_budget(cfg.lattice, cfg.backend.n_max, cfg.backend.max_dimension);
        const FockSpace space =
            FockSpace::make(cfg.lattice, cfg.backend.n_max, cfg.backend.rep);
        const FockState ground = prepare_ground(space);
        root["representation"] = rep_name(cfg.backend.rep);
        root["n_max"] = cfg.backend.n_max;
        root["dim"] = space.dim;
        const FockOperator h0 = build_H0(space);
        root["ground_energy"] = expectation(h0, ground);
        double resid = 0.0;
        for (Eigen::Index slot = 0; slot < space.n_modes; ++slot)
            resid = std::max(resid,
                             (mode_annihilation_op(space, slot).mat * ground.amp).norm());
        root["annihilation_residual_max"] = resid;
        double cmax = 0.0;
        for (std::int64_t kf = 0; kf < cfg.lattice.sites(); ++kf)
            cmax = std::max(
                cmax, (gauss_constraint_op(space, MomentumIndex::from_flat(cfg.lattice, kf))
                           .mat *
                       ground.amp)
                          .norm());
        root["constraint_max"] = cmax;
        const auto [e0, ground_vec] = lowest_eigenpair(h0);
        const cplx overlap = ground_vec.adjoint() * ground.amp;
        root["fidelity_vs_diagonalization"] = std::norm(overlap);
        root["lowest_eigenvalue"] = e0;
    }

    if (!args.emit_circuit.empty()) {
        const OpticalCircuit circuit = groundstate_circuit(cfg.lattice);
        const std::string text = serialize(circuit);
        write_output(args.emit_circuit, text);
        const OpticalCircuit parsed = parse_circuit(text);
        const double err =
            (recompose(parsed).matrix - recompose(circuit).matrix).cwiseAbs().maxCoeff();
        root["circuit"] = {{"path", args.emit_circuit},
                           {"elements", circuit.elements.size()},
                           {"roundtrip_error", err}};
    }

    write_output(args.out_path.empty() ? cfg.output.report_path : args.out_path,
                 root.dump(2) + "\n");
    return kExitOk;
}

// --------------------------------------------------------------- scatter --

struct ScatterArgs {
    std::vector<double> dt_values;  // >1 entries: sweep
    std::string out_path;
    std::string trace_path;
};

struct SweepPoint {
    double dt = 0.0;
    double state_error = 0.0;
    double tvd = 0.0;
};

SweepPoint sweep_point(const RunConfig& cfg, const FockSpace& space, double dt) {
    RunConfig local = cfg;
    local.schedule.dt = dt;
    const CouplingSchedule s = build_schedule(local.schedule, local.lattice.scalar_mass);
    WavepacketSpec spec = local.in_state;
    validate_wavepacket(local.lattice, spec);
    const FockState psi0 =
        prepare_excited(space, prepare_ground(space), creation_profiles(spec));
    const TrotterStepper stepper(space, local.run.variant, local.run.sign);
    const auto [cubic, quartic] = build_HI_parts(space, local.run.variant);
    const FockOperator hct = build_Hct(space, 1.0);
    FockState tr = psi0, ex = psi0;
    for (std::int64_t n = 0; n < s.steps; ++n) {
        const double e2 = s.e_squared(s.midpoint(n));
        const double e = std::sqrt(e2);
        const double dm = s.delta_m_coefficient * e2;
        tr = stepper.step(e, dm, dt, tr);
        SpMat h = stepper.h0().mat + e * cubic.mat + e2 * quartic.mat + dm * hct.mat;
        ex = exact_evolve({std::move(h), true}, -local.run.sign * dt, ex);
    }
    double tvd = 0.0;
    for (Eigen::Index i = 0; i < tr.amp.size(); ++i)
        tvd += std::abs(std::norm(tr.amp(i)) - std::norm(ex.amp(i)));
    return {dt, (tr.amp - ex.amp).norm(), 0.5 * tvd};
}

int cmd_scatter(const RunConfig& cfg, const ScatterArgs& args) {
    if (cfg.backend.kind != Backend::Fock)
        throw ConfigError("scatter requires the fock backend");
    require_budget(cfg.lattice, cfg.backend.n_max, cfg.backend.max_dimension);

    if (args.dt_values.size() > 1) {
        const FockSpace space =
            FockSpace::make(cfg.lattice, cfg.backend.n_max, cfg.backend.rep);
        std::vector<SweepPoint> points(args.dt_values.size());
        const int threads = thread_budget();
        std::size_t next = 0;
        while (next < points.size()) {
            std::vector<std::future<SweepPoint>> batch;
            for (int t = 0; t < threads && next + batch.size() < points.size(); ++t) {
                const double dt = args.dt_values[next + batch.size()];
                batch.push_back(std::async(std::launch::async, sweep_point, std::cref(cfg),
                                           std::cref(space), dt));
            }
            for (auto& f : batch) points[next++] = f.get();
        }
        ojson root;
        root["version"] = kVersion;
        root["config_hash"] = hash_hex(config_hash(cfg));
        root["seed"] = cfg.output.seed;
        ojson sweep = ojson::array();
        for (const SweepPoint& p : points)
            sweep.push_back(
                {{"dt", p.dt}, {"state_error", p.state_error}, {"tvd", p.tvd}});
        root["sweep"] = std::move(sweep);
        ojson slopes = ojson::array();
        double slope_sum = 0.0;
        for (std::size_t i = 0; i + 1 < points.size(); ++i) {
            const double slope = std::log(points[i].state_error / points[i + 1].state_error) /
                                 std::log(points[i].dt / points[i + 1].dt);
            slopes.push_back(slope);
            slope_sum += slope;
        }
        root["slopes"] = std::move(slopes);
        root["slope_mean"] =
            points.size() > 1 ? slope_sum / static_cast<double>(points.size() - 1) : 0.0;
        write_output(args.out_path.empty() ? cfg.output.report_path : args.out_path,
                     root.dump(2) + "\n");
        return kExitOk;
    }

    RunConfig local = cfg;
    if (args.dt_values.size() == 1) local.schedule.dt = args.dt_values[0];
    const CouplingSchedule schedule =
        build_schedule(local.schedule, local.lattice.scalar_mass);
    const ScatteringReport report =
        run_scattering(local.lattice, schedule, local.in_state, local.scatter_options());
    write_output(args.out_path.empty() ? local.output.report_path : args.out_path,
                 report_json(report));
    const std::string trace_path =
        args.trace_path.empty() ? local.output.trace_path : args.trace_path;
    if (!trace_path.empty()) write_output(trace_path, trace_csv(report));
    return report.constraint_ok ? kExitOk : kExitValidation;
}

// -------------------------------------------------------------- validate --

struct ValidateArgs {
    double inject_nonsymplectic = 0.0;
    std::string out_path;
};

struct CheckRow {
    std::string name;
    std::string status;  // pass | fail | insufficient cutoff
    double value = 0.0;
    double threshold = 0.0;
    std::string note;
};

int cmd_validate(const RunConfig& cfg, const ValidateArgs& args) {
    std::vector<CheckRow> checks;
    // a failed cutoff-sensitive check below this n_max is a budget problem,
    // not a defect
    const int adequate_n_max = 6;

    auto run_check = [&](const std::string& name, bool cutoff_sensitive, double threshold,
                         auto body) {
        CheckRow row{name, "pass", 0.0, threshold, ""};
        try {
            row.value = body();
            if (!(row.value <= threshold)) {
                row.status = cutoff_sensitive && cfg.backend.n_max < adequate_n_max
                                 ? "insufficient cutoff"
                                 : "fail";
            }
        } catch (const Error& e) {
            row.status = "fail";
            row.note = e.what();
        }
        checks.push_back(row);
    };

    run_check("lattice.dispersion_positive", false, 0.0, [&] {
        double min_omega = std::numeric_limits<double>::infinity();
        for (std::int64_t kf = 0; kf < cfg.lattice.sites(); ++kf) {
            const MomentumIndex k = MomentumIndex::from_flat(cfg.lattice, kf);
            min_omega = std::min(min_omega, scalar_omega(cfg.lattice, k));
            min_omega =
                std::min(min_omega, dispersion(cfg.lattice, k, cfg.lattice.photon_mass()));
        }
        return -min_omega;  // pass iff every frequency is positive
    });
    run_check("lattice.dispersion_symmetric", false, 1e-12, [&] {
        double worst = 0.0;
        for (std::int64_t kf = 0; kf < cfg.lattice.sites(); ++kf) {
            const MomentumIndex k = MomentumIndex::from_flat(cfg.lattice, kf);
            const MomentumIndex neg = k.negated(cfg.lattice);
            worst = std::max(worst, std::abs(scalar_omega(cfg.lattice, k) -
                                             scalar_omega(cfg.lattice, neg)));
        }
        return worst;
    });
    run_check("symplectic.form_preserved", false, 1e-10, [&] {
        Mat s = groundstate_unitary(cfg.lattice).matrix;
        s(0, 0) += args.inject_nonsymplectic;
        return symplectic_defect(s);
    });
    run_check("modes.map_is_bosonic", false, 1e-10,
              [&] { return groundstate_mode_map(cfg.lattice).bosonic_defect(); });
    run_check("circuit.round_trip", false, 1e-8, [&] {
        const OpticalCircuit circuit = groundstate_circuit(cfg.lattice);
        const OpticalCircuit parsed = parse_circuit(serialize(circuit));
        return (recompose(parsed).matrix - recompose(circuit).matrix).cwiseAbs().maxCoeff();
    });
    run_check("gaussian.ground_is_physical", false, 1e-9, [&] {
        return -uncertainty_defect(ground_state(cfg.lattice));
    });
    run_check("gaussian.ground_undresses_to_vacuum", false, 1e-9, [&] {
        const GaussianState undressed =
            apply(ground_state(cfg.lattice), groundstate_unitary(cfg.lattice));
        return number_means(undressed).cwiseAbs().maxCoeff();
    });
    run_check("fock.free_spectrum", false, 1e-6, [&] {
        const auto [ground_energy, gap] = factorized_free_spectrum(cfg.lattice);
        double min_omega = std::numeric_limits<double>::infinity();
        const Vec omega = mode_frequencies(cfg.lattice);
        for (Eigen::Index i = 0; i < omega.size(); ++i)
            min_omega = std::min(min_omega, omega(i));
        return std::abs(ground_energy) + std::abs(gap - min_omega);
    });
    run_check("fock.ground_prep", cfg.backend.rep == Rep::Position, 1e-3, [&] {
        require_budget(cfg.lattice, cfg.backend.n_max, cfg.backend.max_dimension);
        const FockSpace space =
            FockSpace::make(cfg.lattice, cfg.backend.n_max, cfg.backend.rep);
        const FockState ground = prepare_ground(space);
        const auto [e0, vec] = lowest_eigenpair(build_H0(space));
        const cplx overlap = vec.adjoint() * ground.amp;
        return 1.0 - std::norm(overlap);  // infidelity
    });
    run_check("renorm.mass_shift_tadpole_identity", false, 1e-4, [&] {
        CubatureOptions opt;
        opt.abs_tol = 1e-7;
        const double dm = delta_m(1.0, cfg.lattice.scalar_mass, opt).value;
        const double pi0 = -tadpole_polarization(cfg.lattice.scalar_mass, opt).value;
        return std::abs(std::abs(dm) - 3.0 * pi0);
    });
    run_check("scattering.schedule_mirror", false, 1e-14, [&] {
        const CouplingSchedule s = build_schedule(cfg.schedule, cfg.lattice.scalar_mass);
        double worst = 0.0;
        for (int i = 0; i <= 40; ++i) {
            const double t = s.T * (static_cast<double>(i) / 40.0);
            worst = std::max(worst, std::abs(s.e_squared(t) - s.e_squared(-t)));
        }
        return worst;
    });
    run_check("scattering.free_identity", false, 1e-9, [&] {
        ScheduleParams p;
        p.half_window = 0.5;
        p.plateau_half_window = 0.25;
        p.dt = 0.05;
        p.e_target = 0.0;
        p.delta_m_coefficient = 0.0;
        ScatterOptions opt;
        opt.n_max = cfg.backend.n_max;
        opt.rep = Rep::Particle;
        opt.n_samples = 0;
        opt.truncation_check = false;
        const ScatteringReport r = run_scattering(
            cfg.lattice, build_schedule(p, cfg.lattice.scalar_mass), cfg.in_state, opt);
        double worst = 0.0;
        for (std::size_t i = 0; i < r.occupations.size(); ++i)
            worst = std::max(worst, std::abs(r.occupations[i].mean - r.in_occupations[i]));
        return worst;
    });
    run_check("config.round_trip", false, 0.0, [&] {
        const std::string text = serialize_config(cfg);
        return serialize_config(parse_run_config(text)) == text ? 0.0 : 1.0;
    });

    int n_pass = 0, n_fail = 0, n_insufficient = 0;
    for (const CheckRow& c : checks) {
        if (c.status == "pass") ++n_pass;
        else if (c.status == "fail") ++n_fail;
        else ++n_insufficient;
    }

    ojson root;
    root["version"] = kVersion;
    root["config_hash"] = hash_hex(config_hash(cfg));
    root["seed"] = cfg.output.seed;
    ojson rows = ojson::array();
    for (const CheckRow& c : checks) {
        ojson row = {{"name", c.name},
                     {"status", c.status},
                     {"value", c.value},
                     {"threshold", c.threshold}};
        if (!c.note.empty()) row["note"] = c.note;
        rows.push_back(std::move(row));
    }
    root["checks"] = std::move(rows);
    root["counts"] = {
        {"pass", n_pass}, {"fail", n_fail}, {"insufficient_cutoff", n_insufficient}};
    write_output(args.out_path.empty() ? cfg.output.report_path : args.out_path,
                 root.dump(2) + "\n");
    return n_fail == 0 ? kExitOk : kExitValidation;
}

// ------------------------------------------------------------ dispersion --

int cmd_dispersion(const RunConfig& cfg, bool csv, const std::string& out_path) {
    std::ostringstream out;
    out << "# sqed " << kVersion << "\n";
    out << "# config " << hash_hex(config_hash(cfg)) << "\n";
    out << "# seed " << cfg.output.seed << "\n";
    char line[160];
    if (csv)
        out << "kind,n1,n2,n3,omega\n";
    else {
        std::snprintf(line, sizeof(line), "%-10s %4s %4s %4s %14s\n", "kind", "n1", "n2", "n3",
                      "omega");
        out << line;
    }
    const auto emit = [&](const char* kind, const MomentumIndex& k, double omega) {
        if (csv)
            std::snprintf(line, sizeof(line), "%s,%d,%d,%d,%.12f\n", kind, k.c[0], k.c[1],
                          k.c[2], omega);
        else
            std::snprintf(line, sizeof(line), "%-10s %4d %4d %4d %14.12f\n", kind, k.c[0],
                          k.c[1], k.c[2], omega);
        out << line;
    };
    for (std::int64_t kf = 0; kf < cfg.lattice.sites(); ++kf) {
        const MomentumIndex k = MomentumIndex::from_flat(cfg.lattice, kf);
        emit("scalar", k, scalar_omega(cfg.lattice, k));
    }
    for (std::int64_t kf = 0; kf < cfg.lattice.sites(); ++kf) {
        const MomentumIndex k = MomentumIndex::from_flat(cfg.lattice, kf);
        emit("photon", k, dispersion(cfg.lattice, k, cfg.lattice.photon_mass()));
    }
    write_output(out_path.empty() ? cfg.output.report_path : out_path, out.str());
    return kExitOk;
}

// ------------------------------------------------------------------ main --

struct Overrides {
    std::optional<double> e_target, T, T1, epsilon, mass;
    std::optional<int> n_max, n_samples, sign;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend, rep, variant;
    std::optional<bool> truncation;
    std::optional<int> lattice_d, lattice_L;
};

void apply_overrides(RunConfig& cfg, const Overrides& o) {
    if (o.e_target) cfg.schedule.e_target = *o.e_target;
    if (o.T) cfg.schedule.half_window = *o.T;
    if (o.T1) cfg.schedule.plateau_half_window = *o.T1;
    if (o.epsilon) cfg.run.constraint_epsilon = *o.epsilon;
    if (o.mass) cfg.lattice.scalar_mass = *o.mass;
    if (o.n_max) cfg.backend.n_max = *o.n_max;
    if (o.n_samples) cfg.run.n_samples = *o.n_samples;
    if (o.sign) cfg.run.sign = *o.sign;
    if (o.seed) cfg.output.seed = *o.seed;
    if (o.lattice_d) cfg.lattice.dim = *o.lattice_d;
    if (o.lattice_L) cfg.lattice.extent = *o.lattice_L;
    if (o.backend) {
        if (*o.backend == "gaussian") cfg.backend.kind = Backend::Gaussian;
        else if (*o.backend == "fock") cfg.backend.kind = Backend::Fock;
        else throw ConfigError("--backend must be gaussian or fock");
    }
    if (o.rep) {
        if (*o.rep == "particle") cfg.backend.rep = Rep::Particle;
        else if (*o.rep == "position") cfg.backend.rep = Rep::Position;
        else throw ConfigError("--rep must be particle or position");
    }
    if (o.variant) {
        if (*o.variant == "full") cfg.run.variant = InteractionVariant::Full;
        else if (*o.variant == "transverse") cfg.run.variant = InteractionVariant::Transverse;
        else throw ConfigError("--interaction must be full or transverse");
    }
    if (o.truncation) cfg.run.truncation_check = *o.truncation;
    cfg.lattice.validate();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale simulator of lattice scalar electrodynamics"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("-c,--config", config_path, "run configuration JSON file");

    Overrides ov;
    app.add_option("--m", ov.mass, "scalar mass override");
    app.add_option("--n-max", ov.n_max, "Fock cutoff override");
    app.add_option("--seed", ov.seed, "seed override");
    app.add_option("--d", ov.lattice_d, "lattice dimension override");
    app.add_option("--L", ov.lattice_L, "lattice extent override");
    std::string backend_flag, rep_flag, variant_flag;
    app.add_option("--backend", backend_flag, "gaussian or fock");
    app.add_option("--rep", rep_flag, "particle or position");
    app.add_option("--interaction", variant_flag, "full or transverse");

    RenormArgs renorm_args;
    CLI::App* renorm_cmd = app.add_subcommand("renorm", "one-loop constants table");
    renorm_cmd->add_option("--constant", renorm_args.constant,
                           "all, j0, delta_m, pi0, pi1, pi2, delta_e or slope");
    renorm_cmd->add_option("--tol", renorm_args.tol, "quadrature absolute tolerance");
    renorm_cmd->add_option("--spacing", renorm_args.spacing,
                           "print values restored to a physical lattice spacing");
    renorm_cmd->add_flag("--cross-check", renorm_args.cross_check,
                         "add independent quasi-Monte-Carlo estimates");
    renorm_cmd->add_flag("--csv", renorm_args.csv, "emit CSV instead of the text table");
    renorm_cmd->add_option("--out", renorm_args.out_path, "output path (default stdout)");

    GroundstateArgs ground_args;
    CLI::App* ground_cmd = app.add_subcommand("groundstate", "prepare and check the vacuum");
    ground_cmd->add_option("--emit-circuit", ground_args.emit_circuit,
                           "write the preparation circuit to this path");
    ground_cmd->add_option("--out", ground_args.out_path, "output path (default stdout)");

    ScatterArgs scatter_args;
    CLI::App* scatter_cmd = app.add_subcommand("scatter", "run the scattering pipeline");
    scatter_cmd->add_option("--dt", scatter_args.dt_values,
                            "step size; several values run an error-vs-dt sweep")
        ->delimiter(',');
    scatter_cmd->add_option("--e-target", ov.e_target, "plateau coupling override");
    scatter_cmd->add_option("--T", ov.T, "half window override");
    scatter_cmd->add_option("--T1", ov.T1, "plateau half window override");
    scatter_cmd->add_option("--epsilon", ov.epsilon, "constraint warning threshold");
    scatter_cmd->add_option("--samples", ov.n_samples, "number of measurement samples");
    scatter_cmd->add_option("--sign", ov.sign, "evolution phase convention (+1 or -1)");
    bool no_truncation = false;
    scatter_cmd->add_flag("--no-truncation-check", no_truncation,
                          "skip the cutoff sensitivity rerun");
    scatter_cmd->add_option("--out", scatter_args.out_path, "report path (default stdout)");
    scatter_cmd->add_option("--trace", scatter_args.trace_path, "per-step trace CSV path");

    ValidateArgs validate_args;
    CLI::App* validate_cmd = app.add_subcommand("validate", "run the invariant suite");
    validate_cmd->add_option("--inject-nonsymplectic", validate_args.inject_nonsymplectic,
                             "perturb the symplectic check by this amount");
    validate_cmd->add_option("--out", validate_args.out_path, "output path (default stdout)");

    bool dispersion_csv = false;
    std::string dispersion_out;
    CLI::App* dispersion_cmd = app.add_subcommand("dispersion", "print frequency tables");
    dispersion_cmd->add_flag("--csv", dispersion_csv, "emit CSV instead of the text table");
    dispersion_cmd->add_option("--out", dispersion_out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        RunConfig cfg =
            config_path.empty() ? default_run_config() : load_run_config(config_path);
        if (!backend_flag.empty()) ov.backend = backend_flag;
        if (!rep_flag.empty()) ov.rep = rep_flag;
        if (!variant_flag.empty()) ov.variant = variant_flag;
        if (no_truncation) ov.truncation = false;
        apply_overrides(cfg, ov);

        if (renorm_cmd->parsed()) return cmd_renorm(cfg, renorm_args);
        if (ground_cmd->parsed()) return cmd_groundstate(cfg, ground_args);
        if (scatter_cmd->parsed()) return cmd_scatter(cfg, scatter_args);
        if (validate_cmd->parsed()) return cmd_validate(cfg, validate_args);
        if (dispersion_cmd->parsed())
            return cmd_dispersion(cfg, dispersion_csv, dispersion_out);
        return kExitConfig;
    } catch (const QuadratureNotConverged& e) {
        std::cerr << "sqed: " << e.what() << "\n";
        return kExitOracle;
    } catch (const OracleTooLarge& e) {
        std::cerr << "sqed: " << e.what() << "\n";
        return kExitOracle;
    } catch (const PoleProximity& e) {
        std::cerr << "sqed: " << e.what() << "\n";
        return kExitOracle;
    } catch (const ConfigError& e) {
        std::cerr << "sqed: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidWindow& e) {
        std::cerr << "sqed: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CutoffTooSmall& e) {
        std::cerr << "sqed: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ZeroNorm& e) {
        std::cerr << "sqed: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "sqed: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "sqed: " << e.what() << "\n";
        return kExitValidation;
    }
}
