#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "doctest.h"
#include "sqed/errors.hpp"
#include "sqed/fock.hpp"
#include "sqed/renorm.hpp"
#include "sqed/scattering.hpp"

using namespace sqed;

namespace {

const LatticeConfig kLine{1, 2, 1.0};

ScheduleParams short_window(double e_target, double dt = 0.02) {
    ScheduleParams p;
    p.half_window = 1.0;
    p.plateau_half_window = 0.5;
    p.dt = dt;
    p.e_target = e_target;
    p.delta_m_coefficient = -1.366032;
    return p;
}

WavepacketSpec rest_pair() {
    WavepacketSpec spec;
    spec.profiles = {{FieldKind::Scalar1, MomentumIndex{{0, 0, 0}},
                      {{MomentumIndex{{0, 0, 0}}, 1.0}}},
                     {FieldKind::Scalar2, MomentumIndex{{0, 0, 0}},
                      {{MomentumIndex{{0, 0, 0}}, 1.0}}}};
    return spec;
}

WavepacketSpec rest_particle() {
    WavepacketSpec spec;
    spec.profiles = {{FieldKind::Scalar1, MomentumIndex{{0, 0, 0}},
                      {{MomentumIndex{{0, 0, 0}}, 1.0}}}};
    return spec;
}

ScatterOptions quiet_options(int n_max = 4) {
    ScatterOptions opt;
    opt.n_max = n_max;
    opt.n_samples = 0;
    opt.truncation_check = false;
    return opt;
}

}  // namespace

TEST_SUITE("scattering") {

TEST_CASE("coupling window endpoints, midpoint, and mirror symmetry") {
    ScheduleParams p;
    p.half_window = 2.0;
    p.plateau_half_window = 1.0;
    p.dt = 0.02;
    p.e_target = 0.3;
    p.delta_m_coefficient = -1.366032;
    const CouplingSchedule s = build_schedule(p, kLine.scalar_mass);

    CHECK(s.steps == 200);
    CHECK(s.e(-s.T) == 0.0);
    CHECK(s.delta_m(-s.T) == 0.0);
    CHECK(s.e(-s.T1) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(s.e(s.T1) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(s.e(s.T) == doctest::Approx(0.0).epsilon(1e-14));

    // the square of the coupling ramps linearly, so the ramp midpoint sits
    // at half the plateau value
    CHECK(s.e_squared(-1.5) == doctest::Approx(0.5 * 0.09).epsilon(1e-14));
    CHECK(s.e_squared(1.5) == doctest::Approx(0.5 * 0.09).epsilon(1e-14));
    for (double t : {0.0, 0.31, 0.77, 1.24, 1.93})
        CHECK(s.e_squared(t) == doctest::Approx(s.e_squared(-t)).epsilon(1e-14));
    for (double t : {-0.9, -0.4, 0.0, 0.6, 1.0}) CHECK(s.e(t) == doctest::Approx(0.3));
    CHECK(s.e(2.5) == 0.0);
    CHECK(s.e(-2.5) == 0.0);

    // the mass counterterm tracks the instantaneous coupling
    for (double t : {-1.7, -1.2, 0.0, 1.4})
        CHECK(s.delta_m(t) == doctest::Approx(-1.366032 * s.e_squared(t)).epsilon(1e-14));

    CHECK(s.midpoint(0) == doctest::Approx(-2.0 + 0.01).epsilon(1e-14));
    CHECK(s.midpoint(199) == doctest::Approx(2.0 - 0.01).epsilon(1e-14));
}

TEST_CASE("window validation rejects bad geometry") {
    ScheduleParams p = short_window(0.1);

    p.plateau_half_window = 0.0;
    CHECK_THROWS_AS(build_schedule(p, 1.0), InvalidWindow);
    p.plateau_half_window = 1.0;  // equal to half_window
    CHECK_THROWS_AS(build_schedule(p, 1.0), InvalidWindow);

    p = short_window(0.1);
    p.dt = 0.0;
    CHECK_THROWS_AS(build_schedule(p, 1.0), InvalidWindow);
    p.dt = -0.02;
    CHECK_THROWS_AS(build_schedule(p, 1.0), InvalidWindow);
    p.dt = 0.3;  // does not divide the 0.5 ramp
    CHECK_THROWS_AS(build_schedule(p, 1.0), InvalidWindow);

    p = short_window(-0.1);
    CHECK_THROWS_AS(build_schedule(p, 1.0), InvalidWindow);

    CouplingSchedule tampered = build_schedule(short_window(0.1), 1.0);
    tampered.steps += 1;
    CHECK_THROWS_AS(validate_schedule(tampered), InvalidWindow);
    tampered = build_schedule(short_window(0.1), 1.0);
    tampered.delta_m_coefficient = std::nan("");
    CHECK_THROWS_AS(validate_schedule(tampered), InvalidWindow);
}

TEST_CASE("default counterterm coefficient follows the mass shift") {
    ScheduleParams p = short_window(0.2);
    p.delta_m_coefficient.reset();

    const CouplingSchedule massless = build_schedule(p, 0.0);
    CHECK(massless.delta_m_coefficient == delta_m(1.0, 0.0).value);
    CHECK(massless.delta_m_coefficient == doctest::Approx(-1.366032).epsilon(1e-5));

    const CouplingSchedule massive = build_schedule(p, 1.0);
    CHECK(massive.delta_m_coefficient == delta_m(1.0, 1.0).value);
    CHECK(massive.delta_m_coefficient == doctest::Approx(-1.2051784).epsilon(1e-5));
}

TEST_CASE("wavepacket validation normalizes and flags spread-out packets") {
    const LatticeConfig wide{1, 8, 1.0};

    WavepacketSpec sharp;
    sharp.profiles = {{FieldKind::Scalar1, MomentumIndex{{2, 0, 0}},
                       {{MomentumIndex{{2, 0, 0}}, 2.0}}}};
    const auto warn0 = validate_wavepacket(wide, sharp);
    CHECK(warn0.empty());
    CHECK(std::abs(sharp.profiles[0].amplitudes[0].second - cplx(1.0, 0.0)) < 1e-14);
    CHECK(peak_shell_fraction(wide, sharp.profiles[0]) == doctest::Approx(1.0));

    // weight parked far from the peak drops the shell fraction below 90%
    WavepacketSpec spread;
    spread.profiles = {{FieldKind::Scalar1, MomentumIndex{{2, 0, 0}},
                        {{MomentumIndex{{2, 0, 0}}, 0.8},
                         {MomentumIndex{{3, 0, 0}}, 0.4},
                         {MomentumIndex{{6, 0, 0}}, 0.45}}}};
    const auto warn1 = validate_wavepacket(wide, spread);
    REQUIRE(warn1.size() == 1);
    CHECK(warn1[0].find("peak") != std::string::npos);
    const double frac = peak_shell_fraction(wide, spread.profiles[0]);
    CHECK(frac == doctest::Approx(0.80 / 1.0025).epsilon(1e-12));
    double norm2 = 0.0;
    for (const auto& [k, amp] : spread.profiles[0].amplitudes) norm2 += std::norm(amp);
    CHECK(norm2 == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("wavepacket validation rejects malformed profiles") {
    WavepacketSpec photon;
    photon.profiles = {{FieldKind::Photon, MomentumIndex{{0, 0, 0}},
                        {{MomentumIndex{{0, 0, 0}}, 1.0}}}};
    CHECK_THROWS_AS(validate_wavepacket(kLine, photon), ConfigError);

    WavepacketSpec empty;
    empty.profiles = {{FieldKind::Scalar1, MomentumIndex{{0, 0, 0}}, {}}};
    CHECK_THROWS_AS(validate_wavepacket(kLine, empty), ConfigError);

    WavepacketSpec out_of_range;
    out_of_range.profiles = {{FieldKind::Scalar1, MomentumIndex{{2, 0, 0}},
                              {{MomentumIndex{{2, 0, 0}}, 1.0}}}};
    CHECK_THROWS_AS(validate_wavepacket(kLine, out_of_range), ConfigError);

    WavepacketSpec zero;
    zero.profiles = {{FieldKind::Scalar1, MomentumIndex{{0, 0, 0}},
                      {{MomentumIndex{{0, 0, 0}}, 0.0}}}};
    CHECK_THROWS_AS(validate_wavepacket(kLine, zero), ZeroNorm);
}

TEST_CASE("free theory returns the in-state occupations exactly") {
    ScatterOptions opt = quiet_options();
    const CouplingSchedule s = build_schedule(short_window(0.0), kLine.scalar_mass);
    const ScatteringReport r = run_scattering(kLine, s, rest_pair(), opt);

    REQUIRE(r.trace.size() == static_cast<std::size_t>(s.steps) + 1);
    CHECK(r.trace.front().t == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(r.trace.back().t == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.trace.front().e == 0.0);

    CHECK(r.constraint_max == 0.0);
    CHECK(r.charge_max_drift == 0.0);
    CHECK(r.norm_max_drift < 1e-12);
    CHECK(r.survival == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.energy_initial == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.energy_final == doctest::Approx(r.energy_initial).epsilon(1e-12));

    REQUIRE(r.occupations.size() == 6);
    REQUIRE(r.in_occupations.size() == 6);
    for (std::size_t i = 0; i < r.occupations.size(); ++i)
        CHECK(std::abs(r.occupations[i].mean - r.in_occupations[i]) < 1e-9);
    CHECK(r.total_scalars == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.total_antiscalars == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.total_photons == doctest::Approx(0.0).epsilon(1e-12));

    // forward evolution accumulates exp(-i 2T E) on an energy eigenstate
    const cplx a = amplitude_overlap(kLine, s, rest_pair(), rest_pair(), opt);
    CHECK(std::abs(a - std::polar(1.0, -4.0)) < 1e-9);
    WavepacketSpec moving;
    moving.profiles = {{FieldKind::Scalar1, MomentumIndex{{1, 0, 0}},
                        {{MomentumIndex{{1, 0, 0}}, 1.0}}}};
    CHECK(std::abs(amplitude_overlap(kLine, s, rest_pair(), moving, opt)) < 1e-12);
}

TEST_CASE("constraint drift grows with the coupling, not the step size") {
    ScheduleParams p;
    p.half_window = 2.0;
    p.plateau_half_window = 1.0;
    p.dt = 0.02;
    p.delta_m_coefficient = -1.366032;

    auto run_at = [&](double e_target, double dt) {
        p.e_target = e_target;
        p.dt = dt;
        return run_scattering(kLine, build_schedule(p, kLine.scalar_mass), rest_pair(),
                              quiet_options());
    };

    const ScatteringReport weak = run_at(0.05, 0.02);
    const ScatteringReport mid = run_at(0.10, 0.02);
    const ScatteringReport strong = run_at(0.30, 0.02);
    const ScatteringReport strong_fine = run_at(0.30, 0.01);

    CHECK(weak.constraint_max == doctest::Approx(1.58254e-3).epsilon(1e-3));
    CHECK(mid.constraint_max == doctest::Approx(6.38591e-3).epsilon(1e-3));
    CHECK(mid.constraint_final == doctest::Approx(1.23230e-3).epsilon(1e-3));
    CHECK(mid.survival == doctest::Approx(0.99934456).epsilon(1e-6));
    CHECK(strong.constraint_max == doctest::Approx(6.71388e-2).epsilon(1e-3));
    CHECK(strong.constraint_final == doctest::Approx(2.33489e-2).epsilon(1e-3));
    CHECK(strong.survival == doctest::Approx(0.89938842).epsilon(1e-6));

    // halving dt moves the peak violation by ~1e-4 of itself: the drift is a
    // property of the truncated interacting generator, not of the splitting
    CHECK(strong_fine.constraint_max ==
          doctest::Approx(strong.constraint_max).epsilon(1e-3));

    // doubling the coupling quadruples the violation while it is small
    CHECK(mid.constraint_max / weak.constraint_max == doctest::Approx(4.0).epsilon(0.05));

    // the violation is reported against the configured threshold
    CHECK(mid.constraint_epsilon == 1e-3);
    CHECK_FALSE(mid.constraint_ok);
    REQUIRE(!mid.warnings.empty());
    bool flagged = false;
    for (const auto& w : mid.warnings)
        if (w.find("constraint") != std::string::npos) flagged = true;
    CHECK(flagged);

    ScatterOptions loose = quiet_options();
    loose.constraint_epsilon = 0.1;
    p.e_target = 0.10;
    p.dt = 0.02;
    const ScatteringReport ok =
        run_scattering(kLine, build_schedule(p, kLine.scalar_mass), rest_pair(), loose);
    CHECK(ok.constraint_ok);

    // the transverse-projected interaction never sources the constraint; on a
    // line it has no transverse modes at all and the violation vanishes
    ScatterOptions transverse = quiet_options();
    transverse.variant = InteractionVariant::Transverse;
    p.e_target = 0.30;
    const ScatteringReport projected =
        run_scattering(kLine, build_schedule(p, kLine.scalar_mass), rest_pair(), transverse);
    CHECK(projected.constraint_max == 0.0);
    CHECK(projected.charge_max_drift == 0.0);

    MESSAGE("constraint max: e=0.05 " << weak.constraint_max << ", e=0.10 "
                                      << mid.constraint_max << ", e=0.30 "
                                      << strong.constraint_max << " (dt=0.01: "
                                      << strong_fine.constraint_max << ")");
}

TEST_CASE("charge is conserved through the interacting window") {
    const ScatteringReport r = run_scattering(
        kLine, build_schedule(short_window(0.3), kLine.scalar_mass), rest_particle(),
        quiet_options());
    CHECK(r.charge_initial == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.charge_max_drift < 1e-9);
    CHECK(r.charge_final == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.total_scalars - r.total_antiscalars == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.total_photons >= 0.0);
}

TEST_CASE("trotter error scales linearly in the step") {
    const FockSpace space = FockSpace::make(kLine, 4, Rep::Particle);
    const TrotterStepper stepper(space, InteractionVariant::Full, -1);
    const auto [cubic, quartic] = build_HI_parts(space);
    const FockOperator hct = build_Hct(space, 1.0);
    const FockState psi0 =
        prepare_excited(space, prepare_ground(space),
                        {{FieldKind::Scalar1, {{MomentumIndex{{0, 0, 0}}, 1.0}}},
                         {FieldKind::Scalar2, {{MomentumIndex{{0, 0, 0}}, 1.0}}}});

    std::vector<double> errs, tvds, bounds;
    for (double dt : {0.1, 0.05, 0.025}) {
        const CouplingSchedule s =
            build_schedule(short_window(0.3, dt), kLine.scalar_mass);
        FockState tr = psi0, ex = psi0;
        double bound = 0.0;
        for (std::int64_t n = 0; n < s.steps; ++n) {
            const double e2 = s.e_squared(s.midpoint(n));
            const double e = std::sqrt(e2);
            const double dm = s.delta_m_coefficient * e2;
            tr = stepper.step(e, dm, dt, tr);
            SpMat h = SpMat(stepper.h0().mat) + SpMat(e2 * quartic.mat) +
                      SpMat(dm * hct.mat);
            ex = exact_evolve({std::move(h), true}, dt, ex);
            // leading splitting error on this step, evaluated on the state
            const CVec v = ex.amp;
            const SpMat a = SpMat(e2 * quartic.mat) + SpMat(dm * hct.mat);
            const CVec c1 = stepper.h0().mat * (a * v) - a * (stepper.h0().mat * v);
            const CVec c2 = (e2 * quartic.mat) * ((dm * hct.mat) * v) -
                            (dm * hct.mat) * ((e2 * quartic.mat) * v);
            bound += 0.5 * dt * dt * (c1.norm() + c2.norm());
        }
        double tvd = 0.0;
        for (Eigen::Index i = 0; i < tr.amp.size(); ++i)
            tvd += std::abs(std::norm(tr.amp(i)) - std::norm(ex.amp(i)));
        errs.push_back((tr.amp - ex.amp).norm());
        tvds.push_back(0.5 * tvd);
        bounds.push_back(bound);
    }

    for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
        const double order = std::log2(errs[i] / errs[i + 1]);
        CHECK(order > 0.9);
        CHECK(order < 1.1);
    }
    for (std::size_t i = 0; i < tvds.size(); ++i) CHECK(tvds[i] <= 10.0 * bounds[i]);
    MESSAGE("state errors " << errs[0] << " " << errs[1] << " " << errs[2]
                            << ", tvd " << tvds[0] << " " << tvds[1] << " " << tvds[2]);
}

TEST_CASE("longer ramps improve adiabatic survival") {
    std::vector<double> survivals;
    for (double ramp : {1.0, 2.0, 4.0, 8.0}) {
        ScheduleParams p;
        p.plateau_half_window = 0.5;
        p.half_window = 0.5 + ramp;
        p.dt = 0.04;
        p.e_target = 0.2;
        p.delta_m_coefficient = -1.366032;
        const ScatteringReport r =
            run_scattering(kLine, build_schedule(p, kLine.scalar_mass), rest_particle(),
                           quiet_options(3));
        survivals.push_back(r.survival);
    }
    for (std::size_t i = 0; i + 1 < survivals.size(); ++i)
        CHECK(survivals[i] < survivals[i + 1]);
    CHECK(survivals.front() < 0.996);
    CHECK(survivals.back() > 0.9997);
    MESSAGE("survival by ramp length {1,2,4,8}: "
            << survivals[0] << " " << survivals[1] << " " << survivals[2] << " "
            << survivals[3]);
}

TEST_CASE("out-basis completeness under truncation") {
    // every photon-free occupation pattern of the two scalar registers
    std::vector<WavepacketSpec> outs;
    for (int nb0 = 0; nb0 <= 4; ++nb0)
        for (int nb1 = 0; nb1 <= 4; ++nb1)
            for (int nc0 = 0; nc0 <= 4; ++nc0)
                for (int nc1 = 0; nc1 <= 4; ++nc1) {
                    WavepacketSpec o;
                    auto add = [&](FieldKind kind, int kflat, int count) {
                        for (int i = 0; i < count; ++i)
                            o.profiles.push_back(
                                {kind, MomentumIndex::from_flat(kLine, kflat),
                                 {{MomentumIndex::from_flat(kLine, kflat), 1.0}}});
                    };
                    add(FieldKind::Scalar1, 0, nb0);
                    add(FieldKind::Scalar1, 1, nb1);
                    add(FieldKind::Scalar2, 0, nc0);
                    add(FieldKind::Scalar2, 1, nc1);
                    outs.push_back(o);
                }

    const ScatterOptions opt = quiet_options();
    const auto sum_over = [&](double e_target) {
        const CouplingSchedule s =
            build_schedule(short_window(e_target), kLine.scalar_mass);
        const auto amps = amplitude_overlaps(kLine, s, rest_pair(), outs, opt);
        double sum = 0.0;
        for (const cplx& a : amps) sum += std::norm(a);
        return sum;
    };

    CHECK(sum_over(0.0) == doctest::Approx(1.0).epsilon(1e-12));

    // with the coupling on, the missing weight sits in photon-pair sectors
    const double sum = sum_over(0.05);
    CHECK(sum <= 1.0 + 1e-9);
    CHECK(1.0 - sum > 0.0);
    CHECK(1.0 - sum < 1e-4);
    MESSAGE("photon-free completeness at e=0.05: " << sum);
}

TEST_CASE("reports are deterministic for a fixed seed") {
    ScheduleParams p = short_window(0.1, 0.05);
    ScatterOptions opt;
    opt.n_max = 2;
    opt.n_samples = 32;
    opt.truncation_check = true;
    opt.seed = 7;

    const CouplingSchedule s = build_schedule(p, kLine.scalar_mass);
    const ScatteringReport r1 = run_scattering(kLine, s, rest_pair(), opt);
    const ScatteringReport r2 = run_scattering(kLine, s, rest_pair(), opt);
    CHECK(report_json(r1) == report_json(r2));
    CHECK(trace_csv(r1) == trace_csv(r2));

    CHECK(r1.seed == 7);
    CHECK(r1.samples.size() == 32);
    CHECK(r1.truncation_checked);
    CHECK(r1.truncation_n_max == 3);
    CHECK(r1.truncation_delta >= 0.0);
    CHECK(!r1.truncation_verdict.empty());

    const std::string json = report_json(r1);
    CHECK(json.find("\"version\": \"0.1.0\"") != std::string::npos);
    CHECK(json.find("\"config_hash\"") != std::string::npos);
    CHECK(json.find("\"seed\": 7") != std::string::npos);

    const std::string csv = trace_csv(r1);
    CHECK(csv.rfind("t,e,delta_m,norm,energy,constraint_max,charge,gauss_max\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') ==
          static_cast<std::ptrdiff_t>(s.steps) + 2);

    ScatterOptions reseeded = opt;
    reseeded.seed = 8;
    const ScatteringReport r3 = run_scattering(kLine, s, rest_pair(), reseeded);
    CHECK(report_json(r3) != report_json(r1));
}

TEST_CASE("position register run flags its truncation honestly") {
    // the same free pipeline that is exact in the particle register loses
    // weight here: the dressing unitary and the evolution are both truncated
    // in the position basis
    ScheduleParams p;
    p.half_window = 0.5;
    p.plateau_half_window = 0.25;
    p.dt = 0.025;
    p.e_target = 0.0;
    p.delta_m_coefficient = -1.366032;
    ScatterOptions opt = quiet_options(3);
    opt.rep = Rep::Position;
    opt.truncation_check = true;

    const ScatteringReport r =
        run_scattering(kLine, build_schedule(p, kLine.scalar_mass), rest_pair(), opt);
    CHECK(r.norm_max_drift < 1e-9);
    CHECK(r.survival == doctest::Approx(0.716553).epsilon(1e-4));
    double occdiff = 0.0;
    for (std::size_t i = 0; i < r.occupations.size(); ++i)
        occdiff = std::max(occdiff, std::abs(r.occupations[i].mean - r.in_occupations[i]));
    CHECK(occdiff > 0.1);
    CHECK(r.truncation_delta > 1e-3);
    CHECK(r.truncation_verdict == "insufficient cutoff");
    CHECK(r.constraint_max > 0.5);
    MESSAGE("position-register free run: occupation drift " << occdiff
            << ", cutoff shift " << r.truncation_delta);
}

TEST_CASE("run guards") {
    const CouplingSchedule s = build_schedule(short_window(0.1), kLine.scalar_mass);

    ScatterOptions bad_sign = quiet_options();
    bad_sign.sign = 0;
    CHECK_THROWS_AS(run_scattering(kLine, s, rest_pair(), bad_sign), ConfigError);

    ScatterOptions bad_samples = quiet_options();
    bad_samples.n_samples = -1;
    CHECK_THROWS_AS(run_scattering(kLine, s, rest_pair(), bad_samples), ConfigError);

    ScatterOptions bad_eps = quiet_options();
    bad_eps.constraint_epsilon = 0.0;
    CHECK_THROWS_AS(run_scattering(kLine, s, rest_pair(), bad_eps), ConfigError);

    CouplingSchedule tampered = s;
    tampered.steps -= 1;
    CHECK_THROWS_AS(run_scattering(kLine, tampered, rest_pair(), quiet_options()),
                    InvalidWindow);

    const LatticeConfig cube{3, 2, 1.0};
    WavepacketSpec cube_pair;
    cube_pair.profiles = {{FieldKind::Scalar1, MomentumIndex{{0, 0, 0}},
                           {{MomentumIndex{{0, 0, 0}}, 1.0}}},
                          {FieldKind::Scalar2, MomentumIndex{{0, 0, 0}},
                           {{MomentumIndex{{0, 0, 0}}, 1.0}}}};
    CHECK_THROWS_AS(run_scattering(cube, s, cube_pair, quiet_options(2)), OracleTooLarge);
}

}  // TEST_SUITE
