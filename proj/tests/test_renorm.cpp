#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>

#include "sqed/renorm.hpp"

using namespace sqed;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNorm = 1.0 / (8.0 * kPi * kPi * kPi);

double lattice_w2(const Momentum& p, double m) {
    double s = m * m;
    for (double c : p) s += 4.0 * std::sin(0.5 * c) * std::sin(0.5 * c);
    return s;
}

// two-parameter least squares of v against log(1/m^2)
std::pair<double, double> log_fit(const std::array<double, 3>& ms,
                                  const std::array<double, 3>& vs) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 3; ++i) {
        const double x = std::log(1.0 / (ms[i] * ms[i]));
        sx += x;
        sy += vs[i];
        sxx += x * x;
        sxy += x * vs[i];
    }
    const double slope = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
    return {slope, (sy - slope * sx) / 3.0};
}

}  // namespace

TEST_SUITE("renorm") {

TEST_CASE("propagator kernel poles and euclidean positivity") {
    PropagatorKernel pk{0.3};
    const Momentum p{0.7, -1.1, 2.0};
    const double w2 = lattice_w2(p, 0.3);
    CHECK(pk.scalar_frequency_sq(p) == doctest::Approx(w2).epsilon(1e-14));
    CHECK(PropagatorKernel::photon_frequency_sq(p) == doctest::Approx(w2 - 0.09).epsilon(1e-13));
    CHECK(PropagatorKernel::photon_frequency_sq({0.0, 0.0, 0.0}) == 0.0);

    const cplx g = pk.scalar(0.5, p);
    CHECK(g.real() == 0.0);
    CHECK(g.imag() == doctest::Approx(1.0 / (0.25 - w2)).epsilon(1e-13));
    const double w = std::sqrt(w2);
    CHECK(std::abs(pk.scalar(w * (1.0 + 1e-9), p)) > 1e7);
    CHECK(std::abs(pk.photon(std::sqrt(w2 - 0.09) * (1.0 - 1e-9), p)) > 1e7);

    for (double ee : {0.0, 0.5, 2.0}) {
        CHECK(pk.euclidean_scalar(ee, p) > 0.0);
        CHECK(pk.euclidean_scalar(ee, p) == doctest::Approx(1.0 / (ee * ee + w2)).epsilon(1e-13));
        CHECK(pk.euclidean_photon(ee + 0.1, p) > 0.0);
    }
}

TEST_CASE("cubature reproduces closed forms at its degree") {
    CubatureOptions loose;
    loose.abs_tol = 1.0;

    Box cube3;
    cube3.lo = {-1.0, -1.0, -1.0, 0.0};
    cube3.hi = {1.0, 1.0, 1.0, 0.0};
    auto poly3 = [](const double* v) {
        const double x = v[0], y = v[1], z = v[2];
        return x * x * y * y * y * y + z * z * z * z * z * z + 5.0 + x * y * z;
    };
    auto r3 = adaptive_cubature(poly3, 3, cube3, loose);
    CHECK(r3.value == doctest::Approx(8.0 / 15.0 + 8.0 / 7.0 + 40.0).epsilon(1e-13));
    CHECK(r3.evaluations == 33);

    Box sq2;
    sq2.lo = {-1.0, -1.0, 0.0, 0.0};
    sq2.hi = {1.0, 1.0, 0.0, 0.0};
    auto poly2 = [](const double* v) {
        const double x = v[0], y = v[1];
        return x * x * x * x * y * y + x * x * x * x * x * x;
    };
    auto r2 = adaptive_cubature(poly2, 2, sq2, loose);
    CHECK(r2.value == doctest::Approx(4.0 / 15.0 + 4.0 / 7.0).epsilon(1e-13));
    CHECK(r2.evaluations == 17);

    CubatureOptions tight;
    tight.abs_tol = 1e-10;
    Box g3;
    g3.hi = {1.5, 1.5, 1.5, 0.0};
    auto gauss = [](const double* v) {
        return std::exp(-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
    };
    const double erf_axis = 0.5 * std::sqrt(kPi) * std::erf(1.5);
    auto rg = adaptive_cubature(gauss, 3, g3, tight);
    CHECK(rg.value == doctest::Approx(erf_axis * erf_axis * erf_axis).epsilon(1e-10));
    CHECK(rg.abs_error_estimate <= 1e-10);

    // boundary integrand of the polarization correction, frozen reference
    Box face;
    face.hi = {kPi, kPi, 0.0, 0.0};
    auto face_f = [](const double* v) {
        const double w = 0.01 + v[0] * v[0] + v[1] * v[1] + kPi * kPi;
        return v[0] * v[0] / (w * w * std::sqrt(w));
    };
    CubatureOptions fopt;
    fopt.abs_tol = 1e-7;
    auto rf = adaptive_cubature(face_f, 2, face, fopt);
    CHECK(4.0 * kNorm * rf.value == doctest::Approx(0.000401334).epsilon(2e-5));

    auto wiggle = [](const double* v) {
        return std::cos(40.0 * v[0]) * std::cos(40.0 * v[1]) * std::cos(40.0 * v[2]);
    };
    CubatureOptions starved;
    starved.abs_tol = 1e-10;
    starved.max_evaluations = 5000;
    CHECK_THROWS_AS(adaptive_cubature(wiggle, 3, cube3, starved), QuadratureNotConverged);

    CHECK_THROWS_AS(adaptive_cubature(poly3, 5, cube3, loose), ConfigError);
    CHECK_THROWS_AS(adaptive_cubature(poly3, 3, std::vector<Box>{}, loose), ConfigError);
    Box degenerate = cube3;
    degenerate.hi[1] = degenerate.lo[1];
    CHECK_THROWS_AS(adaptive_cubature(poly3, 3, degenerate, loose), ConfigError);
    CubatureOptions bad;
    bad.abs_tol = 0.0;
    CHECK_THROWS_AS(adaptive_cubature(poly3, 3, cube3, bad), ConfigError);
}

TEST_CASE("quasi-random integrator matches closed forms") {
    Box unit;
    unit.hi = {1.0, 1.0, 1.0, 0.0};
    auto f = [](const double* v) { return std::exp(-v[0] - v[1] - v[2]); };
    const double exact = std::pow(1.0 - std::exp(-1.0), 3.0);
    auto q = qmc_integrate(f, 3, unit, 4096, 8, 7ULL);
    CHECK(q.std_error > 0.0);
    CHECK(std::abs(q.value - exact) <= 4.0 * q.std_error + 1e-6);
    CHECK(q.evaluations == 4096 * 8);

    auto q_same = qmc_integrate(f, 3, unit, 4096, 8, 7ULL);
    CHECK(q.value == q_same.value);
    CHECK(q.std_error == q_same.std_error);
    auto q_other = qmc_integrate(f, 3, unit, 4096, 8, 8ULL);
    CHECK(q.value != q_other.value);
    CHECK(std::abs(q.value - q_other.value) <= 3.0 * (q.std_error + q_other.std_error));

    CHECK_THROWS_AS(qmc_integrate(f, 3, unit, 4096, 1, 7ULL), ConfigError);
}

TEST_CASE("inverse frequency integral and mass counterterm") {
    auto j0 = inverse_frequency_integral(0.0);
    CHECK(std::abs(j0.value - 0.22767203) < 2e-6);
    CHECK(j0.abs_error_estimate <= 1e-6);
    CHECK(j0.abs_error_estimate >= 0.0);
    CHECK(j0.evaluations > 0);
    CHECK(j0.parameters.m == 0.0);
    CHECK(j0.parameters.dim == 3);
    CHECK(j0.parameters.variant == "lattice");

    CHECK(delta_m(0.0, 0.2).value == 0.0);
    auto dm = delta_m(1.0, 0.0);
    CHECK(std::abs(dm.value - (-1.366032)) < 1e-4);
    CHECK(dm.value > -1.37);
    CHECK(dm.value < -1.35);
    auto dm2 = delta_m(2.0, 0.0);
    CHECK(dm2.value == doctest::Approx(4.0 * dm.value).epsilon(1e-14));

    // same constant through a genuinely different quadrature decomposition
    auto tad = tadpole_polarization(0.0);
    CHECK(std::abs(std::abs(dm.value) - 3.0 * std::abs(tad.value)) <
          dm.abs_error_estimate + 3.0 * tad.abs_error_estimate + 1e-9);

    CHECK_THROWS_AS(inverse_frequency_integral(-0.1), ConfigError);
    CHECK_THROWS_AS(delta_m(-1.0, 0.0), ConfigError);
}

TEST_CASE("tadpole polarization magnitude and decay") {
    auto t0 = tadpole_polarization(0.0);
    CHECK(t0.value < 0.0);
    CHECK(std::abs(t0.value) == doctest::Approx(0.455).epsilon(0.003 / 0.455));
    CHECK(std::abs(std::abs(t0.value) - 0.455344) < 2e-5);

    auto t_large = tadpole_polarization(20.0);
    CHECK(std::abs(t_large.value) * 20.0 > 0.9);
    CHECK(std::abs(t_large.value) * 20.0 < 1.01);

    auto t_small = tadpole_polarization(0.1);
    CHECK(std::abs(t_small.value) < std::abs(t0.value));
    const double continuity_gap = std::abs(t_small.value) - std::abs(t0.value);
    MESSAGE("tadpole coefficient m=0.1 vs m=0 difference: ", continuity_gap);
    CHECK(std::abs(continuity_gap) < 5e-3);

    auto j = inverse_frequency_integral(0.3);
    auto t = tadpole_polarization(0.3);
    CHECK(std::abs(t.value + 2.0 * j.value) <
          t.abs_error_estimate + 2.0 * j.abs_error_estimate + 1e-9);
}

TEST_CASE("vacuum polarization squared reading at small mass") {
    CubatureOptions opt;
    opt.abs_tol = 2e-6;
    auto p = vacuum_polarization(0.0, {0.0, 0.0, 0.0}, 0.1, FrequencyReading::Squared, opt);
    CHECK(p.reading == FrequencyReading::Squared);
    CHECK(p.reproduces_reference_constants);
    CHECK(std::abs(p.pi0 - 0.1253805) < p.pi0_error + 1e-5);
    CHECK(std::abs(p.pi1 - 0.0126663) < p.pi1_error + 5e-5);
    CHECK(p.pi1_error > 0.0);
    CHECK(std::abs(p.pi1 + p.pi2) < p.pi1_error + p.pi2_error + 1e-6);
    CHECK(p.at_kinematics.value == p.pi0);
    CHECK(p.evaluations > 0);

    auto pk = vacuum_polarization(0.05, {0.0, 0.0, 0.1}, 0.1, FrequencyReading::Squared, opt);
    CHECK(std::abs(pk.at_kinematics.value - 0.1252740) < pk.at_kinematics.abs_error_estimate + 1e-5);
    CHECK(pk.at_kinematics.parameters.variant == "continuum-cube");
    CHECK(pk.at_kinematics.parameters.m == 0.1);
}

TEST_CASE("log divergence of the charge coefficient") {
    CubatureOptions opt;
    opt.abs_tol = 2e-6;
    const std::array<double, 3> ms{0.1, 0.01, 0.001};
    const std::array<double, 3> frozen{0.0126663, 0.0223834, 0.0321043};
    std::array<double, 3> vals{};
    for (int i = 0; i < 3; ++i) {
        auto p = vacuum_polarization(0.0, {0.0, 0.0, 0.0}, ms[i], FrequencyReading::Squared, opt);
        vals[i] = p.pi1;
        CHECK(std::abs(p.pi1 - frozen[i]) < 5e-5);
        CHECK(std::abs(p.pi1 + p.pi2) < p.pi1_error + p.pi2_error + 1e-6);
    }
    auto [slope, intercept] = log_fit(ms, vals);
    const double target = 1.0 / (48.0 * kPi * kPi);
    MESSAGE("pi1 slope ", slope, " vs 1/(48 pi^2) ", target, ", intercept ", intercept);
    CHECK(std::abs(slope - target) / target < 0.05);
    CHECK(intercept > 0.001);
    CHECK(intercept < 0.005);
}

TEST_CASE("literal reading fails the log prediction and is flagged") {
    CubatureOptions opt;
    opt.abs_tol = 2e-6;
    const std::array<double, 3> ms{0.1, 0.01, 0.001};
    std::array<double, 3> vals{};
    for (int i = 0; i < 3; ++i) {
        auto p = vacuum_polarization(0.0, {0.0, 0.0, 0.0}, ms[i], FrequencyReading::Literal, opt);
        vals[i] = p.pi1;
        CHECK_FALSE(p.reproduces_reference_constants);
        CHECK(p.at_kinematics.parameters.variant == "literal-frequency");
    }
    // the printed exponent-1/2 form: d/d(k0^2) equals (1/12) l1^2 w^{-3/2}
    CHECK(std::abs(vals[0] - 0.0675771) < 1e-4);
    auto [slope, intercept] = log_fit(ms, vals);
    MESSAGE("literal reading slope ", slope, " intercept ", intercept);
    CHECK(std::abs(slope) < 5e-4);  // no log(1/m^2) divergence: wrong constant structure
    const double target = 1.0 / (48.0 * kPi * kPi);
    CHECK(std::abs(slope - target) / target > 0.5);
}

TEST_CASE("charge shift composes the expansion") {
    CHECK(delta_e(0.0, 0.01) == 0.0);

    const double de = delta_e(0.3, 0.01);
    CHECK(std::abs(de - 1.81306e-4) < 1e-6);
    const double closed =
        (std::log(1e4) / (48.0 * kPi * kPi) + 0.003) * 0.3 * 0.3 * 0.3 * 0.3;
    CHECK(std::abs(de / closed - 1.0) < 0.03);

    double prev = 0.0;
    for (double m : {1.0, 0.3, 0.1, 0.01}) {
        const double v = delta_e(0.5, m);
        CHECK(v > 0.0);  // e0^2 = e^2 + delta_e stays above e^2
        CHECK(v > prev);
        prev = v;
    }
    CHECK_THROWS_AS(delta_e(0.1, 0.0), ConfigError);
    CHECK_THROWS_AS(delta_e(0.1, -1.0), ConfigError);
}

TEST_CASE("self energy reductions") {
    auto s0 = scalar_self_energy(0.0, {0.0, 0.0, 0.0}, 0.0, 1.0);
    CHECK(std::abs(s0.sigma1.value - 0.455344) < 1e-4);
    CHECK(std::abs(s0.sigma2.value - (-1.821376)) < 1e-4);
    auto dm = delta_m(1.0, 0.0);
    CHECK(std::abs(s0.sum() - dm.value) <
          s0.sigma1.abs_error_estimate + s0.sigma2.abs_error_estimate +
              dm.abs_error_estimate + 1e-7);

    // tadpole piece carries no external momentum
    auto sa = scalar_self_energy(0.02, {0.4, 0.3, 0.2}, 0.1, 1.0);
    auto sb = scalar_self_energy(0.1, {0.9, 0.0, 0.1}, 0.1, 1.0);
    CHECK(sa.sigma2.value == sb.sigma2.value);

    auto s1 = scalar_self_energy(0.05, {0.2, 0.0, 0.0}, 0.1, 1.0);
    auto s2 = scalar_self_energy(0.05, {0.2, 0.0, 0.0}, 0.1, 2.0);
    CHECK(s2.sigma1.value == doctest::Approx(4.0 * s1.sigma1.value).epsilon(1e-12));
    CHECK(s2.sigma2.value == doctest::Approx(4.0 * s1.sigma2.value).epsilon(1e-12));

    auto on_shell = scalar_self_energy(0.1, {0.0, 0.0, 0.0}, 0.1, 1.0);
    CHECK(std::abs(on_shell.sum() - (-1.370001)) < 1e-4);
    MESSAGE("on-shell m=0.1 mass shift vs m=0: ", on_shell.sum() - dm.value);
    CHECK(std::abs(on_shell.sum() - dm.value) < 0.02);

    auto off_shell = scalar_self_energy(0.05, {0.0, 0.0, 0.0}, 0.1, 1.0);
    CHECK(std::abs(off_shell.sum() - (-1.367806)) < 1e-4);
    auto spacelike = scalar_self_energy(0.0, {0.3, 0.0, 0.0}, 0.1, 1.0);
    CHECK(std::abs(spacelike.sum() - (-1.356583)) < 1e-4);

    // timelike kinematics above the pair threshold have a pole inside the
    // integration region; no principal value is provided, so this must refuse
    CHECK_THROWS_AS(scalar_self_energy(std::sqrt(0.35), {0.5, 0.0, 0.0}, 0.1, 1.0),
                    PoleProximity);
    CHECK_THROWS_AS(scalar_self_energy(1.5, {0.0, 0.0, 0.0}, 0.1, 1.0), PoleProximity);
    CHECK_THROWS_AS(scalar_self_energy(0.1, {0.0, 0.0, 0.0}, -0.1, 1.0), ConfigError);
}

TEST_CASE("monte carlo cross checks on the headline constants") {
    CubatureOptions copt;
    copt.cross_check = true;

    auto j = inverse_frequency_integral(0.0, copt);
    CHECK(j.qmc_std_error > 0.0);
    CHECK(std::abs(j.value - j.qmc_value) <= 3.0 * (j.qmc_std_error + j.abs_error_estimate));

    auto dm = delta_m(1.0, 0.0, copt);
    CHECK(std::abs(dm.value - dm.qmc_value) <= 3.0 * (dm.qmc_std_error + dm.abs_error_estimate));

    auto tad = tadpole_polarization(0.0, copt);
    CHECK(std::abs(tad.value - tad.qmc_value) <=
          3.0 * (tad.qmc_std_error + tad.abs_error_estimate));

    auto p = vacuum_polarization(0.0, {0.0, 0.0, 0.0}, 0.1, FrequencyReading::Squared, copt);
    CHECK(p.pi1_qmc_std_error > 0.0);
    CHECK(std::abs(p.pi1 - p.pi1_qmc) <= 3.0 * (p.pi1_qmc_std_error + p.pi1_error));

    auto s = scalar_self_energy(0.0, {0.0, 0.0, 0.0}, 0.0, 1.0, copt);
    CHECK(std::abs(s.sigma1.value - s.sigma1.qmc_value) <=
          3.0 * (s.sigma1.qmc_std_error + s.sigma1.abs_error_estimate));
    CHECK(std::abs(s.sigma2.value - s.sigma2.qmc_value) <=
          3.0 * (s.sigma2.qmc_std_error + s.sigma2.abs_error_estimate));

    CubatureOptions other = copt;
    other.seed = copt.seed + 1;
    auto j2 = inverse_frequency_integral(0.0, other);
    CHECK(j2.qmc_value != j.qmc_value);
    CHECK(std::abs(j2.qmc_value - j.qmc_value) <= 3.0 * (j.qmc_std_error + j2.qmc_std_error));

    // a plain result never claims a cross check it did not run
    auto plain = inverse_frequency_integral(0.0);
    CHECK(plain.qmc_std_error < 0.0);
}

TEST_CASE("refinement tightens deterministically") {
    CubatureOptions fine;
    fine.abs_tol = 1e-8;
    const double reference = inverse_frequency_integral(0.05, fine).value;

    double prev_value = 0.0, prev_est = 0.0;
    std::int64_t prev_evals = 0;
    bool first = true;
    for (double tol : {1e-4, 5e-5, 2.5e-5, 1.25e-5}) {
        CubatureOptions opt;
        opt.abs_tol = tol;
        auto r = inverse_frequency_integral(0.05, opt);
        CHECK(r.abs_error_estimate <= tol);
        CHECK(std::abs(r.value - reference) <= r.abs_error_estimate);
        if (!first) {
            CHECK(std::abs(r.value - prev_value) <= prev_est);
            CHECK(r.evaluations >= prev_evals);
        }
        prev_value = r.value;
        prev_est = r.abs_error_estimate;
        prev_evals = r.evaluations;
        first = false;
    }

    auto a = tadpole_polarization(0.2);
    auto b = tadpole_polarization(0.2);
    CHECK(a.value == b.value);
    CHECK(a.abs_error_estimate == b.abs_error_estimate);
    CHECK(a.evaluations == b.evaluations);
}

TEST_CASE("expansion kinematics guards") {
    CHECK_THROWS_AS(vacuum_polarization(0.0, {0.0, 0.0, 0.0}, 0.0), ConfigError);
    CHECK_THROWS_AS(vacuum_polarization(0.0, {0.0, 0.0, 0.0}, -0.1), ConfigError);
    CHECK_THROWS_AS(vacuum_polarization(0.0, {0.0, 0.0, 1.5}, 0.1), ConfigError);
    // external energy at the pair threshold of the squared reading
    CHECK_THROWS_AS(vacuum_polarization(0.2, {0.0, 0.0, 0.0}, 0.1), ExpansionUnstable);
}

}  // TEST_SUITE
