#include "sqed/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <random>
#include <sstream>
#include <vector>

namespace sqed {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNorm = 1.0 / (8.0 * kPi * kPi * kPi);  // 1/(2pi)^3

double lattice_w2(const double* l, int dim, double m) {
    double s = m * m;
    for (int i = 0; i < dim; ++i) {
        const double t = std::sin(0.5 * l[i]);
        s += 4.0 * t * t;
    }
    return s;
}

// ---- degree-7 cubature rule with embedded degree-5 estimate ----

struct Rule {
    int dim;
    int points;
    double w[5];   // center, +-l2, +-l3, two-axis l3 pairs, l5 corners
    double we[4];  // embedded rule, same points minus the corners
    double l2, l3, l5;

    explicit Rule(int d) : dim(d) {
        const double n = d;
        const double two_d = std::ldexp(1.0, d);
        w[0] = two_d * (12824.0 - 9120.0 * n + 400.0 * n * n) / 19683.0;
        w[1] = two_d * 980.0 / 6561.0;
        w[2] = two_d * (1820.0 - 400.0 * n) / 19683.0;
        w[3] = two_d * 200.0 / 19683.0;
        w[4] = 6859.0 / 19683.0;
        we[0] = two_d * (729.0 - 950.0 * n + 50.0 * n * n) / 729.0;
        we[1] = two_d * 245.0 / 486.0;
        we[2] = two_d * (265.0 - 100.0 * n) / 1458.0;
        we[3] = two_d * 25.0 / 729.0;
        l2 = std::sqrt(9.0 / 70.0);
        l3 = std::sqrt(9.0 / 10.0);
        l5 = std::sqrt(9.0 / 19.0);
        points = 1 + 4 * d + 2 * d * (d - 1) + (1 << d);
    }
};

struct Region {
    std::array<double, 4> c{};  // center
    std::array<double, 4> h{};  // halfwidths
    double value = 0.0;
    double err = 0.0;
    int axis = 0;
    bool live = true;
};

void evaluate_region(const Integrand& f, const Rule& r, Region& reg) {
    const int d = r.dim;
    double pt[4];
    for (int i = 0; i < d; ++i) pt[i] = reg.c[i];
    const double fc = f(pt);

    double s2 = 0.0, s3 = 0.0, s4 = 0.0, s5 = 0.0;
    double best_diff = -1.0;
    int best_axis = 0;
    for (int i = 0; i < d; ++i) {
        pt[i] = reg.c[i] + r.l2 * reg.h[i];
        double t2 = f(pt);
        pt[i] = reg.c[i] - r.l2 * reg.h[i];
        t2 += f(pt);
        pt[i] = reg.c[i] + r.l3 * reg.h[i];
        double t3 = f(pt);
        pt[i] = reg.c[i] - r.l3 * reg.h[i];
        t3 += f(pt);
        pt[i] = reg.c[i];
        s2 += t2;
        s3 += t3;
        // fourth-difference indicator picks the split axis
        const double ratio = (r.l2 * r.l2) / (r.l3 * r.l3);
        const double diff = std::abs((t2 - 2.0 * fc) - ratio * (t3 - 2.0 * fc)) * reg.h[i];
        if (diff > best_diff) {
            best_diff = diff;
            best_axis = i;
        }
    }
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            for (int si = -1; si <= 1; si += 2) {
                for (int sj = -1; sj <= 1; sj += 2) {
                    pt[i] = reg.c[i] + si * r.l3 * reg.h[i];
                    pt[j] = reg.c[j] + sj * r.l3 * reg.h[j];
                    s4 += f(pt);
                }
            }
            pt[i] = reg.c[i];
            pt[j] = reg.c[j];
        }
    }
    for (int mask = 0; mask < (1 << d); ++mask) {
        for (int i = 0; i < d; ++i)
            pt[i] = reg.c[i] + ((mask >> i) & 1 ? r.l5 : -r.l5) * reg.h[i];
        s5 += f(pt);
    }

    double hvol = 1.0;
    for (int i = 0; i < d; ++i) hvol *= reg.h[i];
    const double v7 = hvol * (r.w[0] * fc + r.w[1] * s2 + r.w[2] * s3 + r.w[3] * s4 + r.w[4] * s5);
    const double v5 = hvol * (r.we[0] * fc + r.we[1] * s2 + r.we[2] * s3 + r.we[3] * s4);
    if (!std::isfinite(v7) || !std::isfinite(v5))
        throw Error("cubature integrand produced a non-finite value");
    reg.value = v7;
    reg.err = std::abs(v7 - v5);
    reg.axis = best_axis;
}

struct HeapItem {
    double err;
    std::int64_t idx;
};
struct HeapCmp {
    bool operator()(const HeapItem& a, const HeapItem& b) const {
        if (a.err != b.err) return a.err < b.err;
        return a.idx > b.idx;  // ties refine the oldest region first
    }
};

}  // namespace

LoopIntegralResult adaptive_cubature(const Integrand& f, int dim, const Box& domain,
                                     const CubatureOptions& opt) {
    return adaptive_cubature(f, dim, std::vector<Box>{domain}, opt);
}

LoopIntegralResult adaptive_cubature(const Integrand& f, int dim, const std::vector<Box>& domains,
                                     const CubatureOptions& opt) {
    if (dim < 2 || dim > 4) throw ConfigError("adaptive_cubature supports 2 to 4 dimensions");
    if (domains.empty()) throw ConfigError("adaptive_cubature needs at least one box");
    if (!(opt.abs_tol > 0)) throw ConfigError("abs_tol must be positive");
    const Rule rule(dim);

    std::vector<Region> regs;
    regs.reserve(1024);
    std::priority_queue<HeapItem, std::vector<HeapItem>, HeapCmp> heap;
    std::int64_t evals = 0;
    double total = 0.0, toterr = 0.0;

    auto push_region = [&](Region reg) {
        evaluate_region(f, rule, reg);
        evals += rule.points;
        total += reg.value;
        toterr += reg.err;
        heap.push({reg.err, static_cast<std::int64_t>(regs.size())});
        regs.push_back(reg);
    };

    for (const Box& b : domains) {
        Region reg;
        for (int i = 0; i < dim; ++i) {
            if (!(b.hi[i] > b.lo[i])) throw ConfigError("box has empty extent");
            reg.c[i] = 0.5 * (b.lo[i] + b.hi[i]);
            reg.h[i] = 0.5 * (b.hi[i] - b.lo[i]);
        }
        push_region(reg);
    }

    while (toterr > opt.abs_tol) {
        if (evals + 2 * rule.points > opt.max_evaluations) {
            std::ostringstream msg;
            msg << "error estimate " << toterr << " above tolerance " << opt.abs_tol << " after "
                << evals << " evaluations";
            throw QuadratureNotConverged(msg.str());
        }
        HeapItem top = heap.top();
        heap.pop();
        if (!regs[top.idx].live) continue;  // stale entry for an already split region
        Region parent = regs[top.idx];
        regs[top.idx].live = false;
        total -= parent.value;
        toterr -= parent.err;
        const int ax = parent.axis;
        Region child = parent;
        child.h[ax] = 0.5 * parent.h[ax];
        child.c[ax] = parent.c[ax] - child.h[ax];
        push_region(child);
        child.c[ax] = parent.c[ax] + child.h[ax];
        push_region(child);
    }

    // fixed-order final merge keeps repeated runs bit-identical
    LoopIntegralResult out;
    total = 0.0;
    toterr = 0.0;
    for (const Region& reg : regs) {
        if (!reg.live) continue;
        total += reg.value;
        toterr += reg.err;
    }
    out.value = total;
    out.abs_error_estimate = toterr;
    out.evaluations = evals;
    out.parameters.dim = dim;
    return out;
}

QmcResult qmc_integrate(const Integrand& f, int dim, const Box& domain,
                        std::int64_t points_per_shift, int shifts, std::uint64_t seed) {
    if (dim < 1 || dim > 4) throw ConfigError("qmc_integrate supports 1 to 4 dimensions");
    if (points_per_shift < 2 || shifts < 2) throw ConfigError("qmc_integrate needs >= 2 points and shifts");
    static constexpr int kBases[4] = {2, 3, 5, 7};
    double vol = 1.0;
    for (int i = 0; i < dim; ++i) {
        if (!(domain.hi[i] > domain.lo[i])) throw ConfigError("box has empty extent");
        vol *= domain.hi[i] - domain.lo[i];
    }

    std::mt19937_64 rng(seed);
    std::vector<double> means(shifts, 0.0);
    for (int r = 0; r < shifts; ++r) {
        double shift[4];
        for (int i = 0; i < dim; ++i) shift[i] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        double acc = 0.0;
        for (std::int64_t n = 1; n <= points_per_shift; ++n) {
            double pt[4];
            for (int i = 0; i < dim; ++i) {
                double inv = 0.0, place = 1.0 / kBases[i];
                for (std::int64_t k = n; k > 0; k /= kBases[i]) {
                    inv += static_cast<double>(k % kBases[i]) * place;
                    place /= kBases[i];
                }
                double u = inv + shift[i];
                u -= std::floor(u);
                pt[i] = domain.lo[i] + u * (domain.hi[i] - domain.lo[i]);
            }
            acc += f(pt);
        }
        means[r] = acc / static_cast<double>(points_per_shift) * vol;
    }

    QmcResult out;
    for (double mu : means) out.value += mu;
    out.value /= shifts;
    double var = 0.0;
    for (double mu : means) var += (mu - out.value) * (mu - out.value);
    var /= shifts - 1;
    out.std_error = std::sqrt(var / shifts);
    out.evaluations = points_per_shift * shifts;
    return out;
}

// ---- propagators ----

double PropagatorKernel::photon_frequency_sq(const Momentum& p) {
    return lattice_w2(p.data(), 3, 0.0);
}

double PropagatorKernel::scalar_frequency_sq(const Momentum& p) const {
    return lattice_w2(p.data(), 3, m);
}

cplx PropagatorKernel::scalar(double energy, const Momentum& p) const {
    return cplx(0.0, 1.0 / (energy * energy - scalar_frequency_sq(p)));
}

cplx PropagatorKernel::photon(double energy, const Momentum& p) const {
    return cplx(0.0, 1.0 / (energy * energy - photon_frequency_sq(p)));
}

double PropagatorKernel::euclidean_scalar(double euclidean_energy, const Momentum& p) const {
    return 1.0 / (euclidean_energy * euclidean_energy + scalar_frequency_sq(p));
}

double PropagatorKernel::euclidean_photon(double euclidean_energy, const Momentum& p) const {
    return 1.0 / (euclidean_energy * euclidean_energy + photon_frequency_sq(p));
}

// ---- shared op plumbing ----

namespace {

// folded axes use the even symmetry of the integrand; unfolded axes are
// split at the origin so integrable singularities sit at region corners
std::vector<Box> folded_boxes(const std::array<bool, 3>& fold) {
    std::vector<Box> out{Box{}};
    for (int i = 0; i < 3; ++i) {
        std::vector<std::pair<double, double>> segs;
        if (fold[i])
            segs = {{0.0, kPi}};
        else
            segs = {{-kPi, 0.0}, {0.0, kPi}};
        std::vector<Box> next;
        for (const Box& b : out) {
            for (const auto& s : segs) {
                Box nb = b;
                nb.lo[i] = s.first;
                nb.hi[i] = s.second;
                next.push_back(nb);
            }
        }
        out = std::move(next);
    }
    return out;
}

LoopIntegralResult integrate_scaled(const Integrand& f, int dim, const std::vector<Box>& boxes,
                                    double scale, const CubatureOptions& opt) {
    CubatureOptions inner = opt;
    inner.abs_tol = opt.abs_tol / std::abs(scale);
    LoopIntegralResult r = adaptive_cubature(f, dim, boxes, inner);
    r.value *= scale;
    r.abs_error_estimate *= std::abs(scale);
    return r;
}

void attach_qmc(LoopIntegralResult& r, const Integrand& f, int dim, const Box& box, double scale,
                const CubatureOptions& opt) {
    QmcResult q = qmc_integrate(f, dim, box, std::int64_t{1} << 16, 8, opt.seed);
    r.qmc_value = q.value * scale;
    r.qmc_std_error = q.std_error * std::abs(scale);
    r.evaluations += q.evaluations;
}

Box octant() {
    Box b;
    b.hi = {kPi, kPi, kPi, 0.0};
    return b;
}

// 16-point Gauss-Legendre on [0,1] for the Feynman-parameter integral
struct GaussLegendre16 {
    std::array<double, 16> x{};
    std::array<double, 16> w{};
    GaussLegendre16() {
        constexpr int n = 16;
        for (int i = 0; i < n / 2; ++i) {
            double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 64; ++it) {
                double p0 = 1.0, p1 = t;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (t * p1 - p0) / (t * t - 1.0);
                const double step = p1 / dp;
                t -= step;
                if (std::abs(step) < 1e-16) break;
            }
            const double weight = 2.0 / ((1.0 - t * t) * dp * dp);
            x[i] = 0.5 * (1.0 - t);
            x[n - 1 - i] = 0.5 * (1.0 + t);
            w[i] = 0.5 * weight;
            w[n - 1 - i] = 0.5 * weight;
        }
    }
};

const GaussLegendre16& gl16() {
    static const GaussLegendre16 g;
    return g;
}

// Transverse bubble integrand at one loop momentum: numerator (zeta.l)^2
// with zeta = e1, Feynman parameter integrated by fixed Gauss-Legendre.
// Squared reading: [x W(l) + (1-x) W(l+k) - x(1-x) k0^2]^{-3/2} with
// W = m^2 + |l|^2 (small-spacing limit of the frequencies, kept on the
// momentum cube). Literal reading: the frequencies enter linearly under
// exponent -1/2 and keep the full lattice dispersion.
double bubble_point(const double* l, double m, bool literal, double k0sq, const double* kshift) {
    double lp[3] = {l[0] + kshift[0], l[1] + kshift[1], l[2] + kshift[2]};
    double wa, wb;
    if (literal) {
        wa = std::sqrt(lattice_w2(l, 3, m));
        wb = std::sqrt(lattice_w2(lp, 3, m));
    } else {
        wa = m * m + l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
        wb = m * m + lp[0] * lp[0] + lp[1] * lp[1] + lp[2] * lp[2];
    }
    const GaussLegendre16& g = gl16();
    double acc = 0.0;
    for (int t = 0; t < 16; ++t) {
        const double x = g.x[t];
        const double d = x * wa + (1.0 - x) * wb - x * (1.0 - x) * k0sq;
        acc += g.w[t] * (literal ? 1.0 / std::sqrt(d) : 1.0 / (d * std::sqrt(d)));
    }
    return l[0] * l[0] * acc;
}

const char* reading_name(bool literal) { return literal ? "literal-frequency" : "continuum-cube"; }

}  // namespace

// ---- loop integrals ----

LoopIntegralResult inverse_frequency_integral(double m, const CubatureOptions& opt) {
    if (m < 0) throw ConfigError("mass must be >= 0");
    Integrand f = [m](const double* l) { return 0.5 / std::sqrt(lattice_w2(l, 3, m)); };
    const double scale = 8.0 * kNorm;
    LoopIntegralResult r = integrate_scaled(f, 3, {octant()}, scale, opt);
    r.parameters = {m, 3, "lattice"};
    if (opt.cross_check) attach_qmc(r, f, 3, octant(), scale, opt);
    return r;
}

LoopIntegralResult delta_m(double e, double m, const CubatureOptions& opt) {
    if (e < 0) throw ConfigError("coupling must be >= 0");
    LoopIntegralResult r = inverse_frequency_integral(m, opt);
    const double factor = -6.0 * e * e;
    r.value *= factor;
    r.abs_error_estimate *= std::abs(factor);
    if (r.qmc_std_error >= 0) {
        r.qmc_value *= factor;
        r.qmc_std_error *= std::abs(factor);
    }
    return r;
}

LoopIntegralResult tadpole_polarization(double m, const CubatureOptions& opt) {
    if (m < 0) throw ConfigError("mass must be >= 0");
    Integrand f = [m](const double* l) { return 0.5 / std::sqrt(lattice_w2(l, 3, m)); };
    // deliberately a different decomposition from inverse_frequency_integral
    // (full cube in eight initial pieces instead of one folded octant), so the
    // delta_m consistency check compares genuinely distinct refinements
    const double scale = -2.0 * kNorm;
    LoopIntegralResult r =
        integrate_scaled(f, 3, folded_boxes({false, false, false}), scale, opt);
    r.parameters = {m, 3, "lattice"};
    if (opt.cross_check) {
        Box cube;
        cube.lo = {-kPi, -kPi, -kPi, 0.0};
        cube.hi = {kPi, kPi, kPi, 0.0};
        attach_qmc(r, f, 3, cube, scale, opt);
    }
    return r;
}

PolarizationExpansion vacuum_polarization(double k0, const Momentum& k, double m,
                                          FrequencyReading reading, const CubatureOptions& opt) {
    if (!(m > 0)) throw ConfigError("vacuum_polarization needs m > 0");
    for (double ki : k)
        if (std::abs(ki) > 1.0)
            throw ConfigError("vacuum_polarization expects |k_i| <= 1 (expansion regime)");
    const bool literal = reading == FrequencyReading::Literal;
    const double threshold = literal ? 4.0 * m : 4.0 * m * m;
    if (k0 * k0 >= 0.999 * threshold)
        throw ExpansionUnstable("external energy at or above the pair threshold");

    PolarizationExpansion out;
    out.reading = reading;

    const std::vector<Box> folded = folded_boxes({true, true, true});
    const double scale = 8.0 * kNorm;
    const double zero_shift[3] = {0.0, 0.0, 0.0};

    // value at zero kinematics
    Integrand base = [m, literal, &zero_shift](const double* l) {
        return bubble_point(l, m, literal, 0.0, zero_shift);
    };
    LoopIntegralResult r0 = integrate_scaled(base, 3, folded, scale, opt);
    out.pi0 = r0.value;
    out.pi0_error = r0.abs_error_estimate;
    out.evaluations += r0.evaluations;

    // value at the requested kinematics
    if (k0 == 0.0 && k == Momentum{0.0, 0.0, 0.0}) {
        out.at_kinematics = r0;
    } else {
        std::array<bool, 3> fold{};
        int unfolded = 0;
        for (int i = 0; i < 3; ++i) {
            fold[i] = k[i] == 0.0;
            if (!fold[i]) ++unfolded;
        }
        const double kin_scale = std::ldexp(kNorm, 3 - unfolded);
        const double k0sq = k0 * k0;
        Integrand fk = [m, literal, k0sq, k](const double* l) {
            return bubble_point(l, m, literal, k0sq, k.data());
        };
        out.at_kinematics = integrate_scaled(fk, 3, folded_boxes(fold), kin_scale, opt);
        out.evaluations += out.at_kinematics.evaluations;
    }
    out.at_kinematics.parameters = {m, 3, reading_name(literal)};

    // d/d(k0^2) at zero kinematics: Richardson-extrapolated difference
    // quotients, each evaluated as a single difference-kernel integral so
    // the quadrature resolves the difference rather than two near-equal values
    const double h1 = 0.2 * m * m;
    const double h2 = 0.5 * h1;
    auto energy_quotient = [&](double h) {
        Integrand f = [m, literal, h, &zero_shift](const double* l) {
            return (bubble_point(l, m, literal, h, zero_shift) -
                    bubble_point(l, m, literal, 0.0, zero_shift)) /
                   h;
        };
        return integrate_scaled(f, 3, folded, scale, opt);
    };
    LoopIntegralResult d1 = energy_quotient(h1);
    LoopIntegralResult d2 = energy_quotient(h2);
    out.evaluations += d1.evaluations + d2.evaluations;
    out.pi1 = 2.0 * d2.value - d1.value;
    const double band1 = std::abs(d1.value - d2.value);
    out.pi1_error = band1 + d1.abs_error_estimate + 2.0 * d2.abs_error_estimate;
    const double noise1 = d1.abs_error_estimate + 2.0 * d2.abs_error_estimate;
    if (band1 > 0.5 * std::abs(out.pi1) + 10.0 * noise1)
        throw ExpansionUnstable("energy finite differences are outside the linear regime");

    // d/d(k^2): shift along e3, symmetrized over +-kappa to cancel the odd
    // term that the momentum cube no longer kills by itself
    auto momentum_quotient = [&](double h) {
        const double kappa = std::sqrt(h);
        Integrand f = [m, literal, h, kappa](const double* l) {
            const double plus[3] = {0.0, 0.0, kappa};
            const double minus[3] = {0.0, 0.0, -kappa};
            const double zero[3] = {0.0, 0.0, 0.0};
            const double sym = 0.5 * (bubble_point(l, m, literal, 0.0, plus) +
                                      bubble_point(l, m, literal, 0.0, minus));
            return (sym - bubble_point(l, m, literal, 0.0, zero)) / h;
        };
        return integrate_scaled(f, 3, folded, scale, opt);
    };
    LoopIntegralResult m1 = momentum_quotient(h1);
    LoopIntegralResult m2 = momentum_quotient(h2);
    out.evaluations += m1.evaluations + m2.evaluations;
    double pi2 = 2.0 * m2.value - m1.value;
    const double band2 = std::abs(m1.value - m2.value);
    double pi2_err = band2 + m1.abs_error_estimate + 2.0 * m2.abs_error_estimate;
    const double noise2 = m1.abs_error_estimate + 2.0 * m2.abs_error_estimate;
    if (band2 > 0.5 * std::abs(pi2) + 10.0 * noise2)
        throw ExpansionUnstable("momentum finite differences are outside the linear regime");

    if (!literal) {
        // The shifted cube is not translation invariant: integrating the k^2
        // derivative by parts leaves a face term at l3 = +-pi. Adding it back
        // restores the pi1 = -pi2 identity of the infinite-volume integral.
        Integrand face = [m](const double* l) {
            const double w = m * m + l[0] * l[0] + l[1] * l[1] + kPi * kPi;
            return l[0] * l[0] / (w * w * std::sqrt(w));
        };
        Box sq;
        sq.hi = {kPi, kPi, 0.0, 0.0};
        LoopIntegralResult fr = integrate_scaled(face, 2, {sq}, 4.0 * kNorm, opt);
        out.evaluations += fr.evaluations;
        pi2 += kPi * fr.value;
        pi2_err += kPi * fr.abs_error_estimate;
    }
    out.pi2 = pi2;
    out.pi2_error = pi2_err;

    out.reproduces_reference_constants = !literal;

    if (opt.cross_check) {
        auto qmc_quotient = [&](double h) {
            Integrand f = [m, literal, h, &zero_shift](const double* l) {
                return (bubble_point(l, m, literal, h, zero_shift) -
                        bubble_point(l, m, literal, 0.0, zero_shift)) /
                       h;
            };
            QmcResult q = qmc_integrate(f, 3, octant(), std::int64_t{1} << 16, 8, opt.seed);
            out.evaluations += q.evaluations;
            return q;
        };
        QmcResult q1 = qmc_quotient(h1);
        QmcResult q2 = qmc_quotient(h2);
        out.pi1_qmc = (2.0 * q2.value - q1.value) * scale;
        out.pi1_qmc_std_error =
            std::sqrt(4.0 * q2.std_error * q2.std_error + q1.std_error * q1.std_error) * scale;
    }
    return out;
}

double delta_e(double e, double m, const CubatureOptions& opt) {
    if (!(m > 0)) throw ConfigError("delta_e needs m > 0");
    if (e == 0.0) return 0.0;
    PolarizationExpansion pol = vacuum_polarization(0.0, {0.0, 0.0, 0.0}, m,
                                                    FrequencyReading::Squared, opt);
    return pol.pi1 * e * e * e * e;
}

// ---- scalar self-energy ----

namespace {

// residue-reduced photon-exchange integrand; the numerator keeps the full
// lattice form of (l + 2k)^2 so the tadpole cancellation at zero kinematics
// survives the reduction exactly
double sigma1_bracket(const double* l, const Momentum& k, double k0, double m) {
    const double lk[3] = {l[0] + k[0], l[1] + k[1], l[2] + k[2]};
    const double l2k[3] = {l[0] + 2.0 * k[0], l[1] + 2.0 * k[1], l[2] + 2.0 * k[2]};
    const double a = std::sqrt(lattice_w2(l, 3, 0.0));
    const double b = std::sqrt(lattice_w2(lk, 3, m));
    const double what = lattice_w2(l2k, 3, 0.0);
    const double k0sq = k0 * k0;
    const double p = (a + b) / (2.0 * a * b * ((a + b) * (a + b) - k0sq));
    double out = 0.5 / b - (a * a + 4.0 * k0sq - what) * p;
    if (std::abs(k0) > 1e-12) {
        const double q = (0.5 / b - 0.5 / a + (b * b - a * a - k0sq) * p) / (2.0 * k0);
        out -= 4.0 * k0 * q;
    }
    return out;
}

void pole_scan(double k0, const Momentum& k, double m) {
    const double k0sq = k0 * k0;
    double min_disc = std::numeric_limits<double>::infinity();
    auto scan = [&](double lo, double hi, int n) {
        const double step = (hi - lo) / n;
        double l[3];
        for (int i = 0; i < n; ++i) {
            l[0] = lo + (i + 0.5) * step;
            for (int j = 0; j < n; ++j) {
                l[1] = lo + (j + 0.5) * step;
                for (int s = 0; s < n; ++s) {
                    l[2] = lo + (s + 0.5) * step;
                    const double lk[3] = {l[0] + k[0], l[1] + k[1], l[2] + k[2]};
                    const double ab =
                        std::sqrt(lattice_w2(l, 3, 0.0)) + std::sqrt(lattice_w2(lk, 3, m));
                    min_disc = std::min(min_disc, ab * ab - k0sq);
                }
            }
        }
    };
    scan(-kPi, kPi, 24);
    scan(-0.4, 0.4, 24);  // the threshold minimum sits near l = 0
    if (min_disc <= 1e-6 || min_disc <= 1e-3 * k0sq) {
        std::ostringstream msg;
        msg << "pair threshold reached: min (w_gamma + w_phi)^2 - k0^2 = " << min_disc
            << "; a principal-value prescription is not provided";
        throw PoleProximity(msg.str());
    }
}

}  // namespace

SelfEnergy scalar_self_energy(double k0, const Momentum& k, double m, double e,
                              const CubatureOptions& opt) {
    if (m < 0) throw ConfigError("mass must be >= 0");
    pole_scan(k0, k, m);

    SelfEnergy out;
    const double e2 = e * e;

    std::array<bool, 3> fold{};
    int unfolded = 0;
    for (int i = 0; i < 3; ++i) {
        fold[i] = k[i] == 0.0;
        if (!fold[i]) ++unfolded;
    }
    Integrand f1 = [k, k0, m](const double* l) { return sigma1_bracket(l, k, k0, m); };
    if (e2 > 0) {
        // the coupling is an exact overall factor: integrate at unit coupling
        // (abs_tol applies there) and scale afterwards
        out.sigma1 = integrate_scaled(f1, 3, folded_boxes(fold),
                                      2.0 * std::ldexp(kNorm, 3 - unfolded), opt);
        if (opt.cross_check) {
            Box cube;
            cube.lo = {-kPi, -kPi, -kPi, 0.0};
            cube.hi = {kPi, kPi, kPi, 0.0};
            attach_qmc(out.sigma1, f1, 3, cube, 2.0 * kNorm, opt);
        }
        out.sigma1.value *= e2;
        out.sigma1.abs_error_estimate *= e2;
        if (out.sigma1.qmc_std_error >= 0) {
            out.sigma1.qmc_value *= e2;
            out.sigma1.qmc_std_error *= e2;
        }

        LoopIntegralResult j0 = inverse_frequency_integral(0.0, opt);
        out.sigma2 = j0;
        out.sigma2.value *= -8.0 * e2;
        out.sigma2.abs_error_estimate *= 8.0 * e2;
        if (j0.qmc_std_error >= 0) {
            out.sigma2.qmc_value *= -8.0 * e2;
            out.sigma2.qmc_std_error *= 8.0 * e2;
        }
    }
    out.sigma1.parameters = {m, 3, "lattice"};
    out.sigma2.parameters = {0.0, 3, "lattice"};
    return out;
}

}  // namespace sqed
