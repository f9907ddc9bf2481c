#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numbers>

#include "lunarbound/error.hpp"
#include "lunarbound/harness.hpp"
#include "parallel.hpp"

namespace lunarbound {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec3 normalized(const Vec3& v) { return v / norm(v); }

// random unit vector perpendicular to n (|n| > 0)
Vec3 perpendicular(SampleRng& rng, const Vec3& n) {
    const Vec3 nh = normalized(n);
    for (;;) {
        const Vec3 u = rng.unit_vector();
        const Vec3 p = u - dot(u, nh) * nh;
        if (norm(p) > 1e-3) return normalized(p);
    }
}

Vec3 in_plane(SampleRng& rng) {
    const double th = rng.uniform(0.0, kTwoPi);
    return {std::cos(th), std::sin(th), 0.0};
}

struct Attempt {
    bool ok = false;
    const char* why = "";
    SampleIC ic;
};

Attempt attempt(const ScenarioConfig& cfg, const MassParams& mp, const RegionConstants& rc, double I_lo, double I_hi,
                int index, int k) {
    Attempt out;
    SampleRng rng(cfg.sampler.seed, static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(k));
    const SamplerSpec& sp = cfg.sampler;
    const double I_target = rng.log_uniform(I_lo, I_hi);

    // inner Kepler orbit: pericenter state rotated into place, then advanced by a random phase
    const double a = rng.uniform(sp.a_frac.lo, sp.a_frac.hi) * rc.c_r;
    const double e = rng.uniform(sp.e.lo, sp.e.hi);
    Vec3 W, P;
    if (sp.planar) {
        W = {0.0, 0.0, rng.uniform() < 0.5 ? 1.0 : -1.0};
        P = in_plane(rng);
    } else {
        W = rng.unit_vector();
        P = perpendicular(rng, W);
    }
    const Vec3 Q = cross(W, P);
    const double q = a * (1.0 - e);
    TwoBodyState inner{q * P, std::sqrt(mp.mu() * (1.0 + e) / q) * Q, mp.mu()};
    const double period = kTwoPi * std::sqrt(a * a * a / mp.mu());
    inner = propagate(inner, rng.uniform() * period);
    const double r = norm(inner.xi);
    if (r > rc.c_r) {
        out.why = "r > c_r";
        return out;
    }

    const double r2 = (I_target - mp.alpha1() * r * r) / mp.alpha2();
    if (!(r2 > 0.0)) {
        out.why = "target I below the binary's own inertia";
        return out;
    }
    const double rho = std::sqrt(r2);
    if (r > rc.sigma * rho) {
        out.why = "r > sigma rho";
        return out;
    }

    // outer position perpendicular to the required outer angular momentum
    const Vec3 J1 = mp.alpha1() * cross(inner.xi, inner.dxi);
    const Vec3 L = (cfg.J - J1) / mp.alpha2();  // xi2 x dxi2
    const double Lm = norm(L);
    // planar runs put xi2 on the x axis: the radial part of xi2 x dxi2 then cancels
    // exactly, which keeps |dJ| at rounding level even for rho ~ 1e20
    Vec3 u2;
    if (sp.planar)
        u2 = {1.0, 0.0, 0.0};
    else if (Lm > 0.0)
        u2 = perpendicular(rng, L);
    else
        u2 = rng.unit_vector();
    const Vec3 xi2 = rho * u2;

    JacobiState s{inner.xi, inner.dxi, xi2, Vec3{}};
    const double H1 = energy_split(s, mp).H1;
    const double g = perturbation(s.xi1, s.xi2, mp);
    const double ke2 = cfg.H - H1 - g + mp.beta2() / rho;
    if (ke2 < 0.0) {
        out.why = "outer kinetic energy negative";
        return out;
    }
    const Vec3 vt = cross(L, xi2) / (rho * rho);
    double vr2 = 2.0 * ke2 / mp.alpha2() - norm2(vt);
    if (vr2 < 0.0) {
        out.why = "outer angular momentum exceeds outer speed";
        return out;
    }
    const double sgn = rng.uniform() < 0.5 ? -1.0 : 1.0;
    // the radial speed is the scalar unknown; a few secant-free corrections absorb rounding
    for (int it = 0; it < 4; ++it) {
        s.dxi2 = vt + sgn * std::sqrt(vr2) * u2;
        const double dH = cfg.H - energy_split(s, mp).H;
        if (dH == 0.0) break;
        vr2 = std::max(0.0, vr2 + 2.0 * dH / mp.alpha2());
    }
    s.dxi2 = vt + sgn * std::sqrt(vr2) * u2;

    const double H = energy_split(s, mp).H;
    const Vec3 J = angular_momentum(s, mp).J;
    const double Jt = norm(cfg.J);
    out.ic.index = index;
    out.ic.attempts = k + 1;
    out.ic.state = s;
    out.ic.I = moment_of_inertia(s, mp);
    out.ic.I_target = I_target;
    out.ic.dH = std::fabs(H - cfg.H) / std::fabs(cfg.H);
    out.ic.dJ = Jt > 0.0 ? norm(J - cfg.J) / Jt : norm(J);
    if (out.ic.dH > 1e-12 || out.ic.dJ > 1e-12) {
        out.why = "level residual above 1e-12";
        return out;
    }
    if (out.ic.I < I_lo || out.ic.I > I_hi) {
        out.why = "initial I outside the configured range";
        return out;
    }
    out.ok = true;
    return out;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SampleRng::SampleRng(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt) {
    std::uint64_t s = seed;
    std::uint64_t k = splitmix64(s);
    s = k ^ index;
    k = splitmix64(s);
    s = k ^ attempt;
    state_ = splitmix64(s);
}

double SampleRng::uniform() { return static_cast<double>(splitmix64(state_) >> 11) * 0x1.0p-53; }

double SampleRng::log_uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return std::exp(uniform(std::log(lo), std::log(hi)));
}

Vec3 SampleRng::unit_vector() {
    const double z = uniform(-1.0, 1.0);
    const double ph = uniform(0.0, kTwoPi);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(ph), s * std::sin(ph), z};
}

SampleIC sample_one(const ScenarioConfig& cfg, const BoundSet& bs, double I_lo, double I_hi, int index) {
    if (!cfg.sampler.seed_set) throw Error(ErrorCode::InvalidArgument, "sampler seed is mandatory");
    if (!(I_lo > 0.0 && I_lo <= I_hi)) throw Error(ErrorCode::InvalidArgument, "invalid initial-I range");
    if (cfg.sampler.planar && (cfg.J.x != 0.0 || cfg.J.y != 0.0))
        throw Error(ErrorCode::InvalidArgument, "planar sampling needs J along z");
    const MassParams mp = cfg.run_masses();
    std::map<std::string, int> why;
    for (int k = 0; k < cfg.sampler.max_retries; ++k) {
        Attempt a = attempt(cfg, mp, bs.region, I_lo, I_hi, index, k);
        if (a.ok) return a.ic;
        ++why[a.why];
    }
    auto worst = std::max_element(why.begin(), why.end(),
                                  [](const auto& x, const auto& y) { return x.second < y.second; });
    throw Error(ErrorCode::Infeasible, "sample " + std::to_string(index) + " infeasible after " +
                                           std::to_string(cfg.sampler.max_retries) +
                                           " draws; binding constraint: " + worst->first);
}

std::vector<SampleIC> sample_initial_conditions(const ScenarioConfig& cfg, const BoundSet& bs, double I_lo,
                                                double I_hi) {
    std::vector<SampleIC> out;
    out.reserve(static_cast<size_t>(cfg.sampler.count));
    for (int i = 0; i < cfg.sampler.count; ++i) out.push_back(sample_one(cfg, bs, I_lo, I_hi, i));
    return out;
}

ValiditySweep validity_sweep(const MassParams& mp, double H, double J, const RegionConstants& rc, long count,
                             std::uint64_t seed, int jobs) {
    const Vec3 Jv{0.0, 0.0, J};
    const double rho_lo = rc.rho_min;
    const double rho_hi = 100.0 * std::max(rc.rho_min, std::sqrt(rc.I_star / mp.alpha2()));
    struct Part {
        ValiditySweep v;
    };
    const int nparts = std::max(1, std::min<int>(jobs * 8, static_cast<int>(std::min<long>(count, 1 << 20))));
    std::vector<Part> parts(static_cast<size_t>(nparts));
    constexpr int kMaxDraws = 100000;

    detail::parallel_for(nparts, jobs, [&](int p) {
        ValiditySweep& v = parts[static_cast<size_t>(p)].v;
        const long lo = count * p / nparts, hi = count * (p + 1) / nparts;
        for (long i = lo; i < hi; ++i) {
            ++v.requested;
            bool done = false;
            for (int k = 0; k < kMaxDraws && !done; ++k) {
                SampleRng rng(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k));
                const double rho = rng.log_uniform(rho_lo, rho_hi);
                const double r = rng.log_uniform(1e-4 * rc.c_r, std::min(rc.sigma * rho, 2.0 * rc.c_r));
                const Vec3 xi1 = r * rng.unit_vector();
                const double H1 = rng.uniform(-mp.beta1() / r, H + mp.beta2() / rho);
                const double ke1 = H1 + mp.beta1() / r;
                if (ke1 < 0.0) {
                    ++v.rejected;
                    continue;
                }
                const Vec3 dxi1 = std::sqrt(2.0 * ke1 / mp.alpha1()) * rng.unit_vector();
                const Vec3 L = (Jv - mp.alpha1() * cross(xi1, dxi1)) / mp.alpha2();
                const double Lm = norm(L);
                const Vec3 u2 = Lm > 0.0 ? perpendicular(rng, L) : rng.unit_vector();
                const Vec3 xi2 = rho * u2;
                const double g = perturbation(xi1, xi2, mp);
                const double ke2 = H - H1 - g + mp.beta2() / rho;
                const double vt2 = Lm * Lm / (rho * rho);
                const double vr2 = 2.0 * ke2 / mp.alpha2() - vt2;
                const double I = mp.alpha1() * r * r + mp.alpha2() * rho * rho;
                if (ke2 < 0.0 || vr2 < 0.0 || !(I > rc.I_star)) {
                    ++v.rejected;
                    continue;
                }
                done = true;
                ++v.accepted;
                const Gradients gr = perturbation_gradients(xi1, xi2, mp);
                const double bg = rc.c_g * r * r / (rho * rho * rho);
                const double bg2 = rc.c_g2 * r * r / (rho * rho * rho * rho);
                const double q_g = std::fabs(g) / bg;
                const double q_g2 = norm(gr.g_xi2) / bg2;
                const double q_r = r / rc.c_r;
                const double q_J2 = Lm / rc.c_J2;  // |J2| / (alpha2 c_J2)
                v.worst_g = std::max(v.worst_g, q_g);
                v.worst_g2 = std::max(v.worst_g2, q_g2);
                v.worst_r = std::max(v.worst_r, q_r);
                v.worst_J2 = std::max(v.worst_J2, q_J2);
                v.violations_g += q_g > 1.0;
                v.violations_g2 += q_g2 > 1.0;
                v.violations_r += q_r > 1.0;
                v.violations_J2 += q_J2 > 1.0;
            }
        }
    });
    ValiditySweep total;
    for (const Part& p : parts) {
        total.requested += p.v.requested;
        total.accepted += p.v.accepted;
        total.rejected += p.v.rejected;
        total.violations_g += p.v.violations_g;
        total.violations_g2 += p.v.violations_g2;
        total.violations_r += p.v.violations_r;
        total.violations_J2 += p.v.violations_J2;
        total.worst_g = std::max(total.worst_g, p.v.worst_g);
        total.worst_g2 = std::max(total.worst_g2, p.v.worst_g2);
        total.worst_r = std::max(total.worst_r, p.v.worst_r);
        total.worst_J2 = std::max(total.worst_J2, p.v.worst_J2);
    }
    return total;
}

}  // namespace lunarbound
