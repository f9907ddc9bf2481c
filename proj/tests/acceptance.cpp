// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "lunarbound/harness.hpp"

using namespace lunarbound;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// at least 4 so the determinism check compares different thread counts
int jobs() { return std::max(4, static_cast<int>(std::thread::hardware_concurrency())); }

// ---- 1
Outcome appendix_i_star() {
    const RunBounds rb = run_bounds(appendix_config());
    const double err = std::fabs(rb.bs.region.I_star_euler - 32.0 / 27.0);
    return {err <= 1e-9, fmt("I* = %.15g, |I* - 32/27| = %.2e (tol 1e-9)", rb.bs.region.I_star_euler, err)};
}

// ---- 2
Outcome ordering_grid() {
    const RunBounds rb = run_bounds(appendix_config());
    const bool app = rb.bs.I_star2 < rb.bs.marchal.I_M;
    // 5 log-spaced cells per mass over [0.1, 10], one draw per cell, far body 3
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    const double span = std::log(100.0) / 5;
    auto cell = [&](int c) { return std::exp(std::log(0.1) + (c + u(rng)) * span); };
    struct Case {
        MassParams mp;
        double H;
    };
    std::vector<Case> cases;
    for (double H : {-0.1, -0.5})
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
                for (int k = 0; k < 5; ++k) {
                    const double a = cell(i), b = cell(j), c = cell(k);
                    cases.push_back({MassParams(a, b, c), H});
                }
    struct Res {
        bool ok, istar_dominant, peri_ok;
    };
    std::vector<Res> res(cases.size());
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int t = 0; t < jobs(); ++t)
        pool.emplace_back([&] {
            for (size_t n; (n = next++) < cases.size();) {
                const MassParams& mp = cases[n].mp;
                const double H = cases[n].H;
                const double J = 0.5 * i_star_J_max(mp, H);
                const RegionConstants rc = region_constants(mp, H, J);
                const double I2 = i_star_star(rc, mp);
                const double I_M = marchal_comparison(rc, mp).I_M;
                const double peri = mp.alpha1() * rc.c_r * rc.c_r + mp.alpha2() * std::pow(rc.c_J2, 4) / (mp.M() * mp.M());
                res[n] = {I2 < I_M, rc.I_star > peri, peri < I_M};
            }
        });
    for (auto& th : pool) th.join();
    int ok = 0, fail_dom = 0, peri_ok = 0;
    for (const Res& r : res) {
        ok += r.ok;
        fail_dom += !r.ok && r.istar_dominant;
        peri_ok += r.peri_ok;
    }
    const int n = static_cast<int>(res.size());
    return {app && ok == n,
            fmt("appendix I** = %.6g < I_M = %.6g: %s; grid %d/%d with I** < I_M; failures with I** = I* > I_M: %d; "
                "pericenter term < I_M: %d/%d",
                rb.bs.I_star2, rb.bs.marchal.I_M, app ? "yes" : "no", ok, n, fail_dom, peri_ok, n)};
}

// ---- 3
Outcome radial_fall() {
    // inner pair of total mass 1 released at rest from r = 1, third body far and decoupled
    const MassParams mp(0.5, 0.5, 1e-3);
    JacobiState s;
    s.xi1 = {1, 0, 0};
    s.xi2 = {0, 1e3, 0};
    IntegrateOptions o;
    o.zero_g = true;
    const double tc = kPi / std::sqrt(8.0);
    const Trajectory tr = integrate_regularized(s, mp, 0.0, 1.5 * tc, o);
    double t_hit = NAN;
    for (const Event& e : tr.events)
        if (e.kind == EventKind::CollisionRegularized) {
            t_hit = e.t;
            break;
        }
    const double err = std::fabs(t_hit - tc);
    return {tr.status == TrajectoryStatus::Complete && err <= 1e-8,
            fmt("collision at t = %.15g, pi/sqrt(8) = %.15g, error %.2e (tol 1e-8)", t_hit, tc, err)};
}

// ---- 4
struct Arc {
    TwoBodyState start;
    Vec3 end;
    double r1, r2, d, h, dt;
};

// elliptic arc with transfer angle theta < pi, empty focus on the origin side of the
// chord; flight time from Kepler's equation
bool make_arc(double r1, double r2, double theta, double a, Arc& out) {
    const double kappa = 1.0;
    const Vec3 P1{r1, 0, 0}, P2{r2 * std::cos(theta), r2 * std::sin(theta), 0};
    const double d = norm(P2 - P1);
    const double R1 = 2 * a - r1, R2 = 2 * a - r2;
    if (R1 <= 0 || R2 <= 0 || R1 + R2 < d || std::fabs(R1 - R2) > d) return false;
    const Vec3 ex = (P2 - P1) / d;
    const double along = (R1 * R1 - R2 * R2 + d * d) / (2 * d);
    const double perp = std::sqrt(std::max(0.0, R1 * R1 - along * along));
    const Vec3 ey{-ex.y, ex.x, 0};
    const Vec3 base = P1 + along * ex;
    Vec3 F = base + perp * ey;
    if (dot(Vec3{} - P1, ey) * dot(F - P1, ey) < 0) F = base - perp * ey;
    const Vec3 evec = F / (-2 * a);
    const double e = norm(evec);
    if (e >= 1.0 || e < 1e-6) return false;
    const double c = std::sqrt(kappa * a * (1 - e * e));
    out.start = {P1, (kappa / c) * cross(Vec3{0, 0, 1}, P1 / r1 + evec), kappa};
    out.end = P2;
    out.r1 = r1;
    out.r2 = r2;
    out.d = d;
    out.h = -kappa / (2 * a);
    const double w = std::atan2(evec.y, evec.x);
    auto mean_anom = [&](const Vec3& P) {
        const double nu = std::atan2(P.y, P.x) - w;
        const double E = 2 * std::atan(std::sqrt((1 - e) / (1 + e)) * std::tan(nu / 2));
        return E - e * std::sin(E);
    };
    double dM = mean_anom(P2) - mean_anom(P1);
    while (dM < 0) dM += 2 * kPi;
    while (dM >= 2 * kPi) dM -= 2 * kPi;
    out.dt = dM / std::sqrt(kappa / (a * a * a));
    return true;
}

Outcome lambert() {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0, 1);
    double max_err = 0.0, max_miss = 0.0;
    int made = 0;
    while (made < 100) {
        const double a = 1 + 2 * u(rng);
        Arc arc;
        if (!make_arc(0.3 + 1.5 * u(rng), 0.3 + 1.5 * u(rng), 0.1 + 2.9 * u(rng), a, arc)) continue;
        // direct propagation lands on the second endpoint after dt
        max_miss = std::max(max_miss, norm(propagate(arc.start, arc.dt).xi - arc.end));
        max_err = std::max(max_err, std::fabs(lambert_time_of_flight(arc.r1, arc.r2, arc.d, arc.h, 1.0) - arc.dt));
        ++made;
    }
    double max_inv = 0.0;
    int pairs = 0;
    while (pairs < 100) {
        const double a = 1.5 + u(rng);
        const double r1 = 0.5 + u(rng), r2 = 0.5 + u(rng);
        Arc A;
        if (!make_arc(r1, r2, 0.3 + 2.5 * u(rng), a, A)) continue;
        const double delta = 0.2 * (u(rng) - 0.5) * std::min(r1, r2);
        const double q1 = r1 + delta, q2 = r2 - delta;
        const double cth = (q1 * q1 + q2 * q2 - A.d * A.d) / (2 * q1 * q2);
        if (std::fabs(cth) >= 1) continue;
        Arc B;
        if (!make_arc(q1, q2, std::acos(cth), a, B)) continue;
        max_inv = std::max(max_inv, std::fabs(A.dt - B.dt));
        ++pairs;
    }
    return {max_err <= 1e-8 && max_inv <= 1e-10 && max_miss <= 1e-9,
            fmt("100 arcs: max |tof - dt| = %.2e (tol 1e-8), propagation miss %.2e; 100 pairs: max |dt_A - dt_B| = "
                "%.2e (tol 1e-10)",
                max_err, max_miss, max_inv)};
}

// ---- 5
Outcome conservation() {
    ScenarioConfig cfg = appendix_config();
    cfg.sampler.planar = false;
    const RunBounds rb = run_bounds(cfg);
    const MassParams mp = cfg.run_masses();
    const SampleIC ic = sample_one(cfg, rb.bs, rb.bs.deviation.R_bar, 3 * rb.bs.deviation.R_bar, 0);
    IntegrateOptions o;
    o.rtol = o.atol = 1e-12;
    o.keep_dense = false;
    o.regularize = true;
    o.ks_always = true;
    const Trajectory ks = integrate(ic.state, mp, 0.0, 1e3, o);
    IntegrateOptions c = o;
    c.regularize = c.ks_always = false;
    const Trajectory cart = integrate(ic.state, mp, 0.0, 1e3, c);
    const double dH = ks.max_H_resid(), dJ = ks.max_J_resid();
    return {ks.status == TrajectoryStatus::Complete && dH <= 1e-9 && dJ <= 1e-9,
            fmt("KS binary: max rel dH = %.2e, dJ = %.2e (tol 1e-9); Cartesian binary, for information: dH = %.2e, "
                "dJ = %.2e",
                dH, dJ, cart.max_H_resid(), cart.max_J_resid())};
}

// ---- 6
Outcome validity() {
    const ScenarioConfig cfg = appendix_config();
    const RunBounds rb = run_bounds(cfg);
    const ValiditySweep s = validity_sweep(cfg.run_masses(), cfg.H, cfg.J_mag(), rb.bs.region, 1'000'000, 6, jobs());
    return {s.accepted == 1'000'000 && s.total_violations() == 0,
            fmt("%ld configurations (%ld redrawn): violations g %ld, g_xi2 %ld, r %ld, J2 %ld; worst ratios %.3f %.3f "
                "%.3f %.3f",
                s.accepted, s.rejected, s.violations_g, s.violations_g2, s.violations_r, s.violations_J2, s.worst_g,
                s.worst_g2, s.worst_r, s.worst_J2)};
}

// ---- 7
ScenarioConfig sandwich_config() {
    ScenarioConfig cfg = appendix_config();
    cfg.sampler.planar = false;
    cfg.sampler.count = 20;
    return cfg;
}

Outcome sandwich(std::string& json) {
    const SandwichReport rep = run_sandwich_experiment(sandwich_config(), jobs());
    json = sandwich_json(rep);
    int na = 0, nodes = 0;
    double min_region = INFINITY, min_eta = INFINITY;
    for (const SandwichSample& s : rep.samples)
        for (const DeviationReport* d : {&s.forward, &s.backward}) {
            na += !d->applicable;
            nodes += d->nodes_region;
            min_region = std::min(min_region, d->region_window);
            min_eta = std::min(min_eta, d->eta_window);
        }
    return {rep.clean() && na == 0,
            fmt("20 orbits, I(0) in [%.4g, %.4g]: violations %d, errors %d, not applicable %d; %d checked nodes; "
                "shortest region window %.3g, eta window %.3g",
                rep.I_bar, rep.I_bar_plus, rep.violations, rep.errors, na, nodes, min_region, min_eta)};
}

// ---- 8
ScenarioConfig theorem_config() {
    ScenarioConfig cfg = appendix_config();
    cfg.sampler.count = 100;
    return cfg;
}

Outcome theorem(std::string& json) {
    const TheoremReport rep = run_theorem_experiment(theorem_config(), jobs());
    json = theorem_json(rep);
    double t_max = 0.0;
    for (const TheoremSample& s : rep.samples) {
        const DirectionResult& d = s.forward.entered ? s.forward : s.backward;
        if (s.entered()) t_max = std::max(t_max, std::fabs(d.t_entry));
    }
    // negative control: a level below anything the motion can reach at J != 0
    ScenarioConfig neg = appendix_config();
    neg.level = 1e-3;
    neg.sampler.count = 20;
    const RunBounds rb = run_bounds(neg);
    neg.sampler.I_abs = Range{rb.bs.deviation.R_bar, 10 * rb.bs.deviation.R_bar};
    const TheoremReport ctl = run_theorem_experiment(neg, jobs());
    return {rep.entered == 100 && ctl.budget_exhausted >= 1,
            fmt("%d/100 entered I <= I0 = %.6g (latest entry |t| = %.3g, budget %.3g); negative control at 1e-3: "
                "%d/%d budget exhausted, %d errors",
                rep.entered, rep.level, t_max, rep.budget, ctl.budget_exhausted, static_cast<int>(ctl.samples.size()),
                ctl.errors)};
}

// ---- 9
Outcome determinism(const std::string& sandwich_ref, const std::string& theorem_ref) {
    int same = 0, runs = 0;
    for (int j : {1, 3}) {
        same += sandwich_json(run_sandwich_experiment(sandwich_config(), j)) == sandwich_ref;
        same += theorem_json(run_theorem_experiment(theorem_config(), j)) == theorem_ref;
        runs += 2;
    }
    return {same == runs, fmt("%d/%d reruns (jobs 1 and 3 against jobs %d) byte-identical; %zu + %zu bytes", same,
                              runs, jobs(), sandwich_ref.size(), theorem_ref.size())};
}

}  // namespace

int main() {
    int failed = 0;
    auto run = [&](int n, const char* name, const std::function<Outcome()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s  %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    };
    std::string sj, tj;
    run(1, "appendix I*", appendix_i_star);
    run(2, "I** < I_M", ordering_grid);
    run(3, "radial fall time", radial_fall);
    run(4, "Lambert time of flight", lambert);
    run(5, "conservation", conservation);
    run(6, "perturbation bounds", validity);
    run(7, "sandwich and deviation", [&] { return sandwich(sj); });
    run(8, "theorem experiment", [&] { return theorem(tj); });
    run(9, "determinism", [&] { return determinism(sj, tj); });
    std::printf("%d/9 criteria passed\n", 9 - failed);
    return failed ? 1 : 0;
}
