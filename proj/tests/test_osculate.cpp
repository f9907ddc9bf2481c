#include <doctest.h>

#include <cmath>
#include <random>

#include "lunarbound/error.hpp"
#include "lunarbound/harness.hpp"
#include "lunarbound/osculate.hpp"

using namespace lunarbound;

namespace {

const MassParams kEq(1.0 / 3, 1.0 / 3, 1.0 / 3);

BoundSet appendix_bounds() { return run_bounds(appendix_config()).bs; }

// binary on a circle of radius r, outer body at rho moving with speed factor f of circular
JacobiState hierarchical(const MassParams& mp, double r, double rho, double f, double tilt) {
    JacobiState s;
    s.xi1 = {r, 0, 0};
    s.dxi1 = {0, std::sqrt(mp.mu() / r), 0};
    s.xi2 = {0, rho, 0};
    const double v = f * std::sqrt(mp.M() / rho);
    s.dxi2 = {-v * std::cos(tilt), 0.1 * v, v * std::sin(tilt)};
    return s;
}

}  // namespace

TEST_CASE("osculating elements are constant without the perturbation") {
    const MassParams mp(0.5, 0.3, 0.8);
    const JacobiState s = hierarchical(mp, 0.7, 6.0, 0.9, 0.3);
    IntegrateOptions o;
    o.zero_g = true;
    o.formulation = Formulation::Direct;
    const Trajectory tr = integrate(s, mp, 0.0, 40.0, o);
    REQUIRE(tr.status == TrajectoryStatus::Complete);
    for (Body b : {Body::Inner, Body::Outer}) {
        const KeplerElements e0 = osculating_orbit(s, mp, b).elements;
        for (double t : {3.3, 17.0, 40.0}) {
            const KeplerElements e = osculating_orbit(tr, t, b).elements;
            CHECK(std::fabs(e.h - e0.h) <= 1e-9 * std::fabs(e0.h));
            CHECK(norm(e.c_vec - e0.c_vec) <= 1e-9 * e0.c);
            CHECK(norm(e.e_vec - e0.e_vec) <= 1e-8);
        }
    }
}

TEST_CASE("osculating energies reproduce the Jacobi energy split") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    for (int k = 0; k < 20; ++k) {
        const MassParams mp(u(rng), u(rng), u(rng));
        const JacobiState s = hierarchical(mp, 0.3 * u(rng), 5.0 * u(rng) + 3.0, u(rng), u(rng));
        const EnergySplit es = energy_split(s, mp);
        CHECK(mp.alpha1() * osculating_orbit(s, mp, Body::Inner).elements.h ==
              doctest::Approx(es.H1).epsilon(1e-13));
        CHECK(mp.alpha2() * osculating_orbit(s, mp, Body::Outer).elements.h ==
              doctest::Approx(es.H2).epsilon(1e-13));
    }
}

TEST_CASE("osculating orbit rejects a zero radius") {
    JacobiState s;
    s.xi2 = {1, 0, 0};
    s.dxi2 = {0, 1, 0};
    CHECK_THROWS_AS(osculating_orbit(s, kEq, Body::Inner), Error);
}

TEST_CASE("sandwich parameters follow the bound set") {
    const BoundSet bs = appendix_bounds();
    const double I_bar = bs.deviation.R_bar;
    const SandwichParams sp = sandwich_params(bs, kEq, I_bar, 0.0);
    const double rho_bar = std::sqrt((I_bar - bs.alpha1_cr2(kEq)) / kEq.alpha2());
    CHECK(sp.rho_bar == doctest::Approx(rho_bar).epsilon(1e-14));
    CHECK(sp.epsilon * sp.rho_bar == doctest::Approx(1.0));
    CHECK(sp.k == doctest::Approx(2.0 * kEq.M()));
    CHECK(sp.omega == doctest::Approx(sp.k * std::pow(sp.epsilon, 3)));
    CHECK(sp.time_horizon == doctest::Approx(bs.deviation.B1 * std::pow(sp.epsilon, -1.5)));
    // k is clamped from above by the angular momentum bound
    const SandwichParams big = sandwich_params(bs, kEq, I_bar, 10.0 * bs.region.c_J2);
    CHECK(big.k == doctest::Approx(2.0 * kEq.M() + 3.0 * bs.region.c_J2 * bs.region.c_J2));
    CHECK_THROWS_AS(sandwich_params(bs, kEq, 0.5 * bs.alpha1_cr2(kEq), 0.0), Error);
}

TEST_CASE("eta bounds: small time limit and ordering of the chain") {
    const BoundSet bs = appendix_bounds();
    const SandwichParams sp = sandwich_params(bs, kEq, bs.deviation.R_bar, 0.2);
    // eta_bound ~ a eps^4 t^2 near 0, computed without cancellation
    for (double t : {1e-9, 1e-6, 1e-3}) CHECK(sp.eta_bound(t) / (sp.force_gap() * t * t) == doctest::Approx(1.0));
    CHECK(sp.eta_bound(0.0) == 0.0);
    double prev = 0.0;
    for (double t = 0.5; t <= sp.time_horizon; t *= 1.5) {
        const double e = sp.eta_bound(t);
        CHECK(e > prev);
        CHECK(e <= sp.eta_bound_exp(t));
        CHECK(sp.eta_bound(-t) == e);
        prev = e;
    }
    CHECK(sp.eta_bound_exp(sp.time_horizon) <= sp.deviation_bound() * (1 + 1e-12));
    CHECK(v1(sp, 2.0) == doctest::Approx(0.04 / 8 - kEq.M() / 4));
}

TEST_CASE("without the force gap both comparison solutions follow the osculating radius") {
    const BoundSet bs = appendix_bounds();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 10; ++k) {
        const double rho0 = 10 + 20 * u(rng);
        const double vr = 0.05 + 0.3 * u(rng);
        const double vt = 0.05 + 0.2 * u(rng);
        const TwoBodyState o{{rho0, 0, 0}, {vr, vt, 0}, kEq.M()};
        SandwichParams sp = sandwich_params(bs, kEq, bs.deviation.R_bar, rho0 * vt);
        sp.a = 0.0;
        for (int dir : {1, -1}) {
            const SandwichSolution sol = sandwich_ode(rho0, vr, sp, dir, 50.0);
            CHECK(sol.tau_end > 0.0);
            for (double f : {0.1, 0.5, 1.0}) {
                const double tau = f * sol.tau_end;
                const auto [rm, rp] = sol.at(tau);
                const double ref = norm(propagate(o, dir * tau).xi);
                CHECK(rm == doctest::Approx(ref).epsilon(1e-9));
                CHECK(rp == doctest::Approx(ref).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("comparison solutions stay ordered and within the eta bound") {
    const BoundSet bs = appendix_bounds();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 10; ++k) {
        const SandwichParams sp = sandwich_params(bs, kEq, bs.deviation.R_bar, 0.05 + 0.3 * u(rng));
        const double rho0 = sp.rho_bar * (1.5 + 3 * u(rng));
        const double vr = 0.4 * (u(rng) - 0.5);
        const SandwichSolution sol = sandwich_ode(rho0, vr, sp, 1, 20.0);
        const double stop = sol.tau_below(sp.rho_bar).value_or(sol.tau_end);
        for (int j = 0; j <= 50; ++j) {
            const double tau = stop * j / 50;
            const auto [rm, rp] = sol.at(tau);
            CHECK(rm <= rp * (1 + 1e-14));
            CHECK(rp - rm <= sp.eta_bound(tau) * (1 + 1e-8) + 1e-14);
        }
    }
}

TEST_CASE("an inbound comparison solution stops where monotonicity fails") {
    const BoundSet bs = appendix_bounds();
    const SandwichParams sp = sandwich_params(bs, kEq, bs.deviation.R_bar, 0.3);
    const SandwichSolution sol = sandwich_ode(12.0, -0.5, sp, 1, 1e3);
    REQUIRE(sol.tau_monotone_fail);
    CHECK(*sol.tau_monotone_fail == sol.tau_end);
    CHECK(sol.at(sol.tau_end).first == doctest::Approx(sp.rho_monotone()).epsilon(1e-9));
    CHECK_THROWS_AS(sol.at(2 * sol.tau_end), Error);
    const auto below = sol.tau_below(5.0);
    REQUIRE(below);
    CHECK(sol.at(*below).first == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("unperturbed motion has zero deviation and no c_t drift") {
    const BoundSet bs = appendix_bounds();
    const JacobiState s = hierarchical(kEq, 0.3, 12.0, 0.8, 0.2);
    IntegrateOptions o;
    o.zero_g = true;
    o.formulation = Formulation::Direct;
    const double I_bar = bs.deviation.R_bar;
    REQUIRE(moment_of_inertia(s, kEq) > I_bar);
    const Trajectory tr = integrate(s, kEq, 0.0, 60.0, o);
    const DeviationReport rep = verify_deviation(tr, bs, kEq, I_bar);
    CHECK(rep.applicable);
    CHECK(rep.violations == 0);
    CHECK(rep.nodes_region > 10);
    CHECK(rep.deviation_max <= 1e-8);
    CHECK(rep.ct.max_dc2 <= 1e-12);
    CHECK(rep.ordering_worst >= -1e-12);
    CHECK(rep.eta_ratio_max <= 1.0 + 1e-8);
}

TEST_CASE("c_t changes no faster than A eps^3 per unit time") {
    const BoundSet bs = appendix_bounds();
    const MassParams mp = kEq;
    const double I_bar = bs.deviation.R_bar;
    const JacobiState s = hierarchical(mp, 0.4, 14.0, 0.9, 0.6);
    IntegrateOptions o;
    o.regularize = true;
    o.ks_always = true;
    const Trajectory tr = integrate(s, mp, 0.0, 100.0, o);
    REQUIRE(tr.status == TrajectoryStatus::Complete);
    const SandwichParams sp = sandwich_params(bs, mp, I_bar, norm(cross(s.xi2, s.dxi2)));
    const CtDrift d = ct_drift(tr, 100.0, sp);
    CHECK(d.applicable);
    CHECK(d.within());
    CHECK(d.max_dc2 > 0.0);
    // a span beyond the horizon is flagged
    const CtDrift far = ct_drift(tr, 2 * sp.time_horizon, sp);
    CHECK_FALSE(far.applicable);
}

TEST_CASE("appendix samples satisfy the sandwich estimates") {
    ScenarioConfig cfg = appendix_config();
    cfg.sampler.count = 4;
    cfg.sampler.planar = false;
    const SandwichReport rep = run_sandwich_experiment(cfg, 2, true);
    CHECK(rep.errors == 0);
    CHECK(rep.violations == 0);
    for (const SandwichSample& s : rep.samples) {
        for (const DeviationReport* d : {&s.forward, &s.backward}) {
            CHECK(d->applicable);
            CHECK(d->region_window > 0.0);
            CHECK(d->ordering_window <= d->region_window);
            CHECK(d->eta_window <= d->ordering_window);
            CHECK(d->series.size() == static_cast<size_t>(d->nodes_region));
            CHECK(d->deviation_max < d->deviation_bound);
        }
    }
    const std::string csv = deviation_csv(rep.samples[0].forward);
    CHECK(csv.rfind("# lunar-bound deviation v1", 0) == 0);
}
