#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lunarbound/error.hpp"
#include "lunarbound/kepler.hpp"

using namespace lunarbound;

namespace {

constexpr double kPi = std::numbers::pi;

// Fixed-step RK4 on the two-body equation, used as an independent oracle.
TwoBodyState rk4_oracle(TwoBodyState s, double t, int steps) {
    const double h = t / steps;
    auto acc = [&](const Vec3& x) { const double r = norm(x); return (-s.kappa / (r * r * r)) * x; };
    for (int i = 0; i < steps; ++i) {
        const Vec3 x = s.xi, v = s.dxi;
        const Vec3 k1x = v, k1v = acc(x);
        const Vec3 k2x = v + 0.5 * h * k1v, k2v = acc(x + 0.5 * h * k1x);
        const Vec3 k3x = v + 0.5 * h * k2v, k3v = acc(x + 0.5 * h * k2x);
        const Vec3 k4x = v + h * k3v, k4v = acc(x + h * k3x);
        s.xi = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        s.dxi = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    return s;
}

struct Arc {
    TwoBodyState start;
    Vec3 end;
    double r1, r2, d, h, dt;
};

// Elliptic arc from P1 to P2 (transfer angle theta < pi) on the ellipse of
// semi-major axis a whose empty focus lies on the origin side of the chord.
// Flight time from Kepler's equation.
bool make_arc(double r1, double r2, double theta, double a, double kappa, Arc& out) {
    const Vec3 P1{r1, 0, 0}, P2{r2 * std::cos(theta), r2 * std::sin(theta), 0};
    const double d = norm(P2 - P1);
    const double R1 = 2 * a - r1, R2 = 2 * a - r2;
    if (R1 <= 0 || R2 <= 0 || R1 + R2 < d || std::fabs(R1 - R2) > d) return false;
    const Vec3 ex = (P2 - P1) / d;
    const double along = (R1 * R1 - R2 * R2 + d * d) / (2 * d);
    const double perp = std::sqrt(std::max(0.0, R1 * R1 - along * along));
    const Vec3 ey = Vec3{-ex.y, ex.x, 0};
    const Vec3 base = P1 + along * ex;
    Vec3 F = base + perp * ey;
    const Vec3 Fb = base - perp * ey;
    // origin side of the chord line
    if (dot(Vec3{} - P1, ey) * dot(F - P1, ey) < 0) F = Fb;
    const Vec3 evec = F / (-2 * a);
    const double e = norm(evec);
    if (e >= 1.0 || e < 1e-6) return false;
    const double p = a * (1 - e * e);
    const double c = std::sqrt(kappa * p);
    const Vec3 z{0, 0, 1};
    out.start.kappa = kappa;
    out.start.xi = P1;
    out.start.dxi = (kappa / c) * cross(z, P1 / r1 + evec);
    out.end = P2;
    out.r1 = r1;
    out.r2 = r2;
    out.d = d;
    out.h = -kappa / (2 * a);
    // Kepler equation oracle
    const double w = std::atan2(evec.y, evec.x);
    auto mean_anom = [&](const Vec3& P) {
        const double nu = std::atan2(P.y, P.x) - w;
        const double E = 2 * std::atan(std::sqrt((1 - e) / (1 + e)) * std::tan(nu / 2));
        return E - e * std::sin(E);
    };
    const double n = std::sqrt(kappa / (a * a * a));
    double dM = mean_anom(P2) - mean_anom(P1);
    while (dM < 0) dM += 2 * kPi;
    while (dM >= 2 * kPi) dM -= 2 * kPi;
    out.dt = dM / n;
    return true;
}

}  // namespace

TEST_CASE("elements of circular and radial orbits") {
    const double R = 2.5, kappa = 1.7;
    const KeplerElements el = elements_from_state({{R, 0, 0}, {0, std::sqrt(kappa / R), 0}, kappa});
    CHECK(el.e == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(el.q_peri == doctest::Approx(R).epsilon(1e-14));
    CHECK(el.h == doctest::Approx(-kappa / (2 * R)).epsilon(1e-14));
    CHECK(el.conic == ConicClass::Elliptic);

    const KeplerElements rad = elements_from_state({{1, 2, 3}, {-0.2, -0.4, -0.6}, kappa});
    CHECK(rad.conic == ConicClass::Radial);
    CHECK(rad.c <= 1e-13);
    CHECK(rad.q_peri == 0.0);
    CHECK(rad.radial_phase == -1);
    CHECK_THROWS_AS(elements_from_state({{0, 0, 0}, {1, 0, 0}, 1.0}), Error);
}

TEST_CASE("element identities on random states") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    for (int k = 0; k < 500; ++k) {
        TwoBodyState s{{n(rng), n(rng), n(rng)}, {0.6 * n(rng), 0.6 * n(rng), 0.6 * n(rng)}, 1.3};
        const KeplerElements el = elements_from_state(s);
        const double id = 1 + 2 * el.h * el.c * el.c / (s.kappa * s.kappa);
        CHECK(el.e * el.e - id == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
        CHECK(std::fabs(dot(el.e_vec, el.c_vec)) <= 1e-10 * (1 + el.c));
        if (el.conic != ConicClass::Radial)
            CHECK(el.q_peri == doctest::Approx(el.c * el.c / (s.kappa * (1 + el.e))).epsilon(1e-14));
    }
}

TEST_CASE("propagation: identity, period, conservation") {
    const double kappa = 2.0, R = 1.5;
    const TwoBodyState circ{{R, 0, 0}, {0, std::sqrt(kappa / R), 0}, kappa};
    const TwoBodyState same = propagate(circ, 0.0);
    CHECK(same.xi == circ.xi);
    const double T = 2 * kPi * std::sqrt(R * R * R / kappa);
    const TwoBodyState back = propagate(circ, T);
    CHECK(norm(back.xi - circ.xi) <= 1e-10 * R);
    CHECK(norm(back.dxi - circ.dxi) <= 1e-10 * norm(circ.dxi));

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int k = 0; k < 200; ++k) {
        TwoBodyState s{{u(rng) + 1.5, u(rng), u(rng)}, {0.4 * u(rng), 0.8 + 0.3 * u(rng), 0.3 * u(rng)}, kappa};
        const KeplerElements e0 = elements_from_state(s);
        if (e0.conic != ConicClass::Elliptic) continue;
        const double P = e0.period();
        const TwoBodyState p1 = propagate(s, P);
        CHECK(norm(p1.xi - s.xi) <= 1e-10 * norm(s.xi));
        const double t = 1e4 * P * (0.5 + 0.5 * u(rng));
        const KeplerElements e1 = elements_from_state(propagate(s, t));
        CHECK(std::fabs(e1.h - e0.h) <= 1e-12 * std::fabs(e0.h));
        CHECK(norm(e1.c_vec - e0.c_vec) <= 1e-12 * e0.c);
    }
}

TEST_CASE("propagation agrees with an RK4 oracle on all conic types") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1, 1);
    int counts[4] = {0, 0, 0, 0};
    for (int k = 0; k < 24; ++k) {
        const double speed = 0.6 + 0.9 * (k % 6) / 5.0;  // spans bound and unbound
        TwoBodyState s{{1.0 + 0.3 * u(rng), 0.4 * u(rng), 0.2 * u(rng)},
                       {0.3 * u(rng), speed, 0.2 * u(rng)}, 1.0};
        const double t = (k % 2 ? -1.0 : 1.0) * (1.0 + 2.0 * std::fabs(u(rng)));
        const TwoBodyState ref = rk4_oracle(s, t, 40000);
        const TwoBodyState got = propagate(s, t);
        CHECK(norm(got.xi - ref.xi) <= 1e-9 * (1 + norm(ref.xi)));
        CHECK(norm(got.dxi - ref.dxi) <= 1e-9 * (1 + norm(ref.dxi)));
        counts[static_cast<int>(elements_from_state(s).conic)]++;
    }
    CHECK(counts[static_cast<int>(ConicClass::Elliptic)] > 0);
    CHECK(counts[static_cast<int>(ConicClass::Hyperbolic)] > 0);
    // parabolic and radial states need exact construction
    const TwoBodyState para{{1, 0, 0}, {0.3, std::sqrt(2.0 - 0.09), 0}, 1.0};
    CHECK(elements_from_state(para).conic == ConicClass::Parabolic);
    const TwoBodyState pr = rk4_oracle(para, 2.0, 40000);
    CHECK(norm(propagate(para, 2.0).xi - pr.xi) <= 1e-9 * norm(pr.xi));
    const TwoBodyState rad{{2, 0, 0}, {0.5, 0, 0}, 1.0};
    const TwoBodyState rr = rk4_oracle(rad, 1.5, 40000);
    CHECK(norm(propagate(rad, 1.5).xi - rr.xi) <= 1e-9 * norm(rr.xi));
}

TEST_CASE("radial propagation into the center raises a collision") {
    const TwoBodyState s{{1, 0, 0}, {0, 0, 0}, 1.0};
    const double tc = kPi / std::sqrt(8.0);
    CHECK_NOTHROW(propagate(s, 0.99 * tc));
    try {
        propagate(s, 1.01 * tc);
        FAIL("expected collision");
    } catch (const CollisionError& e) {
        CHECK(e.t_collision() == doctest::Approx(tc).epsilon(1e-12));
    }
    CHECK_THROWS_AS(propagate(s, -1.01 * tc), CollisionError);
}

TEST_CASE("time to pericenter") {
    // at pericenter
    const TwoBodyState peri{{0.7, 0, 0}, {0, 1.5, 0}, 1.0};
    CHECK(time_to_pericenter(peri).t == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    // circular convention
    const TwoBodyState circ{{2, 0, 0}, {0, std::sqrt(0.5), 0}, 1.0};
    CHECK(time_to_pericenter(circ).t == 0.0);
    // fall from rest
    for (double rho0 : {0.5, 1.0, 3.0}) {
        const TwoBodyState rest{{0, rho0, 0}, {0, 0, 0}, 2.0};
        CHECK(time_to_pericenter(rest).t ==
              doctest::Approx(kPi * std::sqrt(rho0 * rho0 * rho0 / 16.0)).epsilon(1e-12));
        CHECK(time_to_pericenter(rest).t == doctest::Approx(collision_time_bound(rho0, 2.0)).epsilon(1e-10));
    }
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1, 1);
    int n = 0;
    for (int k = 0; k < 300; ++k) {
        TwoBodyState s{{1 + 0.5 * u(rng), 0.5 * u(rng), 0.3 * u(rng)},
                       {0.5 * u(rng), 0.9 + 0.3 * u(rng), 0.2 * u(rng)}, 1.0};
        const KeplerElements el = elements_from_state(s);
        if (el.conic != ConicClass::Elliptic || el.e < 1e-3) continue;
        const PericenterTime pc = time_to_pericenter(s);
        CHECK(pc.direction == (dot(s.xi, s.dxi) < 0 ? 1 : -1));
        const TwoBodyState at = propagate(s, pc.direction * pc.t);
        CHECK(norm(at.xi) == doctest::Approx(el.q_peri).epsilon(1e-10));
        CHECK(pc.t <= 0.5 * el.period() + 1e-12);
        ++n;
    }
    CHECK(n > 100);
}

TEST_CASE("collision time bound dominates inbound radial falls") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 100; ++k) {
        const double kappa = 0.5 + u(rng), rho0 = 0.2 + 3 * u(rng);
        const double h = (-1 + 2 * u(rng)) * kappa / rho0;
        const double v = std::sqrt(2 * (h + kappa / rho0));
        const TwoBodyState s{{rho0, 0, 0}, {-v, 0, 0}, kappa};
        CHECK(time_to_pericenter(s).t <= collision_time_bound(rho0, kappa) * (1 + 1e-12));
    }
    CHECK(collision_time_bound(1.0, 1.0) == doctest::Approx(1.110721).epsilon(1e-6));
}

TEST_CASE("lambert time of flight") {
    // rectilinear case: chord through the focus
    const double kappa = 1.0, h = -0.3;
    auto fall = [&](double x) {
        const TwoBodyState s{{x, 0, 0}, {-std::sqrt(2 * (h + kappa / x)), 0, 0}, kappa};
        return time_to_pericenter(s).t;
    };
    // same ray: the flight is a piece of a radial fall
    const double r1 = 1.2, r2 = 0.7;
    CHECK(lambert_time_of_flight(r1, r2, r1 - r2, h, kappa) == doctest::Approx(fall(r1) - fall(r2)).epsilon(1e-10));
    CHECK(lambert_time_of_flight(1.0, 1.0, 1e-12, h, kappa) < 1e-10);
    CHECK_THROWS_AS(lambert_time_of_flight(1.0, 2.0, 0.5, h, kappa), Error);

    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0, 1);
    int made = 0;
    while (made < 100) {
        const double a = 1 + 2 * u(rng);
        Arc arc;
        if (!make_arc(0.3 + 1.5 * u(rng), 0.3 + 1.5 * u(rng), 0.1 + 2.9 * u(rng), a, 1.0, arc)) continue;
        const TwoBodyState end = propagate(arc.start, arc.dt);
        REQUIRE(norm(end.xi - arc.end) <= 1e-9 * a);
        CHECK(lambert_time_of_flight(arc.r1, arc.r2, arc.d, arc.h, 1.0) == doctest::Approx(arc.dt).epsilon(1e-10));
        ++made;
    }
}

TEST_CASE("lambert invariance across equivalent configurations") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0, 1);
    int made = 0;
    while (made < 100) {
        const double a = 1.5 + u(rng);
        const double r1 = 0.5 + u(rng), r2 = 0.5 + u(rng), theta = 0.3 + 2.5 * u(rng);
        Arc A;
        if (!make_arc(r1, r2, theta, a, 1.0, A)) continue;
        // shift radius between the endpoints, keep r1 + r2 and the chord
        const double delta = 0.2 * (u(rng) - 0.5) * std::min(r1, r2);
        const double q1 = r1 + delta, q2 = r2 - delta;
        const double cth = (q1 * q1 + q2 * q2 - A.d * A.d) / (2 * q1 * q2);
        if (std::fabs(cth) >= 1) continue;
        Arc B;
        if (!make_arc(q1, q2, std::acos(cth), a, 1.0, B)) continue;
        CHECK(B.d == doctest::Approx(A.d).epsilon(1e-12));
        CHECK(B.dt == doctest::Approx(A.dt).epsilon(1e-10));
        ++made;
    }
}

TEST_CASE("pericenter distance bound") {
    CHECK(pericenter_distance_bound(0.0, 2.0) == 0.0);
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(-1, 1);
    const double cJ2 = 1.3, kappa = 2.0;
    int n = 0;
    while (n < 1000) {
        TwoBodyState s{{2 * u(rng), 2 * u(rng), 2 * u(rng)}, {u(rng), u(rng), u(rng)}, kappa};
        if (norm(s.xi) < 1e-3) continue;
        const KeplerElements el = elements_from_state(s);
        if (el.c > cJ2) continue;
        CHECK(el.q_peri <= pericenter_distance_bound(cJ2, kappa));
        ++n;
    }
}
