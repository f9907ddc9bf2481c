#include "lunarbound/kepler.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "lunarbound/error.hpp"

namespace lunarbound {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSolveTol = 1e-13;
constexpr int kMaxIter = 60;

// x - sin x and sinh x - x, with series near zero.
double x_minus_sin(double x) {
    if (std::fabs(x) < 0.5) {
        const double x2 = x * x;
        double term = x * x2 / 6.0, sum = 0.0;
        for (int k = 1; k < 12; ++k) {
            sum += term;
            term *= -x2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
        }
        return sum;
    }
    return x - std::sin(x);
}

double sinh_minus_x(double x) {
    if (std::fabs(x) < 0.5) {
        const double x2 = x * x;
        double term = x * x2 / 6.0, sum = 0.0;
        for (int k = 1; k < 12; ++k) {
            sum += term;
            term *= x2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
        }
        return sum;
    }
    return std::sinh(x) - x;
}

struct Universal {
    double G0, G1, G2, G3;
};

Universal gfuncs(double beta, double s) {
    double c[4];
    stumpff(beta * s * s, c);
    const double s2 = s * s;
    return {c[0], s * c[1], s2 * c[2], s2 * s * c[3]};
}

// Inbound radial fall time from distance x to the center at energy h.
double radial_fall_time(double x, double h, double kappa) {
    if (x <= 0.0) return 0.0;
    if (h == 0.0) return std::sqrt(2.0 / kappa) * std::pow(x, 1.5) / 3.0;
    if (h < 0.0) {
        const double a = kappa / (-2.0 * h);
        const double ratio = x / (2.0 * a);
        if (ratio > 1.0 + 1e-12)
            throw Error(ErrorCode::Domain, "endpoint beyond the apocenter distance for this energy");
        const double alpha = 2.0 * std::asin(std::sqrt(std::min(ratio, 1.0)));
        return std::sqrt(a * a * a / kappa) * x_minus_sin(alpha);
    }
    const double a = kappa / (2.0 * h);
    const double alpha = 2.0 * std::asinh(std::sqrt(x / (2.0 * a)));
    return std::sqrt(a * a * a / kappa) * sinh_minus_x(alpha);
}

double radial_tolerance(double r, double v) { return 1e-13 * r * v; }

}  // namespace

const char* conic_name(ConicClass c) {
    switch (c) {
        case ConicClass::Elliptic: return "elliptic";
        case ConicClass::Parabolic: return "parabolic";
        case ConicClass::Hyperbolic: return "hyperbolic";
        case ConicClass::Radial: return "radial";
    }
    return "unknown";
}

void stumpff(double z, double c[4]) {
    if (std::fabs(z) < 1.0) {
        // c_k(z) = sum_j (-z)^j / (k + 2j)!
        for (int k = 0; k < 4; ++k) {
            double fact = 1.0;
            for (int i = 2; i <= k; ++i) fact *= i;
            double term = 1.0 / fact, sum = 0.0;
            for (int j = 0; j < 20; ++j) {
                sum += term;
                term *= -z / ((k + 2.0 * j + 1.0) * (k + 2.0 * j + 2.0));
            }
            c[k] = sum;
        }
        return;
    }
    if (z > 0.0) {
        const double w = std::sqrt(z);
        const double sh = std::sin(0.5 * w);
        c[0] = std::cos(w);
        c[1] = std::sin(w) / w;
        c[2] = 2.0 * sh * sh / z;
        c[3] = x_minus_sin(w) / (z * w);
    } else {
        const double w = std::sqrt(-z);
        const double sh = std::sinh(0.5 * w);
        c[0] = std::cosh(w);
        c[1] = std::sinh(w) / w;
        c[2] = 2.0 * sh * sh / (-z);
        c[3] = sinh_minus_x(w) / (-z * w);
    }
}

double KeplerElements::a() const {
    if (conic == ConicClass::Elliptic || (conic == ConicClass::Radial && h < 0.0))
        return kappa / (-2.0 * h);
    return INFINITY;
}

double KeplerElements::period() const {
    const double sma = a();
    if (!std::isfinite(sma)) return INFINITY;
    return 2.0 * kPi * std::sqrt(sma * sma * sma / kappa);
}

KeplerElements elements_from_state(const TwoBodyState& s) {
    const double r = norm(s.xi);
    if (!(r > 0.0)) throw Error(ErrorCode::Singular, "zero-radius two-body state");
    if (!(s.kappa > 0.0)) throw Error(ErrorCode::InvalidArgument, "gravitational parameter must be positive");
    KeplerElements el;
    el.kappa = s.kappa;
    const double v2 = norm2(s.dxi);
    el.h = 0.5 * v2 - s.kappa / r;
    el.c_vec = cross(s.xi, s.dxi);
    el.c = norm(el.c_vec);
    el.e_vec = cross(s.dxi, el.c_vec) / s.kappa - s.xi / r;
    el.e = norm(el.e_vec);
    const double sig = dot(s.xi, s.dxi);
    el.radial_phase = sig < 0.0 ? -1 : (sig > 0.0 ? 1 : 0);
    const double energy_scale = s.kappa / r + 0.5 * v2;
    if (el.c <= radial_tolerance(r, std::sqrt(v2))) {
        el.conic = ConicClass::Radial;
        el.q_peri = 0.0;
    } else {
        if (el.h < -1e-14 * energy_scale) el.conic = ConicClass::Elliptic;
        else if (el.h > 1e-14 * energy_scale) el.conic = ConicClass::Hyperbolic;
        else el.conic = ConicClass::Parabolic;
        el.q_peri = el.c * el.c / (s.kappa * (1.0 + el.e));
    }
    return el;
}

PericenterTime time_to_pericenter(const TwoBodyState& s) {
    const KeplerElements el = elements_from_state(s);
    PericenterTime out;
    if (el.conic != ConicClass::Radial && el.e <= 1e-12) return out;
    const double r = norm(s.xi);
    const double kappa = s.kappa;
    const double beta = -2.0 * el.h;
    const double sigma = dot(s.xi, s.dxi);
    const double ke = kappa * el.e;
    const double G1 = sigma / ke;
    double sv;
    if (beta > 0.0) {
        const double sb = std::sqrt(beta);
        const double G0 = (kappa - beta * r) / ke;
        sv = std::atan2(sb * G1, G0) / sb;
    } else if (beta < 0.0) {
        const double sb = std::sqrt(-beta);
        sv = std::asinh(sb * G1) / sb;
    } else {
        sv = G1;
    }
    const Universal G = gfuncs(beta, sv);
    const double t = el.q_peri * G.G1 + kappa * G.G3;
    out.t = std::fabs(t);
    out.direction = sv < 0.0 ? 1 : -1;
    if (sv == 0.0) out.t = 0.0;
    return out;
}

TwoBodyState propagate(const TwoBodyState& s, double t) {
    if (t == 0.0) return s;
    const double r0 = norm(s.xi);
    if (!(r0 > 0.0)) throw Error(ErrorCode::Singular, "zero-radius two-body state");
    if (!std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "non-finite propagation time");
    const double kappa = s.kappa;
    const KeplerElements el = elements_from_state(s);
    const double beta = -2.0 * el.h;

    if (el.conic == ConicClass::Radial) {
        const PericenterTime pc = time_to_pericenter(s);
        const double T = el.period();
        double t_fwd = INFINITY, t_bwd = INFINITY;
        if (pc.direction > 0) {
            t_fwd = pc.t;
            if (std::isfinite(T)) t_bwd = T - pc.t;
        } else {
            t_bwd = pc.t;
            if (std::isfinite(T)) t_fwd = T - pc.t;
        }
        if (t > 0.0 && t >= t_fwd)
            throw CollisionError(t_fwd, "radial orbit reaches the center at t = " + std::to_string(t_fwd));
        if (t < 0.0 && -t >= t_bwd)
            throw CollisionError(-t_bwd, "radial orbit reaches the center at t = " + std::to_string(-t_bwd));
    }

    const double sigma0 = dot(s.xi, s.dxi);
    double tt = t;
    double lo, hi;
    if (beta > 0.0) {
        const double T = 2.0 * kPi * kappa / (beta * std::sqrt(beta));
        if (std::fabs(tt) > 0.5 * T && el.conic != ConicClass::Radial) tt = std::remainder(tt, T);
        const double span = 2.0 * kPi / std::sqrt(beta);
        lo = tt >= 0.0 ? 0.0 : -span;
        hi = tt >= 0.0 ? span : 0.0;
    } else {
        lo = hi = 0.0;
        double step = std::fabs(tt) / r0;
        if (!(step > 0.0)) step = 1e-300;
        for (int i = 0; i < 400; ++i) {
            const double trial = tt > 0.0 ? step : -step;
            const Universal G = gfuncs(beta, trial);
            const double F = r0 * G.G1 + sigma0 * G.G2 + kappa * G.G3 - tt;
            if ((tt > 0.0 && F >= 0.0) || (tt < 0.0 && F <= 0.0)) {
                (tt > 0.0 ? hi : lo) = trial;
                break;
            }
            (tt > 0.0 ? lo : hi) = trial;
            step *= 2.0;
        }
    }

    double sv = 0.5 * (lo + hi);
    {
        // Initial guess from the circular-speed estimate when it falls in the bracket.
        const double guess = tt / r0;
        if (guess > lo && guess < hi) sv = guess;
    }
    for (int it = 0; it < kMaxIter; ++it) {
        const Universal G = gfuncs(beta, sv);
        const double F = r0 * G.G1 + sigma0 * G.G2 + kappa * G.G3 - tt;
        const double dF = r0 * G.G0 + sigma0 * G.G1 + kappa * G.G2;
        if (F > 0.0) hi = sv;
        else if (F < 0.0) lo = sv;
        else break;
        double next = dF > 0.0 ? sv - F / dF : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double ds = std::fabs(next - sv);
        sv = next;
        if (ds <= kSolveTol * std::max(std::fabs(sv), 1e-300) || hi - lo <= kSolveTol * std::fabs(sv)) break;
    }

    const Universal G = gfuncs(beta, sv);
    const double r = r0 * G.G0 + sigma0 * G.G1 + kappa * G.G2;
    const double f = 1.0 - kappa * G.G2 / r0;
    const double g = r0 * G.G1 + sigma0 * G.G2;
    const double fd = -kappa * G.G1 / (r * r0);
    const double gd = 1.0 - kappa * G.G2 / r;
    TwoBodyState out;
    out.kappa = kappa;
    out.xi = f * s.xi + g * s.dxi;
    out.dxi = fd * s.xi + gd * s.dxi;
    return out;
}

double collision_time_bound(double rho0, double kappa) {
    if (!(rho0 > 0.0) || !(kappa > 0.0))
        throw Error(ErrorCode::InvalidArgument, "collision_time_bound needs rho0 > 0 and kappa > 0");
    return kPi * std::pow(rho0, 1.5) / std::sqrt(8.0 * kappa);
}

double lambert_time_of_flight(double r1, double r2, double d, double h, double kappa) {
    if (!(r1 > 0.0) || !(r2 > 0.0) || !(d >= 0.0) || !(kappa > 0.0))
        throw Error(ErrorCode::Domain, "lambert: radii and kappa must be positive, chord non-negative");
    const double slack = 1e-12 * (r1 + r2);
    if (d < std::fabs(r1 - r2) - slack || d > r1 + r2 + slack)
        throw Error(ErrorCode::Domain, "lambert: chord violates the triangle inequality");
    if (h < 0.0) {
        const double apo = kappa / (-h);
        if (r1 > apo * (1.0 + 1e-12) || r2 > apo * (1.0 + 1e-12))
            throw Error(ErrorCode::Domain, "lambert: endpoint unreachable at this energy");
    }
    const double s = 0.5 * (r1 + r2 + d);
    const double sd = std::max(0.0, 0.5 * (r1 + r2 - d));
    return radial_fall_time(s, h, kappa) - radial_fall_time(sd, h, kappa);
}

double pericenter_distance_bound(double c_J2, double kappa) {
    if (!(c_J2 >= 0.0) || !(kappa > 0.0))
        throw Error(ErrorCode::InvalidArgument, "pericenter_distance_bound needs c_J2 >= 0 and kappa > 0");
    return c_J2 * c_J2 / kappa;
}

}  // namespace lunarbound
