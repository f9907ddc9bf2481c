#include "lunarbound/core.hpp"

#include <cmath>
#include <string>

namespace lunarbound {

namespace {

// Below this r/rho the closed forms lose digits to cancellation and the
// exterior multipole series is used instead.
constexpr double kSeriesRatio = 1e-2;
constexpr int kMaxOrder = 40;

void check_finite(const Vec3& v, const char* what) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
        throw Error(ErrorCode::InvalidArgument, std::string("non-finite ") + what);
}

struct Geometry {
    Vec3 d1, d2;
    double rho, s1, s2;
};

Geometry geometry(const Vec3& xi1, const Vec3& xi2, const MassParams& mp) {
    Geometry g;
    g.rho = norm(xi2);
    g.d1 = xi2 + mp.mu2() * xi1;
    g.d2 = xi2 - mp.mu1() * xi1;
    g.s1 = norm(g.d1);
    g.s2 = norm(g.d2);
    if (g.rho == 0.0 || g.s1 == 0.0 || g.s2 == 0.0)
        throw Error(ErrorCode::Singular, "singular configuration: body 3 coincides with the binary");
    return g;
}

// k_n = m1 (-mu2)^n + m2 mu1^n; k_1 = 0.
struct Series {
    double g = 0.0;
    Vec3 g_xi1, g_xi2;
};

Series multipole(const Vec3& xi1, const Vec3& xi2, const MassParams& mp, bool want_grad) {
    Series out;
    const double r = norm(xi1);
    const double rho = norm(xi2);
    if (r == 0.0) return out;
    const Vec3 u1 = xi1 / r;
    const Vec3 u2 = xi2 / rho;
    const double c = dot(u1, u2);
    const double x = r / rho;
    const double m1 = mp.m1(), m2 = mp.m2(), m3 = mp.m3();

    double p_prev = 1.0, p = c;      // P_{n-2}, P_{n-1}
    double dp_prev = 0.0, dp = 1.0;  // P'_{n-2}, P'_{n-1}
    double pw1 = -mp.mu2(), pw2 = mp.mu1();  // (-mu2)^1, mu1^1
    double xn = x;
    double sum_g = 0.0;
    Vec3 s1, s2;
    double scale = 0.0;
    for (int n = 2; n <= kMaxOrder; ++n) {
        const double pn = ((2.0 * n - 1.0) * c * p - (n - 1.0) * p_prev) / n;
        const double dpn = dp_prev + (2.0 * n - 1.0) * p;
        p_prev = p; p = pn;
        dp_prev = dp; dp = dpn;
        pw1 *= -mp.mu2();
        pw2 *= mp.mu1();
        const double xn_1 = xn;  // x^{n-1}
        xn *= x;
        const double kn = m1 * pw1 + m2 * pw2;
        sum_g += kn * xn * pn;
        if (want_grad) {
            s2 += (kn * xn) * (pn * -(n + 1.0) * u2 + dpn * (u1 - c * u2));
            s1 += (kn * xn_1) * (n * pn * u1 + dpn * (u2 - c * u1));
        }
        const double bound = (std::fabs(m1 * pw1) + std::fabs(m2 * pw2)) * xn_1 * (n + 1.0) * (n + 1.0);
        if (n == 2) scale = bound;
        if (bound <= 1e-18 * scale) break;
    }
    out.g = -m3 * sum_g / rho;
    const double inv_rho2 = 1.0 / (rho * rho);
    out.g_xi1 = (-m3 * inv_rho2) * s1;
    out.g_xi2 = (-m3 * inv_rho2) * s2;
    return out;
}

}  // namespace

MassParams::MassParams(double m1, double m2, double m3) : m_{m1, m2, m3} {
    for (double m : m_) {
        if (!(m > 0.0) || !std::isfinite(m))
            throw Error(ErrorCode::InvalidArgument, "masses must be finite and strictly positive");
    }
}

MassParams MassParams::relabeled(int far) const {
    switch (far) {
        case 1: return {m_[1], m_[2], m_[0]};
        case 2: return {m_[0], m_[2], m_[1]};
        case 3: return *this;
        default: throw Error(ErrorCode::InvalidArgument, "far_body must be 1, 2 or 3");
    }
}

JacobiState to_jacobi(const CartesianState& s, const MassParams& mp) {
    Vec3 com, mom;
    double qscale = 0.0, vscale = 0.0;
    for (int i = 0; i < 3; ++i) {
        check_finite(s.q[i], "position");
        check_finite(s.v[i], "velocity");
        com += mp.m(i) * s.q[i];
        mom += mp.m(i) * s.v[i];
        qscale += mp.m(i) * norm(s.q[i]);
        vscale += mp.m(i) * norm(s.v[i]);
    }
    if (norm(com) > 1e-9 * qscale)
        throw Error(ErrorCode::InvalidArgument, "center of mass is not at the origin");
    if (norm(mom) > 1e-9 * vscale)
        throw Error(ErrorCode::InvalidArgument, "total linear momentum is not zero");

    const double mu = mp.mu();
    JacobiState j;
    j.xi1 = s.q[1] - s.q[0];
    j.xi2 = s.q[2] - (mp.m1() * s.q[0] + mp.m2() * s.q[1]) / mu;
    j.dxi1 = s.v[1] - s.v[0];
    j.dxi2 = s.v[2] - (mp.m1() * s.v[0] + mp.m2() * s.v[1]) / mu;
    return j;
}

CartesianState from_jacobi(const JacobiState& s, const MassParams& mp) {
    const double f3 = mp.mu() / mp.M();
    const double fc = -mp.m3() / mp.M();
    CartesianState c;
    const Vec3 c12 = fc * s.xi2;
    const Vec3 w12 = fc * s.dxi2;
    c.q[0] = c12 - mp.mu2() * s.xi1;
    c.q[1] = c12 + mp.mu1() * s.xi1;
    c.q[2] = f3 * s.xi2;
    c.v[0] = w12 - mp.mu2() * s.dxi1;
    c.v[1] = w12 + mp.mu1() * s.dxi1;
    c.v[2] = f3 * s.dxi2;
    return c;
}

double moment_of_inertia(const JacobiState& s, const MassParams& mp) {
    return mp.alpha1() * norm2(s.xi1) + mp.alpha2() * norm2(s.xi2);
}

double moment_of_inertia(const CartesianState& s, const MassParams& mp) {
    double I = 0.0;
    for (int i = 0; i < 3; ++i) I += mp.m(i) * norm2(s.q[i]);
    return I;
}

AngularMomentum angular_momentum(const JacobiState& s, const MassParams& mp) {
    AngularMomentum a;
    a.J1 = mp.alpha1() * cross(s.xi1, s.dxi1);
    a.J2 = mp.alpha2() * cross(s.xi2, s.dxi2);
    a.J = a.J1 + a.J2;
    return a;
}

Vec3 angular_momentum(const CartesianState& s, const MassParams& mp) {
    Vec3 J;
    for (int i = 0; i < 3; ++i) J += mp.m(i) * cross(s.q[i], s.v[i]);
    return J;
}

double cartesian_energy(const CartesianState& s, const MassParams& mp) {
    double T = 0.0;
    for (int i = 0; i < 3; ++i) T += 0.5 * mp.m(i) * norm2(s.v[i]);
    double U = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double d = norm(s.q[i] - s.q[j]);
            if (d == 0.0) throw Error(ErrorCode::Singular, "collision in Cartesian state");
            U += mp.m(i) * mp.m(j) / d;
        }
    return T - U;
}

double perturbation(const Vec3& xi1, const Vec3& xi2, const MassParams& mp) {
    const Geometry geo = geometry(xi1, xi2, mp);
    if (norm(xi1) < kSeriesRatio * geo.rho) return multipole(xi1, xi2, mp, false).g;
    return mp.beta2() / geo.rho - mp.m1() * mp.m3() / geo.s1 - mp.m2() * mp.m3() / geo.s2;
}

EnergySplit energy_split(const JacobiState& s, const MassParams& mp) {
    const double r = s.r();
    if (r == 0.0) throw Error(ErrorCode::Singular, "singular configuration: binary collision");
    EnergySplit e;
    e.H1 = 0.5 * mp.alpha1() * norm2(s.dxi1) - mp.beta1() / r;
    e.H2 = 0.5 * mp.alpha2() * norm2(s.dxi2) - mp.beta2() / s.rho();
    e.g = perturbation(s.xi1, s.xi2, mp);
    e.H = e.H1 + e.H2 + e.g;
    return e;
}

Gradients perturbation_gradients(const Vec3& xi1, const Vec3& xi2, const MassParams& mp) {
    const Geometry geo = geometry(xi1, xi2, mp);
    Gradients gr;
    if (norm(xi1) < kSeriesRatio * geo.rho) {
        const Series s = multipole(xi1, xi2, mp, true);
        gr.g_xi1 = s.g_xi1;
        gr.g_xi2 = s.g_xi2;
        return gr;
    }
    const double k1 = mp.m1() * mp.m3() / (geo.s1 * geo.s1 * geo.s1);
    const double k2 = mp.m2() * mp.m3() / (geo.s2 * geo.s2 * geo.s2);
    const double k0 = mp.beta2() / (geo.rho * geo.rho * geo.rho);
    gr.g_xi2 = k1 * geo.d1 + k2 * geo.d2 - k0 * xi2;
    gr.g_xi1 = (k1 * mp.mu2()) * geo.d1 - (k2 * mp.mu1()) * geo.d2;
    return gr;
}

JacobiRates vector_field(const JacobiState& s, const MassParams& mp, bool zero_g) {
    const double r = s.r();
    const double rho = s.rho();
    if (r == 0.0 || rho == 0.0) throw Error(ErrorCode::Singular, "singular configuration in vector field");
    JacobiRates d;
    d.dxi1 = s.dxi1;
    d.dxi2 = s.dxi2;
    d.ddxi1 = (-mp.mu() / (r * r * r)) * s.xi1;
    d.ddxi2 = (-mp.M() / (rho * rho * rho)) * s.xi2;
    if (!zero_g) {
        const Gradients gr = perturbation_gradients(s.xi1, s.xi2, mp);
        d.ddxi1 -= gr.g_xi1 / mp.alpha1();
        d.ddxi2 -= gr.g_xi2 / mp.alpha2();
    }
    return d;
}

}  // namespace lunarbound
