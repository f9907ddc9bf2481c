#include "lunarbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "lunarbound/error.hpp"

namespace lunarbound {

namespace {

constexpr double kPi = std::numbers::pi;

void require_negative_energy(double H) {
    if (!(H < 0.0) || !std::isfinite(H))
        throw Error(ErrorCode::InvalidArgument, "bounds require H < 0 (bounded three-body energy)");
}

void require_J(double J) {
    if (!(J >= 0.0) || !std::isfinite(J))
        throw Error(ErrorCode::InvalidArgument, "|J| must be finite and non-negative");
}

// Euler's quintic for the gap ratio z with body b between a and c.
double quintic(double ma, double mb, double mc, double z) {
    return ((((((ma + mb) * z + (3 * ma + 2 * mb)) * z + (3 * ma + mb)) * z - (mb + 3 * mc)) * z -
             (2 * mb + 3 * mc)) *
                z -
            (mb + mc));
}

}  // namespace

EulerConfig euler_configuration(const MassParams& mp, int middle) {
    if (middle < 1 || middle > 3) throw Error(ErrorCode::InvalidArgument, "middle body must be 1, 2 or 3");
    // outer bodies in increasing label order
    int ia = 0, ic = 0;
    switch (middle) {
        case 1: ia = 2; ic = 3; break;
        case 2: ia = 1; ic = 3; break;
        default: ia = 1; ic = 2; break;
    }
    const double ma = mp.m(ia - 1), mb = mp.m(middle - 1), mc = mp.m(ic - 1);
    auto P = [&](double z) { return quintic(ma, mb, mc, z); };
    double hi = 1.0;
    while (P(hi) <= 0.0) hi *= 2.0;
    std::uintmax_t iters = 200;
    const auto br = boost::math::tools::toms748_solve(P, 0.0, hi, P(0.0), P(hi),
                                                      boost::math::tools::eps_tolerance<double>(52), iters);
    if (iters >= 200) throw Error(ErrorCode::Convergence, "Euler quintic did not converge");
    EulerConfig ec;
    ec.middle = middle;
    ec.z = 0.5 * (br.first + br.second);
    ec.residual = P(ec.z);

    double pos[3];
    pos[ia - 1] = 0.0;
    pos[middle - 1] = 1.0;
    pos[ic - 1] = 1.0 + ec.z;
    double com = 0.0;
    for (int i = 0; i < 3; ++i) com += mp.m(i) * pos[i];
    com /= mp.M();
    double I = 0.0;
    for (int i = 0; i < 3; ++i) {
        pos[i] -= com;
        I += mp.m(i) * pos[i] * pos[i];
    }
    const double s = 1.0 / std::sqrt(I);
    for (int i = 0; i < 3; ++i) ec.x[i] = pos[i] * s;
    ec.U_hat = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) ec.U_hat += mp.m(i) * mp.m(j) / std::fabs(ec.x[i] - ec.x[j]);
    return ec;
}

double euler_U_max(const MassParams& mp) {
    double u = 0.0;
    for (int k = 1; k <= 3; ++k) u = std::max(u, euler_configuration(mp, k).U_hat);
    return u;
}

double i_star_J_max(const MassParams& mp, double H) {
    require_negative_energy(H);
    return euler_U_max(mp) / std::sqrt(2.0 * std::fabs(H));
}

double i_star(const MassParams& mp, double H, double J) {
    require_negative_energy(H);
    require_J(J);
    const double U = euler_U_max(mp);
    const double aH = std::fabs(H);
    const double disc = U * U - 2.0 * aH * J * J;
    if (disc < 0.0)
        throw Error(ErrorCode::NoSplitting, "no splitting at these levels: U_E^2 < 2|H|J^2");
    const double x = (U + std::sqrt(disc)) / (2.0 * aH);
    return x * x;
}

RegionConstants region_constants(const MassParams& mp, double H, double J, double sigma) {
    require_negative_energy(H);
    require_J(J);
    if (!(sigma > 0.0 && sigma <= 0.5)) throw Error(ErrorCode::InvalidArgument, "sigma must lie in (0, 1/2]");
    const double aH = std::fabs(H);
    const double m1 = mp.m1(), m2 = mp.m2(), m3 = mp.m3();
    const double mu1 = mp.mu1(), mu2 = mp.mu2();
    const double a1 = mp.alpha1(), a2 = mp.alpha2(), b1 = mp.beta1(), b2 = mp.beta2();

    RegionConstants rc;
    rc.sigma = sigma;
    rc.c_r = 2.0 * b1 / aH;
    rc.c_J2 = (J + 2.0 * b1 * std::sqrt(a1 / aH)) / a2;
    // second-order Taylor remainders with |xi2 + s mu_i xi1| >= (1 - mu_i sigma) rho
    const double d1 = 1.0 - mu2 * sigma, d2 = 1.0 - mu1 * sigma;
    rc.c_g = m3 * (m1 * mu2 * mu2 / (d1 * d1 * d1) + m2 * mu1 * mu1 / (d2 * d2 * d2));
    rc.c_g2 = 3.0 * m3 * (m1 * mu2 * mu2 / (d1 * d1 * d1 * d1) + m2 * mu1 * mu1 / (d2 * d2 * d2 * d2));

    // H1 <= H + (beta2 + c_g sigma^2)/rho <= H/2 without assuming r <= c_r
    const double rho_a = 2.0 * (b2 + rc.c_g * sigma * sigma) / aH;
    // smallest rho with beta2/rho + c_g c_r^2/rho^3 <= |H|/2
    auto f = [&](double rho) { return b2 / rho + rc.c_g * rc.c_r * rc.c_r / (rho * rho * rho) - 0.5 * aH; };
    double lo = 2.0 * b2 / aH, hi = lo;  // f(lo) >= 0
    while (f(hi) > 0.0) hi *= 2.0;
    double rho_b = hi;
    if (hi > lo) {
        std::uintmax_t it = 200;
        const auto br = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), it);
        rho_b = br.second;
    }
    rc.rho_min = std::max(rho_a, rho_b);
    // the surface r = sigma rho lies outside the Hill region beyond rho_sep
    rc.rho_sep = (m1 * m2 / sigma + m1 * m3 / d1 + m2 * m3 / d2) / aH;

    rc.I_star_euler = i_star(mp, H, J);
    const double a1cr2 = a1 * rc.c_r * rc.c_r;
    const double cone = a1 * sigma * sigma + a2;  // I <= cone * rho^2 when r <= sigma rho
    rc.I_star = std::max({rc.I_star_euler, a1cr2 + a2 * rc.rho_min * rc.rho_min, cone * rc.rho_min * rc.rho_min,
                          cone * rc.rho_sep * rc.rho_sep, a1cr2 + a2 * (rc.c_r / sigma) * (rc.c_r / sigma)});
    return rc;
}

double i_star_star(const RegionConstants& rc, const MassParams& mp) {
    const double M = mp.M();
    const double c4 = std::pow(rc.c_J2, 4);
    return std::max(rc.I_star, mp.alpha1() * rc.c_r * rc.c_r + mp.alpha2() * c4 / (M * M));
}

double default_B1(const MassParams& mp) { return std::pow(2.0, 1.5) * kPi / std::sqrt(mp.M()); }

DeviationConstants deviation_constants(const RegionConstants& rc, const MassParams& mp, std::optional<double> B1) {
    DeviationConstants d;
    d.B1 = B1 ? *B1 : default_B1(mp);
    if (!(d.B1 >= 0.0) || !std::isfinite(d.B1)) throw Error(ErrorCode::InvalidArgument, "B1 must be non-negative");
    const double M = mp.M(), a2 = mp.alpha2();
    d.A = rc.c_g2 * rc.c_r * rc.c_r / a2;
    const double AB = d.A * d.B1;
    d.b = AB * AB + 2.0 * rc.c_J2 * AB;
    d.a = d.b + d.A;
    d.A1 = (d.a / M) * (2.0 + std::exp(std::sqrt(2.0 * M + 3.0 * rc.c_J2 * rc.c_J2) * d.B1));
    const double q = 3.0 * rc.c_J2 * rc.c_J2 / (2.0 * M);
    d.R_bar = std::max(rc.I_star, mp.alpha1() * rc.c_r * rc.c_r + std::max(1.0, q * q) * a2);
    return d;
}

StripMain strip_and_main(const RegionConstants& rc, const DeviationConstants& dc, double I_star2,
                         const MassParams& mp, double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lambda must be > 0");
    const double a2 = mp.alpha2();
    StripMain s;
    s.alpha1_cr2 = mp.alpha1() * rc.c_r * rc.c_r;
    s.lambda = lambda;
    s.R = std::max({dc.R_bar, I_star2, 4.0 * s.alpha1_cr2});
    s.R_bar_lambda = std::max({s.R, s.alpha1_cr2 + a2 * (a2 * dc.A1 * dc.A1 / lambda),
                               2.0 * a2 * dc.A1 + 4.0 * s.alpha1_cr2 + lambda});
    s.lambda_prime = 2.0 * a2 * dc.A1 + lambda;
    s.R_lambda = s.R_bar_lambda + s.lambda_prime;
    return s;
}

double marchal_phi(const MassParams& mp, double lam, double gamma) {
    const double mu1 = mp.mu1(), mu2 = mp.mu2();
    const double c = std::cos(gamma);
    const double t1 = 1.0 + 2.0 * mu2 * c * lam + mu2 * mu2 * lam * lam;
    const double t2 = 1.0 - 2.0 * mu1 * c * lam + mu1 * mu1 * lam * lam;
    return mu1 * (1.0 + mu2 * c * lam) / std::pow(t1, 1.5) + mu2 * (1.0 - mu1 * c * lam) / std::pow(t2, 1.5);
}

MarchalComparison marchal_comparison(const RegionConstants& rc, const MassParams& mp) {
    MarchalComparison out;
    // r <= c_r and rho >= sqrt((I* - alpha1 c_r^2)/alpha2) on I >= I*; r <= sigma rho by construction
    const double a1cr2 = mp.alpha1() * rc.c_r * rc.c_r;
    double lam_max = rc.sigma;
    if (rc.I_star > a1cr2) lam_max = std::min(lam_max, rc.c_r / std::sqrt((rc.I_star - a1cr2) / mp.alpha2()));
    out.lam_max = lam_max;

    constexpr int N = 512;
    const double dl = lam_max / (N - 1), dg = kPi / (N - 1);
    double best = INFINITY;
    int bi = 0, bj = 0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const double v = marchal_phi(mp, i * dl, j * dg);
            if (v < best) {
                best = v;
                bi = i;
                bj = j;
            }
        }
    double lam = bi * dl, gam = bj * dg;
    // coordinate refinement inside the neighboring cells
    const double llo = std::max(0.0, lam - dl), lhi = std::min(lam_max, lam + dl);
    const double glo = std::max(0.0, gam - dg), ghi = std::min(kPi, gam + dg);
    for (int sweep = 0; sweep < 4; ++sweep) {
        const auto rl = boost::math::tools::brent_find_minima(
            [&](double l) { return marchal_phi(mp, l, gam); }, llo, lhi, 50);
        if (rl.second < best) {
            best = rl.second;
            lam = rl.first;
        }
        const auto rg = boost::math::tools::brent_find_minima(
            [&](double g) { return marchal_phi(mp, lam, g); }, glo, ghi, 50);
        if (rg.second < best) {
            best = rg.second;
            gam = rg.first;
        }
    }
    // endpoints are candidates too (brent does not evaluate them)
    for (double l : {llo, lhi})
        for (double g : {glo, ghi}) {
            const double v = marchal_phi(mp, l, g);
            if (v < best) {
                best = v;
                lam = l;
                gam = g;
            }
        }
    out.delta = best;
    out.lam_at_min = lam;
    out.gamma_at_min = gam;
    out.rho_M = rc.c_J2 * rc.c_J2 / (mp.M() * out.delta);
    out.I_M = a1cr2 + mp.alpha2() * out.rho_M * out.rho_M;
    return out;
}

double BoundSet::rho_bar(const MassParams& mp, double I_bar) const {
    const double v = (I_bar - alpha1_cr2(mp)) / mp.alpha2();
    if (!(v > 0.0)) throw Error(ErrorCode::Domain, "I_bar must exceed alpha1 c_r^2");
    return std::sqrt(v);
}

BoundSet bound_chain(const MassParams& mp, double H, double J, const BoundOptions& opt) {
    BoundSet bs;
    bs.H = H;
    bs.J = J;
    bs.region = region_constants(mp, H, J, opt.sigma);
    bs.I_star2 = i_star_star(bs.region, mp);
    bs.deviation = deviation_constants(bs.region, mp, opt.B1);
    bs.marchal = marchal_comparison(bs.region, mp);

    auto R_of = [&](double lam) { return strip_and_main(bs.region, bs.deviation, bs.I_star2, mp, lam).R_lambda; };
    double lam_best;
    if (opt.lambda) {
        lam_best = *opt.lambda;
    } else {
        // 64 log-spaced samples in (0, 1), then Brent refinement in the bracketing cells
        constexpr int K = 64;
        double grid[K];
        int kb = 0;
        double vb = INFINITY;
        for (int k = 0; k < K; ++k) {
            grid[k] = std::pow(10.0, -6.0 * (1.0 - static_cast<double>(k) / K));
            const double v = R_of(grid[k]);
            if (v < vb) {
                vb = v;
                kb = k;
            }
        }
        const double lo = kb > 0 ? grid[kb - 1] : 0.5 * grid[0];
        const double hi = kb + 1 < K ? grid[kb + 1] : std::nextafter(1.0, 0.0);  // lambda stays inside (0, 1)
        const auto r = boost::math::tools::brent_find_minima(R_of, lo, hi, 30);
        lam_best = r.second < vb ? r.first : grid[kb];
    }
    bs.strip = strip_and_main(bs.region, bs.deviation, bs.I_star2, mp, lam_best);
    bs.I0 = bs.strip.R_lambda;
    return bs;
}

I0Result i0(const MassParams& mp, double H, double J, const BoundOptions& opt) {
    I0Result out;
    out.I0 = -INFINITY;
    for (int k = 1; k <= 3; ++k) {
        BoundSet bs = bound_chain(mp.relabeled(k), H, J, opt);
        bs.far_body = k;
        if (bs.I0 > out.I0) {
            out.I0 = bs.I0;
            out.far_body = k;
        }
        out.per_far[static_cast<size_t>(k - 1)] = bs;
    }
    return out;
}

}  // namespace lunarbound
