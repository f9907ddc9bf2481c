#include "lunarbound/osculate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dop853.hpp"
#include "lunarbound/error.hpp"

namespace lunarbound {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double opt_or_inf(const std::optional<double>& v) { return v ? *v : kInf; }

// 2 sinh^2(x/2) avoids the cancellation in cosh(x) - 1
double cosh_m1(double x) {
    const double s = std::sinh(0.5 * x);
    return 2.0 * s * s;
}

}  // namespace

OsculatingOrbit osculating_orbit(const JacobiState& s, const MassParams& mp, Body which) {
    OsculatingOrbit o;
    if (which == Body::Inner) {
        o.state = {s.xi1, s.dxi1, mp.mu()};
    } else {
        o.state = {s.xi2, s.dxi2, mp.M()};
    }
    if (norm(o.state.xi) == 0.0) throw Error(ErrorCode::Singular, "degenerate radius for osculating orbit");
    o.elements = elements_from_state(o.state);
    return o;
}

OsculatingOrbit osculating_orbit(const Trajectory& traj, double t, Body which) {
    return osculating_orbit(traj.state_at(t), traj.mp, which);
}

double SandwichParams::eta_bound(double t) const {
    const double sw = std::sqrt(omega);
    return (2.0 * force_gap() / omega) * cosh_m1(sw * std::fabs(t));
}

double SandwichParams::eta_bound_exp(double t) const {
    return (2.0 * a * epsilon / k) * (2.0 + std::exp(std::sqrt(omega) * std::fabs(t)));
}

SandwichParams sandwich_params(const BoundSet& bs, const MassParams& mp, double I_bar, double c0) {
    SandwichParams sp;
    sp.I_bar = I_bar;
    sp.rho_bar = bs.rho_bar(mp, I_bar);
    sp.epsilon = 1.0 / sp.rho_bar;
    sp.M = mp.M();
    sp.A = bs.deviation.A;
    sp.a = bs.deviation.a;
    sp.b = bs.deviation.b;
    sp.A1 = bs.deviation.A1;
    sp.B1 = bs.deviation.B1;
    sp.c_J2 = bs.region.c_J2;
    sp.c0 = c0;
    sp.k = std::clamp(2.0 * sp.M + 3.0 * c0 * c0, 2.0 * sp.M, 2.0 * sp.M + 3.0 * sp.c_J2 * sp.c_J2);
    sp.omega = sp.k * std::pow(sp.epsilon, 3);
    sp.time_horizon = sp.B1 * std::pow(sp.epsilon, -1.5);
    return sp;
}

double v1(const SandwichParams& sp, double rho) {
    return sp.c0 * sp.c0 / (rho * rho * rho) - sp.M / (rho * rho);
}

CtDrift ct_drift(const Trajectory& traj, double t_end, const SandwichParams& sp) {
    CtDrift out;
    const double t0 = traj.t_begin();
    const double span = std::fabs(t_end - t0);
    out.t_end = t_end;
    out.bound = sp.ct2_bound();
    if (span > sp.time_horizon * (1 + 1e-12)) {
        out.applicable = false;
        out.reason = "span exceeds the time horizon";
    }
    const double c0 = sp.c0;
    const double A_eps3 = sp.A * std::pow(sp.epsilon, 3);
    for (const Node& nd : traj.nodes) {
        const double tau = std::fabs(nd.t - t0);
        if (tau > span) break;
        if (nd.I < sp.I_bar) {
            out.applicable = false;
            out.reason = "trajectory leaves I >= I_bar";
            break;
        }
        const double ct = norm(cross(nd.state.xi2, nd.state.dxi2));
        out.max_dc2 = std::max(out.max_dc2, std::fabs(ct * ct - c0 * c0));
        if (tau > 0.0) {
            const double dc = std::max(0.0, std::fabs(ct - c0) - 1e-13 * std::max(c0, 1.0));
            out.max_dc_ratio = std::max(out.max_dc_ratio, dc / (A_eps3 * tau));
        }
    }
    return out;
}

std::pair<double, double> SandwichSolution::at(double tau) const {
    if (segs.empty()) throw Error(ErrorCode::Domain, "empty sandwich solution");
    if (tau < 0.0 || tau > tau_end * (1 + 1e-14) + 1e-300)
        throw Error(ErrorCode::Domain, "tau outside the sandwich solution");
    auto it = std::upper_bound(segs.begin(), segs.end(), tau, [](double v, const Seg& s) { return v < s.t0; });
    const Seg& s = it == segs.begin() ? segs.front() : *(it - 1);
    const double theta = s.h > 0.0 ? std::clamp((tau - s.t0) / s.h, 0.0, 1.0) : 0.0;
    double y[4];
    detail::Dop853::dense(s.rc, 4, theta, y);
    return {y[0], y[2]};
}

std::optional<double> SandwichSolution::tau_below(double level) const {
    constexpr int kSub = 16;
    double prev_tau = 0.0;
    for (const Seg& s : segs) {
        for (int j = 0; j <= kSub; ++j) {
            const double tau = std::min(s.t0 + s.h * j / kSub, tau_end);
            if (at(tau).first < level) {
                double lo = prev_tau, hi = tau;
                for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (at(mid).first < level ? hi : lo) = mid;
                }
                return hi;
            }
            prev_tau = tau;
        }
    }
    return std::nullopt;
}

SandwichSolution sandwich_ode(double rho0, double drho0, const SandwichParams& sp, int direction, double tau_max,
                              double tol) {
    if (!(rho0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "rho0 must be positive");
    SandwichSolution sol;
    sol.direction = direction >= 0 ? 1 : -1;
    sol.rho_monotone = sp.rho_monotone();
    const double gap = sp.force_gap();
    auto rhs = [&](double, const double* y, double* dy) {
        if (!(y[0] > 0.0) || !(y[2] > 0.0)) throw Error(ErrorCode::Singular, "comparison solution reached 0");
        dy[0] = y[1];
        dy[1] = v1(sp, y[0]) - gap;
        dy[2] = y[3];
        dy[3] = v1(sp, y[2]) + gap;
    };
    detail::Dop853 st(4, rhs);
    detail::StepControl ctl;
    double y[4] = {rho0, sol.direction * drho0, rho0, sol.direction * drho0};
    double tau = 0.0;
    const double stop_level = std::max(sol.rho_monotone, 1e-6 * rho0);
    st.start(tau, y);
    if (tau_max <= 0.0) {
        SandwichSolution::Seg seg{0.0, 0.0, {}};
        for (int i = 0; i < 4; ++i) seg.rc[i] = y[i];
        sol.segs.push_back(seg);
        sol.tau_end = 0.0;
        return sol;
    }
    double h = st.initial_step(tau, y, tau_max, 1.0, tol, tol);
    long guard = 0;
    while (tau < tau_max && guard++ < 50'000'000) {
        bool last = false;
        if (tau + 1.01 * h >= tau_max) {
            h = tau_max - tau;
            last = true;
        }
        if (h < 1e-14 * std::max(1.0, tau)) throw Error(ErrorCode::Convergence, "sandwich step underflow");
        double err;
        try {
            err = st.attempt(tau, y, h, tol, tol);
        } catch (const Error&) {
            err = kInf;
        }
        bool accepted = false;
        double hnew;
        if (std::isfinite(err)) {
            hnew = ctl.next(h, err, accepted);
        } else {
            hnew = 0.25 * h;
            ctl.reject = true;
        }
        if (!accepted) {
            h = hnew;
            continue;
        }
        SandwichSolution::Seg seg{tau, h, {}};
        st.accept(tau, y, h, seg.rc);
        const auto& yn = st.y_new();
        sol.segs.push_back(seg);
        const bool below = yn[0] < stop_level;
        tau = last ? tau_max : tau + h;
        for (int i = 0; i < 4; ++i) y[i] = yn[i];
        if (below) {
            // locate the crossing on this step's dense output
            double lo = seg.t0, hi = tau;
            sol.tau_end = tau;
            for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
                const double mid = 0.5 * (lo + hi);
                (sol.at(mid).first < stop_level ? hi : lo) = mid;
            }
            sol.tau_end = hi;
            if (stop_level == sol.rho_monotone) sol.tau_monotone_fail = hi;
            return sol;
        }
        h = hnew;
    }
    sol.tau_end = tau;
    return sol;
}

DeviationReport verify_deviation(const Trajectory& traj, const BoundSet& bs, const MassParams& mp, double I_bar,
                                 const VerifyOptions& opt) {
    DeviationReport rep;
    if (traj.nodes.empty()) {
        rep.applicable = false;
        rep.reason = "empty trajectory";
        return rep;
    }
    const double t0 = traj.t_begin();
    const double t1 = traj.t_end();
    rep.direction = t1 >= t0 ? 1 : -1;
    const JacobiState s0 = traj.nodes.front().state;
    rep.I0 = moment_of_inertia(s0, mp);
    const double c0 = norm(cross(s0.xi2, s0.dxi2));
    rep.params = sandwich_params(bs, mp, I_bar, c0);
    const SandwichParams& sp = rep.params;
    rep.horizon = sp.time_horizon;
    rep.traj_span = std::fabs(t1 - t0);
    rep.deviation_bound = sp.deviation_bound();
    rep.strip_exit_limit = I_bar + 2.0 * mp.alpha2() * sp.A1 + opt.lambda;
    if (rep.I0 < I_bar) {
        rep.applicable = false;
        rep.reason = "I(0) below I_bar";
        return rep;
    }
    const double dir = rep.direction;
    auto time_of = [&](double tau) { return t0 + dir * tau; };
    auto I_at = [&](double tau) { return moment_of_inertia(traj.state_at(time_of(tau)), mp); };

    // first exit of the true motion below I_bar
    {
        double prev = 0.0;
        for (const Node& nd : traj.nodes) {
            const double tau = std::fabs(nd.t - t0);
            if (nd.I < I_bar) {
                double lo = prev, hi = tau;
                for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (I_at(mid) < I_bar ? hi : lo) = mid;
                }
                rep.true_exit = lo;  // closed-left: last point still at or above I_bar
                break;
            }
            prev = tau;
        }
    }
    rep.region_window = std::min({rep.horizon, rep.traj_span, opt_or_inf(rep.true_exit)});

    const OsculatingOrbit osc = osculating_orbit(s0, mp, Body::Outer);
    const double rho0 = norm(s0.xi2);
    const double drho0 = dot(s0.xi2, s0.dxi2) / rho0;
    auto rho_osc_at = [&](double tau) { return norm(propagate(osc.state, dir * tau).xi); };

    const SandwichSolution sol = sandwich_ode(rho0, drho0, sp, rep.direction, rep.region_window, opt.tol);
    rep.monotone_fail = sol.tau_monotone_fail;
    rep.lipschitz_exit = sol.tau_below(sp.rho_bar);
    rep.ordering_window = std::min({rep.region_window, opt_or_inf(rep.monotone_fail), sol.tau_end});
    rep.eta_window = std::min(rep.ordering_window, opt_or_inf(rep.lipschitz_exit));

    auto violate = [&](double tau, const char* kind) {
        ++rep.violations;
        if (!rep.first_violation_t) {
            rep.first_violation_t = time_of(tau);
            rep.first_violation_kind = kind;
        }
    };

    // sample times: nodes inside the region window plus the window end itself
    std::vector<double> taus;
    for (const Node& nd : traj.nodes) {
        const double tau = std::fabs(nd.t - t0);
        if (tau > rep.region_window) break;
        taus.push_back(tau);
    }
    if (taus.empty() || taus.back() < rep.region_window) taus.push_back(rep.region_window);

    const double A1eps = sp.deviation_bound();
    for (double tau : taus) {
        const JacobiState s = traj.state_at(time_of(tau));
        const double rho = norm(s.xi2);
        double rho_osc;
        try {
            rho_osc = rho_osc_at(tau);
        } catch (const CollisionError&) {
            rep.applicable = false;
            rep.reason = "osculating outer orbit collides";
            return rep;
        }
        const double dev = std::fabs(rho - rho_osc);
        ++rep.nodes_region;
        rep.deviation_max = std::max(rep.deviation_max, dev);
        if (!(dev < A1eps)) violate(tau, "deviation");

        DeviationSample ds{time_of(tau), moment_of_inertia(s, mp), rho, rho_osc, NAN, NAN, NAN};
        const double ct = norm(cross(s.xi2, s.dxi2));
        ds.dc2 = std::fabs(ct * ct - c0 * c0);

        if (tau <= rep.ordering_window) {
            ++rep.nodes_ordering;
            const auto [rm, rp] = sol.at(tau);
            ds.rho_minus = rm;
            ds.rho_plus = rp;
            const double g = std::min({rho - rm, rp - rho, rho_osc - rm, rp - rho_osc}) / rho;
            rep.ordering_worst = std::min(rep.ordering_worst, g);
            if (g < -opt.ordering_slack) violate(tau, "ordering");

            if (tau <= rep.eta_window) {
                ++rep.nodes_eta;
                const double eta = rp - rm;
                const double eb = sp.eta_bound(tau);
                if (eb > 0.0) rep.eta_ratio_max = std::max(rep.eta_ratio_max, eta / eb);
                if (eta > eb + opt.ordering_slack * rho) violate(tau, "eta");
                const double ebx = sp.eta_bound_exp(tau);
                const double chain = std::min(ebx - eb, A1eps - ebx);
                rep.eta_chain_worst = std::min(rep.eta_chain_worst, chain / A1eps);
                if (chain < 0.0) violate(tau, "eta-chain");
            }
        }
        if (opt.keep_series) rep.series.push_back(ds);
    }

    rep.ct = ct_drift(traj, time_of(rep.region_window), sp);
    if (!rep.ct.within()) violate(rep.region_window, "ct-drift");

    // osculating exit to rho_bar within the horizon (strip logic)
    {
        const double span = std::min(rep.horizon, rep.traj_span);
        double prev = 0.0;
        for (const Node& nd : traj.nodes) {
            const double tau = std::fabs(nd.t - t0);
            if (tau > span) break;
            double ro;
            try {
                ro = rho_osc_at(tau);
            } catch (const CollisionError&) {
                break;
            }
            if (ro < sp.rho_bar) {
                double lo = prev, hi = tau;
                for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (rho_osc_at(mid) < sp.rho_bar ? hi : lo) = mid;
                }
                rep.osc_exit = hi;
                rep.I_at_osc_exit = I_at(hi);
                rep.strip_exit_ok = *rep.I_at_osc_exit <= rep.strip_exit_limit;
                break;
            }
            prev = tau;
        }
    }
    return rep;
}

}  // namespace lunarbound
