#include <algorithm>
#include <cmath>

#include "lunarbound/error.hpp"
#include "lunarbound/harness.hpp"
#include "parallel.hpp"

namespace lunarbound {

namespace {

IntegrateOptions run_options(const ScenarioConfig& cfg) {
    IntegrateOptions o;
    o.rtol = cfg.tol;
    o.atol = cfg.tol;
    o.regularize = cfg.regularize;
    o.ks_always = cfg.regularize;
    return o;
}

DirectionResult run_direction(const ScenarioConfig& cfg, const MassParams& mp, const JacobiState& s0, double level,
                              double t1) {
    IntegrateOptions o = run_options(cfg);
    o.keep_dense = false;
    o.events.stop_below = level;
    o.events.pericenter = true;
    const Trajectory traj = integrate(s0, mp, 0.0, t1, o);
    DirectionResult d;
    d.ran = true;
    d.entered = traj.stopped_at_event || traj.initially_below_stop;
    d.t_end = traj.t_end();
    d.t_entry = d.entered ? traj.t_end() : 0.0;
    d.status = status_name(traj.status);
    d.steps = traj.steps;
    d.max_H_resid = traj.max_H_resid();
    d.max_J_resid = traj.max_J_resid();
    d.min_I = INFINITY;
    for (const Node& nd : traj.nodes) d.min_I = std::min(d.min_I, nd.I);
    for (const Event& e : traj.events) {
        d.pericenters += e.kind == EventKind::OuterPericenter;
        d.collisions_regularized += e.kind == EventKind::CollisionRegularized;
    }
    return d;
}

}  // namespace

RunBounds run_bounds(const ScenarioConfig& cfg) {
    BoundOptions opt;
    opt.B1 = cfg.B1;
    opt.lambda = cfg.lambda;
    RunBounds rb;
    rb.all = i0(cfg.masses(), cfg.H, cfg.J_mag(), opt);
    rb.bs = rb.all.at(cfg.far_body);
    rb.I0 = rb.all.I0;
    return rb;
}

TheoremReport run_theorem_experiment(const ScenarioConfig& cfg, int jobs) {
    TheoremReport rep;
    rep.cfg = cfg;
    rep.bounds = run_bounds(cfg);
    const MassParams mp = cfg.run_masses();
    const BoundSet& bs = rep.bounds.bs;
    rep.level = cfg.level.value_or(rep.bounds.I0);
    // the deviation estimate needs I_bar >= R_bar; lower levels borrow its time scale
    rep.budget_level = std::max(rep.level, bs.deviation.R_bar);
    const double eps = bs.epsilon(mp, rep.budget_level);
    rep.budget = cfg.budget_factor * bs.deviation.B1 * std::pow(eps, -1.5);

    double I_lo, I_hi;
    if (cfg.sampler.I_abs) {
        I_lo = cfg.sampler.I_abs->lo;
        I_hi = cfg.sampler.I_abs->hi;
    } else {
        I_lo = cfg.sampler.I_rel.lo * rep.level;
        I_hi = cfg.sampler.I_rel.hi * rep.level;
    }

    const int n = cfg.sampler.count;
    rep.samples.resize(static_cast<size_t>(n));
    detail::parallel_for(n, jobs, [&](int i) {
        TheoremSample& ts = rep.samples[static_cast<size_t>(i)];
        ts.ic.index = i;
        try {
            ts.ic = sample_one(cfg, bs, I_lo, I_hi, i);
            ts.forward = run_direction(cfg, mp, ts.ic.state, rep.level, rep.budget);
            if (!ts.forward.entered) ts.backward = run_direction(cfg, mp, ts.ic.state, rep.level, -rep.budget);
            if (ts.entered()) {
                ts.outcome = "entered";
            } else {
                const bool clean = ts.forward.status == "complete" && ts.backward.status == "complete";
                ts.outcome = clean ? "budget_exhausted" : "error";
                if (!clean) ts.error = "integration stopped: " + ts.forward.status + " / " + ts.backward.status;
            }
        } catch (const std::exception& e) {
            ts.outcome = "error";
            ts.error = e.what();
        }
    });
    for (const TheoremSample& ts : rep.samples) {
        rep.entered += ts.outcome == "entered";
        rep.budget_exhausted += ts.outcome == "budget_exhausted";
        rep.errors += ts.outcome == "error";
    }
    return rep;
}

SandwichReport run_sandwich_experiment(const ScenarioConfig& cfg, int jobs, bool keep_series) {
    SandwichReport rep;
    rep.cfg = cfg;
    rep.bounds = run_bounds(cfg);
    const MassParams mp = cfg.run_masses();
    const BoundSet& bs = rep.bounds.bs;
    rep.I_bar = cfg.level.value_or(bs.deviation.R_bar);
    if (rep.I_bar < bs.deviation.R_bar)
        throw Error(ErrorCode::InvalidArgument, "sandwich level must be >= R_bar (deviation estimate hypothesis)");
    rep.I_bar_plus = 4.0 * (rep.I_bar - bs.alpha1_cr2(mp));
    const double I_lo = cfg.sampler.I_abs ? cfg.sampler.I_abs->lo : rep.I_bar;
    const double I_hi = cfg.sampler.I_abs ? cfg.sampler.I_abs->hi : rep.I_bar_plus;
    const double horizon = sandwich_params(bs, mp, rep.I_bar, 0.0).time_horizon;

    VerifyOptions vo;
    vo.lambda = bs.strip.lambda;
    vo.keep_series = keep_series;
    vo.tol = cfg.tol;
    IntegrateOptions io = run_options(cfg);
    io.keep_dense = true;

    const int n = cfg.sampler.count;
    rep.samples.resize(static_cast<size_t>(n));
    detail::parallel_for(n, jobs, [&](int i) {
        SandwichSample& ss = rep.samples[static_cast<size_t>(i)];
        ss.ic.index = i;
        try {
            ss.ic = sample_one(cfg, bs, I_lo, I_hi, i);
            for (int dir : {1, -1}) {
                const Trajectory traj = integrate(ss.ic.state, mp, 0.0, dir * horizon, io);
                if (traj.status != TrajectoryStatus::Complete)
                    throw Error(ErrorCode::Convergence, std::string("integration ") + status_name(traj.status));
                (dir > 0 ? ss.forward : ss.backward) = verify_deviation(traj, bs, mp, rep.I_bar, vo);
            }
        } catch (const std::exception& e) {
            ss.error = e.what();
        }
    });
    for (const SandwichSample& ss : rep.samples) {
        if (!ss.error.empty()) {
            ++rep.errors;
            continue;
        }
        rep.violations += ss.forward.violations + ss.backward.violations;
    }
    return rep;
}

AppendixReport run_appendix_scenario(int jobs, int samples) {
    AppendixReport rep;
    ScenarioConfig cfg = appendix_config();
    cfg.sampler.count = samples;
    rep.bounds = run_bounds(cfg);
    const BoundSet& bs = rep.bounds.bs;
    rep.I_star_euler = bs.region.I_star_euler;
    rep.I_star_ok = std::fabs(rep.I_star_euler - 32.0 / 27.0) <= 1e-9;
    rep.I_star2_below_I_M = bs.I_star2 < bs.marchal.I_M;
    rep.ordering_ok = rep.I_star_euler < bs.I_star2 && bs.I_star2 < rep.bounds.I0;
    rep.experiment = run_theorem_experiment(cfg, jobs);
    return rep;
}

}  // namespace lunarbound
