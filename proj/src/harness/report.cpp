#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json_out.hpp"
#include "lunarbound/harness.hpp"

namespace lunarbound {

using detail::fmt17;
using detail::ojson;

namespace {

constexpr const char* kSchema = "lunar-bound/1";

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::string hex64(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ojson header(const ScenarioConfig& cfg, const char* kind) {
    ojson j;
    j["schema"] = kSchema;
    j["kind"] = kind;
    const std::string cj = config_json(cfg);
    j["config_hash"] = hex64(fnv1a64(cj));
    j["config"] = ojson::parse(cj);
    return j;
}

ojson vec(const Vec3& v) { return ojson::array({v.x, v.y, v.z}); }

ojson state_json(const JacobiState& s) {
    return {{"xi1", vec(s.xi1)}, {"dxi1", vec(s.dxi1)}, {"xi2", vec(s.xi2)}, {"dxi2", vec(s.dxi2)}};
}

ojson bound_set_json(const BoundSet& b, const MassParams& mp) {
    ojson j;
    j["far_body"] = b.far_body;
    const RegionConstants& r = b.region;
    j["sigma"] = r.sigma;
    j["c_r"] = r.c_r;
    j["c_J2"] = r.c_J2;
    j["c_g"] = r.c_g;
    j["c_g2"] = r.c_g2;
    j["rho_min"] = r.rho_min;
    j["rho_sep"] = r.rho_sep;
    j["I_star_euler"] = r.I_star_euler;
    j["I_star"] = r.I_star;
    j["I_star2"] = b.I_star2;
    const DeviationConstants& d = b.deviation;
    j["A"] = d.A;
    j["a"] = d.a;
    j["b"] = d.b;
    j["A1"] = d.A1;
    j["B1"] = d.B1;
    j["R_bar"] = d.R_bar;
    const StripMain& s = b.strip;
    j["R"] = s.R;
    j["lambda"] = s.lambda;
    j["lambda_prime"] = s.lambda_prime;
    j["R_bar_lambda"] = s.R_bar_lambda;
    j["R_lambda"] = s.R_lambda;
    j["I0"] = b.I0;
    j["alpha1_cr2"] = b.alpha1_cr2(mp);
    j["marchal"] = {{"lam_max", b.marchal.lam_max},
                    {"lam_at_min", b.marchal.lam_at_min},
                    {"gamma_at_min", b.marchal.gamma_at_min},
                    {"delta", b.marchal.delta},
                    {"rho_M", b.marchal.rho_M},
                    {"I_M", b.marchal.I_M}};
    return j;
}

ojson run_bounds_json(const ScenarioConfig& cfg, const RunBounds& rb) {
    ojson j;
    j["I0"] = rb.I0;
    j["I0_far_body"] = rb.all.far_body;
    j["far_body"] = cfg.far_body;
    ojson per = ojson::array();
    for (int k = 1; k <= 3; ++k) per.push_back(bound_set_json(rb.all.at(k), cfg.masses().relabeled(k)));
    j["per_far_body"] = per;
    return j;
}

ojson sample_json(const SampleIC& s) {
    return {{"index", s.index},   {"attempts", s.attempts}, {"I", s.I},
            {"dH_rel", s.dH},     {"dJ", s.dJ},             {"state", state_json(s.state)}};
}

ojson direction_json(const DirectionResult& d) {
    if (!d.ran) return nullptr;
    return {{"entered", d.entered},
            {"t_entry", d.entered ? ojson(d.t_entry) : ojson(nullptr)},
            {"t_end", d.t_end},
            {"min_I", d.min_I},
            {"status", d.status},
            {"steps", d.steps},
            {"max_H_resid", d.max_H_resid},
            {"max_J_resid", d.max_J_resid},
            {"pericenters", d.pericenters},
            {"collisions_regularized", d.collisions_regularized}};
}

ojson deviation_json(const DeviationReport& r) {
    ojson j;
    j["applicable"] = r.applicable;
    if (!r.applicable) j["reason"] = r.reason;
    j["direction"] = r.direction;
    j["I0"] = r.I0;
    const SandwichParams& p = r.params;
    j["params"] = {{"I_bar", p.I_bar}, {"rho_bar", p.rho_bar}, {"epsilon", p.epsilon}, {"c0", p.c0},
                   {"k", p.k},         {"omega", p.omega},     {"a_eps4", p.force_gap()},
                   {"time_horizon", p.time_horizon}};
    j["windows"] = {{"horizon", r.horizon},
                    {"traj_span", r.traj_span},
                    {"true_exit", opt(r.true_exit)},
                    {"osc_exit", opt(r.osc_exit)},
                    {"monotone_fail", opt(r.monotone_fail)},
                    {"lipschitz_exit", opt(r.lipschitz_exit)},
                    {"region", r.region_window},
                    {"ordering", r.ordering_window},
                    {"eta", r.eta_window}};
    j["nodes"] = {{"region", r.nodes_region}, {"ordering", r.nodes_ordering}, {"eta", r.nodes_eta}};
    j["deviation_max"] = r.deviation_max;
    j["deviation_bound"] = r.deviation_bound;
    j["ordering_worst"] = r.nodes_ordering > 0 ? ojson(r.ordering_worst) : ojson(nullptr);
    j["eta_ratio_max"] = r.eta_ratio_max;
    j["eta_chain_worst"] = r.nodes_eta > 0 ? ojson(r.eta_chain_worst) : ojson(nullptr);
    j["ct"] = {{"applicable", r.ct.applicable},
               {"max_dc2", r.ct.max_dc2},
               {"bound", r.ct.bound},
               {"max_dc_ratio", r.ct.max_dc_ratio}};
    j["strip_exit"] = {{"I_at_osc_exit", opt(r.I_at_osc_exit)},
                       {"limit", r.strip_exit_limit},
                       {"ok", r.strip_exit_ok ? ojson(*r.strip_exit_ok) : ojson(nullptr)}};
    j["violations"] = r.violations;
    j["first_violation"] = r.first_violation_t
                               ? ojson({{"t", *r.first_violation_t}, {"kind", r.first_violation_kind}})
                               : ojson(nullptr);
    return j;
}

}  // namespace

std::string bounds_json(const ScenarioConfig& cfg, const RunBounds& rb) {
    ojson j = header(cfg, "bounds");
    j["bounds"] = run_bounds_json(cfg, rb);
    return detail::dump17(j);
}

std::string samples_json(const ScenarioConfig& cfg, const std::vector<SampleIC>& samples) {
    ojson j = header(cfg, "samples");
    j["labeling"] = "far body in slot 3";
    ojson arr = ojson::array();
    for (const SampleIC& s : samples) arr.push_back(sample_json(s));
    j["samples"] = arr;
    return detail::dump17(j);
}

std::string theorem_json(const TheoremReport& rep) {
    ojson j = header(rep.cfg, "theorem");
    j["bounds"] = run_bounds_json(rep.cfg, rep.bounds);
    j["level"] = rep.level;
    j["budget_level"] = rep.budget_level;
    j["budget"] = rep.budget;
    ojson arr = ojson::array();
    for (const TheoremSample& s : rep.samples) {
        ojson o = sample_json(s.ic);
        o["outcome"] = s.outcome;
        if (!s.error.empty()) o["error"] = s.error;
        o["forward"] = direction_json(s.forward);
        o["backward"] = direction_json(s.backward);
        arr.push_back(o);
    }
    j["samples"] = arr;
    j["aggregate"] = {{"count", static_cast<int>(rep.samples.size())},
                      {"entered", rep.entered},
                      {"budget_exhausted", rep.budget_exhausted},
                      {"errors", rep.errors},
                      {"pass", rep.all_entered()}};
    return detail::dump17(j);
}

std::string sandwich_json(const SandwichReport& rep) {
    ojson j = header(rep.cfg, "sandwich");
    j["bounds"] = run_bounds_json(rep.cfg, rep.bounds);
    j["I_bar"] = rep.I_bar;
    j["I_bar_plus"] = rep.I_bar_plus;
    ojson arr = ojson::array();
    double worst_order = INFINITY, worst_eta = 0.0, worst_ct = 0.0, worst_dev = 0.0;
    for (const SandwichSample& s : rep.samples) {
        ojson o = sample_json(s.ic);
        if (!s.error.empty()) {
            o["error"] = s.error;
        } else {
            o["forward"] = deviation_json(s.forward);
            o["backward"] = deviation_json(s.backward);
            for (const DeviationReport* d : {&s.forward, &s.backward}) {
                if (d->nodes_ordering > 0) worst_order = std::min(worst_order, d->ordering_worst);
                worst_eta = std::max(worst_eta, d->eta_ratio_max);
                worst_ct = std::max(worst_ct, d->ct.max_dc2 / d->ct.bound);
                worst_dev = std::max(worst_dev, d->deviation_max / d->deviation_bound);
            }
        }
        arr.push_back(o);
    }
    j["samples"] = arr;
    j["aggregate"] = {{"count", static_cast<int>(rep.samples.size())},
                      {"violations", rep.violations},
                      {"errors", rep.errors},
                      {"worst_ordering_gap", std::isfinite(worst_order) ? ojson(worst_order) : ojson(nullptr)},
                      {"worst_eta_ratio", worst_eta},
                      {"worst_ct_ratio", worst_ct},
                      {"worst_deviation_ratio", worst_dev},
                      {"pass", rep.clean()}};
    return detail::dump17(j);
}

std::string appendix_json(const AppendixReport& rep) {
    ojson j = header(rep.experiment.cfg, "appendix");
    const BoundSet& b = rep.bounds.bs;
    j["checks"] = {{"I_star_euler", rep.I_star_euler},
                   {"I_star_is_32_27", rep.I_star_ok},
                   {"I_star2_below_I_M", rep.I_star2_below_I_M},
                   {"ordering", rep.ordering_ok}};
    j["I_star2"] = b.I_star2;
    j["I_M"] = b.marchal.I_M;
    j["I0"] = rep.bounds.I0;
    j["annotations"] = {{"I_M_marchal", AppendixReport::kMarchalI_M},
                        {"henon_broucke", AppendixReport::kHenonBroucke}};
    j["experiment"] = ojson::parse(theorem_json(rep.experiment));
    j["pass"] = rep.ok();
    return detail::dump17(j);
}

std::string appendix_table(const AppendixReport& rep) {
    const BoundSet& b = rep.bounds.bs;
    std::ostringstream os;
    auto row = [&](const char* name, double v, const char* note = "") {
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-22s %-24.17g %s\n", name, v, note);
        os << buf;
    };
    os << "equal masses 1/3, H = -1/6, |J| = sqrt(8)/9\n";
    row("I* (Euler)", rep.I_star_euler, rep.I_star_ok ? "= 32/27" : "MISMATCH");
    row("I* (enforced)", b.region.I_star);
    row("c_r", b.region.c_r);
    row("c_J2", b.region.c_J2);
    row("c_g", b.region.c_g);
    row("c_g2", b.region.c_g2);
    row("rho_min", b.region.rho_min);
    row("I**", b.I_star2);
    row("delta", b.marchal.delta);
    row("rho_M", b.marchal.rho_M);
    row("I_M", b.marchal.I_M, rep.I_star2_below_I_M ? "> I**" : "<= I** (FAIL)");
    row("A", b.deviation.A);
    row("a", b.deviation.a);
    row("b", b.deviation.b);
    row("A1", b.deviation.A1);
    row("B1", b.deviation.B1);
    row("R_bar", b.deviation.R_bar);
    row("R", b.strip.R);
    row("lambda", b.strip.lambda);
    row("R_lambda", b.strip.R_lambda);
    row("I0", rep.bounds.I0);
    row("I_M (Marchal, ref)", AppendixReport::kMarchalI_M, "annotation only");
    row("Henon-Broucke (ref)", AppendixReport::kHenonBroucke, "annotation only");
    const TheoremReport& e = rep.experiment;
    os << "theorem experiment at level I0: " << e.entered << "/" << e.samples.size() << " entered, "
       << e.budget_exhausted << " budget exhausted, " << e.errors << " errors\n";
    os << (rep.ok() ? "appendix: PASS\n" : "appendix: FAIL\n");
    return os.str();
}

std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "# lunar-bound trajectory v1\n";
    out += "t,xi1x,xi1y,xi1z,dxi1x,dxi1y,dxi1z,xi2x,xi2y,xi2z,dxi2x,dxi2y,dxi2z,r,rho,I,H_resid,J_resid\n";
    for (const Node& n : traj.nodes) {
        const JacobiState& s = n.state;
        const double vals[] = {n.t,      s.xi1.x,  s.xi1.y,  s.xi1.z,  s.dxi1.x, s.dxi1.y,
                               s.dxi1.z, s.xi2.x,  s.xi2.y,  s.xi2.z,  s.dxi2.x, s.dxi2.y,
                               s.dxi2.z, s.r(),    s.rho(),  n.I,      n.H_resid, n.J_resid};
        bool first = true;
        for (double v : vals) {
            if (!first) out += ',';
            first = false;
            out += fmt17(v);
        }
        out += '\n';
    }
    return out;
}

std::string events_csv(const Trajectory& traj) {
    std::string out = "# lunar-bound events v1\n";
    out += "t,kind,payload\n";
    for (const Event& e : traj.events) {
        std::string payload;
        switch (e.kind) {
            case EventKind::ICrossing:
                payload = "level=" + fmt17(e.level) + ";direction=" + std::to_string(e.direction);
                break;
            case EventKind::Syzygy:
                payload = "middle_mass=" + std::to_string(e.middle_mass);
                break;
            case EventKind::CollisionRegularized:
                payload = "duration=" + fmt17(e.duration) + ";min_r=" + fmt17(e.min_r);
                break;
            case EventKind::OuterPericenter:
                payload = "rho=" + fmt17(e.state.rho());
                break;
        }
        out += fmt17(e.t) + "," + event_kind_name(e.kind) + "," + payload + "\n";
    }
    return out;
}

namespace {

std::string csv_row(std::initializer_list<std::string> cells) {
    std::string out;
    for (const std::string& c : cells) {
        if (!out.empty()) out += ',';
        out += c;
    }
    return out + '\n';
}

std::string num(double v) { return std::isfinite(v) ? fmt17(v) : std::string(); }

}  // namespace

std::string samples_csv(const std::vector<SampleIC>& samples) {
    std::string out = "# lunar-bound samples v1\n";
    out += "index,attempts,I,dH_rel,dJ,xi1x,xi1y,xi1z,dxi1x,dxi1y,dxi1z,xi2x,xi2y,xi2z,dxi2x,dxi2y,dxi2z\n";
    for (const SampleIC& s : samples) {
        const JacobiState& x = s.state;
        out += csv_row({std::to_string(s.index), std::to_string(s.attempts), num(s.I), num(s.dH), num(s.dJ),
                        num(x.xi1.x), num(x.xi1.y), num(x.xi1.z), num(x.dxi1.x), num(x.dxi1.y), num(x.dxi1.z),
                        num(x.xi2.x), num(x.xi2.y), num(x.xi2.z), num(x.dxi2.x), num(x.dxi2.y), num(x.dxi2.z)});
    }
    return out;
}

std::string theorem_csv(const TheoremReport& rep) {
    std::string out = "# lunar-bound theorem v1\n";
    out += "index,I,outcome,fwd_entered,fwd_t_entry,fwd_min_I,fwd_steps,bwd_entered,bwd_t_entry,bwd_min_I,bwd_steps\n";
    auto dir = [](const DirectionResult& d) -> std::array<std::string, 4> {
        if (!d.ran) return {"", "", "", ""};
        return {d.entered ? "1" : "0", d.entered ? num(d.t_entry) : "", num(d.min_I), std::to_string(d.steps)};
    };
    for (const TheoremSample& s : rep.samples) {
        const auto f = dir(s.forward), b = dir(s.backward);
        out += csv_row({std::to_string(s.ic.index), num(s.ic.I), s.outcome, f[0], f[1], f[2], f[3], b[0], b[1], b[2],
                        b[3]});
    }
    return out;
}

std::string deviation_csv(const DeviationReport& rep) {
    std::string out = "# lunar-bound deviation v1\n";
    out += "t,I,rho,rho_osc,rho_minus,rho_plus,dc2\n";
    for (const DeviationSample& d : rep.series) {
        const double vals[] = {d.t, d.I, d.rho, d.rho_osc, d.rho_minus, d.rho_plus, d.dc2};
        bool first = true;
        for (double v : vals) {
            if (!first) out += ',';
            first = false;
            out += std::isfinite(v) ? fmt17(v) : std::string();
        }
        out += '\n';
    }
    return out;
}

}  // namespace lunarbound
