#include "lunarbound/lunarbound.h"

#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "lunarbound/error.hpp"
#include "lunarbound/harness.hpp"

using namespace lunarbound;

struct lb_config {
    ScenarioConfig cfg;
    std::string json;
};

struct lb_report {
    int passed = -1;
    std::vector<std::pair<std::string, std::string>> parts;
};

namespace {

thread_local std::string g_last_error;

lb_status fail(lb_status s, const std::string& msg) {
    g_last_error = msg;
    return s;
}

template <class F>
lb_status guarded(F&& fn) {
    g_last_error.clear();
    try {
        fn();
        return LB_OK;
    } catch (const Error& e) {
        return fail(static_cast<lb_status>(static_cast<int>(e.code())), e.what());
    } catch (const std::bad_alloc&) {
        return fail(LB_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(LB_E_INTERNAL, e.what());
    }
}

#define LB_REQUIRE(cond, msg) \
    if (!(cond)) return fail(LB_E_INVALID_ARGUMENT, msg)

// initial-I range of single-trajectory runs: the sampler's absolute range, or
// I_rel times the level (default R_bar)
std::pair<double, double> desk_range(const ScenarioConfig& cfg, const BoundSet& bs) {
    if (cfg.sampler.I_abs) return {cfg.sampler.I_abs->lo, cfg.sampler.I_abs->hi};
    const double level = cfg.level.value_or(bs.deviation.R_bar);
    return {cfg.sampler.I_rel.lo * level, cfg.sampler.I_rel.hi * level};
}

}  // namespace

extern "C" {

const char* lb_last_error(void) { return g_last_error.c_str(); }

const char* lb_status_name(lb_status s) {
    switch (s) {
        case LB_OK: return "ok";
        case LB_E_INVALID_ARGUMENT: return "invalid argument";
        case LB_E_SINGULAR: return "singular";
        case LB_E_DOMAIN: return "domain";
        case LB_E_COLLISION: return "collision";
        case LB_E_NO_SPLITTING: return "no splitting";
        case LB_E_INFEASIBLE: return "infeasible";
        case LB_E_NOT_APPLICABLE: return "not applicable";
        case LB_E_CONVERGENCE: return "convergence";
        case LB_E_IO: return "io";
        case LB_E_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* lb_version(void) { return "1.0.0"; }

lb_status lb_config_parse(const char* json_text, lb_config** out) {
    LB_REQUIRE(json_text && out, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new lb_config{parse_config(json_text), {}}; });
}

lb_status lb_config_appendix(lb_config** out) {
    LB_REQUIRE(out, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new lb_config{appendix_config(), {}}; });
}

void lb_config_free(lb_config* cfg) { delete cfg; }

lb_status lb_config_set_seed(lb_config* cfg, uint64_t seed) {
    LB_REQUIRE(cfg, "null config");
    cfg->cfg.sampler.seed = seed;
    cfg->cfg.sampler.seed_set = true;
    return LB_OK;
}

lb_status lb_config_set_tol(lb_config* cfg, double tol) {
    LB_REQUIRE(cfg, "null config");
    LB_REQUIRE(tol > 0.0 && tol < 1e-3, "tol must lie in (0, 1e-3)");
    cfg->cfg.tol = tol;
    return LB_OK;
}

lb_status lb_config_set_regularize(lb_config* cfg, int on) {
    LB_REQUIRE(cfg, "null config");
    cfg->cfg.regularize = on != 0;
    return LB_OK;
}

lb_status lb_config_set_count(lb_config* cfg, int count) {
    LB_REQUIRE(cfg, "null config");
    LB_REQUIRE(count >= 1, "count must be >= 1");
    cfg->cfg.sampler.count = count;
    return LB_OK;
}

const char* lb_config_json(lb_config* cfg) {
    if (!cfg) return "";
    cfg->json = config_json(cfg->cfg);
    return cfg->json.c_str();
}

lb_status lb_bounds(const lb_config* cfg, lb_format fmt, lb_report** out) {
    LB_REQUIRE(cfg && out, "null argument");
    LB_REQUIRE(fmt == LB_FORMAT_JSON, "bounds are emitted as JSON only");
    *out = nullptr;
    return guarded([&] {
        auto* r = new lb_report;
        r->parts.emplace_back("bounds.json", bounds_json(cfg->cfg, run_bounds(cfg->cfg)));
        *out = r;
    });
}

lb_status lb_sample(const lb_config* cfg, lb_format fmt, lb_report** out) {
    LB_REQUIRE(cfg && out, "null argument");
    LB_REQUIRE(fmt == LB_FORMAT_JSON || fmt == LB_FORMAT_CSV, "samples are JSON or CSV");
    *out = nullptr;
    return guarded([&] {
        const RunBounds rb = run_bounds(cfg->cfg);
        const auto [lo, hi] = desk_range(cfg->cfg, rb.bs);
        const std::vector<SampleIC> v = sample_initial_conditions(cfg->cfg, rb.bs, lo, hi);
        auto* r = new lb_report;
        if (fmt == LB_FORMAT_JSON)
            r->parts.emplace_back("samples.json", samples_json(cfg->cfg, v));
        else
            r->parts.emplace_back("samples.csv", samples_csv(v));
        *out = r;
    });
}

lb_status lb_simulate(const lb_config* cfg, int index, double t_end, lb_report** out) {
    LB_REQUIRE(cfg && out, "null argument");
    LB_REQUIRE(index >= 0, "index must be >= 0");
    *out = nullptr;
    return guarded([&] {
        const ScenarioConfig& c = cfg->cfg;
        const RunBounds rb = run_bounds(c);
        const MassParams mp = c.run_masses();
        const auto [lo, hi] = desk_range(c, rb.bs);
        const SampleIC ic = sample_one(c, rb.bs, lo, hi, index);
        const double level = c.level.value_or(rb.bs.deviation.R_bar);
        if (t_end == 0.0) t_end = sandwich_params(rb.bs, mp, std::max(level, rb.bs.deviation.R_bar), 0.0).time_horizon;
        IntegrateOptions o;
        o.rtol = o.atol = c.tol;
        o.regularize = c.regularize;
        o.ks_always = c.regularize;
        o.keep_dense = false;
        o.events.pericenter = true;
        o.events.syzygy = true;
        o.events.levels = {level};
        const Trajectory traj = integrate(ic.state, mp, 0.0, t_end, o);
        auto* r = new lb_report;
        r->parts.emplace_back("trajectory.csv", trajectory_csv(traj));
        r->parts.emplace_back("events.csv", events_csv(traj));
        r->passed = traj.status == TrajectoryStatus::Complete ? 1 : 0;
        *out = r;
    });
}

lb_status lb_verify_sandwich(const lb_config* cfg, int jobs, lb_format fmt, lb_report** out) {
    LB_REQUIRE(cfg && out, "null argument");
    LB_REQUIRE(fmt == LB_FORMAT_JSON || fmt == LB_FORMAT_CSV, "sandwich reports are JSON or CSV");
    *out = nullptr;
    return guarded([&] {
        const SandwichReport rep = run_sandwich_experiment(cfg->cfg, jobs, fmt == LB_FORMAT_CSV);
        auto* r = new lb_report;
        if (fmt == LB_FORMAT_JSON) {
            r->parts.emplace_back("sandwich.json", sandwich_json(rep));
        } else {
            for (const SandwichSample& s : rep.samples) {
                if (!s.error.empty()) continue;
                const std::string stem = "deviation_" + std::to_string(s.ic.index);
                r->parts.emplace_back(stem + "_forward.csv", deviation_csv(s.forward));
                r->parts.emplace_back(stem + "_backward.csv", deviation_csv(s.backward));
            }
        }
        r->passed = rep.clean() ? 1 : 0;
        *out = r;
    });
}

lb_status lb_verify_theorem(const lb_config* cfg, int jobs, lb_format fmt, lb_report** out) {
    LB_REQUIRE(cfg && out, "null argument");
    LB_REQUIRE(fmt == LB_FORMAT_JSON || fmt == LB_FORMAT_CSV, "theorem reports are JSON or CSV");
    *out = nullptr;
    return guarded([&] {
        const TheoremReport rep = run_theorem_experiment(cfg->cfg, jobs);
        auto* r = new lb_report;
        if (fmt == LB_FORMAT_JSON)
            r->parts.emplace_back("theorem.json", theorem_json(rep));
        else
            r->parts.emplace_back("theorem.csv", theorem_csv(rep));
        r->passed = rep.all_entered() ? 1 : 0;
        *out = r;
    });
}

lb_status lb_appendix(int jobs, int samples, lb_format fmt, lb_report** out) {
    LB_REQUIRE(out, "null argument");
    LB_REQUIRE(samples >= 1, "samples must be >= 1");
    LB_REQUIRE(fmt == LB_FORMAT_JSON || fmt == LB_FORMAT_TEXT, "the appendix report is JSON or text");
    *out = nullptr;
    return guarded([&] {
        const AppendixReport rep = run_appendix_scenario(jobs, samples);
        auto* r = new lb_report;
        if (fmt == LB_FORMAT_JSON)
            r->parts.emplace_back("appendix.json", appendix_json(rep));
        else
            r->parts.emplace_back("appendix.txt", appendix_table(rep));
        r->passed = rep.ok() ? 1 : 0;
        *out = r;
    });
}

int lb_report_passed(const lb_report* rep) { return rep ? rep->passed : -1; }

size_t lb_report_part_count(const lb_report* rep) { return rep ? rep->parts.size() : 0; }

const char* lb_report_part_name(const lb_report* rep, size_t i) {
    return rep && i < rep->parts.size() ? rep->parts[i].first.c_str() : nullptr;
}

const char* lb_report_part_text(const lb_report* rep, size_t i) {
    return rep && i < rep->parts.size() ? rep->parts[i].second.c_str() : nullptr;
}

size_t lb_report_part_size(const lb_report* rep, size_t i) {
    return rep && i < rep->parts.size() ? rep->parts[i].second.size() : 0;
}

void lb_report_free(lb_report* rep) { delete rep; }

}  // extern "C"
