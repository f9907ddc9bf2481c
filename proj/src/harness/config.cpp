#include <cmath>
#include <set>

#include "json_out.hpp"
#include "lunarbound/error.hpp"
#include "lunarbound/harness.hpp"

namespace lunarbound {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidArgument, "config: " + what); }

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) bad(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) bad("unknown key '" + where + (where.empty() ? "" : ".") + it.key() + "'");
}

double number(const json& j, const std::string& key) {
    if (!j.is_number()) bad("'" + key + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) bad("'" + key + "' must be finite");
    return v;
}

Range range(const json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 2) bad("'" + key + "' must be [lo, hi]");
    Range r{number(j[0], key), number(j[1], key)};
    if (!(r.lo <= r.hi)) bad("'" + key + "' needs lo <= hi");
    return r;
}

void validate(const ScenarioConfig& c) {
    for (double m : c.m)
        if (!(m > 0.0)) bad("masses must be positive");
    if (!(c.H < 0.0)) bad("H must be negative (the bounds require H < 0)");
    if (c.far_body < 1 || c.far_body > 3) bad("far_body must be 1, 2 or 3");
    const SamplerSpec& s = c.sampler;
    if (s.count < 1) bad("sampler.count must be >= 1");
    if (!(s.a_frac.lo > 0.0)) bad("sampler.inner.a_frac must be positive");
    if (!(s.e.lo >= 0.0 && s.e.hi < 1.0)) bad("sampler.inner.e must lie in [0, 1)");
    if (s.a_frac.hi * (1.0 + s.e.hi) > 1.0) bad("sampler.inner: a_frac * (1 + e) must stay <= 1 (r <= c_r)");
    if (s.I_abs && !(s.I_abs->lo > 0.0)) bad("sampler.outer.I must be positive");
    if (!(s.I_rel.lo > 0.0)) bad("sampler.outer.I_rel must be positive");
    if (c.level && !(*c.level > 0.0)) bad("level must be positive");
    if (c.lambda && !(*c.lambda > 0.0)) bad("lambda must be positive");
    if (c.B1 && !(*c.B1 >= 0.0)) bad("B1 must be non-negative");
    if (!(c.tol > 0.0 && c.tol < 1e-3)) bad("tol must lie in (0, 1e-3)");
    if (!(c.budget_factor > 0.0)) bad("budget_factor must be positive");
}

}  // namespace

// null stands for "not set", so the config echoed in a report parses back
ScenarioConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        bad(std::string("invalid JSON: ") + e.what());
    }
    only_keys(j, {"masses", "H", "J", "far_body", "sampler", "level", "lambda", "B1", "tol", "budget_factor",
                  "regularize"},
              "");
    ScenarioConfig c;
    if (j.contains("masses")) {
        const json& m = j["masses"];
        if (!m.is_array() || m.size() != 3) bad("'masses' must be [m1, m2, m3]");
        for (int i = 0; i < 3; ++i) c.m[i] = number(m[static_cast<size_t>(i)], "masses");
    }
    if (j.contains("H")) c.H = number(j["H"], "H");
    if (j.contains("J")) {
        const json& J = j["J"];
        if (J.is_number()) {
            const double v = number(J, "J");
            if (v < 0.0) bad("'J' magnitude must be non-negative");
            c.J = {0.0, 0.0, v};
        } else if (J.is_array() && J.size() == 3) {
            c.J = {number(J[0], "J"), number(J[1], "J"), number(J[2], "J")};
        } else {
            bad("'J' must be a number or [x, y, z]");
        }
    }
    if (j.contains("far_body")) {
        if (!j["far_body"].is_number_integer()) bad("'far_body' must be an integer");
        c.far_body = j["far_body"].get<int>();
    }
    if (j.contains("sampler")) {
        const json& s = j["sampler"];
        only_keys(s, {"count", "seed", "inner", "outer", "planar"}, "sampler");
        if (s.contains("count")) {
            if (!s["count"].is_number_integer()) bad("'sampler.count' must be an integer");
            c.sampler.count = s["count"].get<int>();
        }
        if (s.contains("seed") && !s["seed"].is_null()) {
            if (!s["seed"].is_number_unsigned()) bad("'sampler.seed' must be a non-negative integer");
            c.sampler.seed = s["seed"].get<std::uint64_t>();
            c.sampler.seed_set = true;
        }
        if (s.contains("planar")) {
            if (!s["planar"].is_boolean()) bad("'sampler.planar' must be a boolean");
            c.sampler.planar = s["planar"].get<bool>();
        }
        if (s.contains("inner")) {
            const json& in = s["inner"];
            only_keys(in, {"a_frac", "e"}, "sampler.inner");
            if (in.contains("a_frac")) c.sampler.a_frac = range(in["a_frac"], "sampler.inner.a_frac");
            if (in.contains("e")) c.sampler.e = range(in["e"], "sampler.inner.e");
        }
        if (s.contains("outer")) {
            const json& out = s["outer"];
            only_keys(out, {"I", "I_rel"}, "sampler.outer");
            if (out.contains("I") && out.contains("I_rel")) bad("sampler.outer takes 'I' or 'I_rel', not both");
            if (out.contains("I")) c.sampler.I_abs = range(out["I"], "sampler.outer.I");
            if (out.contains("I_rel")) c.sampler.I_rel = range(out["I_rel"], "sampler.outer.I_rel");
        }
    }
    if (j.contains("level") && !j["level"].is_null()) c.level = number(j["level"], "level");
    if (j.contains("lambda") && !j["lambda"].is_null()) c.lambda = number(j["lambda"], "lambda");
    if (j.contains("B1") && !j["B1"].is_null()) c.B1 = number(j["B1"], "B1");
    if (j.contains("tol")) c.tol = number(j["tol"], "tol");
    if (j.contains("budget_factor")) c.budget_factor = number(j["budget_factor"], "budget_factor");
    if (j.contains("regularize")) {
        if (!j["regularize"].is_boolean()) bad("'regularize' must be a boolean");
        c.regularize = j["regularize"].get<bool>();
    }
    validate(c);
    return c;
}

ScenarioConfig appendix_config() {
    ScenarioConfig c;
    c.J = {0.0, 0.0, std::sqrt(8.0) / 9.0};
    c.sampler.count = 20;
    c.sampler.seed = 1;
    c.sampler.seed_set = true;
    c.sampler.planar = true;  // exact J residual at the I0 scale needs the axis-aligned outer vector
    return c;
}

std::string config_json(const ScenarioConfig& c) {
    detail::ojson j;
    j["masses"] = {c.m[0], c.m[1], c.m[2]};
    j["H"] = c.H;
    j["J"] = {c.J.x, c.J.y, c.J.z};
    j["far_body"] = c.far_body;
    detail::ojson s;
    s["count"] = c.sampler.count;
    if (c.sampler.seed_set)
        s["seed"] = c.sampler.seed;
    else
        s["seed"] = nullptr;
    s["inner"] = {{"a_frac", {c.sampler.a_frac.lo, c.sampler.a_frac.hi}}, {"e", {c.sampler.e.lo, c.sampler.e.hi}}};
    if (c.sampler.I_abs)
        s["outer"] = {{"I", {c.sampler.I_abs->lo, c.sampler.I_abs->hi}}};
    else
        s["outer"] = {{"I_rel", {c.sampler.I_rel.lo, c.sampler.I_rel.hi}}};
    s["planar"] = c.sampler.planar;
    j["sampler"] = s;
    j["level"] = c.level ? detail::ojson(*c.level) : detail::ojson(nullptr);
    j["lambda"] = c.lambda ? detail::ojson(*c.lambda) : detail::ojson(nullptr);
    j["B1"] = c.B1 ? detail::ojson(*c.B1) : detail::ojson(nullptr);
    j["tol"] = c.tol;
    j["budget_factor"] = c.budget_factor;
    j["regularize"] = c.regularize;
    return detail::dump17(j, 0);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace lunarbound
