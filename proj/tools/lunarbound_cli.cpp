// Command-line front end. Talks to the library only through lunarbound.h.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lunarbound/lunarbound.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerification = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string format;
    std::optional<double> tol;
    std::string regularize;
    int jobs = 0;
    std::optional<int> count;
    // bounds overrides
    std::vector<double> masses;
    std::optional<double> H;
    std::optional<double> J;
    // simulate
    int index = 0;
    double t_end = 0.0;
    // appendix
    int samples = 20;
};

int usage_error(const std::string& msg) {
    std::cerr << "lunarbound: " << msg << "\n";
    return kExitUsage;
}

int run_error(lb_status s) {
    std::cerr << "lunarbound: " << lb_status_name(s) << ": " << lb_last_error() << "\n";
    // bad input of any kind is a usage/config error; the rest are runtime failures
    if (s == LB_E_INVALID_ARGUMENT || s == LB_E_INFEASIBLE || s == LB_E_DOMAIN) return kExitUsage;
    return kExitRuntime;
}

bool read_file(const std::string& path, std::string& text) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    return true;
}

// config text: file or appendix defaults, with command-line overrides merged in
std::optional<std::string> config_text(const Options& o, std::string& err) {
    nlohmann::ordered_json j;
    if (!o.config_path.empty()) {
        std::string text;
        if (!read_file(o.config_path, text)) {
            err = "cannot read config '" + o.config_path + "'";
            return std::nullopt;
        }
        try {
            j = nlohmann::ordered_json::parse(text);
        } catch (const std::exception& e) {
            err = "config: invalid JSON: " + std::string(e.what());
            return std::nullopt;
        }
    } else {
        lb_config* c = nullptr;
        if (lb_config_appendix(&c) != LB_OK) {
            err = lb_last_error();
            return std::nullopt;
        }
        j = nlohmann::ordered_json::parse(lb_config_json(c));
        lb_config_free(c);
    }
    if (!o.masses.empty()) j["masses"] = o.masses;
    if (o.H) j["H"] = *o.H;
    if (o.J) j["J"] = *o.J;
    return j.dump();
}

lb_format parse_format(const std::string& f, lb_format fallback) {
    if (f.empty()) return fallback;
    if (f == "json") return LB_FORMAT_JSON;
    if (f == "csv") return LB_FORMAT_CSV;
    return LB_FORMAT_TEXT;
}

int emit(const lb_report* rep, const std::string& out_dir) {
    const size_t n = lb_report_part_count(rep);
    if (out_dir.empty()) {
        for (size_t i = 0; i < n; ++i) std::fwrite(lb_report_part_text(rep, i), 1, lb_report_part_size(rep, i), stdout);
        std::fflush(stdout);
        return kExitOk;
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) return usage_error("cannot create '" + out_dir + "': " + ec.message());
    for (size_t i = 0; i < n; ++i) {
        const std::filesystem::path p = std::filesystem::path(out_dir) / lb_report_part_name(rep, i);
        std::ofstream f(p, std::ios::binary);
        f.write(lb_report_part_text(rep, i), static_cast<std::streamsize>(lb_report_part_size(rep, i)));
        if (!f) {
            std::cerr << "lunarbound: cannot write " << p << "\n";
            return kExitRuntime;
        }
        std::cerr << "wrote " << p.string() << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bounds, simulation and verification for the three-body escape bound"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config_path, "scenario JSON (default: equal-mass appendix scenario)");
    app.add_option("--seed", o.seed, "sampler seed");
    app.add_option("--out", o.out_dir, "write report files into this directory instead of stdout");
    app.add_option("--format", o.format, "json, csv or text")->check(CLI::IsMember({"json", "csv", "text"}));
    app.add_option("--tol", o.tol, "integrator tolerance");
    app.add_option("--regularize", o.regularize, "on or off")->check(CLI::IsMember({"on", "off"}));
    app.add_option("--jobs", o.jobs, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--count", o.count, "number of samples")->check(CLI::PositiveNumber);

    auto* bounds = app.add_subcommand("bounds", "bound chain as JSON");
    bounds->add_option("--masses", o.masses, "m1 m2 m3")->expected(3);
    bounds->add_option("--H", o.H, "energy");
    bounds->add_option("--J", o.J, "angular momentum magnitude");
    auto* sample = app.add_subcommand("sample", "initial conditions at the configured levels");
    auto* simulate = app.add_subcommand("simulate", "one trajectory with its events as CSV");
    simulate->add_option("--index", o.index, "sample index")->check(CLI::NonNegativeNumber);
    simulate->add_option("--t-end", o.t_end, "end time (default: one deviation horizon)");
    auto* sandwich = app.add_subcommand("verify-sandwich", "deviation and sandwich estimates on samples");
    auto* theorem = app.add_subcommand("verify-theorem", "entry into I <= level within the time budget");
    auto* appendix = app.add_subcommand("appendix", "equal-mass appendix scenario");
    appendix->add_option("--samples", o.samples, "theorem samples")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return usage_error(e.what());
    }

    const int jobs = o.jobs > 0 ? o.jobs : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
    const auto t0 = std::chrono::steady_clock::now();
    lb_report* rep = nullptr;
    lb_status st = LB_OK;

    if (appendix->parsed()) {
        if (!o.config_path.empty() || o.seed || o.count) return usage_error("appendix takes no scenario options");
        const lb_format fmt = parse_format(o.format, LB_FORMAT_TEXT);
        if (fmt == LB_FORMAT_CSV) return usage_error("appendix writes text or json");
        st = lb_appendix(jobs, o.samples, fmt, &rep);
    } else {
        std::string err;
        const auto text = config_text(o, err);
        if (!text) return usage_error(err);
        lb_config* cfg = nullptr;
        st = lb_config_parse(text->c_str(), &cfg);
        if (st != LB_OK) return run_error(st);
        if (o.seed) lb_config_set_seed(cfg, *o.seed);
        if (o.count) lb_config_set_count(cfg, *o.count);
        if (!o.regularize.empty()) lb_config_set_regularize(cfg, o.regularize == "on");
        if (o.tol && lb_config_set_tol(cfg, *o.tol) != LB_OK) {
            lb_config_free(cfg);
            return run_error(LB_E_INVALID_ARGUMENT);
        }
        const lb_format fmt = parse_format(o.format, LB_FORMAT_JSON);
        if (fmt == LB_FORMAT_TEXT) {
            lb_config_free(cfg);
            return usage_error("text output is only available for appendix");
        }
        if (bounds->parsed()) {
            st = lb_bounds(cfg, fmt, &rep);
        } else if (sample->parsed()) {
            st = lb_sample(cfg, fmt, &rep);
        } else if (simulate->parsed()) {
            if (fmt != LB_FORMAT_CSV && !o.format.empty()) {
                lb_config_free(cfg);
                return usage_error("simulate writes CSV only");
            }
            st = lb_simulate(cfg, o.index, o.t_end, &rep);
        } else if (sandwich->parsed()) {
            st = lb_verify_sandwich(cfg, jobs, fmt, &rep);
        } else if (theorem->parsed()) {
            st = lb_verify_theorem(cfg, jobs, fmt, &rep);
        }
        lb_config_free(cfg);
    }
    if (st != LB_OK) return run_error(st);

    int code = emit(rep, o.out_dir);
    const int passed = lb_report_passed(rep);
    lb_report_free(rep);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "wall-clock %.3f s\n", secs);
    if (code != kExitOk) return code;
    const bool verification = sandwich->parsed() || theorem->parsed() || appendix->parsed();
    if (verification && passed == 0) return kExitVerification;
    if (simulate->parsed() && passed == 0) std::cerr << "lunarbound: trajectory did not reach t_end\n";
    return kExitOk;
}
