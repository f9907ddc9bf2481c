#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lunarbound/bounds.hpp"
#include "lunarbound/integrate.hpp"
#include "lunarbound/osculate.hpp"

namespace lunarbound {

struct Range {
    double lo = 0.0, hi = 0.0;
};

struct SamplerSpec {
    int count = 20;
    std::uint64_t seed = 0;
    bool seed_set = false;
    Range a_frac{0.1, 0.5};  // inner semi-major axis as a fraction of c_r
    Range e{0.0, 0.9};       // inner eccentricity
    // outer: initial I drawn log-uniformly, either absolute or relative to the run level
    std::optional<Range> I_abs;
    Range I_rel{1.0, 10.0};
    bool planar = false;
    int max_retries = 1000;
};

struct ScenarioConfig {
    double m[3] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    double H = -1.0 / 6;
    Vec3 J{0.0, 0.0, 0.0};
    int far_body = 3;
    SamplerSpec sampler;
    std::optional<double> level;
    std::optional<double> lambda;
    std::optional<double> B1;
    double tol = 1e-12;
    double budget_factor = 4.0;
    bool regularize = true;

    MassParams masses() const { return MassParams(m[0], m[1], m[2]); }
    /// Masses with the far body moved to slot 3 (all runs use this labeling).
    MassParams run_masses() const { return masses().relabeled(far_body); }
    double J_mag() const { return norm(J); }
};

/// Throws Error(InvalidArgument) naming the offending key.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig appendix_config();
/// Canonical JSON of the config (sorted keys), the input of the config hash.
std::string config_json(const ScenarioConfig& cfg);
std::uint64_t fnv1a64(const std::string& bytes);

/// Per-(seed, index, attempt) uniform stream in [0, 1).
class SampleRng {
public:
    SampleRng(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt);
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double log_uniform(double lo, double hi);
    Vec3 unit_vector();

private:
    std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t& state);

struct SampleIC {
    int index = 0;
    int attempts = 0;
    JacobiState state;
    double I = 0.0;
    double I_target = 0.0;
    double dH = 0.0;  // |H - H_target| / |H_target|
    double dJ = 0.0;  // |J - J_target| / |J_target| (absolute when J = 0)
};

/// Samples in the run labeling (far body in slot 3) with initial I in
/// [I_lo, I_hi]. Throws Error(Infeasible) naming the binding constraint.
std::vector<SampleIC> sample_initial_conditions(const ScenarioConfig& cfg, const BoundSet& bs, double I_lo,
                                                double I_hi);
/// Single sample by index, for parallel callers.
SampleIC sample_one(const ScenarioConfig& cfg, const BoundSet& bs, double I_lo, double I_hi, int index);

/// Chain for the run labeling: bound set for the far body plus I0 over all far bodies.
struct RunBounds {
    I0Result all;
    BoundSet bs;  // far body of the config, masses relabeled
    double I0 = 0.0;
};
RunBounds run_bounds(const ScenarioConfig& cfg);

// ---------------------------------------------------------------- theorem

struct DirectionResult {
    bool ran = false;
    bool entered = false;
    double t_entry = 0.0;
    double min_I = 0.0;
    double t_end = 0.0;
    std::string status;
    long steps = 0;
    double max_H_resid = 0.0;
    double max_J_resid = 0.0;
    int pericenters = 0;
    int collisions_regularized = 0;
};

struct TheoremSample {
    SampleIC ic;
    DirectionResult forward, backward;
    bool entered() const { return forward.entered || backward.entered; }
    std::string outcome;  // "entered", "budget_exhausted", "error"
    std::string error;
};

struct TheoremReport {
    ScenarioConfig cfg;
    RunBounds bounds;
    double level = 0.0;
    double budget_level = 0.0;  // level used for the time budget
    double budget = 0.0;
    std::vector<TheoremSample> samples;
    int entered = 0, budget_exhausted = 0, errors = 0;
    bool all_entered() const { return entered == static_cast<int>(samples.size()); }
};

TheoremReport run_theorem_experiment(const ScenarioConfig& cfg, int jobs = 1);

// ---------------------------------------------------------------- sandwich

struct SandwichSample {
    SampleIC ic;
    DeviationReport forward, backward;
    std::string error;
};

struct SandwichReport {
    ScenarioConfig cfg;
    RunBounds bounds;
    double I_bar = 0.0;
    double I_bar_plus = 0.0;
    std::vector<SandwichSample> samples;
    int violations = 0, errors = 0;
    bool clean() const { return violations == 0 && errors == 0; }
};

/// I_bar = cfg.level or R_bar; samples I(0) in [I_bar, 4(I_bar - alpha1 c_r^2)] unless I_abs is set.
SandwichReport run_sandwich_experiment(const ScenarioConfig& cfg, int jobs = 1, bool keep_series = false);

// ---------------------------------------------------------------- validity sweep

struct ValiditySweep {
    long requested = 0;
    long accepted = 0;
    long rejected = 0;
    long violations_g = 0, violations_g2 = 0, violations_r = 0, violations_J2 = 0;
    double worst_g = 0.0, worst_g2 = 0.0, worst_r = 0.0, worst_J2 = 0.0;  // measured / bound
    long total_violations() const { return violations_g + violations_g2 + violations_r + violations_J2; }
};

/// Random configurations on the H-level with r <= sigma rho and I > I*,
/// checked against the region constants (far body in slot 3 of mp).
ValiditySweep validity_sweep(const MassParams& mp, double H, double J, const RegionConstants& rc, long count,
                             std::uint64_t seed, int jobs = 1);

// ---------------------------------------------------------------- appendix

struct AppendixReport {
    RunBounds bounds;
    double I_star_euler = 0.0;
    bool I_star_ok = false;
    bool I_star2_below_I_M = false;
    bool ordering_ok = false;
    TheoremReport experiment;
    static constexpr double kMarchalI_M = 2.447363;
    static constexpr double kHenonBroucke = 2.402035;
    bool ok() const { return I_star_ok && I_star2_below_I_M && ordering_ok && experiment.all_entered(); }
};

AppendixReport run_appendix_scenario(int jobs = 1, int samples = 20);

// ---------------------------------------------------------------- output

std::string bounds_json(const ScenarioConfig& cfg, const RunBounds& rb);
std::string samples_json(const ScenarioConfig& cfg, const std::vector<SampleIC>& samples);
std::string theorem_json(const TheoremReport& rep);
std::string sandwich_json(const SandwichReport& rep);
std::string appendix_json(const AppendixReport& rep);
std::string appendix_table(const AppendixReport& rep);

std::string samples_csv(const std::vector<SampleIC>& samples);
std::string theorem_csv(const TheoremReport& rep);
std::string trajectory_csv(const Trajectory& traj);
std::string events_csv(const Trajectory& traj);
std::string deviation_csv(const DeviationReport& rep);

}  // namespace lunarbound
