#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lunarbound/core.hpp"
#include "lunarbound/kepler.hpp"

namespace lunarbound {

enum class EventKind { ICrossing, OuterPericenter, Syzygy, CollisionRegularized };

const char* event_kind_name(EventKind k);

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::ICrossing;
    double level = 0.0;      // ICrossing
    int direction = 0;       // ICrossing: -1 downward, +1 upward
    int middle_mass = 0;     // Syzygy: 1, 2 or 3
    double duration = 0.0;   // CollisionRegularized: time spent in KS variables
    double min_r = 0.0;      // CollisionRegularized: smallest separation reached
    JacobiState state;
};

/// How the equations of motion are written during a run.
///  Direct       - 12-dimensional Jacobi system, optionally switching the
///                 binary to KS variables near collision.
///  Hierarchical - outer vector as exact Kepler reference plus integrated
///                 deviation; the binary follows its Kepler orbit. Only
///                 valid when alpha1 r^2 is below the resolution of I.
///  Auto         - Hierarchical when that condition holds at the start.
enum class Formulation { Auto, Direct, Hierarchical };

struct EventSpec {
    std::vector<double> levels;
    bool pericenter = false;
    bool syzygy = false;
    /// Stop at the first downward crossing of this level (or at t0 if
    /// the initial state already lies at or below it).
    std::optional<double> stop_below;
};

struct IntegrateOptions {
    double rtol = 1e-12;
    double atol = 1e-12;
    bool regularize = false;
    double r_switch = 0.0;  // 0: 1e-2 * beta1 / |H| (or 1e-2 * mean binary size if H >= 0)
    /// With regularize: keep the binary in KS variables for the whole run
    /// instead of switching at r_switch. Passages are still logged only
    /// when r drops below r_switch.
    bool ks_always = false;
    Formulation formulation = Formulation::Auto;
    long max_steps = 20'000'000;
    bool zero_g = false;
    bool keep_dense = true;
    EventSpec events;
};

enum class TrajectoryStatus { Complete, Incomplete, StepUnderflow, Singular };

const char* status_name(TrajectoryStatus s);

enum class SegmentMode { Direct, Regularized, Hierarchical };

/// One accepted step with its dense-output coefficients.
struct Segment {
    SegmentMode mode = SegmentMode::Direct;
    double t0 = 0.0, t1 = 0.0;
    double h = 0.0;  // step in the independent variable (s for Regularized)
    int n = 0;
    std::vector<double> rc;
    TwoBodyState ref1, ref2;  // Hierarchical: binary reference at t_ref1, outer reference at t0
    double t_ref1 = 0.0;
};

struct Node {
    double t = 0.0;
    JacobiState state;
    double I = 0.0;
    double H_resid = 0.0;
    double J_resid = 0.0;
};

class Trajectory {
public:
    MassParams mp{1.0, 1.0, 1.0};
    bool zero_g = false;
    double H0 = 0.0;
    Vec3 J0;
    std::vector<Node> nodes;
    std::vector<Segment> segments;
    std::vector<Event> events;
    TrajectoryStatus status = TrajectoryStatus::Complete;
    std::string message;
    bool stopped_at_event = false;
    bool initially_below_stop = false;
    long steps = 0;
    long rejected = 0;
    long rhs_evaluations = 0;
    Formulation formulation_used = Formulation::Direct;

    double t_begin() const { return nodes.front().t; }
    double t_end() const { return nodes.back().t; }
    bool has_dense() const { return !segments.empty(); }
    double max_H_resid() const;
    double max_J_resid() const;

    /// State at time t from dense output (t must lie in the covered span).
    JacobiState state_at(double t) const;
};

Trajectory integrate(const JacobiState& initial, const MassParams& mp, double t0, double t1,
                     const IntegrateOptions& opt = {});

/// Same as integrate with regularize forced on and Direct formulation.
Trajectory integrate_regularized(const JacobiState& initial, const MassParams& mp, double t0, double t1,
                                 IntegrateOptions opt = {});

struct CrossingScan {
    bool initially_inside = false;
    bool entirely_inside = false;
    std::vector<Event> events;
};

/// Post-hoc I-level crossings over the stored dense output.
CrossingScan detect_I_crossing(const Trajectory& traj, double level);

struct SyzygyScan {
    bool applicable = false;
    std::string reason;
    std::vector<Event> events;
};

/// Post-hoc syzygies; not applicable unless the motion is planar.
SyzygyScan detect_syzygy(const Trajectory& traj);

/// Index (1..3) of the body lying between the other two on a collinear configuration.
int middle_mass(const JacobiState& s, const MassParams& mp);

}  // namespace lunarbound
