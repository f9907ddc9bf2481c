#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lunarbound/bounds.hpp"
#include "lunarbound/integrate.hpp"
#include "lunarbound/kepler.hpp"

namespace lunarbound {

enum class Body { Inner, Outer };

struct OsculatingOrbit {
    TwoBodyState state;  // kappa = mu (inner) or M (outer)
    KeplerElements elements;
};

OsculatingOrbit osculating_orbit(const JacobiState& s, const MassParams& mp, Body which);
OsculatingOrbit osculating_orbit(const Trajectory& traj, double t, Body which);

/// Constants of the deviation estimate at one level I_bar.
struct SandwichParams {
    double I_bar = 0.0;
    double rho_bar = 0.0;
    double epsilon = 0.0;
    double M = 0.0;
    double A = 0.0, a = 0.0, b = 0.0;
    double A1 = 0.0, B1 = 0.0;
    double c_J2 = 0.0;
    double c0 = 0.0;  // |xi2 x dxi2| at t = 0
    double k = 0.0;   // 2M + 3 c0^2 clamped to [2M, 2M + 3 c_J2^2]
    double omega = 0.0;
    double time_horizon = 0.0;

    double force_gap() const { return a * std::pow(epsilon, 4); }  // a eps^4
    /// Smallest rho where v1 is nondecreasing: 3 c0^2 / (2M).
    double rho_monotone() const { return 1.5 * c0 * c0 / M; }
    /// (2 a eps^4 / omega)(cosh(sqrt(omega) t) - 1)
    double eta_bound(double t) const;
    /// (2 a eps / k)(2 + exp(sqrt(omega) |t|))
    double eta_bound_exp(double t) const;
    double deviation_bound() const { return A1 * epsilon; }
    double ct2_bound() const { return b * std::pow(epsilon, 1.5); }
    /// A eps^3 |t|
    double ct_bound(double t) const { return A * std::pow(epsilon, 3) * std::fabs(t); }
};

/// bs must belong to the far body in slot 3 of mp. Throws Domain when
/// I_bar <= alpha1 c_r^2.
SandwichParams sandwich_params(const BoundSet& bs, const MassParams& mp, double I_bar, double c0);

/// v1(rho) = c0^2 rho^-3 - M rho^-2
double v1(const SandwichParams& sp, double rho);

struct CtDrift {
    bool applicable = true;
    std::string reason;
    double t_end = 0.0;
    double max_dc2 = 0.0;        // max |c_t^2 - c0^2|
    double max_dc_ratio = 0.0;   // max |c_t - c0| / (A eps^3 |t|)
    double bound = 0.0;          // b eps^{3/2}
    bool within() const { return max_dc2 <= bound && max_dc_ratio <= 1.0; }
};

/// Drift of c_t = |xi2 x dxi2| over nodes with |t - t_begin| <= |t_end - t_begin|.
/// Not applicable if the span exceeds the horizon or I drops below I_bar.
CtDrift ct_drift(const Trajectory& traj, double t_end, const SandwichParams& sp);

/// Comparison solutions of rho'' = v1(rho) -/+ a eps^4 started at (rho0, drho0).
/// Integrated in tau = |t| along `direction`; evaluation takes |t|.
class SandwichSolution {
public:
    int direction = 1;
    double rho_monotone = 0.0;
    double tau_end = 0.0;             // where integration stopped
    std::optional<double> tau_monotone_fail;  // rho_- fell below 3 c0^2/(2M)
    std::optional<double> tau_below(double level) const;  // first tau with rho_- < level

    /// {rho_-, rho_+} at tau in [0, tau_end]
    std::pair<double, double> at(double tau) const;

    struct Seg {
        double t0, h;
        double rc[32];
    };
    std::vector<Seg> segs;
};

/// With force_gap = 0 both solutions follow the osculating radial motion.
SandwichSolution sandwich_ode(double rho0, double drho0, const SandwichParams& sp, int direction, double tau_max,
                              double tol = 1e-12);

struct DeviationSample {
    double t, I, rho, rho_osc, rho_minus, rho_plus, dc2;
};

struct DeviationReport {
    bool applicable = true;
    std::string reason;
    int direction = 1;
    SandwichParams params;
    double I0 = 0.0;

    // windows, all measured in |t|
    double horizon = 0.0;
    double traj_span = 0.0;
    std::optional<double> true_exit;        // first |t| with I < I_bar
    std::optional<double> osc_exit;         // first |t| with rho_osc < rho_bar
    std::optional<double> monotone_fail;    // comparison hypothesis lost
    std::optional<double> lipschitz_exit;   // rho_- < rho_bar
    double region_window = 0.0;             // deviation and c_t checks
    double ordering_window = 0.0;           // sandwich ordering
    double eta_window = 0.0;                // eta estimate chain

    int nodes_region = 0, nodes_ordering = 0, nodes_eta = 0;

    // worst margins (bound - measured; negative is a violation)
    double deviation_max = 0.0;
    double deviation_bound = 0.0;
    std::optional<double> first_violation_t;
    std::string first_violation_kind;
    double ordering_worst = INFINITY;  // min over nodes of the four ordering gaps (scaled by rho)
    double eta_ratio_max = 0.0;        // eta / eta_bound
    double eta_chain_worst = INFINITY; // min of A1 eps - eta_bound_exp and eta_bound_exp - eta_bound
    CtDrift ct;
    int violations = 0;

    // strip exit: osculating orbit reaching rho_bar
    std::optional<double> I_at_osc_exit;
    double strip_exit_limit = 0.0;       // I_bar + 2 alpha2 A1 + lambda
    std::optional<bool> strip_exit_ok;

    std::vector<DeviationSample> series;  // filled when requested
};

struct VerifyOptions {
    double lambda = 0.5;
    double ordering_slack = 1e-10;  // relative to rho
    bool keep_series = false;
    double tol = 1e-12;
};

/// traj must start at t = 0 and run in one direction. bs belongs to far body 3 of mp.
DeviationReport verify_deviation(const Trajectory& traj, const BoundSet& bs, const MassParams& mp, double I_bar,
                                 const VerifyOptions& opt = {});

}  // namespace lunarbound
