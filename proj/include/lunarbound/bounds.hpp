#pragma once

#include <array>
#include <optional>

#include "lunarbound/core.hpp"

namespace lunarbound {

/// Collinear central configuration with body `middle` (1..3) between the
/// other two, normalized to I = 1.
struct EulerConfig {
    int middle = 0;
    double z = 0.0;        // ratio of the outer gap to the inner gap
    double x[3] = {0, 0, 0};  // positions on the line, indexed by body
    double U_hat = 0.0;
    double residual = 0.0;  // quintic residual at z
};

EulerConfig euler_configuration(const MassParams& mp, int middle);

/// Largest saddle value of U on I = 1 over the three orderings.
double euler_U_max(const MassParams& mp);

/// Apocenter of the Euler homographic motion at (H, J): the raw lunar-region
/// threshold before the region constants are enforced.
double i_star(const MassParams& mp, double H, double J);

/// Largest |J| for which i_star is defined at energy H.
double i_star_J_max(const MassParams& mp, double H);

struct RegionConstants {
    double sigma = 0.5;
    double c_r = 0.0;
    double c_J2 = 0.0;
    double c_g = 0.0;
    double c_g2 = 0.0;
    double rho_min = 0.0;
    double rho_sep = 0.0;
    double I_star_euler = 0.0;
    double I_star = 0.0;  // enforced threshold
};

RegionConstants region_constants(const MassParams& mp, double H, double J, double sigma = 0.5);

double i_star_star(const RegionConstants& rc, const MassParams& mp);

struct DeviationConstants {
    double A = 0.0, a = 0.0, b = 0.0, A1 = 0.0, B1 = 0.0, R_bar = 0.0;
};

/// B1 defaults to 2^{3/2} pi / sqrt(M).
double default_B1(const MassParams& mp);

DeviationConstants deviation_constants(const RegionConstants& rc, const MassParams& mp,
                                       std::optional<double> B1 = std::nullopt);

struct StripMain {
    double R = 0.0;
    double lambda = 0.0;
    double lambda_prime = 0.0;
    double R_bar_lambda = 0.0;
    double R_lambda = 0.0;
    double alpha1_cr2 = 0.0;

    double I_bar_plus(double I_bar) const { return 4.0 * (I_bar - alpha1_cr2); }
    double I_bar_s(double s) const { return R_bar_lambda + s; }
};

StripMain strip_and_main(const RegionConstants& rc, const DeviationConstants& dc, double I_star2,
                         const MassParams& mp, double lambda);

double marchal_phi(const MassParams& mp, double lam, double gamma);

struct MarchalComparison {
    double lam_max = 0.0;
    double lam_at_min = 0.0;
    double gamma_at_min = 0.0;
    double delta = 0.0;
    double rho_M = 0.0;
    double I_M = 0.0;
};

MarchalComparison marchal_comparison(const RegionConstants& rc, const MassParams& mp);

struct BoundOptions {
    double sigma = 0.5;
    std::optional<double> B1;
    std::optional<double> lambda;  // fixed strip parameter instead of minimizing over (0,1)
};

/// Full chain for one far body (masses already relabeled so the far body is 3).
struct BoundSet {
    int far_body = 3;
    double H = 0.0, J = 0.0;
    RegionConstants region;
    double I_star2 = 0.0;
    DeviationConstants deviation;
    StripMain strip;
    MarchalComparison marchal;
    double I0 = 0.0;

    double alpha1_cr2(const MassParams& mp) const { return mp.alpha1() * region.c_r * region.c_r; }
    double rho_bar(const MassParams& mp, double I_bar) const;
    double epsilon(const MassParams& mp, double I_bar) const { return 1.0 / rho_bar(mp, I_bar); }
};

/// Runs the chain for masses `mp` with the far body already in slot 3.
BoundSet bound_chain(const MassParams& mp, double H, double J, const BoundOptions& opt = {});

struct I0Result {
    double I0 = 0.0;
    int far_body = 3;                 // component attaining the maximum
    std::array<BoundSet, 3> per_far;  // index k-1 for far body k
    const BoundSet& at(int k) const { return per_far.at(static_cast<size_t>(k - 1)); }
};

/// I0 as the maximum over the three far-body choices.
I0Result i0(const MassParams& mp, double H, double J, const BoundOptions& opt = {});

}  // namespace lunarbound
