#pragma once

#include "lunarbound/vec3.hpp"

namespace lunarbound {

enum class ConicClass { Elliptic, Parabolic, Hyperbolic, Radial };

const char* conic_name(ConicClass c);

struct TwoBodyState {
    Vec3 xi, dxi;
    double kappa = 1.0;
};

struct KeplerElements {
    double kappa = 1.0;
    double h = 0.0;
    Vec3 c_vec;
    double c = 0.0;
    Vec3 e_vec;
    double e = 0.0;
    double q_peri = 0.0;
    ConicClass conic = ConicClass::Elliptic;
    /// Sign of xi . dxi: -1 inbound, +1 outbound, 0 at an apsis.
    int radial_phase = 0;
    /// Semi-major axis for elliptic orbits, infinity otherwise.
    double a() const;
    /// Orbital period for elliptic orbits, infinity otherwise.
    double period() const;
};

KeplerElements elements_from_state(const TwoBodyState& s);

/// Exact Kepler flow over time t (negative t runs backward).
/// Throws CollisionError if a radial orbit reaches the center within |t|.
TwoBodyState propagate(const TwoBodyState& s, double t);

struct PericenterTime {
    double t = 0.0;     // |t|, always >= 0
    int direction = 1;  // +1: pericenter lies ahead, -1: it lies behind
};

/// Time to the nearest pericenter passage in the direction of motion
/// (backward for outbound states). Collision time for radial orbits.
PericenterTime time_to_pericenter(const TwoBodyState& s);

/// pi * rho0^{3/2} / sqrt(8 kappa): the fall time from rest.
double collision_time_bound(double rho0, double kappa);

/// Time of flight between radii r1, r2 with chord d at energy h, on the
/// short arc that does not contain apocenter.
double lambert_time_of_flight(double r1, double r2, double d, double h, double kappa);

/// c_J2^2 / kappa.
double pericenter_distance_bound(double c_J2, double kappa);

/// Stumpff functions c0..c3 at z.
void stumpff(double z, double c[4]);

}  // namespace lunarbound
