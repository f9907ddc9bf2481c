#pragma once

#include <array>

#include "lunarbound/error.hpp"
#include "lunarbound/vec3.hpp"

namespace lunarbound {

/// Masses and the derived constants of the Jacobi splitting. G = 1.
class MassParams {
public:
    MassParams(double m1, double m2, double m3);

    double m1() const { return m_[0]; }
    double m2() const { return m_[1]; }
    double m3() const { return m_[2]; }
    double m(int i) const { return m_[i]; }
    double mu() const { return m_[0] + m_[1]; }
    double M() const { return m_[0] + m_[1] + m_[2]; }
    double alpha1() const { return m_[0] * m_[1] / mu(); }
    double alpha2() const { return m_[2] * mu() / M(); }
    double beta1() const { return mu() * alpha1(); }
    double beta2() const { return M() * alpha2(); }
    double mu1() const { return m_[0] / mu(); }
    double mu2() const { return m_[1] / mu(); }

    /// Relabel so that body `far` (1-based) plays the role of body 3.
    MassParams relabeled(int far) const;

private:
    std::array<double, 3> m_;
};

struct CartesianState {
    std::array<Vec3, 3> q;
    std::array<Vec3, 3> v;
};

struct JacobiState {
    Vec3 xi1, dxi1, xi2, dxi2;

    double r() const { return norm(xi1); }
    double rho() const { return norm(xi2); }
};

struct AngularMomentum {
    Vec3 J, J1, J2;
};

struct EnergySplit {
    double H, H1, H2, g;
};

struct Gradients {
    Vec3 g_xi1, g_xi2;
};

struct JacobiRates {
    Vec3 dxi1, ddxi1, dxi2, ddxi2;
};

/// Rejects states whose center of mass or total momentum is off by more
/// than 1e-9 relative to the state norm.
JacobiState to_jacobi(const CartesianState& s, const MassParams& mp);
CartesianState from_jacobi(const JacobiState& s, const MassParams& mp);

double moment_of_inertia(const JacobiState& s, const MassParams& mp);
double moment_of_inertia(const CartesianState& s, const MassParams& mp);
AngularMomentum angular_momentum(const JacobiState& s, const MassParams& mp);
Vec3 angular_momentum(const CartesianState& s, const MassParams& mp);
double cartesian_energy(const CartesianState& s, const MassParams& mp);

double perturbation(const Vec3& xi1, const Vec3& xi2, const MassParams& mp);
EnergySplit energy_split(const JacobiState& s, const MassParams& mp);
Gradients perturbation_gradients(const Vec3& xi1, const Vec3& xi2, const MassParams& mp);
inline Gradients perturbation_gradients(const JacobiState& s, const MassParams& mp) {
    return perturbation_gradients(s.xi1, s.xi2, mp);
}

/// Right-hand side of the perturbed Kepler pair. `zero_g` drops the coupling.
JacobiRates vector_field(const JacobiState& s, const MassParams& mp, bool zero_g = false);

}  // namespace lunarbound
