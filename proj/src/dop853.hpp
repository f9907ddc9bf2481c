#pragma once

#include <array>
#include <functional>
#include <vector>

namespace lunarbound::detail {

/// Dormand-Prince 8(5,3) single-step engine with 7th-order dense output.
/// The caller drives the step loop; this class owns stage storage only.
class Dop853 {
public:
    using Rhs = std::function<void(double t, const double* y, double* dy)>;

    Dop853(int n, Rhs f);

    int size() const { return n_; }

    /// Evaluate f at (t, y) into k1. Must be called before the first step.
    void start(double t, const double* y);

    /// Trial step of size h from (t, y). Returns the weighted error norm;
    /// <= 1 means acceptable. `scale` (optional, length n) adds a per-component
    /// magnitude to the error weights.
    double attempt(double t, const double* y, double h, double rtol, double atol,
                   const double* scale = nullptr);

    /// Result of the last attempt.
    const std::vector<double>& y_new() const { return y5_; }

    /// Finalize an accepted attempt: evaluates f at the new point (FSAL) and,
    /// if `rc` is non-null, fills the 8*n dense-output coefficients.
    void accept(double t, const double* y, double h, double* rc);

    /// Evaluate dense output with coefficients rc at theta in [0, 1].
    static void dense(const double* rc, int n, double theta, double* out);

    /// Initial step estimate (Hairer's hinit).
    double initial_step(double t, const double* y, double hmax, double dir, double rtol, double atol);

    long evaluations() const { return nfev_; }

private:
    void eval(double t, const double* y, double* dy);

    int n_;
    Rhs f_;
    std::array<std::vector<double>, 10> k_;
    std::vector<double> w_, y5_, kb_;
    long nfev_ = 0;
};

/// Step-size controller (PI form of the reference implementation).
struct StepControl {
    double fac1 = 1.0 / 3.0;
    double fac2 = 6.0;
    double safe = 0.9;
    double beta = 0.04;
    double facold = 1e-4;
    bool reject = false;

    void reset() { facold = 1e-4; reject = false; }
    /// Returns the next step; `accepted` tells whether err <= 1.
    double next(double h, double err, bool& accepted);
};

}  // namespace lunarbound::detail
