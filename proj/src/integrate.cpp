#include "lunarbound/integrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <boost/math/tools/toms748_solve.hpp>

#include "dop853.hpp"

namespace lunarbound {

namespace {

using detail::Dop853;
using detail::StepControl;

constexpr int kDirectN = 12;
constexpr int kKsN = 16;
constexpr int kHierN = 6;
// Hierarchical mode applies while alpha1 r_max^2 <= this fraction of I.
constexpr double kHierResolution = 1e-17;
constexpr double kHierStepFraction = 0.05;
constexpr double kUround = 2.3e-16;

using Vec4 = std::array<double, 4>;

Vec4 ks_L(const double* u, const Vec4& v) {
    return {u[0] * v[0] - u[1] * v[1] - u[2] * v[2] + u[3] * v[3],
            u[1] * v[0] + u[0] * v[1] - u[3] * v[2] - u[2] * v[3],
            u[2] * v[0] + u[3] * v[1] + u[0] * v[2] + u[1] * v[3],
            u[3] * v[0] - u[2] * v[1] + u[1] * v[2] - u[0] * v[3]};
}

Vec4 ks_LT(const double* u, const Vec4& w) {
    return {u[0] * w[0] + u[1] * w[1] + u[2] * w[2] + u[3] * w[3],
            -u[1] * w[0] + u[0] * w[1] + u[3] * w[2] - u[2] * w[3],
            -u[2] * w[0] - u[3] * w[1] + u[0] * w[2] + u[1] * w[3],
            u[3] * w[0] - u[2] * w[1] + u[1] * w[2] - u[0] * w[3]};
}

Vec3 ks_position(const double* u) {
    const Vec4 x = ks_L(u, {u[0], u[1], u[2], u[3]});
    return {x[0], x[1], x[2]};
}

Vec3 ks_velocity(const double* u, const double* w) {
    const double r = u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[3] * u[3];
    const Vec4 x = ks_L(u, {w[0], w[1], w[2], w[3]});
    return Vec3{x[0], x[1], x[2]} * (2.0 / r);
}

void ks_from(const Vec3& x, const Vec3& v, double* u, double* w) {
    const double r = norm(x);
    if (x.x >= 0.0) {
        u[0] = std::sqrt(0.5 * (r + x.x));
        u[3] = 0.0;
        u[1] = x.y / (2.0 * u[0]);
        u[2] = x.z / (2.0 * u[0]);
    } else {
        u[1] = std::sqrt(0.5 * (r - x.x));
        u[2] = 0.0;
        u[0] = x.y / (2.0 * u[1]);
        u[3] = x.z / (2.0 * u[1]);
    }
    const Vec4 up = ks_LT(u, {v.x, v.y, v.z, 0.0});
    for (int i = 0; i < 4; ++i) w[i] = 0.5 * up[i];
}

void pack_direct(const JacobiState& s, double* y) {
    const Vec3* parts[4] = {&s.xi1, &s.dxi1, &s.xi2, &s.dxi2};
    for (int p = 0; p < 4; ++p)
        for (int i = 0; i < 3; ++i) y[3 * p + i] = (*parts[p])[i];
}

JacobiState unpack_direct(const double* y) {
    JacobiState s;
    s.xi1 = {y[0], y[1], y[2]};
    s.dxi1 = {y[3], y[4], y[5]};
    s.xi2 = {y[6], y[7], y[8]};
    s.dxi2 = {y[9], y[10], y[11]};
    return s;
}

void pack_ks(const JacobiState& s, double t, const MassParams& mp, double* y) {
    ks_from(s.xi1, s.dxi1, y, y + 4);
    y[8] = 0.5 * norm2(s.dxi1) - mp.mu() / s.r();
    y[9] = t;
    for (int i = 0; i < 3; ++i) {
        y[10 + i] = s.xi2[i];
        y[13 + i] = s.dxi2[i];
    }
}

JacobiState unpack_ks(const double* y) {
    JacobiState s;
    s.xi1 = ks_position(y);
    const double r = y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
    s.dxi1 = r > 0.0 ? ks_velocity(y, y + 4) : Vec3{};
    s.xi2 = {y[10], y[11], y[12]};
    s.dxi2 = {y[13], y[14], y[15]};
    return s;
}

struct Point {
    double t;
    JacobiState s;
};

Point eval_segment(const Segment& seg, double theta) {
    std::array<double, kKsN> y{};
    Dop853::dense(seg.rc.data(), seg.n, theta, y.data());
    switch (seg.mode) {
        case SegmentMode::Direct:
            return {seg.t0 + theta * seg.h, unpack_direct(y.data())};
        case SegmentMode::Regularized:
            return {y[9], unpack_ks(y.data())};
        case SegmentMode::Hierarchical: {
            const double dt = theta * seg.h;
            const double t = seg.t0 + dt;
            const TwoBodyState o = propagate(seg.ref2, dt);
            const TwoBodyState b = propagate(seg.ref1, t - seg.t_ref1);
            JacobiState s;
            s.xi1 = b.xi;
            s.dxi1 = b.dxi;
            s.xi2 = o.xi + Vec3{y[0], y[1], y[2]};
            s.dxi2 = o.dxi + Vec3{y[3], y[4], y[5]};
            return {t, s};
        }
    }
    return {};
}

double polish(const std::function<double(double)>& f, double a, double b, double fa, double fb) {
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    std::uintmax_t iters = 200;
    boost::math::tools::eps_tolerance<double> tol(50);
    const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    return 0.5 * (r.first + r.second);
}

// Scalar event functions over a segment, with the physical-time sign
// convention handled by the caller.
struct RootHit {
    double theta;
    int from_sign;  // sign of f before the root along increasing theta
};

std::vector<RootHit> scan(const std::function<double(double)>& f, double theta_end, int samples) {
    std::vector<RootHit> hits;
    double ta = 0.0, fa = f(0.0);
    for (int j = 1; j <= samples; ++j) {
        const double tb = theta_end * j / samples;
        const double fb = f(tb);
        if ((fa < 0.0 && fb >= 0.0) || (fa > 0.0 && fb <= 0.0)) {
            const double th = polish(f, ta, tb, fa, fb);
            hits.push_back({th, fa < 0.0 ? -1 : 1});
        }
        ta = tb;
        fa = fb;
    }
    return hits;
}

int samples_for(const Segment& seg) { return seg.mode == SegmentMode::Hierarchical ? 16 : 4; }

Vec3 plane_normal(const JacobiState& s, const Vec3& J) {
    if (norm(J) > 0.0) return J / norm(J);
    Vec3 n = cross(s.xi1, s.xi2);
    if (norm(n) > 0.0) return n / norm(n);
    n = cross(s.xi1, s.dxi1);
    if (norm(n) > 0.0) return n / norm(n);
    n = cross(s.xi2, s.dxi2);
    if (norm(n) > 0.0) return n / norm(n);
    // Motion confined to a line: any normal of that line will do.
    const Vec3 a = norm(s.xi1) > 0.0 ? s.xi1 : s.xi2;
    n = cross(a, std::fabs(a.x) < 0.9 * norm(a) ? Vec3{1, 0, 0} : Vec3{0, 1, 0});
    return n / norm(n);
}

bool is_planar(const JacobiState& s, const Vec3& n) {
    const double scale = std::max({norm(s.xi1), norm(s.xi2), 1e-300});
    const double vscale = std::max({norm(s.dxi1), norm(s.dxi2), 1e-300});
    return std::fabs(dot(n, s.xi1)) <= 1e-10 * scale && std::fabs(dot(n, s.xi2)) <= 1e-10 * scale &&
           std::fabs(dot(n, s.dxi1)) <= 1e-10 * vscale && std::fabs(dot(n, s.dxi2)) <= 1e-10 * vscale;
}

double syzygy_function(const JacobiState& s, const Vec3& n) {
    // n . ((q2 - q1) x (q3 - q1)) reduces to n . (xi1 x xi2)
    return dot(n, cross(s.xi1, s.xi2));
}

double r_max_inner(const JacobiState& s, const MassParams& mp) {
    const double e1 = 0.5 * norm2(s.dxi1) - mp.mu() / s.r();
    if (e1 >= 0.0) return INFINITY;
    return mp.mu() / (-e1);  // apocenter <= 2a
}

class Runner {
public:
    Runner(const JacobiState& init, const MassParams& mp, double t0, double t1, const IntegrateOptions& opt)
        : mp_(mp), opt_(opt), t0_(t0), t1_(t1), dir_(t1 >= t0 ? 1.0 : -1.0),
          direct_(kDirectN, [this](double, const double* y, double* dy) { rhs_direct(y, dy); }),
          ks_(kKsN, [this](double, const double* y, double* dy) { rhs_ks(y, dy); }),
          hier_(kHierN, [this](double t, const double* y, double* dy) { rhs_hier(t, y, dy); }) {
        traj_.mp = mp;
        traj_.zero_g = opt.zero_g;
        state_ = init;
        t_ = t0;
    }

    Trajectory run();

private:
    void rhs_direct(const double* y, double* dy) const {
        const JacobiRates d = vector_field(unpack_direct(y), mp_, opt_.zero_g);
        pack_direct({d.dxi1, d.ddxi1, d.dxi2, d.ddxi2}, dy);
    }

    void rhs_ks(const double* y, double* dy) const {
        const double* u = y;
        const double* w = y + 4;
        const double r = u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[3] * u[3];
        const Vec3 xi1 = ks_position(u);
        const Vec3 xi2{y[10], y[11], y[12]};
        const double rho = norm(xi2);
        if (rho == 0.0) throw Error(ErrorCode::Singular, "outer collision");
        Vec3 P, a2 = (-mp_.M() / (rho * rho * rho)) * xi2;
        if (!opt_.zero_g) {
            const Gradients gr = perturbation_gradients(xi1, xi2, mp_);
            P = -gr.g_xi1 / mp_.alpha1();
            a2 -= gr.g_xi2 / mp_.alpha2();
        }
        const Vec4 LTP = ks_LT(u, {P.x, P.y, P.z, 0.0});
        const double e1 = y[8];
        double wl = 0.0;
        for (int i = 0; i < 4; ++i) {
            dy[i] = w[i];
            dy[4 + i] = 0.5 * e1 * u[i] + 0.5 * r * LTP[i];
            wl += w[i] * LTP[i];
        }
        dy[8] = 2.0 * wl;
        dy[9] = r;
        for (int i = 0; i < 3; ++i) {
            dy[10 + i] = r * y[13 + i];
            dy[13 + i] = r * a2[i];
        }
    }

    void rhs_hier(double t, const double* y, double* dy) const {
        const TwoBodyState o = propagate(ref2_, t - t_ref2_);
        const TwoBodyState b = propagate(ref1_, t - t_ref1_);
        const Vec3 xi2 = o.xi + Vec3{y[0], y[1], y[2]};
        const double rho = norm(xi2);
        const double rk = norm(o.xi);
        Vec3 acc = (-mp_.M() / (rho * rho * rho)) * xi2 + (mp_.M() / (rk * rk * rk)) * o.xi;
        if (!opt_.zero_g) acc -= perturbation_gradients(b.xi, xi2, mp_).g_xi2 / mp_.alpha2();
        for (int i = 0; i < 3; ++i) {
            dy[i] = y[3 + i];
            dy[3 + i] = acc[i];
        }
    }

    bool hierarchical_ok(const JacobiState& s) const {
        const double rm = r_max_inner(s, mp_);
        return std::isfinite(rm) && mp_.alpha1() * rm * rm <= kHierResolution * moment_of_inertia(s, mp_);
    }

    Node make_node(double t, const JacobiState& s) const {
        Node n;
        n.t = t;
        n.state = s;
        n.I = moment_of_inertia(s, mp_);
        try {
            const EnergySplit e = energy_split(s, mp_);
            n.H_resid = std::fabs(e.H - traj_.H0) / std::max(std::fabs(traj_.H0), 1e-300);
        } catch (const Error&) {
            n.H_resid = 0.0;
        }
        const Vec3 dJ = angular_momentum(s, mp_).J - traj_.J0;
        const double jn = norm(traj_.J0);
        n.J_resid = jn > 0.0 ? norm(dJ) / jn : norm(dJ);
        return n;
    }

    // Scans a freshly accepted segment up to theta_end. Returns theta of a
    // stop event if one occurs.
    std::optional<double> scan_events(const Segment& seg);

    void enter_mode(SegmentMode m);
    void close_band();
    void update_band();

    MassParams mp_;
    IntegrateOptions opt_;
    double t0_, t1_, dir_;
    Dop853 direct_, ks_, hier_;
    Trajectory traj_;
    JacobiState state_;
    double t_ = 0.0;
    SegmentMode mode_ = SegmentMode::Direct;
    std::vector<double> y_;
    double h_ = 0.0;  // step in the independent variable of the current mode
    StepControl ctl_;
    double r_switch_ = 0.0;
    TwoBodyState ref1_, ref2_;
    double t_ref1_ = 0.0, t_ref2_ = 0.0;
    Vec3 normal_;
    bool planar_ = false;
    // close-approach band r < r_switch (left at 2 r_switch) for passage durations
    bool band_ = false;
    double band_enter_t_ = 0.0;
    std::vector<size_t> pending_passages_;
};

std::optional<double> Runner::scan_events(const Segment& seg) {
    const EventSpec& ev = opt_.events;
    const int K = samples_for(seg);
    struct Found {
        double theta;
        Event e;
        bool stop;
    };
    std::vector<Found> found;

    auto add = [&](double theta, Event e, bool stop) {
        const Point p = eval_segment(seg, theta);
        e.t = p.t;
        e.state = p.s;
        found.push_back({theta, e, stop});
    };

    std::vector<double> levels = ev.levels;
    if (ev.stop_below && std::find(levels.begin(), levels.end(), *ev.stop_below) == levels.end())
        levels.push_back(*ev.stop_below);
    for (double level : levels) {
        auto f = [&](double th) { return moment_of_inertia(eval_segment(seg, th).s, mp_) - level; };
        for (const RootHit& hit : scan(f, 1.0, K)) {
            // along the integration direction: from above to below is an entry
            const bool entry = hit.from_sign > 0;
            Event e;
            e.kind = EventKind::ICrossing;
            e.level = level;
            e.direction = static_cast<int>((entry ? -1.0 : 1.0) * dir_);
            const bool stop = entry && ev.stop_below && level == *ev.stop_below;
            const bool report = std::find(ev.levels.begin(), ev.levels.end(), level) != ev.levels.end() || stop;
            if (report) add(hit.theta, e, stop);
        }
    }
    if (ev.pericenter) {
        auto f = [&](double th) {
            const JacobiState s = eval_segment(seg, th).s;
            return dot(s.xi2, s.dxi2);
        };
        for (const RootHit& hit : scan(f, 1.0, K)) {
            const int phys_from = static_cast<int>(hit.from_sign * dir_);
            if (phys_from < 0) {
                Event e;
                e.kind = EventKind::OuterPericenter;
                add(hit.theta, e, false);
            }
        }
    }
    if (ev.syzygy && planar_) {
        auto f = [&](double th) { return syzygy_function(eval_segment(seg, th).s, normal_); };
        for (const RootHit& hit : scan(f, 1.0, K)) {
            Event e;
            e.kind = EventKind::Syzygy;
            const Point p = eval_segment(seg, hit.theta);
            e.middle_mass = middle_mass(p.s, mp_);
            add(hit.theta, e, false);
        }
    }
    if (seg.mode == SegmentMode::Regularized) {
        auto f = [&](double th) {
            std::array<double, kKsN> y{};
            Dop853::dense(seg.rc.data(), seg.n, th, y.data());
            return y[0] * y[4] + y[1] * y[5] + y[2] * y[6] + y[3] * y[7];
        };
        for (const RootHit& hit : scan(f, 1.0, K)) {
            const int phys_from = static_cast<int>(hit.from_sign * dir_);
            if (phys_from < 0) {
                Event e;
                e.kind = EventKind::CollisionRegularized;
                const Point p = eval_segment(seg, hit.theta);
                e.min_r = p.s.r();
                // with KS throughout, ordinary binary pericenters are not passages
                if (!band_ && e.min_r >= r_switch_) continue;
                if (!band_) {
                    band_ = true;
                    band_enter_t_ = seg.t0;
                }
                add(hit.theta, e, false);
            }
        }
    }

    std::sort(found.begin(), found.end(), [](const Found& a, const Found& b) { return a.theta < b.theta; });
    std::optional<double> stop_theta;
    for (const Found& f : found) {
        if (stop_theta) break;
        traj_.events.push_back(f.e);
        if (f.e.kind == EventKind::CollisionRegularized) pending_passages_.push_back(traj_.events.size() - 1);
        if (f.stop) stop_theta = f.theta;
    }
    return stop_theta;
}

void Runner::close_band() {
    const double duration = std::fabs(t_ - band_enter_t_);
    for (size_t idx : pending_passages_) traj_.events[idx].duration = duration;
    pending_passages_.clear();
    band_ = false;
}

void Runner::update_band() {
    const double r = state_.r();
    if (!band_ && r < r_switch_) {
        band_ = true;
        band_enter_t_ = t_;
    } else if (band_ && r > 2.0 * r_switch_) {
        close_band();
    }
}

void Runner::enter_mode(SegmentMode m) {
    const double r = state_.r();
    const SegmentMode old = mode_;
    mode_ = m;
    ctl_.reset();
    switch (m) {
        case SegmentMode::Direct:
            y_.assign(kDirectN, 0.0);
            pack_direct(state_, y_.data());
            direct_.start(t_, y_.data());
            if (old == SegmentMode::Regularized) h_ *= r;
            break;
        case SegmentMode::Regularized:
            y_.assign(kKsN, 0.0);
            pack_ks(state_, t_, mp_, y_.data());
            ks_.start(0.0, y_.data());
            h_ /= r;
            break;
        case SegmentMode::Hierarchical:
            y_.assign(kHierN, 0.0);
            ref1_ = {state_.xi1, state_.dxi1, mp_.mu()};
            t_ref1_ = t_;
            ref2_ = {state_.xi2, state_.dxi2, mp_.M()};
            t_ref2_ = t_;
            hier_.start(t_, y_.data());
            break;
    }
}

Trajectory Runner::run() {
    for (const Vec3* v : {&state_.xi1, &state_.dxi1, &state_.xi2, &state_.dxi2})
        if (!std::isfinite(v->x) || !std::isfinite(v->y) || !std::isfinite(v->z))
            throw Error(ErrorCode::InvalidArgument, "non-finite initial state");
    if (!std::isfinite(t0_) || !std::isfinite(t1_)) throw Error(ErrorCode::InvalidArgument, "non-finite time span");
    traj_.H0 = energy_split(state_, mp_).H;
    traj_.J0 = angular_momentum(state_, mp_).J;
    traj_.nodes.push_back(make_node(t_, state_));

    normal_ = plane_normal(state_, traj_.J0);
    planar_ = is_planar(state_, normal_);

    const EventSpec& ev = opt_.events;
    if (ev.syzygy && planar_ && syzygy_function(state_, normal_) == 0.0) {
        Event e;
        e.kind = EventKind::Syzygy;
        e.t = t_;
        e.state = state_;
        e.middle_mass = middle_mass(state_, mp_);
        traj_.events.push_back(e);
    }
    if (ev.stop_below && moment_of_inertia(state_, mp_) <= *ev.stop_below) {
        traj_.initially_below_stop = true;
        traj_.stopped_at_event = true;
        traj_.status = TrajectoryStatus::Complete;
        return std::move(traj_);
    }
    if (t1_ == t0_) return std::move(traj_);

    if (opt_.r_switch > 0.0) {
        r_switch_ = opt_.r_switch;
    } else if (traj_.H0 < 0.0) {
        r_switch_ = 1e-2 * mp_.beta1() / std::fabs(traj_.H0);
    } else {
        r_switch_ = 1e-2 * state_.r();
    }

    Formulation form = opt_.formulation;
    if (form == Formulation::Auto) form = hierarchical_ok(state_) ? Formulation::Hierarchical : Formulation::Direct;
    if (form == Formulation::Hierarchical && !hierarchical_ok(state_))
        throw Error(ErrorCode::InvalidArgument,
                    "hierarchical formulation requested but the binary is not negligible in I");
    traj_.formulation_used = form;

    const double span = std::fabs(t1_ - t0_);
    if (form == Formulation::Hierarchical) {
        enter_mode(SegmentMode::Hierarchical);
        h_ = dir_ * std::min(span, kHierStepFraction * std::pow(state_.rho(), 1.5) / std::sqrt(mp_.M()));
    } else if (opt_.regularize && (opt_.ks_always || state_.r() < r_switch_)) {
        mode_ = SegmentMode::Direct;
        y_.assign(kDirectN, 0.0);
        pack_direct(state_, y_.data());
        direct_.start(t_, y_.data());
        h_ = direct_.initial_step(t_, y_.data(), span, dir_, opt_.rtol, opt_.atol);
        enter_mode(SegmentMode::Regularized);
    } else {
        mode_ = SegmentMode::Direct;
        y_.assign(kDirectN, 0.0);
        pack_direct(state_, y_.data());
        direct_.start(t_, y_.data());
        h_ = direct_.initial_step(t_, y_.data(), span, dir_, opt_.rtol, opt_.atol);
    }

    if (opt_.regularize) update_band();

    const bool need_dense = opt_.keep_dense || !ev.levels.empty() || ev.pericenter || ev.syzygy ||
                            ev.stop_below.has_value() || opt_.regularize;
    std::array<double, kHierN> scale{};

    while (true) {
        if ((t1_ - t_) * dir_ <= 0.0) break;
        if (traj_.steps >= opt_.max_steps) {
            traj_.status = TrajectoryStatus::Incomplete;
            traj_.message = "step budget exhausted";
            break;
        }
        Dop853& st = mode_ == SegmentMode::Direct ? direct_ : (mode_ == SegmentMode::Regularized ? ks_ : hier_);
        const double indep = mode_ == SegmentMode::Regularized ? 0.0 : t_;
        double h = h_;
        bool last = false;
        if (mode_ == SegmentMode::Hierarchical) {
            const double cap = kHierStepFraction * std::pow(state_.rho(), 1.5) / std::sqrt(mp_.M());
            if (std::fabs(h) > cap) h = dir_ * cap;
            const double rho = norm(ref2_.xi), vel = norm(ref2_.dxi);
            scale = {rho, rho, rho, vel, vel, vel};
        }
        if (mode_ != SegmentMode::Regularized && (t_ + 1.01 * h - t1_) * dir_ > 0.0) {
            h = t1_ - t_;
            last = true;
        }
        const double phys_h = mode_ == SegmentMode::Regularized ? h * state_.r() : h;
        if (0.1 * std::fabs(phys_h) <= std::fabs(t_) * kUround || std::fabs(h) < 1e-300) {
            traj_.status = TrajectoryStatus::StepUnderflow;
            traj_.message = "step size underflow";
            break;
        }

        double err;
        try {
            err = st.attempt(indep, y_.data(), h, opt_.rtol, opt_.atol,
                             mode_ == SegmentMode::Hierarchical ? scale.data() : nullptr);
        } catch (const Error&) {
            err = INFINITY;
        }
        bool accepted = false;
        double hnew;
        if (std::isfinite(err)) {
            hnew = ctl_.next(h, err, accepted);
        } else {
            hnew = 0.25 * h;
            ctl_.reject = true;
        }
        if (!accepted) {
            ++traj_.rejected;
            h_ = hnew;
            continue;
        }

        Segment seg;
        seg.mode = mode_;
        seg.n = st.size();
        seg.h = h;
        seg.t0 = t_;
        if (need_dense) seg.rc.resize(8 * static_cast<size_t>(seg.n));
        try {
            st.accept(indep, y_.data(), h, need_dense ? seg.rc.data() : nullptr);
        } catch (const Error&) {
            ++traj_.rejected;
            h_ = 0.25 * h;
            ctl_.reject = true;
            continue;
        }
        if (mode_ == SegmentMode::Hierarchical) {
            seg.ref1 = ref1_;
            seg.t_ref1 = t_ref1_;
            seg.ref2 = ref2_;
        }
        std::vector<double> ynew = st.y_new();
        JacobiState snew;
        double tnew = t_;
        switch (mode_) {
            case SegmentMode::Direct:
                snew = unpack_direct(ynew.data());
                tnew = t_ + h;
                if (last) tnew = t1_;
                break;
            case SegmentMode::Regularized:
                snew = unpack_ks(ynew.data());
                tnew = ynew[9];
                break;
            case SegmentMode::Hierarchical: {
                tnew = last ? t1_ : t_ + h;
                const TwoBodyState o = propagate(ref2_, h);
                const TwoBodyState b = propagate(ref1_, tnew - t_ref1_);
                snew.xi1 = b.xi;
                snew.dxi1 = b.dxi;
                snew.xi2 = o.xi + Vec3{ynew[0], ynew[1], ynew[2]};
                snew.dxi2 = o.dxi + Vec3{ynew[3], ynew[4], ynew[5]};
                break;
            }
        }
        seg.t1 = tnew;
        ++traj_.steps;

        std::optional<double> stop;
        if (need_dense) stop = scan_events(seg);

        // A regularized step may overshoot t1; cut it with dense output.
        if (stop && mode_ == SegmentMode::Regularized && (eval_segment(seg, *stop).t - t1_) * dir_ > 0.0) {
            traj_.events.pop_back();
            stop.reset();
        }
        if (!stop && mode_ == SegmentMode::Regularized && (tnew - t1_) * dir_ > 0.0) {
            auto f = [&](double th) { return eval_segment(seg, th).t - t1_; };
            const double th = polish(f, 0.0, 1.0, f(0.0), f(1.0));
            const Point p = eval_segment(seg, th);
            // drop events past t1
            while (!traj_.events.empty() && (traj_.events.back().t - t1_) * dir_ > 0.0) traj_.events.pop_back();
            seg.t1 = t1_;
            traj_.nodes.push_back(make_node(t1_, p.s));
            if (opt_.keep_dense) traj_.segments.push_back(std::move(seg));
            state_ = p.s;
            t_ = t1_;
            break;
        }
        if (stop) {
            const Point p = eval_segment(seg, *stop);
            seg.t1 = p.t;
            traj_.nodes.push_back(make_node(p.t, p.s));
            if (opt_.keep_dense) traj_.segments.push_back(std::move(seg));
            traj_.stopped_at_event = true;
            state_ = p.s;
            t_ = p.t;
            break;
        }

        traj_.nodes.push_back(make_node(tnew, snew));
        if (opt_.keep_dense) traj_.segments.push_back(std::move(seg));
        state_ = snew;
        t_ = tnew;
        y_ = std::move(ynew);
        h_ = hnew;

        if (mode_ == SegmentMode::Hierarchical) {
            if (hierarchical_ok(state_)) {
                // rectify the outer reference; the binary keeps its epoch
                ref2_ = {state_.xi2, state_.dxi2, mp_.M()};
                t_ref2_ = t_;
                std::fill(y_.begin(), y_.end(), 0.0);
                hier_.start(t_, y_.data());
            } else {
                const double hphys = h_;
                enter_mode(SegmentMode::Direct);
                h_ = hphys;
                if (opt_.regularize && (opt_.ks_always || state_.r() < r_switch_)) enter_mode(SegmentMode::Regularized);
            }
        } else if (opt_.regularize) {
            const double r = state_.r();
            if (mode_ == SegmentMode::Direct && r < r_switch_) {
                enter_mode(SegmentMode::Regularized);
            } else if (mode_ == SegmentMode::Regularized && !opt_.ks_always && r > 2.0 * r_switch_) {
                enter_mode(SegmentMode::Direct);
            }
        }
        if (opt_.regularize) update_band();
    }
    if (band_) close_band();
    traj_.rhs_evaluations = direct_.evaluations() + ks_.evaluations() + hier_.evaluations();
    return std::move(traj_);
}

}  // namespace

const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::ICrossing: return "ICrossing";
        case EventKind::OuterPericenter: return "OuterPericenter";
        case EventKind::Syzygy: return "Syzygy";
        case EventKind::CollisionRegularized: return "CollisionRegularized";
    }
    return "unknown";
}

const char* status_name(TrajectoryStatus s) {
    switch (s) {
        case TrajectoryStatus::Complete: return "complete";
        case TrajectoryStatus::Incomplete: return "incomplete";
        case TrajectoryStatus::StepUnderflow: return "step-underflow";
        case TrajectoryStatus::Singular: return "singular";
    }
    return "unknown";
}

double Trajectory::max_H_resid() const {
    double m = 0.0;
    for (const Node& n : nodes) m = std::max(m, n.H_resid);
    return m;
}

double Trajectory::max_J_resid() const {
    double m = 0.0;
    for (const Node& n : nodes) m = std::max(m, n.J_resid);
    return m;
}

JacobiState Trajectory::state_at(double t) const {
    const double lo = std::min(t_begin(), t_end()), hi = std::max(t_begin(), t_end());
    if (t < lo || t > hi) throw Error(ErrorCode::Domain, "time outside trajectory span");
    if (t == nodes.front().t) return nodes.front().state;
    if (segments.empty()) throw Error(ErrorCode::NotApplicable, "trajectory has no dense output");
    const double dir = t_end() >= t_begin() ? 1.0 : -1.0;
    // first segment whose end reaches t along the direction of integration
    auto it = std::lower_bound(segments.begin(), segments.end(), t,
                               [dir](const Segment& s, double tv) { return (s.t1 - tv) * dir < 0.0; });
    if (it == segments.end()) it = std::prev(segments.end());
    const Segment& seg = *it;
    if (seg.mode != SegmentMode::Regularized) {
        const double theta = seg.h != 0.0 ? (t - seg.t0) / seg.h : 0.0;
        return eval_segment(seg, std::clamp(theta, 0.0, 1.0)).s;
    }
    auto f = [&](double th) { return eval_segment(seg, th).t - t; };
    const double f0 = f(0.0), f1 = f(1.0);
    if (f0 == 0.0) return eval_segment(seg, 0.0).s;
    if ((f0 < 0.0) == (f1 < 0.0)) return eval_segment(seg, std::fabs(f0) < std::fabs(f1) ? 0.0 : 1.0).s;
    return eval_segment(seg, polish(f, 0.0, 1.0, f0, f1)).s;
}

Trajectory integrate(const JacobiState& initial, const MassParams& mp, double t0, double t1,
                     const IntegrateOptions& opt) {
    Runner runner(initial, mp, t0, t1, opt);
    return runner.run();
}

Trajectory integrate_regularized(const JacobiState& initial, const MassParams& mp, double t0, double t1,
                                 IntegrateOptions opt) {
    opt.regularize = true;
    opt.formulation = Formulation::Direct;
    return integrate(initial, mp, t0, t1, opt);
}

namespace {

double segment_end_theta(const Segment& seg, double t_end) {
    if (seg.t1 == t_end && seg.mode != SegmentMode::Regularized && seg.h != 0.0)
        return std::clamp((t_end - seg.t0) / seg.h, 0.0, 1.0);
    return 1.0;
}

}  // namespace

CrossingScan detect_I_crossing(const Trajectory& traj, double level) {
    CrossingScan out;
    const MassParams& mp = traj.mp;
    out.initially_inside = traj.nodes.front().I <= level;
    bool all_inside = true;
    for (const Node& n : traj.nodes) all_inside = all_inside && n.I <= level;
    const double dir = traj.t_end() >= traj.t_begin() ? 1.0 : -1.0;
    for (const Segment& seg : traj.segments) {
        const double th_end = segment_end_theta(seg, traj.t_end());
        auto f = [&](double th) { return moment_of_inertia(eval_segment(seg, th).s, mp) - level; };
        for (const RootHit& hit : scan(f, th_end, samples_for(seg))) {
            Event e;
            e.kind = EventKind::ICrossing;
            e.level = level;
            e.direction = static_cast<int>((hit.from_sign > 0 ? -1.0 : 1.0) * dir);
            const Point p = eval_segment(seg, hit.theta);
            e.t = p.t;
            e.state = p.s;
            out.events.push_back(e);
        }
    }
    out.entirely_inside = all_inside && out.events.empty();
    return out;
}

SyzygyScan detect_syzygy(const Trajectory& traj) {
    SyzygyScan out;
    const Vec3 n = plane_normal(traj.nodes.front().state, traj.J0);
    for (const Node& node : traj.nodes) {
        if (!is_planar(node.state, n)) {
            out.reason = "trajectory is not planar; syzygies are not generic in space";
            return out;
        }
    }
    out.applicable = true;
    const JacobiState& s0 = traj.nodes.front().state;
    if (syzygy_function(s0, n) == 0.0) {
        Event e;
        e.kind = EventKind::Syzygy;
        e.t = traj.nodes.front().t;
        e.state = s0;
        e.middle_mass = middle_mass(s0, traj.mp);
        out.events.push_back(e);
    }
    for (const Segment& seg : traj.segments) {
        const double th_end = segment_end_theta(seg, traj.t_end());
        auto f = [&](double th) { return syzygy_function(eval_segment(seg, th).s, n); };
        for (const RootHit& hit : scan(f, th_end, samples_for(seg))) {
            Event e;
            e.kind = EventKind::Syzygy;
            const Point p = eval_segment(seg, hit.theta);
            e.t = p.t;
            e.state = p.s;
            e.middle_mass = middle_mass(p.s, traj.mp);
            out.events.push_back(e);
        }
    }
    return out;
}

int middle_mass(const JacobiState& s, const MassParams& mp) {
    const CartesianState c = from_jacobi(s, mp);
    Vec3 axis = c.q[1] - c.q[0];
    if (norm(axis) == 0.0) axis = c.q[2] - c.q[0];
    if (norm(axis) == 0.0) return 0;
    std::array<std::pair<double, int>, 3> proj;
    for (int i = 0; i < 3; ++i) proj[i] = {dot(c.q[i], axis), i + 1};
    std::sort(proj.begin(), proj.end());
    return proj[1].second;
}

}  // namespace lunarbound
