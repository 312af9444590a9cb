#include "annulab/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <random>
#include <sstream>
#include <stdexcept>

namespace annulab {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 normalized(const Vec3& a) {
    double n = norm(a);
    if (n == 0.0) throw std::invalid_argument("normalized: zero vector");
    return (1.0 / n) * a;
}

// ---------------------------------------------------------------------------
// Conformal factor

ConformalFactor::ConformalFactor(int n_phi, int n_theta, std::vector<double> samples)
    : n_phi_(n_phi), n_theta_(n_theta), grid_(std::move(samples)) {
    if (n_phi_ < 4 || n_phi_ % 2 != 0 || n_theta_ < 4)
        throw std::invalid_argument("ConformalFactor: need n_phi >= 4 even, n_theta >= 4");
    if (static_cast<int>(grid_.size()) != n_phi_ * n_theta_)
        throw std::invalid_argument("ConformalFactor: sample count mismatch");
    // enforce u(q) = u(-q): average each sample with its antipode
    std::vector<double> sym(grid_.size());
    for (int it = 0; it < n_theta_; ++it) {
        for (int ip = 0; ip < n_phi_; ++ip) {
            int ip2 = (ip + n_phi_ / 2) % n_phi_;
            int it2 = n_theta_ - 1 - it;
            sym[static_cast<std::size_t>(it) * n_phi_ + ip] =
                0.5 * (grid_[static_cast<std::size_t>(it) * n_phi_ + ip] +
                       grid_[static_cast<std::size_t>(it2) * n_phi_ + ip2]);
        }
    }
    grid_ = std::move(sym);
}

ConformalFactor ConformalFactor::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ConformalFactor: cannot open " + path);
    int n_phi = 0, n_theta = 0;
    in >> n_phi >> n_theta;
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(n_phi) * n_theta);
    double v = 0.0;
    while (in >> v) samples.push_back(v);
    return ConformalFactor(n_phi, n_theta, std::move(samples));
}

double ConformalFactor::at(int ip, int it) const {
    it = std::clamp(it, 0, n_theta_ - 1);
    ip = ((ip % n_phi_) + n_phi_) % n_phi_;
    return grid_[static_cast<std::size_t>(it) * n_phi_ + ip];
}

namespace {

double catmull_rom(double p0, double p1, double p2, double p3, double t) {
    return p1 + 0.5 * t *
                    (p2 - p0 +
                     t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
}

}  // namespace

double ConformalFactor::u(const Vec3& direction) const {
    Vec3 d = normalized(direction);
    double theta = std::acos(std::clamp(d[2], -1.0, 1.0));
    double phi = std::atan2(d[1], d[0]);
    if (phi < 0.0) phi += 2.0 * kPi;
    double fp = phi / (2.0 * kPi) * n_phi_;
    double ft = theta / kPi * (n_theta_ - 1);
    int ip = static_cast<int>(std::floor(fp));
    int it = static_cast<int>(std::floor(ft));
    double tp = fp - ip;
    double tt = ft - it;
    double rows[4];
    for (int k = -1; k <= 2; ++k)
        rows[k + 1] = catmull_rom(at(ip - 1, it + k), at(ip, it + k), at(ip + 1, it + k),
                                  at(ip + 2, it + k), tp);
    return catmull_rom(rows[0], rows[1], rows[2], rows[3], tt);
}

Vec3 ConformalFactor::grad_u(const Vec3& q) const {
    const double h = 1e-5;
    Vec3 g{};
    for (int i = 0; i < 3; ++i) {
        Vec3 qp = q, qm = q;
        qp[i] += h;
        qm[i] -= h;
        g[i] = (u(qp) - u(qm)) / (2.0 * h);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Ellipsoid metric

EllipsoidMetric::EllipsoidMetric(double a, double b, double c,
                                 std::shared_ptr<const ConformalFactor> conformal)
    : a_(a), b_(b), c_(c), conformal_(std::move(conformal)) {
    if (!(a > 0.0 && a <= b && b <= c))
        throw std::invalid_argument("EllipsoidMetric: need 0 < a <= b <= c");
}

double EllipsoidMetric::constraint(const Vec3& q) const {
    return q[0] * q[0] / (a_ * a_) + q[1] * q[1] / (b_ * b_) + q[2] * q[2] / (c_ * c_) - 1.0;
}

Vec3 EllipsoidMetric::constraint_grad(const Vec3& q) const {
    return {2.0 * q[0] / (a_ * a_), 2.0 * q[1] / (b_ * b_), 2.0 * q[2] / (c_ * c_)};
}

double EllipsoidMetric::constraint_hess_quad(const Vec3& v) const {
    return 2.0 * (v[0] * v[0] / (a_ * a_) + v[1] * v[1] / (b_ * b_) + v[2] * v[2] / (c_ * c_));
}

double EllipsoidMetric::u(const Vec3& q) const { return conformal_ ? conformal_->u(q) : 0.0; }

Vec3 EllipsoidMetric::grad_u(const Vec3& q) const {
    return conformal_ ? conformal_->grad_u(q) : Vec3{0.0, 0.0, 0.0};
}

double EllipsoidMetric::gaussian_curvature(const Vec3& q) const {
    if (conformal_)
        throw std::logic_error(
            "gaussian_curvature: not implemented for conformally rescaled metrics");
    double h = q[0] * q[0] / std::pow(a_, 4) + q[1] * q[1] / std::pow(b_, 4) +
               q[2] * q[2] / std::pow(c_, 4);
    return 1.0 / (a_ * a_ * b_ * b_ * c_ * c_ * h * h);
}

void EllipsoidMetric::project(Vec3& q, Vec3& v) const {
    for (int iter = 0; iter < 20; ++iter) {
        double g = constraint(q);
        if (std::fabs(g) < 1e-15) break;
        Vec3 gr = constraint_grad(q);
        q = q - (g / dot(gr, gr)) * gr;
    }
    Vec3 n = normalized(constraint_grad(q));
    v = v - dot(v, n) * n;
}

double EllipsoidMetric::speed(const Vec3& q, const Vec3& v) const {
    return std::exp(u(q)) * norm(v);
}

double EllipsoidMetric::energy(const Vec3& q, const Vec3& v) const {
    double s = speed(q, v);
    return 0.5 * s * s;
}

Vec3 EllipsoidMetric::surface_point(double phi, double theta_colat) const {
    return {a_ * std::sin(theta_colat) * std::cos(phi), b_ * std::sin(theta_colat) * std::sin(phi),
            c_ * std::cos(theta_colat)};
}

TangentState antipodal_pushforward(const TangentState& x) {
    return {{-x.q[0], -x.q[1], -x.q[2]}, {-x.v[0], -x.v[1], -x.v[2]}};
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with per-step projection

namespace {

template <std::size_t N, typename Rhs, typename Project>
std::array<double, N> dp5_integrate(Rhs&& rhs, std::array<double, N> y, double t_end,
                                    const FlowOptions& opts, Project&& project) {
    using State = std::array<double, N>;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    if (t_end == 0.0) return y;
    const double dir = t_end > 0.0 ? 1.0 : -1.0;
    double t = 0.0;
    double h = dir * std::min(opts.initial_step, opts.max_step);
    State k1 = rhs(y);
    while (dir * (t_end - t) > 0.0) {
        // stop once the remaining interval is below the resolution of t
        if (std::fabs(t_end - t) <= 4e-16 * std::max(1.0, std::fabs(t))) break;
        if (dir * (t + h) > dir * t_end) h = t_end - t;
        State k2, k3, k4, k5, k6, k7, yt, y5;
        for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h * a21 * k1[i];
        k2 = rhs(yt);
        for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        k3 = rhs(yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        k4 = rhs(yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        k5 = rhs(yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        k6 = rhs(yt);
        for (std::size_t i = 0; i < N; ++i)
            y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        k7 = rhs(y5);
        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                             e7 * k7[i]);
            double sc = opts.atol + opts.rtol * std::max(std::fabs(y[i]), std::fabs(y5[i]));
            err += (ei / sc) * (ei / sc);
        }
        err = std::sqrt(err / N);
        if (err <= 1.0) {
            t += h;
            y = y5;
            project(y);
            k1 = rhs(y);  // projection moves y, so k7 cannot be reused (no FSAL)
        }
        double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        h *= std::clamp(fac, 0.2, 5.0);
        if (std::fabs(h) > opts.max_step) h = dir * opts.max_step;
        if (std::fabs(h) < 1e-14)
            throw std::runtime_error("dp5_integrate: step size underflow");
    }
    return y;
}

std::array<double, 6> pack(const TangentState& x) {
    return {x.q[0], x.q[1], x.q[2], x.v[0], x.v[1], x.v[2]};
}

TangentState unpack(const std::array<double, 6>& y) {
    return {{y[0], y[1], y[2]}, {y[3], y[4], y[5]}};
}

}  // namespace

TangentState geodesic_flow(const EllipsoidMetric& metric, const TangentState& state, double t,
                           const FlowOptions& opts) {
    TangentState x = state;
    metric.project(x.q, x.v);
    const double speed0 = metric.speed(x.q, x.v);
    if (speed0 == 0.0) throw std::invalid_argument("geodesic_flow: zero velocity");

    auto rhs = [&metric](const std::array<double, 6>& y) {
        Vec3 q{y[0], y[1], y[2]}, v{y[3], y[4], y[5]};
        Vec3 acc0{0.0, 0.0, 0.0};
        if (metric.conformal()) {
            Vec3 gu = metric.grad_u(q);
            acc0 = dot(v, v) * gu - (2.0 * dot(gu, v)) * v;
        }
        Vec3 gg = metric.constraint_grad(q);
        double lam = -(metric.constraint_hess_quad(v) + dot(gg, acc0)) / dot(gg, gg);
        Vec3 acc = acc0 + lam * gg;
        return std::array<double, 6>{v[0], v[1], v[2], acc[0], acc[1], acc[2]};
    };
    auto project = [&metric, speed0](std::array<double, 6>& y) {
        Vec3 q{y[0], y[1], y[2]}, v{y[3], y[4], y[5]};
        metric.project(q, v);
        double s = metric.speed(q, v);
        if (s > 0.0) v = (speed0 / s) * v;
        y = {q[0], q[1], q[2], v[0], v[1], v[2]};
    };
    return unpack(dp5_integrate<6>(rhs, pack(x), t, opts, project));
}

// ---------------------------------------------------------------------------
// Periodic cubic splines (uniform knots)

namespace {

// Tridiagonal solve with constant coefficients sub = super = 1, diag = b.
std::vector<double> thomas_uniform(const std::vector<double>& diag, std::vector<double> d) {
    std::size_t n = d.size();
    std::vector<double> c(n, 0.0);
    c[0] = 1.0 / diag[0];
    d[0] = d[0] / diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        double m = diag[i] - c[i - 1];
        c[i] = 1.0 / m;
        d[i] = (d[i] - d[i - 1]) / m;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= c[i] * d[i + 1];
    return d;
}

// Moments of the periodic cubic spline on uniform knots with spacing h.
std::vector<double> periodic_spline_moments(const std::vector<double>& y, double h) {
    std::size_t n = y.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        double ym = y[(i + n - 1) % n], yp = y[(i + 1) % n];
        d[i] = 6.0 * (ym - 2.0 * y[i] + yp) / (h * h);
    }
    // cyclic system M_{i-1} + 4 M_i + M_{i+1} = d_i via Sherman-Morrison
    const double gamma = -4.0;
    std::vector<double> diag(n, 4.0);
    diag[0] = 4.0 - gamma;
    diag[n - 1] = 4.0 - 1.0 / gamma;
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = 1.0;
    auto x1 = thomas_uniform(diag, d);
    auto x2 = thomas_uniform(diag, u);
    double vx1 = x1[0] + x1[n - 1] / gamma;
    double vx2 = x2[0] + x2[n - 1] / gamma;
    double factor = vx1 / (1.0 + vx2);
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = x1[i] - factor * x2[i];
    return m;
}

double periodic_spline_eval(const std::vector<double>& y, const std::vector<double>& m, double h,
                            double period, double s) {
    std::size_t n = y.size();
    s = std::fmod(s, period);
    if (s < 0.0) s += period;
    std::size_t i = std::min(static_cast<std::size_t>(s / h), n - 1);
    double a = s - static_cast<double>(i) * h;  // in [0, h]
    double b = h - a;
    std::size_t j = (i + 1) % n;
    return (m[i] * b * b * b + m[j] * a * a * a) / (6.0 * h) + (y[i] - m[i] * h * h / 6.0) * b / h +
           (y[j] - m[j] * h * h / 6.0) * a / h;
}

struct PeriodicSpline {
    double period = 1.0;
    double h = 1.0;
    std::vector<double> y, m;

    PeriodicSpline() = default;
    PeriodicSpline(std::vector<double> values, double period_)
        : period(period_), h(period_ / static_cast<double>(values.size())), y(std::move(values)) {
        m = periodic_spline_moments(y, h);
    }
    double operator()(double s) const { return periodic_spline_eval(y, m, h, period, s); }
};

}  // namespace

// ---------------------------------------------------------------------------
// ClosedGeodesic

ClosedGeodesic::ClosedGeodesic(std::vector<double> s, std::vector<Vec3> q, std::vector<Vec3> v,
                               double length)
    : s_(std::move(s)), q_(std::move(q)), v_(std::move(v)), length_(length) {
    if (s_.size() < 8 || s_.size() != q_.size() || s_.size() != v_.size())
        throw std::invalid_argument("ClosedGeodesic: bad sample arrays");
    double h = length_ / static_cast<double>(s_.size());
    for (int c = 0; c < 3; ++c) {
        q_c_[c].resize(s_.size());
        v_c_[c].resize(s_.size());
        for (std::size_t i = 0; i < s_.size(); ++i) {
            q_c_[c][i] = q_[i][c];
            v_c_[c][i] = v_[i][c];
        }
        q_m_[c] = periodic_spline_moments(q_c_[c], h);
        v_m_[c] = periodic_spline_moments(v_c_[c], h);
    }
}

Vec3 ClosedGeodesic::eval(const std::array<std::vector<double>, 3>& cols,
                          const std::array<std::vector<double>, 3>& moms, double s) const {
    double h = length_ / static_cast<double>(s_.size());
    return {periodic_spline_eval(cols[0], moms[0], h, length_, s),
            periodic_spline_eval(cols[1], moms[1], h, length_, s),
            periodic_spline_eval(cols[2], moms[2], h, length_, s)};
}

Vec3 ClosedGeodesic::point(double s) const { return eval(q_c_, q_m_, s); }

Vec3 ClosedGeodesic::velocity(double s) const { return eval(v_c_, v_m_, s); }

Vec3 ClosedGeodesic::unit_tangent(double s) const { return normalized(velocity(s)); }

Vec3 ClosedGeodesic::left_normal(const EllipsoidMetric& metric, double s) const {
    Vec3 p = point(s);
    Vec3 nu = normalized(metric.constraint_grad(p));
    Vec3 t = unit_tangent(s);
    Vec3 n = cross(nu, t);
    return normalized(n);
}

double ClosedGeodesic::wrap(double s) const {
    s = std::fmod(s, length_);
    if (s < 0.0) s += length_;
    return s;
}

double ClosedGeodesic::nearest_parameter(const Vec3& q) const {
    std::size_t n = s_.size();
    std::size_t stride = std::max<std::size_t>(1, n / 256);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < n; i += stride) {
        Vec3 d = q_[i] - q;
        double dd = dot(d, d);
        if (dd < best_d) {
            best_d = dd;
            best = i;
        }
    }
    double h = length_ / static_cast<double>(n) * static_cast<double>(stride);
    double lo = s_[best] - h, hi = s_[best] + h;
    auto f = [&](double s) {
        Vec3 d = point(s) - q;
        return dot(d, d);
    };
    // golden-section refinement of the nearest point
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    double f1 = f(c1), f2 = f(c2);
    for (int it = 0; it < 80 && (b - a) > 1e-13; ++it) {
        if (f1 < f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - gr * (b - a);
            f1 = f(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + gr * (b - a);
            f2 = f(c2);
        }
    }
    return wrap(0.5 * (a + b));
}

// ---------------------------------------------------------------------------
// Shortest equivariant closed geodesic

namespace {

// Discrete loop P_0..P_{m-1} with antipodal closure P_{i+m} = -P_i.
double half_loop_length(const EllipsoidMetric& metric, const std::vector<Vec3>& p) {
    std::size_t m = p.size();
    double len = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        Vec3 a = p[i];
        Vec3 b = (i + 1 < m) ? p[i + 1] : -1.0 * p[0];
        double w = std::exp(0.5 * (metric.u(a) + metric.u(b)));
        len += w * norm(b - a);
    }
    return len;
}

void shorten_half_loop(const EllipsoidMetric& metric, std::vector<Vec3>& p, int max_sweeps) {
    std::size_t m = p.size();
    double prev_len = half_loop_length(metric, p);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        std::vector<Vec3> next = p;
        for (std::size_t i = 0; i < m; ++i) {
            Vec3 prev = (i > 0) ? p[i - 1] : -1.0 * p[m - 1];
            Vec3 nxt = (i + 1 < m) ? p[i + 1] : -1.0 * p[0];
            double w1 = std::exp(metric.u(prev));
            double w2 = std::exp(metric.u(nxt));
            Vec3 target = (1.0 / (w1 + w2)) * (w1 * prev + w2 * nxt);
            Vec3 moved = p[i] + 0.8 * (target - p[i]);
            Vec3 dummy{1.0, 0.0, 0.0};
            metric.project(moved, dummy);
            next[i] = moved;
        }
        p = std::move(next);
        if (sweep % 16 == 15) {
            double len = half_loop_length(metric, p);
            if (prev_len - len < 1e-11 * prev_len) break;
            prev_len = len;
        }
    }
}

struct ShootingResult {
    TangentState x0;
    double half_period = 0.0;
    double residual = 0.0;
};

// Gauss-Newton solve of flow(x0, T) = -x0 over (base offset, direction angle, T).
ShootingResult shoot_equivariant(const EllipsoidMetric& metric, TangentState x0, double T0,
                                 double tol, const FlowOptions& flow) {
    metric.project(x0.q, x0.v);
    x0.v = (1.0 / metric.speed(x0.q, x0.v)) * x0.v;  // unit g-speed

    auto residual = [&](const Vec3& q0, const Vec3& v0, double T, std::array<double, 6>& r) {
        TangentState end = geodesic_flow(metric, {q0, v0}, T, flow);
        r = {end.q[0] + q0[0], end.q[1] + q0[1], end.q[2] + q0[2],
             end.v[0] + v0[0], end.v[1] + v0[1], end.v[2] + v0[2]};
        double n2 = 0.0;
        for (double c : r) n2 += c * c;
        return std::sqrt(n2);
    };

    double T = T0;
    double beta = 0.0, psi = 0.0;  // offsets from the current anchor
    TangentState anchor = x0;
    auto build = [&](double b, double ps, Vec3& q0, Vec3& v0) {
        Vec3 nu = normalized(metric.constraint_grad(anchor.q));
        Vec3 e1 = normalized(anchor.v);
        Vec3 e2 = cross(nu, e1);
        q0 = anchor.q + b * e2;
        Vec3 dummy{1.0, 0.0, 0.0};
        metric.project(q0, dummy);
        Vec3 nu2 = normalized(metric.constraint_grad(q0));
        Vec3 f1 = e1 - dot(e1, nu2) * nu2;
        f1 = normalized(f1);
        Vec3 f2 = cross(nu2, f1);
        Vec3 dir = std::cos(ps) * f1 + std::sin(ps) * f2;
        v0 = std::exp(-metric.u(q0)) * dir;
    };

    std::array<double, 6> r{};
    Vec3 q0, v0;
    build(beta, psi, q0, v0);
    double rn = residual(q0, v0, T, r);
    for (int iter = 0; iter < 80 && rn > tol; ++iter) {
        // finite-difference Jacobian in (beta, psi, T)
        const double hs[3] = {1e-7, 1e-7, 1e-7};
        double J[6][3];
        for (int k = 0; k < 3; ++k) {
            double db = (k == 0) ? hs[0] : 0.0;
            double dp = (k == 1) ? hs[1] : 0.0;
            double dT = (k == 2) ? hs[2] : 0.0;
            Vec3 qk, vk;
            build(beta + db, psi + dp, qk, vk);
            std::array<double, 6> rk{};
            residual(qk, vk, T + dT, rk);
            for (int i = 0; i < 6; ++i) J[i][k] = (rk[i] - r[i]) / hs[k];
        }
        double A[3][3] = {}, g[3] = {};
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b)
                for (int i = 0; i < 6; ++i) A[a][b] += J[i][a] * J[i][b];
            for (int i = 0; i < 6; ++i) g[a] += J[i][a] * r[i];
            A[a][a] += 1e-14;
        }
        // solve A du = -g (3x3 Gaussian elimination)
        double M[3][4] = {{A[0][0], A[0][1], A[0][2], -g[0]},
                          {A[1][0], A[1][1], A[1][2], -g[1]},
                          {A[2][0], A[2][1], A[2][2], -g[2]}};
        for (int c = 0; c < 3; ++c) {
            int piv = c;
            for (int rr = c + 1; rr < 3; ++rr)
                if (std::fabs(M[rr][c]) > std::fabs(M[piv][c])) piv = rr;
            std::swap(M[c], M[piv]);
            for (int rr = 0; rr < 3; ++rr) {
                if (rr == c || M[c][c] == 0.0) continue;
                double f = M[rr][c] / M[c][c];
                for (int cc = c; cc < 4; ++cc) M[rr][cc] -= f * M[c][cc];
            }
        }
        double du[3];
        for (int c = 0; c < 3; ++c) du[c] = (M[c][c] != 0.0) ? M[c][3] / M[c][c] : 0.0;

        double step = 1.0;
        for (int half = 0; half < 12; ++half) {
            Vec3 qn, vn;
            build(beta + step * du[0], psi + step * du[1], qn, vn);
            std::array<double, 6> rn_arr{};
            double rn_new = residual(qn, vn, T + step * du[2], rn_arr);
            if (rn_new < rn) {
                beta += step * du[0];
                psi += step * du[1];
                T += step * du[2];
                r = rn_arr;
                rn = rn_new;
                break;
            }
            step *= 0.5;
            if (half == 11) iter = 80;  // stalled
        }
        // re-anchor so beta and psi stay small
        Vec3 qa, va;
        build(beta, psi, qa, va);
        anchor = {qa, va};
        beta = 0.0;
        psi = 0.0;
    }
    Vec3 qf, vf;
    build(beta, psi, qf, vf);
    return {{qf, vf}, T, rn};
}

}  // namespace

ShortestGeodesicReport shortest_noncontractible(const EllipsoidMetric& metric, int loop_resolution,
                                                double tol) {
    if (loop_resolution < 32) throw std::invalid_argument("shortest_noncontractible: resolution");
    int m = loop_resolution / 2;

    // three principal-ellipse initializations, half loop each
    std::vector<std::vector<Vec3>> inits(3);
    for (int i = 0; i < m; ++i) {
        double t = kPi * static_cast<double>(i) / static_cast<double>(m);
        inits[0].push_back({metric.a() * std::cos(t), metric.b() * std::sin(t), 0.0});
        inits[1].push_back({metric.a() * std::cos(t), 0.0, metric.c() * std::sin(t)});
        inits[2].push_back({0.0, metric.b() * std::cos(t), metric.c() * std::sin(t)});
    }

    FlowOptions flow;
    int best_init = -1;
    double best_len = std::numeric_limits<double>::max();
    ShootingResult best{};
    for (int k = 0; k < 3; ++k) {
        auto loop = inits[k];
        shorten_half_loop(metric, loop, 3000);
        TangentState guess;
        guess.q = loop[0];
        Vec3 fwd = loop[1] + loop[m - 1];  // P_1 - P_{-1}
        guess.v = normalized(fwd);
        double T0 = half_loop_length(metric, loop);
        ShootingResult sr = shoot_equivariant(metric, guess, T0, tol, flow);
        if (sr.residual < 1e-6 && 2.0 * sr.half_period < best_len) {
            best_len = 2.0 * sr.half_period;
            best = sr;
            best_init = k;
        }
    }
    if (best_init < 0)
        throw std::runtime_error("shortest_noncontractible: shooting failed for all starts");

    // resample: first half by flow, second half by the antipodal symmetry
    const int n_half = 512;
    const int n = 2 * n_half;
    double delta = 2.0 * best.half_period;
    std::vector<double> s(n);
    std::vector<Vec3> q(n), v(n);
    TangentState cur = best.x0;
    double hstep = best.half_period / n_half;
    for (int i = 0; i < n_half; ++i) {
        s[i] = i * (delta / n);
        q[i] = cur.q;
        v[i] = cur.v;
        s[i + n_half] = s[i] + delta / 2.0;
        q[i + n_half] = -1.0 * cur.q;
        v[i + n_half] = -1.0 * cur.v;
        if (i + 1 < n_half) cur = geodesic_flow(metric, cur, hstep, flow);
    }
    ClosedGeodesic curve(s, q, v, delta);

    // discrete simplicity test: non-neighboring samples must stay separated
    bool simple = true;
    double min_sep = delta * 1e-3;
    for (int i = 0; i < n && simple; i += 2) {
        for (int j = i + n / 16; j <= i + n - n / 16 && simple; j += 2) {
            Vec3 d = q[i] - q[j % n];
            if (norm(d) < min_sep) simple = false;
        }
    }
    return {std::move(curve), delta, best.residual, simple, best_init};
}

// ---------------------------------------------------------------------------
// GeodesicLab

struct GeodesicLab::BoundaryModel {
    PeriodicSpline curvature;  // plain metrics only (empty otherwise)
    PeriodicSpline d_fwd;      // first-crossing distance started at angle 0+
    PeriodicSpline d_bwd;      // same for angle pi-
    bool have_curvature = false;
};

namespace {

// First zero of J'' + K(s) J = 0, J(0) = 0, J'(0) = 1, K given along arclength.
double first_jacobi_zero(const PeriodicSpline& curvature, double s0, double direction,
                         double s_max) {
    FlowOptions opts;
    opts.max_step = 0.02;
    // the coefficient depends on arclength, so carry t as a third component
    auto rhs3 = [&](const std::array<double, 3>& y) {
        double k = curvature(s0 + direction * y[2]);
        return std::array<double, 3>{y[1], -k * y[0], 1.0};
    };
    auto no_project = [](std::array<double, 3>&) {};
    std::array<double, 3> y{0.0, 1.0, 0.0};
    double t = 0.0;
    const double step = 0.05;
    while (t < s_max) {
        auto y_next = dp5_integrate<3>(rhs3, y, step, opts, no_project);
        if (t > 0.2 && y_next[0] <= 0.0) {
            double lo = 0.0, hi = step;
            for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
                double mid = 0.5 * (lo + hi);
                auto ym = dp5_integrate<3>(rhs3, y, mid, opts, no_project);
                (ym[0] > 0.0 ? lo : hi) = mid;
            }
            return t + 0.5 * (lo + hi);
        }
        y = y_next;
        t += step;
    }
    throw std::runtime_error("first_jacobi_zero: no conjugate point before bound");
}

// Rotation number of the circle map s -> s + d(s) (period delta) by a long
// Birkhoff average; d is continuous so the average converges at rate O(1/N).
double circle_rotation(const std::function<double(double)>& d, double delta, int iterations) {
    double s = 0.0, total = 0.0;
    for (int i = 0; i < iterations; ++i) {
        double ds = d(s);
        total += ds;
        s += ds;
        s = std::fmod(s, delta);
        if (s < 0.0) s += delta;
    }
    return total / (static_cast<double>(iterations) * delta);
}

}  // namespace

GeodesicLab::GeodesicLab(EllipsoidMetric metric, int loop_resolution, double curve_tol,
                         FlowOptions flow)
    : metric_(std::move(metric)), flow_(flow) {
    auto report = std::make_shared<ShortestGeodesicReport>(
        shortest_noncontractible(metric_, loop_resolution, curve_tol));
    curve_ = std::shared_ptr<const ClosedGeodesic>(report, &report->curve);
    curve_report_ = report;

    const double delta = curve_->length();
    t_guard_ = 4.0 * delta;

    auto model = std::make_shared<BoundaryModel>();
    const int n_knots = 256;
    std::vector<double> d_fwd(n_knots), d_bwd(n_knots);
    if (!metric_.conformal()) {
        const auto& params = curve_->sample_parameters();
        std::vector<double> kvals(params.size());
        for (std::size_t i = 0; i < params.size(); ++i)
            kvals[i] = metric_.gaussian_curvature(curve_->point(params[i]));
        model->curvature = PeriodicSpline(std::move(kvals), delta);
        model->have_curvature = true;
        for (int i = 0; i < n_knots; ++i) {
            double s0 = delta * static_cast<double>(i) / n_knots;
            d_fwd[i] = first_jacobi_zero(model->curvature, s0, +1.0, t_guard_);
            d_bwd[i] = first_jacobi_zero(model->curvature, s0, -1.0, t_guard_);
        }
    } else {
        // no curvature available: probe the crossing distance at a small angle
        const double theta_probe = 1e-3;
        for (int i = 0; i < n_knots; ++i) {
            double s0 = delta * static_cast<double>(i) / n_knots;
            double t_cross = 0.0;
            cross_curve(section_to_state({s0, theta_probe}), +1, &t_cross);
            d_fwd[i] = t_cross;
            cross_curve(section_to_state({s0, kPi - theta_probe}), +1, &t_cross);
            d_bwd[i] = t_cross;
        }
    }
    model->d_fwd = PeriodicSpline(std::move(d_fwd), delta);
    model->d_bwd = PeriodicSpline(std::move(d_bwd), delta);
    boundary_ = model;

    const auto* bm = boundary_.get();
    boundary_twist_ = circle_rotation(
        [bm, delta](double s) { return bm->d_fwd(s) - delta / 2.0; }, delta, 20000);
    rho_top_ = circle_rotation(
        [bm, delta](double s) { return delta / 2.0 - bm->d_bwd(s); }, delta, 20000);

    estimate_flight_band();
}

TangentState GeodesicLab::section_to_state(const SectionPoint& x) const {
    double s = curve_->wrap(x.s);
    Vec3 q = curve_->point(s);
    Vec3 t = curve_->unit_tangent(s);
    Vec3 n = curve_->left_normal(metric_, s);
    Vec3 dir = std::cos(x.theta) * t + std::sin(x.theta) * n;
    Vec3 v = std::exp(-metric_.u(q)) * dir;
    metric_.project(q, v);
    return {q, v};
}

SectionPoint GeodesicLab::state_to_section(const TangentState& x, double base_tol) const {
    double s = curve_->nearest_parameter(x.q);
    Vec3 d = x.q - curve_->point(s);
    if (norm(d) > base_tol)
        throw std::invalid_argument("state_to_section: state is not based on the section curve");
    Vec3 t = curve_->unit_tangent(s);
    Vec3 n = curve_->left_normal(metric_, s);
    double theta = std::atan2(dot(x.v, n), dot(x.v, t));
    return {s, theta};
}

double GeodesicLab::signed_side(const Vec3& q) const {
    double s = curve_->nearest_parameter(q);
    Vec3 n = curve_->left_normal(metric_, s);
    return dot(q - curve_->point(s), n) >= 0.0 ? 1.0 : -1.0;
}

TangentState GeodesicLab::cross_curve(const TangentState& start, int direction,
                                      double* time_out) const {
    const double dir = direction >= 0 ? 1.0 : -1.0;
    const double step = 0.2;
    FlowOptions fo = flow_;
    fo.initial_step = fo.max_step;  // restarts are frequent; skip the ramp-up
    TangentState cur = start;
    double t = 0.0;
    // expected side after leaving the curve: left (+) forward, left (+) backward
    // (backward motion from an arrival state also backs into the left side)
    while (t < t_guard_) {
        TangentState nxt = geodesic_flow(metric_, cur, dir * step, fo);
        if (t > 1e-9 && signed_side(nxt.q) < 0.0) {
            double lo = 0.0, hi = step;
            for (int it = 0; it < 64 && hi - lo > 1e-12; ++it) {
                double mid = 0.5 * (lo + hi);
                TangentState sm = geodesic_flow(metric_, cur, dir * mid, fo);
                (signed_side(sm.q) > 0.0 ? lo : hi) = mid;
            }
            double tc = 0.5 * (lo + hi);
            if (time_out) *time_out = t + tc;
            return geodesic_flow(metric_, cur, dir * tc, fo);
        }
        cur = nxt;
        t += step;
    }
    throw std::runtime_error(
        "cross_curve: no crossing before the guard time; the curve would not "
        "bound a global surface of section here");
}

ReturnRecord GeodesicLab::half_return(const SectionPoint& x) const {
    if (!(x.theta > 1e-8 && x.theta < kPi - 1e-8))
        throw std::invalid_argument("half_return: interior angle required");
    ReturnRecord rec;
    rec.start = {curve_->wrap(x.s), x.theta};
    TangentState st = section_to_state(rec.start);
    double t_cross = 0.0;
    TangentState at_cross = cross_curve(st, +1, &t_cross);
    rec.end_state = at_cross;
    rec.flight_time = t_cross;
    rec.geodesic_length = t_cross;  // unit-speed parameterization
    SectionPoint raw = state_to_section(at_cross, 1e-6);
    rec.psi_raw = raw;  // theta in (-pi, 0): arrival chart of the mapped section
    SectionPoint pulled = state_to_section(antipodal_pushforward(at_cross), 1e-6);
    if (pulled.theta < 0.0) pulled.theta = 0.0;
    rec.end = pulled;
    return rec;
}

ReturnRecord GeodesicLab::half_return_backward(const SectionPoint& x) const {
    if (!(x.theta > 1e-8 && x.theta < kPi - 1e-8))
        throw std::invalid_argument("half_return_backward: interior angle required");
    ReturnRecord rec;
    rec.start = {curve_->wrap(x.s), x.theta};
    // arrival state of the flight that produced x: antipodal image of x
    TangentState arrival = antipodal_pushforward(section_to_state(rec.start));
    double t_cross = 0.0;
    TangentState at_cross = cross_curve(arrival, -1, &t_cross);
    rec.end_state = at_cross;
    rec.flight_time = t_cross;
    rec.geodesic_length = t_cross;
    SectionPoint departure = state_to_section(at_cross, 1e-6);
    if (departure.theta < 0.0) departure.theta = 0.0;
    rec.end = departure;
    rec.psi_raw = departure;
    return rec;
}

SectionPoint GeodesicLab::section_map(const SectionPoint& x) const { return half_return(x).end; }

SectionPoint GeodesicLab::section_map_inverse(const SectionPoint& x) const {
    return half_return_backward(x).end;
}

ConjugatePointRecord GeodesicLab::boundary_extension(double s0) const {
    if (!boundary_->have_curvature)
        throw std::logic_error(
            "boundary_extension: Jacobi data requires the plain ellipsoid metric");
    ConjugatePointRecord rec;
    rec.s0 = curve_->wrap(s0);
    rec.conjugate_distance = first_jacobi_zero(boundary_->curvature, rec.s0, +1.0, t_guard_);
    rec.half_period_gap = rec.conjugate_distance - 0.5 * curve_->length();
    rec.f_image = {curve_->wrap(rec.s0 + rec.conjugate_distance - 0.5 * curve_->length()), 0.0};
    return rec;
}

void GeodesicLab::estimate_flight_band() {
    const double delta = curve_->length();
    double lo = std::numeric_limits<double>::max(), hi = 0.0;
    const double thetas[] = {0.15, 0.6, 1.1, kPi / 2.0, 2.0, 2.6, 2.99};
    for (int i = 0; i < 8; ++i) {
        double s0 = delta * static_cast<double>(i) / 8.0;
        for (double th : thetas) {
            ReturnRecord rec = half_return({s0, th});
            lo = std::min(lo, rec.flight_time);
            hi = std::max(hi, rec.flight_time);
        }
    }
    t_lo_ = 0.9 * lo;
    t_hi_ = 1.1 * hi;
    t_guard_ = std::max(2.0 * hi, 1.5 * delta);
}

// ---------------------------------------------------------------------------
// Annulus adapter

class SectionAnnulusMap final : public LiftedAnnulusMap {
public:
    explicit SectionAnnulusMap(const GeodesicLab* lab) : lab_(lab), delta_(lab->delta()) {}

    LiftPoint lift(const LiftPoint& z) const override {
        double y = std::clamp(z.y, 0.0, 1.0);
        double s = wrap_unit(z.x_tilde) * delta_;
        if (y <= 0.0) return {z.x_tilde + (lab_->boundary_->d_fwd(s) - delta_ / 2.0) / delta_, 0.0};
        if (y >= 1.0) return {z.x_tilde + (delta_ / 2.0 - lab_->boundary_->d_bwd(s)) / delta_, 1.0};
        SectionPoint img = lab_->section_map({s, y * kPi});
        double dx = img.s / delta_ - wrap_unit(z.x_tilde);
        dx -= std::floor(dx + 0.5);  // nearest displacement branch
        if (std::fabs(dx) > 0.499)
            throw std::runtime_error("SectionAnnulusMap: displacement branch is ambiguous");
        return {z.x_tilde + dx, img.theta / kPi};
    }

    bool has_inverse() const override { return true; }

    LiftPoint lift_inverse(const LiftPoint& z) const override {
        double y = std::clamp(z.y, 0.0, 1.0);
        if (y <= 0.0 || y >= 1.0) return boundary_inverse(z, y);
        double s = wrap_unit(z.x_tilde) * delta_;
        SectionPoint pre = lab_->section_map_inverse({s, y * kPi});
        double dx = pre.s / delta_ - wrap_unit(z.x_tilde);
        dx -= std::floor(dx + 0.5);
        if (std::fabs(dx) > 0.499)
            throw std::runtime_error("SectionAnnulusMap: displacement branch is ambiguous");
        return {z.x_tilde + dx, pre.theta / kPi};
    }

    bool twist_like() const override { return true; }

    std::optional<std::pair<double, double>> analytic_boundary_rotations() const override {
        return std::make_pair(lab_->boundary_twist(), lab_->boundary_twist_top());
    }

    std::string describe() const override {
        std::ostringstream os;
        const auto& m = lab_->metric();
        os << "half-return section map, ellipsoid(" << m.a() << ", " << m.b() << ", " << m.c()
           << ")" << (m.conformal() ? ", conformal" : "");
        return os.str();
    }

private:
    const GeodesicLab* lab_;
    double delta_;

    LiftPoint boundary_inverse(const LiftPoint& z, double y) const {
        // invert the monotone circle map s -> s + d(s) by bisection on the lift
        auto fwd = [&](double s) {
            double d = (y <= 0.0) ? lab_->boundary_->d_fwd(s) - delta_ / 2.0
                                  : delta_ / 2.0 - lab_->boundary_->d_bwd(s);
            return s + d;
        };
        double target = wrap_unit(z.x_tilde) * delta_;
        double lo = target - 0.499 * delta_, hi = target + 0.499 * delta_;
        for (int it = 0; it < 80 && hi - lo > 1e-13 * delta_; ++it) {
            double mid = 0.5 * (lo + hi);
            double smid = std::fmod(mid, delta_);
            if (smid < 0.0) smid += delta_;
            double val = fwd(smid) + (mid - smid);  // lift through the branch of mid
            (val < target ? lo : hi) = mid;
        }
        double s_pre = 0.5 * (lo + hi);
        double dx = s_pre / delta_ - wrap_unit(z.x_tilde);
        dx -= std::floor(dx + 0.5);
        return {z.x_tilde + dx, y};
    }
};

MapPtr GeodesicLab::annulus_map() const { return std::make_shared<SectionAnnulusMap>(this); }

// ---------------------------------------------------------------------------
// Measure checks

double section_rectangle_measure(double s1, double s2, double theta1, double theta2) {
    return (s2 - s1) * (std::cos(theta1) - std::cos(theta2));
}

AreaCheckResult area_preservation_check(const GeodesicLab& lab, double s1, double s2,
                                        double theta1, double theta2, int boundary_points,
                                        int mc_samples, unsigned long long seed) {
    if (!(s2 > s1 && theta2 > theta1 && theta1 > 0.0 && theta2 < kPi))
        throw std::invalid_argument("area_preservation_check: bad rectangle");
    AreaCheckResult res;
    res.measure_in = section_rectangle_measure(s1, s2, theta1, theta2);

    // forward image of the rectangle boundary, unwrapped in s by continuity
    std::vector<std::pair<double, double>> poly;  // (s unwrapped, theta)
    auto push_image = [&](double s, double th) {
        SectionPoint img = lab.section_map({s, th});
        double su = img.s;
        if (!poly.empty()) {
            double prev = poly.back().first;
            su += lab.delta() * std::round((prev - su) / lab.delta());
        }
        poly.emplace_back(su, img.theta);
    };
    int n_side = std::max(boundary_points / 4, 8);
    for (int i = 0; i < n_side; ++i)
        push_image(s1 + (s2 - s1) * i / n_side, theta1);
    for (int i = 0; i < n_side; ++i)
        push_image(s2, theta1 + (theta2 - theta1) * i / n_side);
    for (int i = 0; i < n_side; ++i)
        push_image(s2 - (s2 - s1) * i / n_side, theta2);
    for (int i = 0; i < n_side; ++i)
        push_image(s1, theta2 - (theta2 - theta1) * i / n_side);

    // Green's theorem for mu = integral of sin(theta) ds dtheta:
    // mu = closed integral of s sin(theta) dtheta along the boundary
    double mu = 0.0;
    std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        auto [sa, ta] = poly[i];
        auto [sb, tb] = poly[(i + 1) % n];
        mu += 0.5 * (sa + sb) * (std::cos(ta) - std::cos(tb));
    }
    res.measure_out = std::fabs(mu);

    // Monte Carlo estimate over the polygon's bounding box; preferred as the
    // reported value when samples are requested (the polygon quadrature then
    // serves as a deterministic cross-check)
    if (mc_samples > 0) {
        double smin = poly[0].first, smax = smin, tmin = poly[0].second, tmax = tmin;
        for (auto& [ps, pt] : poly) {
            smin = std::min(smin, ps);
            smax = std::max(smax, ps);
            tmin = std::min(tmin, pt);
            tmax = std::max(tmax, pt);
        }
        auto inside = [&](double ps, double pt) {
            bool in = false;
            for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
                auto [xi, yi] = poly[i];
                auto [xj, yj] = poly[j];
                if ((yi > pt) != (yj > pt) && ps < (xj - xi) * (pt - yi) / (yj - yi) + xi)
                    in = !in;
            }
            return in;
        };
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> us(smin, smax), ut(tmin, tmax);
        double box = (smax - smin) * (tmax - tmin);
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < mc_samples; ++i) {
            double ps = us(rng), pt = ut(rng);
            double w = inside(ps, pt) ? std::sin(pt) : 0.0;
            sum += w;
            sum2 += w * w;
        }
        double mean = sum / mc_samples;
        double var = std::max(sum2 / mc_samples - mean * mean, 0.0);
        res.mc_std_error = box * std::sqrt(var / mc_samples);
        res.measure_out = box * mean;
    }
    res.rel_error = std::fabs(res.measure_out - res.measure_in) / res.measure_in;
    return res;
}

// ---------------------------------------------------------------------------
// Geodesic census

GeodesicCensus geodesic_census(const GeodesicLab& lab, int q_max_odd, const SolverParams& params,
                               double closure_tol, double l_fit_min) {
    GeodesicCensus out;
    out.l_fit_min = l_fit_min;
    double rb = lab.boundary_twist(), rt = lab.boundary_twist_top();
    if (std::fabs(rb - rt) < 1e-12) return out;  // degenerate window, nothing isolated to count
    FractionWindow w(std::min(rb, rt), std::max(rb, rt));

    std::vector<std::pair<long, int>> fractions;
    for (auto& [p, q] : fractions_in_window(w, q_max_odd))
        if (q % 2 == 1) fractions.emplace_back(p, q);

    MapPtr map = lab.annulus_map();
    const double delta = lab.delta();

    struct FractionResult {
        std::vector<GeodesicCensusEntry> entries;
        std::vector<std::pair<long, int>> non_closing;
        bool found = true;
    };

    // On an invariant circle every grid column seeds a periodic point, but when
    // q divides into the column count the refined orbits alias onto nx/q
    // classes, which can sit below an absolute continuum threshold.  Tie the
    // threshold to the grid so those circles are still collapsed.
    SolverParams sp = params;
    sp.continuum_threshold = std::min(sp.continuum_threshold, std::max(8, sp.grid_nx / 4));

    auto process = [&](long p, int q) {
        FractionResult fr;
        FindOrbitsResult r = find_orbits(*map, p, q, sp);
        if (r.not_found) {
            fr.found = false;
            return fr;
        }
        for (const auto& orbit : r.orbits) {
            if (orbit.prime_period != q || !orbit.interior || orbit.ambiguous_period) continue;
            SectionPoint start{orbit.points.front().x * delta, orbit.points.front().y * kPi};
            double total = 0.0;
            SectionPoint cur = start;
            for (int i = 0; i < q; ++i) {
                ReturnRecord rec = lab.half_return(cur);
                total += rec.geodesic_length;
                cur = rec.end;
            }
            // independent closure check: one continuous flight of the full
            // length must land on the antipodal initial state (odd q)
            TangentState st0 = lab.section_to_state(start);
            TangentState end = geodesic_flow(lab.metric(), st0, total);
            double err = 0.0;
            for (int c = 0; c < 3; ++c) {
                err = std::max(err, std::fabs(end.q[c] + st0.q[c]));
                err = std::max(err, std::fabs(end.v[c] + st0.v[c]));
            }
            if (err > closure_tol) {
                fr.non_closing.emplace_back(p, q);
                continue;
            }
            GeodesicCensusEntry e;
            e.p = p;
            e.q = q;
            e.length = total;
            e.closure_error = err;
            e.non_isolated = orbit.non_isolated;
            e.representative = start;
            fr.entries.push_back(e);
        }
        return fr;
    };

    std::vector<std::future<FractionResult>> futures;
    futures.reserve(fractions.size());
    for (auto& [p, q] : fractions)
        futures.push_back(std::async(std::launch::async, process, p, q));
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        FractionResult fr = futures[i].get();
        if (!fr.found) {
            out.missing.push_back(fractions[i]);
            out.complete = false;
        }
        for (auto& nc : fr.non_closing) out.non_closing.push_back(nc);
        for (auto& e : fr.entries) out.entries.push_back(e);
    }

    std::sort(out.entries.begin(), out.entries.end(),
              [](const auto& a, const auto& b) { return a.length < b.length; });
    out.N_of_l.reserve(out.entries.size());
    for (std::size_t i = 0; i < out.entries.size(); ++i)
        out.N_of_l.emplace_back(out.entries[i].length, static_cast<std::uint64_t>(i + 1));

    // least-squares fit of log N(l) against log l over lengths >= l_fit_min
    int used = 0, skipped = 0;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (auto& [l, count] : out.N_of_l) {
        if (l < l_fit_min) {
            ++skipped;
            continue;
        }
        double x = std::log(l), y = std::log(static_cast<double>(count));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++used;
    }
    if (used >= 3) {
        double det = used * sxx - sx * sx;
        out.fit.exponent = (used * sxy - sx * sy) / det;
        out.fit.prefactor = std::exp((sy - out.fit.exponent * sx) / used);
        out.fit.n_min = skipped;
        out.fit.n_max = static_cast<int>(out.N_of_l.size());
    }
    return out;
}

}  // namespace annulab
