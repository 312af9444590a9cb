#include "annulab/annulus.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace annulab {

double wrap_unit(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r -= 1.0;  // guards floor rounding at tiny negative x
    return r;
}

double annulus_distance(const AnnulusPoint& a, const AnnulusPoint& b) {
    double dx = std::abs(wrap_unit(a.x) - wrap_unit(b.x));
    dx = std::min(dx, 1.0 - dx);
    return std::max(dx, std::abs(a.y - b.y));
}

AnnulusPoint LiftedAnnulusMap::apply(const AnnulusPoint& z) const {
    LiftPoint out = lift({z.x, z.y});
    return {wrap_unit(out.x_tilde), out.y};
}

LiftPoint LiftedAnnulusMap::lift_inverse(const LiftPoint&) const {
    throw std::logic_error("map has no inverse: " + describe());
}

LiftPoint LiftedAnnulusMap::lift_iterate(LiftPoint z, int n) const {
    if (n >= 0) {
        for (int i = 0; i < n; ++i) z = lift(z);
    } else {
        if (!has_inverse()) throw std::logic_error("negative iterate of non-invertible map");
        for (int i = 0; i < -n; ++i) z = lift_inverse(z);
    }
    return z;
}

namespace {

class RigidRotation final : public LiftedAnnulusMap {
public:
    explicit RigidRotation(double alpha) : alpha_(alpha) {}
    LiftPoint lift(const LiftPoint& z) const override { return {z.x_tilde + alpha_, z.y}; }
    bool has_inverse() const override { return true; }
    LiftPoint lift_inverse(const LiftPoint& z) const override {
        return {z.x_tilde - alpha_, z.y};
    }
    std::optional<std::pair<double, double>> analytic_boundary_rotations() const override {
        return std::make_pair(alpha_, alpha_);
    }
    std::string describe() const override { return "rigid_rotation(alpha=" + std::to_string(alpha_) + ")"; }

private:
    double alpha_;
};

class IntegrableTwist final : public LiftedAnnulusMap {
public:
    explicit IntegrableTwist(std::function<double(double)> omega) : omega_(std::move(omega)) {
        const int n = 1024;
        double prev = omega_(0.0);
        int direction = 0;
        for (int i = 1; i <= n; ++i) {
            double v = omega_(static_cast<double>(i) / n);
            if (v > prev)
                direction = direction >= 0 ? 1 : throw_monotone();
            else if (v < prev)
                direction = direction <= 0 ? -1 : throw_monotone();
            else
                throw_monotone();
            prev = v;
        }
    }
    LiftPoint lift(const LiftPoint& z) const override {
        return {z.x_tilde + omega_(z.y), z.y};
    }
    bool has_inverse() const override { return true; }
    LiftPoint lift_inverse(const LiftPoint& z) const override {
        return {z.x_tilde - omega_(z.y), z.y};
    }
    bool twist_like() const override { return true; }
    std::optional<std::pair<double, double>> analytic_boundary_rotations() const override {
        return std::make_pair(omega_(0.0), omega_(1.0));
    }
    std::string describe() const override { return "integrable_twist"; }
    double omega(double y) const { return omega_(y); }

private:
    static int throw_monotone() {
        throw std::invalid_argument("integrable twist: omega must be strictly monotone");
    }
    std::function<double(double)> omega_;
};

// One implicit-midpoint step of the Hamiltonian vector field
// (dx/dt, dy/dt) = (dH/dy, -dH/dx). Symplectic; solved by fixed point.
void midpoint_step(const AnnulusHamiltonian& h, double dt, double& x, double& y) {
    double mx = x, my = y;
    for (int it = 0; it < 100; ++it) {
        double fx = h.dHdy(mx, my);
        double fy = -h.dHdx(mx, my);
        double nx = x + 0.5 * dt * fx;
        double ny = y + 0.5 * dt * fy;
        double delta = std::max(std::abs(nx - mx), std::abs(ny - my));
        mx = nx;
        my = ny;
        if (delta < 1e-16) break;
    }
    x = 2.0 * mx - x;
    y = 2.0 * my - y;
}

void hamiltonian_flow(const AnnulusHamiltonian& h, double time, int substeps, double& x,
                      double& y) {
    double dt = time / substeps;
    for (int i = 0; i < substeps; ++i) midpoint_step(h, dt, x, y);
}

class PerturbedTwist final : public LiftedAnnulusMap {
public:
    PerturbedTwist(double omega0, double omega1, AnnulusHamiltonian h, double epsilon,
                   int substeps)
        : omega0_(omega0), omega1_(omega1), h_(std::move(h)), eps_(epsilon),
          substeps_(substeps) {
        if (omega0 == omega1)
            throw std::invalid_argument("perturbed twist: omega must be strictly monotone");
        if (substeps < 1) throw std::invalid_argument("perturbed twist: substeps >= 1");
        // probe the flow for annulus escape
        for (int i = 0; i <= 32; ++i) {
            for (int j = 0; j <= 16; ++j) {
                LiftPoint z{static_cast<double>(i) / 32.0, static_cast<double>(j) / 16.0};
                LiftPoint w = lift(z);
                if (w.y < -1e-12 || w.y > 1.0 + 1e-12)
                    throw std::invalid_argument(
                        "perturbed twist: flow escapes the annulus at epsilon=" +
                        std::to_string(eps_));
            }
        }
    }

    LiftPoint lift(const LiftPoint& z) const override {
        double x = z.x_tilde + omega0_ + (omega1_ - omega0_) * z.y;
        double y = z.y;
        if (eps_ != 0.0) hamiltonian_flow(h_, eps_, substeps_, x, y);
        return {x, clamp_y(y)};
    }
    bool has_inverse() const override { return true; }
    LiftPoint lift_inverse(const LiftPoint& z) const override {
        double x = z.x_tilde, y = z.y;
        if (eps_ != 0.0) hamiltonian_flow(h_, -eps_, substeps_, x, y);
        x -= omega0_ + (omega1_ - omega0_) * y;
        return {x, clamp_y(y)};
    }
    bool twist_like() const override { return true; }
    std::optional<std::pair<double, double>> analytic_boundary_rotations() const override {
        // H vanishes to second order at the boundary: shear dynamics there
        return std::make_pair(omega0_, omega1_);
    }
    std::string describe() const override {
        return "perturbed_twist(omega=[" + std::to_string(omega0_) + "," +
               std::to_string(omega1_) + "],eps=" + std::to_string(eps_) +
               ",H=" + h_.name + ")";
    }

private:
    static double clamp_y(double y) { return std::min(1.0, std::max(0.0, y)); }
    double omega0_, omega1_;
    AnnulusHamiltonian h_;
    double eps_;
    int substeps_;
};

class DeckShifted final : public LiftedAnnulusMap {
public:
    DeckShifted(MapPtr base, int k) : base_(std::move(base)), k_(k) {}
    LiftPoint lift(const LiftPoint& z) const override {
        LiftPoint w = base_->lift(z);
        w.x_tilde += k_;
        return w;
    }
    bool has_inverse() const override { return base_->has_inverse(); }
    LiftPoint lift_inverse(const LiftPoint& z) const override {
        return base_->lift_inverse({z.x_tilde - k_, z.y});
    }
    bool twist_like() const override { return base_->twist_like(); }
    std::optional<std::pair<double, double>> analytic_boundary_rotations() const override {
        auto b = base_->analytic_boundary_rotations();
        if (!b) return std::nullopt;
        return std::make_pair(b->first + k_, b->second + k_);
    }
    std::string describe() const override {
        return "T^" + std::to_string(k_) + " o " + base_->describe();
    }

private:
    MapPtr base_;
    int k_;
};

class Conjugated final : public LiftedAnnulusMap {
public:
    Conjugated(MapPtr c, MapPtr f) : c_(std::move(c)), f_(std::move(f)) {
        if (!c_->has_inverse()) throw std::invalid_argument("conjugator must be invertible");
    }
    LiftPoint lift(const LiftPoint& z) const override {
        return c_->lift(f_->lift(c_->lift_inverse(z)));
    }
    bool has_inverse() const override { return f_->has_inverse(); }
    LiftPoint lift_inverse(const LiftPoint& z) const override {
        return c_->lift(f_->lift_inverse(c_->lift_inverse(z)));
    }
    std::string describe() const override {
        return "conjugated(" + c_->describe() + ", " + f_->describe() + ")";
    }

private:
    MapPtr c_, f_;
};

class HamiltonianFlowMap final : public LiftedAnnulusMap {
public:
    HamiltonianFlowMap(AnnulusHamiltonian h, double time, int substeps)
        : h_(std::move(h)), time_(time), substeps_(substeps) {}
    LiftPoint lift(const LiftPoint& z) const override {
        double x = z.x_tilde, y = z.y;
        hamiltonian_flow(h_, time_, substeps_, x, y);
        return {x, y};
    }
    bool has_inverse() const override { return true; }
    LiftPoint lift_inverse(const LiftPoint& z) const override {
        double x = z.x_tilde, y = z.y;
        hamiltonian_flow(h_, -time_, substeps_, x, y);
        return {x, y};
    }
    std::optional<std::pair<double, double>> analytic_boundary_rotations() const override {
        return std::make_pair(0.0, 0.0);
    }
    std::string describe() const override { return "hamiltonian_flow(" + h_.name + ")"; }

private:
    AnnulusHamiltonian h_;
    double time_;
    int substeps_;
};

}  // namespace

MapPtr make_rigid_rotation(double alpha) { return std::make_shared<RigidRotation>(alpha); }

MapPtr make_integrable_twist(std::function<double(double)> omega) {
    return std::make_shared<IntegrableTwist>(std::move(omega));
}

MapPtr make_linear_twist(double omega0, double omega1) {
    return make_integrable_twist(
        [omega0, omega1](double y) { return omega0 + (omega1 - omega0) * y; });
}

AnnulusHamiltonian standard_bump_hamiltonian(double amplitude) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    AnnulusHamiltonian h;
    h.H = [amplitude](double x, double y) {
        double b = y * y * (1.0 - y) * (1.0 - y);
        return amplitude * std::sin(two_pi * x) * b;
    };
    h.dHdx = [amplitude](double x, double y) {
        double b = y * y * (1.0 - y) * (1.0 - y);
        return amplitude * two_pi * std::cos(two_pi * x) * b;
    };
    h.dHdy = [amplitude](double x, double y) {
        double db = 2.0 * y * (1.0 - y) * (1.0 - 2.0 * y);
        return amplitude * std::sin(two_pi * x) * db;
    };
    h.name = "sin(2pix)y^2(1-y)^2*" + std::to_string(amplitude);
    return h;
}

MapPtr make_perturbed_twist(double omega0, double omega1, const AnnulusHamiltonian& h,
                            double epsilon, int substeps) {
    return std::make_shared<PerturbedTwist>(omega0, omega1, h, epsilon, substeps);
}

MapPtr make_deck_shifted(MapPtr base, int k) {
    return std::make_shared<DeckShifted>(std::move(base), k);
}

MapPtr make_conjugated(MapPtr conjugator, MapPtr base) {
    return std::make_shared<Conjugated>(std::move(conjugator), std::move(base));
}

MapPtr make_hamiltonian_flow_map(const AnnulusHamiltonian& h, double time, int substeps) {
    return std::make_shared<HamiltonianFlowMap>(h, time, substeps);
}

RotationEstimate rotation_number(const LiftedAnnulusMap& map, const AnnulusPoint& seed,
                                 long max_iter, double recurrence_eps, long period_cap,
                                 double periodic_tol) {
    if (max_iter < 100) throw std::invalid_argument("rotation_number: max_iter >= 100");
    RotationEstimate est;
    AnnulusPoint z0{wrap_unit(seed.x), seed.y};
    LiftPoint z{z0.x, z0.y};
    LiftPoint cur = z;

    double last_recurrent_avg = 0.0;
    long last_recurrent_n = 0;
    std::vector<double> averages;
    averages.reserve(static_cast<size_t>(max_iter));

    double disp_first = 0.0;
    bool rigid_like = true;

    for (long n = 1; n <= max_iter; ++n) {
        LiftPoint next = map.lift(cur);
        double step_disp = next.x_tilde - cur.x_tilde;
        if (n == 1)
            disp_first = step_disp;
        else if (std::abs(step_disp - disp_first) > 1e-13)
            rigid_like = false;
        cur = next;
        double avg = (cur.x_tilde - z.x_tilde) / static_cast<double>(n);
        averages.push_back(avg);

        AnnulusPoint proj{wrap_unit(cur.x_tilde), cur.y};
        double d = annulus_distance(proj, z0);
        if (d < periodic_tol && n <= period_cap && !est.periodic) {
            double p_real = cur.x_tilde - z.x_tilde;
            long p = std::lround(p_real);
            if (std::abs(p_real - p) < periodic_tol * 10.0) {
                est.periodic = true;
                est.exact_rational = std::make_pair(p, n);
                est.value = static_cast<double>(p) / static_cast<double>(n);
                est.error_bound = 0.0;
                est.iterates_used = n;
                est.recurrent = true;
                return est;
            }
        }
        if (d < recurrence_eps) {
            last_recurrent_avg = avg;
            last_recurrent_n = n;
        }
    }

    est.iterates_used = max_iter;
    if (last_recurrent_n > 0) {
        est.recurrent = true;
        est.value = last_recurrent_avg;
    } else {
        est.value = averages.back();
    }
    if (rigid_like) {
        est.error_bound = 2.0 / static_cast<double>(max_iter);
    } else {
        // empirical Cauchy spread of the last decade of averages
        size_t start = averages.size() - averages.size() / 10 - 1;
        double lo = averages[start], hi = averages[start];
        for (size_t i = start; i < averages.size(); ++i) {
            lo = std::min(lo, averages[i]);
            hi = std::max(hi, averages[i]);
        }
        est.error_bound = (hi - lo) + 2.0 / static_cast<double>(max_iter);
    }
    return est;
}

BoundaryWindow boundary_rotation_numbers(const LiftedAnnulusMap& map) {
    if (!map.closed_annulus())
        throw std::logic_error("boundary_rotation_numbers: open-annulus family unsupported");
    BoundaryWindow out;
    if (auto analytic = map.analytic_boundary_rotations()) {
        out.rho_bottom = analytic->first;
        out.rho_top = analytic->second;
    } else {
        auto bottom = rotation_number(map, {0.1234, 0.0}, 200000, 1e-4);
        auto top = rotation_number(map, {0.1234, 1.0}, 200000, 1e-4);
        out.rho_bottom = bottom.value;
        out.rho_top = top.value;
    }
    double lo = std::min(out.rho_bottom, out.rho_top);
    double hi = std::max(out.rho_bottom, out.rho_top);
    if (hi - lo < 1e-12) {
        out.degenerate = true;
    } else {
        out.window = FractionWindow(lo, hi);
    }
    return out;
}

}  // namespace annulab
