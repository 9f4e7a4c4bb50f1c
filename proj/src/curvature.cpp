#include "rgc/curvature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace rgc {

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    size_t M = x_.size();
    if (M != y_.size() || M < 2) throw std::invalid_argument("spline needs >= 2 samples");
    for (size_t i = 1; i < M; ++i)
        if (x_[i] <= x_[i - 1]) throw std::invalid_argument("spline abscissae must increase");
    m_.assign(M, 0.0);
    if (M < 4) return;  // linear / quadratic-through-moments fallback keeps m = 0 (M==2,3)

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(M, M);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(M);
    auto h = [&](size_t i) { return x_[i + 1] - x_[i]; };
    for (size_t i = 1; i + 1 < M; ++i) {
        A(i, i - 1) = h(i - 1) / 6.0;
        A(i, i) = (h(i - 1) + h(i)) / 3.0;
        A(i, i + 1) = h(i) / 6.0;
        b(i) = (y_[i + 1] - y_[i]) / h(i) - (y_[i] - y_[i - 1]) / h(i - 1);
    }
    // not-a-knot: third derivative continuous across the first and last
    // interior knots.
    A(0, 0) = h(1);
    A(0, 1) = -(h(0) + h(1));
    A(0, 2) = h(0);
    A(M - 1, M - 3) = h(M - 2);
    A(M - 1, M - 2) = -(h(M - 3) + h(M - 2));
    A(M - 1, M - 1) = h(M - 3);
    Eigen::VectorXd m = A.partialPivLu().solve(b);
    for (size_t i = 0; i < M; ++i) m_[i] = m(i);
}

double CubicSpline::eval(double x) const {
    size_t M = x_.size();
    if (M == 2 || (M == 3 && x <= x_[1])) {
        size_t i = 0;
        if (M == 3 && x > x_[1]) i = 1;
        double t = (x - x_[i]) / (x_[i + 1] - x_[i]);
        return y_[i] * (1 - t) + y_[i + 1] * t;
    }
    if (M == 3) {
        double t = (x - x_[1]) / (x_[2] - x_[1]);
        return y_[1] * (1 - t) + y_[2] * t;
    }
    size_t i = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
    i = std::min(std::max<size_t>(i, 1), M - 1) - 1;
    double h = x_[i + 1] - x_[i], a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double CubicSpline::deriv(double x) const {
    size_t M = x_.size();
    if (M <= 3) {
        size_t i = (M == 3 && x > x_[1]) ? 1 : 0;
        return (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    }
    size_t i = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
    i = std::min(std::max<size_t>(i, 1), M - 1) - 1;
    double h = x_[i + 1] - x_[i], a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h +
           ((1 - 3 * a * a) * m_[i] + (3 * b * b - 1) * m_[i + 1]) * h / 6.0;
}

CurvatureSpec CurvatureSpec::constant(double c) {
    if (!(c > 0)) throw std::invalid_argument("constant curvature must be > 0");
    CurvatureSpec s;
    s.kind_ = CurvatureKind::Constant;
    s.constant_ = c;
    s.label_ = "constant:" + std::to_string(c);
    return s;
}

CurvatureSpec CurvatureSpec::fiber_constant(const Expression& kappa) {
    CurvatureSpec s;
    s.kind_ = CurvatureKind::FiberConstant;
    s.expr_ = kappa;
    s.label_ = "fiber:" + kappa.text();
    return s;
}

CurvatureSpec CurvatureSpec::radial(const Expression& k) {
    CurvatureSpec s;
    s.kind_ = CurvatureKind::Radial;
    s.expr_ = k;
    s.label_ = "radial:" + k.text();
    return s;
}

CurvatureSpec CurvatureSpec::homothety(const Expression& k, int m) {
    CurvatureSpec s;
    s.kind_ = CurvatureKind::Homothety;
    s.expr_ = k;
    s.m_ = m;
    s.label_ = "homothety:" + k.text();
    return s;
}

CurvatureSpec CurvatureSpec::expression(const Expression& k) {
    CurvatureSpec s;
    s.kind_ = CurvatureKind::Expression;
    s.expr_ = k;
    s.label_ = "expression:" + k.text();
    return s;
}

CurvatureSpec CurvatureSpec::table(std::vector<std::vector<double>> spatial_keys,
                                   std::vector<double> radii,
                                   std::vector<std::vector<double>> values) {
    CurvatureSpec s;
    s.kind_ = CurvatureKind::Table;
    s.spatial_keys_ = std::move(spatial_keys);
    size_t groups = std::max<size_t>(1, s.spatial_keys_.size());
    if (values.size() != groups) throw std::invalid_argument("table group count mismatch");
    for (auto& v : values) {
        for (double k : v)
            if (!(k > 0)) throw std::invalid_argument("table contains nonpositive K");
        s.splines_.emplace_back(radii, std::move(v));
    }
    s.label_ = "table[" + std::to_string(radii.size()) + " radii]";
    return s;
}

CurvatureSpec CurvatureSpec::callable(
    std::function<double(const double*, const double*, double)> fn, std::string label) {
    CurvatureSpec s;
    s.kind_ = CurvatureKind::Callable;
    s.fn_ = std::move(fn);
    s.label_ = std::move(label);
    return s;
}

int CurvatureSpec::find_spatial(const double* x, int n, const double* ang, int d) const {
    if (spatial_keys_.empty()) return 0;
    for (size_t g = 0; g < spatial_keys_.size(); ++g) {
        const auto& key = spatial_keys_[g];
        if ((int)key.size() != n + d) continue;
        bool ok = true;
        for (int a = 0; a < n && ok; ++a) ok = std::abs(key[a] - x[a]) <= 1e-9;
        for (int a = 0; a < d && ok; ++a) ok = std::abs(key[n + a] - ang[a]) <= 1e-9;
        if (ok) return (int)g;
    }
    throw std::invalid_argument("curvature table has no samples at the requested grid node");
}

double CurvatureSpec::eval_raw(const double* x, int n, const double* ang, int d,
                               double rho) const {
    std::map<std::string, double> vars;
    switch (kind_) {
        case CurvatureKind::Constant:
            return constant_;
        case CurvatureKind::FiberConstant:
            if (n > 0) vars["x"] = x[0];
            if (n > 1) vars["y"] = x[1];
            return expr_.eval(vars);
        case CurvatureKind::Radial:
            vars["rho"] = rho;
            return expr_.eval(vars);
        case CurvatureKind::Homothety: {
            if (n > 0) vars["x"] = x[0];
            if (n > 1) vars["y"] = x[1];
            if (d == 1) {
                vars["theta"] = ang[0];
            } else {
                vars["phi"] = ang[0];
                vars["theta"] = ang[1];
            }
            return std::pow(rho, 1 - m_) * expr_.eval(vars);
        }
        case CurvatureKind::Expression: {
            if (n > 0) vars["x"] = x[0];
            if (n > 1) vars["y"] = x[1];
            if (d == 1) {
                vars["theta"] = ang[0];
            } else {
                vars["phi"] = ang[0];
                vars["theta"] = ang[1];
            }
            vars["rho"] = rho;
            return expr_.eval(vars);
        }
        case CurvatureKind::Table: {
            const CubicSpline& sp = splines_[find_spatial(x, n, ang, d)];
            if (rho < sp.x_min() || rho > sp.x_max()) {
                extrapolated_ = true;
                double re = rho < sp.x_min() ? sp.x_min() : sp.x_max();
                double K = sp.eval(re);
                double slope = re * sp.deriv(re) / K;  // d log K / d log rho at the end
                return K * std::pow(rho / re, slope);
            }
            return sp.eval(rho);
        }
        case CurvatureKind::Callable:
            return fn_(x, ang, rho);
    }
    return 1.0;
}

double CurvatureSpec::eval(const BundleGrid& g, long node, double rho) const {
    double x[2] = {0, 0}, ang[2] = {0, 0};
    g.base_coords(node, x);
    g.fiber_angles(node, ang);
    return eval_raw(x, g.n(), ang, g.d(), rho);
}

double CurvatureSpec::dlog_drho(const BundleGrid& g, long node, double rho) const {
    switch (kind_) {
        case CurvatureKind::Constant:
        case CurvatureKind::FiberConstant:
            return 0.0;
        case CurvatureKind::Homothety:
            return 1.0 - m_;
        case CurvatureKind::Table: {
            double x[2] = {0, 0}, ang[2] = {0, 0};
            g.base_coords(node, x);
            g.fiber_angles(node, ang);
            const CubicSpline& sp = splines_[find_spatial(x, g.n(), ang, g.d())];
            double rc = std::clamp(rho, sp.x_min(), sp.x_max());
            return rc * sp.deriv(rc) / sp.eval(rc);
        }
        default: {
            const double s = 1e-6;
            double kp = eval(g, node, rho * std::exp(s));
            double km = eval(g, node, rho * std::exp(-s));
            return (std::log(kp) - std::log(km)) / (2.0 * s);
        }
    }
}

RadiusResult theorem2_radius(const CurvatureSpec& K, int m, double a, double b) {
    if (!(a > 0) || !(b > a)) throw std::invalid_argument("radius bracket must satisfy 0 < a < b");
    // Radial profiles ignore the node; evaluate at a fixed representative.
    BundleGrid probe;
    probe.base.dim = 0;
    probe.fiber.dim = 1;
    probe.fiber.n_theta = 1;
    probe.fiber.theta = {0.0};
    probe.fiber.weight = {2.0 * kPi};
    probe.mu = {0};

    auto psi = [&](double r) { return std::pow(r, m - 1) * K.eval(probe, 0, r); };

    RadiusResult res;
    res.psi_a = psi(a);
    res.psi_b = psi(b);
    const int samples = 17;
    bool degenerate = true;
    for (int i = 0; i < samples; ++i) {
        double r = a + (b - a) * i / (samples - 1);
        double v = psi(r);
        res.psi_samples.push_back(v);
        if (std::abs(v - 1.0) > 1e-9) degenerate = false;
    }
    if (degenerate) {
        res.degenerate = true;
        res.r = 0.5 * (a + b);
        return res;
    }
    double fa = res.psi_a - 1.0, fb = res.psi_b - 1.0;
    if (fa == 0.0) {
        res.r = a;
        return res;
    }
    if (fb == 0.0) {
        res.r = b;
        return res;
    }
    if ((fa > 0) == (fb > 0))
        throw bracket_error("psi(r) - 1 has the same sign at both bracket ends");
    double lo = a, hi = b;
    while (hi - lo > 1e-12 * std::max(1.0, std::abs(lo))) {
        double mid = 0.5 * (lo + hi);
        double fm = psi(mid) - 1.0;
        if (fm == 0.0) {
            lo = hi = mid;
            break;
        }
        if ((fm > 0) == (fa > 0))
            lo = mid;
        else
            hi = mid;
    }
    res.r = 0.5 * (lo + hi);
    return res;
}

}  // namespace rgc
