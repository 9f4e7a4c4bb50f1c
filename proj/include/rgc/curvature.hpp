#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rgc/expression.hpp"
#include "rgc/grid.hpp"

namespace rgc {

/// Not-a-knot cubic interpolant with analytic first derivative. Falls back
/// to the interpolating line/parabola below four samples.
class CubicSpline {
  public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y);
    double eval(double x) const;
    double deriv(double x) const;
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

  private:
    std::vector<double> x_, y_, m_;  // m_: second derivatives at the knots
};

enum class CurvatureKind { Constant, FiberConstant, Radial, Homothety, Expression, Table, Callable };

/// Strictly positive prescription K(x, theta, rho) on the punctured bundle.
/// Closed-form families, expressions in (x, y, theta, phi, rho), or sampled
/// radial tables with C^2 interpolation and log-linear extrapolation.
class CurvatureSpec {
  public:
    CurvatureSpec() = default;

    static CurvatureSpec constant(double c);
    static CurvatureSpec fiber_constant(const Expression& kappa);
    static CurvatureSpec radial(const Expression& k_of_rho);
    /// K(rho theta) = rho^(1-m) k(theta, x); homothety-invariant family.
    static CurvatureSpec homothety(const Expression& k, int m);
    static CurvatureSpec expression(const Expression& k);
    /// Sampled radial table; one sample set, or one per spatial key
    /// (matching grid nodes exactly).
    static CurvatureSpec table(std::vector<std::vector<double>> spatial_keys,
                               std::vector<double> radii,
                               std::vector<std::vector<double>> values);
    static CurvatureSpec callable(
        std::function<double(const double* x, const double* ang, double rho)> fn,
        std::string label = "callable");

    double eval(const BundleGrid& g, long node, double rho) const;
    /// Radial logarithmic derivative d log K / d log rho at (node, rho).
    double dlog_drho(const BundleGrid& g, long node, double rho) const;

    CurvatureKind kind() const { return kind_; }
    /// True when K(rho theta) = rho^(1-m) K(theta): constant shifts of u
    /// leave the prescription residual unchanged.
    bool shift_invariant() const { return kind_ == CurvatureKind::Homothety; }
    bool radial_only() const {
        return kind_ == CurvatureKind::Constant || kind_ == CurvatureKind::Radial ||
               (kind_ == CurvatureKind::Table && spatial_keys_.empty());
    }
    bool extrapolation_used() const { return extrapolated_; }
    const std::string& describe() const { return label_; }
    bool empty() const { return label_.empty(); }

  private:
    CurvatureKind kind_ = CurvatureKind::Constant;
    double constant_ = 1.0;
    int m_ = 2;
    Expression expr_;
    std::function<double(const double*, const double*, double)> fn_;
    std::vector<std::vector<double>> spatial_keys_;
    std::vector<CubicSpline> splines_;
    std::string label_ = "constant:1";
    mutable bool extrapolated_ = false;

    double eval_raw(const double* x, int n, const double* ang, int d, double rho) const;
    int find_spatial(const double* x, int n, const double* ang, int d) const;
};

/// Root of psi(r) = r^(m-1) K(r) - 1 on [a, b] by bisection to relative
/// 1e-12. A profile with psi identically 1 is flagged degenerate and the
/// bracket midpoint returned. Throws bracket_error when psi - 1 has the
/// same sign at both ends.
struct RadiusResult {
    double r = 1.0;
    bool degenerate = false;
    double psi_a = 0.0, psi_b = 0.0;
    std::vector<double> psi_samples;
};

struct bracket_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

RadiusResult theorem2_radius(const CurvatureSpec& K, int m, double a, double b);

}  // namespace rgc
