#pragma once

#include "rgc/grid.hpp"

namespace rgc {

/// Per-node covariant gradient and Hessian blocks of a radially constant
/// scalar in the orthonormal moving frame (horizontal lifts first, then the
/// fiber frame of the round metric).
struct FrameDerivatives {
    int n = 0, d = 1;
    long count = 0;
    std::vector<double> grad;    // count * (n + d)
    std::vector<double> hess_h;  // count * n * n
    std::vector<double> hess_v;  // count * d * d
    std::vector<double> hess_m;  // count * n * d, diagnostics only
    bool has_hessian = false;

    double g(long p, int a) const { return grad[p * (n + d) + a]; }
    double gh(long p, int i) const { return grad[p * (n + d) + i]; }
    double gv(long p, int al) const { return grad[p * (n + d) + n + al]; }
    double hh(long p, int i, int j) const { return hess_h[(p * n + i) * n + j]; }
    double hv(long p, int al, int be) const { return hess_v[(p * d + al) * d + be]; }
    double hm(long p, int i, int al) const { return hess_m[(p * n + i) * d + al]; }

    /// Squared vertical gradient at p.
    double v1(long p) const {
        double s = 0.0;
        for (int al = 0; al < d; ++al) s += gv(p, al) * gv(p, al);
        return s;
    }
};

/// Second-order central differences of u along the frame directions.
/// Horizontal components carry the connection correction when the grid has
/// a nonzero connection.
FrameDerivatives covariant_gradient(const ScalarField& u);

/// Gradient plus covariant Hessian blocks: the round-metric covariant
/// Hessian on the fiber, plain second differences on the flat torus, and
/// mixed blocks (vertical derivative of the horizontal derivative).
FrameDerivatives covariant_hessian(const ScalarField& u);

/// Frame derivatives of the radially constant extension evaluated on the
/// shell of radius rho: D_a u is homogeneous of degree mu_a - 1 and the
/// vertical Hessian of degree -2.
FrameDerivatives covariant_hessian_at_radius(const ScalarField& u, double rho);

/// Extends u to shells r(1 +- delta), forms mixed radial derivatives by
/// finite differences and returns the maximum violation of the
/// radial-constancy identities D_{a nu}u = -(1-mu_a) r^{-1} D_a u and
/// D_{nu nu}u = 0. delta defaults to min(10 h, 1/2).
double radial_identity_check(const ScalarField& u, double r, double delta = -1.0);

/// Applies a single frame direction derivative to a nodal field (used for
/// third-difference diagnostics; no curvature corrections).
std::vector<double> frame_direction_derivative(const BundleGrid& g,
                                               const std::vector<double>& f, int a);

namespace detail {

// Low-level stencils shared with the operator Jacobians.
void fiber_gradient(const BundleGrid& g, const std::vector<double>& f, long p, double* out);
void fiber_hessian(const BundleGrid& g, const std::vector<double>& f, long p, double* H);
double horizontal_plain_derivative(const BundleGrid& g, const std::vector<double>& f, long p,
                                   int axis);
void horizontal_plain_hessian(const BundleGrid& g, const std::vector<double>& f, long p,
                              double* H);

}  // namespace detail

}  // namespace rgc
