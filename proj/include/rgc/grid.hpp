#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace rgc {

inline constexpr double kPi = 3.14159265358979323846;

/// Uniform grid on the fiber sphere S^{d}, d = 1 (circle) or d = 2
/// (latitude-longitude with half-cell pole offset, no node at either pole).
struct SphereGrid {
    int dim = 1;            // d = m - 1
    int n_phi = 0;          // latitude rings (d = 2 only)
    int n_theta = 0;        // azimuth nodes
    double dphi = 0.0;
    double dtheta = 0.0;
    std::vector<double> phi;     // polar angle per ring, in (0, pi)
    std::vector<double> theta;   // azimuth per column, in [0, 2pi)
    std::vector<double> weight;  // quadrature weight per node (sums to 2pi / 4pi)

    int count() const { return dim == 1 ? n_theta : n_phi * n_theta; }
    int node(int j, int k) const { return dim == 1 ? k : j * n_theta + k; }
    int ring(int f) const { return dim == 1 ? 0 : f / n_theta; }
    int col(int f) const { return dim == 1 ? f : f % n_theta; }
};

/// Flat periodic torus base, period 2pi per axis. dim = 0 is a single point.
struct BaseGrid {
    int dim = 0;
    std::array<int, 2> res{1, 1};
    std::array<double, 2> h{0.0, 0.0};

    int count() const {
        int c = 1;
        for (int a = 0; a < dim; ++a) c *= res[a];
        return c;
    }
    double coord(int b, int axis) const {
        if (dim == 2) {
            int idx = (axis == 0) ? b / res[1] : b % res[1];
            return idx * h[axis];
        }
        return b * h[0];
    }
    int index(std::array<int, 2> ij) const {
        if (dim == 2) return ij[0] * res[1] + ij[1];
        return ij[0];
    }
    int neighbor(int b, int axis, int step) const {
        if (dim == 2) {
            int i = b / res[1], j = b % res[1];
            if (axis == 0)
                i = (i + step % res[0] + res[0]) % res[0];
            else
                j = (j + step % res[1] + res[1]) % res[1];
            return i * res[1] + j;
        }
        return (b + step % res[0] + res[0]) % res[0];
    }
};

/// Connection coefficient sampler: fills an m x m row-major matrix
/// gamma[be * m + al] = Gamma^be_{axis,al} at base point x.
using ConnectionSampler =
    std::function<void(const double* x, int axis, double* gamma)>;

/// Product discretization of the unit sphere bundle over a flat torus,
/// with frame metadata (horizontal/vertical split) and optional metric
/// connection coefficients sampled per base node.
struct BundleGrid {
    BaseGrid base;
    SphereGrid fiber;
    std::vector<int> mu;       // frame flags: 1 horizontal, 0 vertical
    std::vector<double> conn;  // base_count * n * m * m, empty means zero

    int n() const { return base.dim; }
    int d() const { return fiber.dim; }
    int m() const { return fiber.dim + 1; }
    int frame_count() const { return base.dim + fiber.dim; }
    long node_count() const { return (long)base.count() * fiber.count(); }

    long node(int b, int f) const { return (long)b * fiber.count() + f; }
    int base_of(long p) const { return (int)(p / fiber.count()); }
    int fiber_of(long p) const { return (int)(p % fiber.count()); }

    /// Largest grid spacing over all axes (radians).
    double h_max() const {
        double h = 0.0;
        for (int a = 0; a < base.dim; ++a) h = std::max(h, base.h[a]);
        if (fiber.dim == 2) h = std::max(h, fiber.dphi);
        h = std::max(h, fiber.dtheta);
        return h;
    }

    double weight(long p) const {
        double w = fiber.weight[fiber_of(p)];
        for (int a = 0; a < base.dim; ++a) w *= base.h[a];
        return w;
    }
    double measure() const {
        double s = fiber.dim == 1 ? 2.0 * kPi : 4.0 * kPi;
        for (int a = 0; a < base.dim; ++a) s *= 2.0 * kPi;
        return s;
    }

    /// Fiber neighbor with across-pole index reflection (d = 2):
    /// stepping past a pole lands on the same ring, azimuth shifted by pi.
    int fiber_neighbor(int f, int dj, int dk) const {
        if (fiber.dim == 1) {
            int k = (col(f) + dk) % fiber.n_theta;
            if (k < 0) k += fiber.n_theta;
            return k;
        }
        int j = fiber.ring(f) + dj;
        int k = fiber.col(f) + dk;
        if (j < 0) {
            j = -1 - j;
            k += fiber.n_theta / 2;
        } else if (j >= fiber.n_phi) {
            j = 2 * fiber.n_phi - 1 - j;
            k += fiber.n_theta / 2;
        }
        k %= fiber.n_theta;
        if (k < 0) k += fiber.n_theta;
        return fiber.node(j, k);
    }
    int col(int f) const { return fiber.col(f); }

    /// Unit direction of fiber node f in the ambient fiber space R^m.
    void fiber_direction(int f, double* out) const {
        if (fiber.dim == 1) {
            double t = fiber.theta[f];
            out[0] = std::cos(t);
            out[1] = std::sin(t);
        } else {
            double ph = fiber.phi[fiber.ring(f)];
            double th = fiber.theta[fiber.col(f)];
            out[0] = std::sin(ph) * std::cos(th);
            out[1] = std::sin(ph) * std::sin(th);
            out[2] = std::cos(ph);
        }
    }

    void base_coords(long p, double* x) const {
        int b = base_of(p);
        for (int a = 0; a < base.dim; ++a) x[a] = base.coord(b, a);
    }
    void fiber_angles(long p, double* ang) const {
        int f = fiber_of(p);
        if (fiber.dim == 1) {
            ang[0] = fiber.theta[f];
        } else {
            ang[0] = fiber.phi[fiber.ring(f)];
            ang[1] = fiber.theta[fiber.col(f)];
        }
    }

    const double* gamma(int b, int axis) const {
        int mm = m() * m();
        return conn.data() + ((long)b * base.dim + axis) * mm;
    }
    bool has_connection() const { return !conn.empty(); }
};

/// Nodal scalar values on a BundleGrid. Represents a function on the unit
/// sphere bundle extended radially constant, so its radial derivative
/// vanishes by construction.
struct ScalarField {
    std::shared_ptr<const BundleGrid> grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(std::shared_ptr<const BundleGrid> g, double fill = 0.0)
        : grid(std::move(g)), v(grid->node_count(), fill) {}

    long size() const { return (long)v.size(); }
    double& operator[](long p) { return v[p]; }
    double operator[](long p) const { return v[p]; }
};

/// Evaluate fn(x, ang) at every node. x has grid.n() entries, ang has
/// grid.d() entries (theta for d=1; phi,theta for d=2).
ScalarField make_field(std::shared_ptr<const BundleGrid> grid,
                       const std::function<double(const double*, const double*)>& fn);

std::shared_ptr<const BundleGrid> build_bundle_grid(
    int n, int d, std::array<int, 2> base_res, std::array<int, 2> fiber_res,
    const ConnectionSampler& connection = nullptr);

/// Convenience overload: single resolution per factor (d = 2 uses
/// fiber_res x 2*fiber_res).
std::shared_ptr<const BundleGrid> build_bundle_grid(int n, int d, int base_res,
                                                    int fiber_res);

}  // namespace rgc
