#include "rgc/grid.hpp"

#include <algorithm>

namespace rgc {

namespace {

SphereGrid make_circle(int n_theta) {
    SphereGrid g;
    g.dim = 1;
    g.n_theta = n_theta;
    g.dtheta = 2.0 * kPi / n_theta;
    g.theta.resize(n_theta);
    g.weight.assign(n_theta, g.dtheta);
    for (int k = 0; k < n_theta; ++k) g.theta[k] = k * g.dtheta;
    return g;
}

SphereGrid make_latlong(int n_phi, int n_theta) {
    SphereGrid g;
    g.dim = 2;
    g.n_phi = n_phi;
    g.n_theta = n_theta;
    g.dphi = kPi / n_phi;
    g.dtheta = 2.0 * kPi / n_theta;
    g.phi.resize(n_phi);
    g.theta.resize(n_theta);
    for (int j = 0; j < n_phi; ++j) g.phi[j] = (j + 0.5) * g.dphi;
    for (int k = 0; k < n_theta; ++k) g.theta[k] = k * g.dtheta;
    g.weight.resize(n_phi * n_theta);
    // Exact cell areas: the per-ring factor telescopes so the total is 4pi
    // to round-off.
    for (int j = 0; j < n_phi; ++j) {
        double band = std::cos(g.phi[j] - 0.5 * g.dphi) - std::cos(g.phi[j] + 0.5 * g.dphi);
        for (int k = 0; k < n_theta; ++k) g.weight[g.node(j, k)] = band * g.dtheta;
    }
    return g;
}

}  // namespace

std::shared_ptr<const BundleGrid> build_bundle_grid(
    int n, int d, std::array<int, 2> base_res, std::array<int, 2> fiber_res,
    const ConnectionSampler& connection) {
    if (n < 0 || n > 2) throw std::invalid_argument("base dimension must be 0, 1 or 2");
    if (d < 1 || d > 2) throw std::invalid_argument("fiber dimension must be 1 or 2");
    for (int a = 0; a < n; ++a)
        if (base_res[a] < 8) throw std::invalid_argument("base resolution must be >= 8 per axis");

    auto g = std::make_shared<BundleGrid>();
    g->base.dim = n;
    for (int a = 0; a < n; ++a) {
        g->base.res[a] = base_res[a];
        g->base.h[a] = 2.0 * kPi / base_res[a];
    }

    if (d == 1) {
        if (fiber_res[0] < 8) throw std::invalid_argument("fiber resolution must be >= 8");
        g->fiber = make_circle(fiber_res[0]);
    } else {
        if (fiber_res[0] < 8 || fiber_res[1] < 8)
            throw std::invalid_argument("fiber resolution must be >= 8 per axis");
        if (fiber_res[1] % 2 != 0)
            throw std::invalid_argument("longitude count must be even (pole reflection)");
        g->fiber = make_latlong(fiber_res[0], fiber_res[1]);
    }

    g->mu.resize(n + d);
    for (int a = 0; a < n; ++a) g->mu[a] = 1;
    for (int a = n; a < n + d; ++a) g->mu[a] = 0;

    if (connection && n > 0) {
        int m = d + 1, mm = m * m;
        g->conn.assign((long)g->base.count() * n * mm, 0.0);
        std::vector<double> gam(mm);
        for (int b = 0; b < g->base.count(); ++b) {
            double x[2] = {g->base.coord(b, 0), n > 1 ? g->base.coord(b, 1) : 0.0};
            for (int axis = 0; axis < n; ++axis) {
                connection(x, axis, gam.data());
                double worst = 0.0;
                for (int al = 0; al < m; ++al)
                    for (int be = 0; be < m; ++be)
                        worst = std::max(worst, std::abs(gam[be * m + al] + gam[al * m + be]));
                if (worst > 1e-10)
                    throw std::invalid_argument(
                        "connection sampler violates antisymmetry beyond 1e-10 (metric "
                        "connection required)");
                double* dst = g->conn.data() + ((long)b * n + axis) * mm;
                for (int al = 0; al < m; ++al)
                    for (int be = 0; be < m; ++be)
                        dst[be * m + al] = 0.5 * (gam[be * m + al] - gam[al * m + be]);
            }
        }
    }
    return g;
}

std::shared_ptr<const BundleGrid> build_bundle_grid(int n, int d, int base_res, int fiber_res) {
    return build_bundle_grid(n, d, {base_res, base_res},
                             d == 1 ? std::array<int, 2>{fiber_res, 0}
                                    : std::array<int, 2>{fiber_res, 2 * fiber_res});
}

ScalarField make_field(std::shared_ptr<const BundleGrid> grid,
                       const std::function<double(const double*, const double*)>& fn) {
    ScalarField u(grid);
    double x[2] = {0, 0}, ang[2] = {0, 0};
    for (long p = 0; p < u.size(); ++p) {
        grid->base_coords(p, x);
        grid->fiber_angles(p, ang);
        u[p] = fn(x, ang);
    }
    return u;
}

}  // namespace rgc
