#include "rgc/verification.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <Eigen/Dense>

namespace rgc {

namespace {

double rand_u(std::mt19937& rng) { return rng() * (1.0 / 4294967296.0); }
double rand_s(std::mt19937& rng) { return 2.0 * rand_u(rng) - 1.0; }

}  // namespace

ScalarField theorem1_oracle(std::shared_ptr<const BundleGrid> grid,
                            const std::function<double(const double* x)>& kappa) {
    int m = grid->m();
    ScalarField u(grid);
    double x[2] = {0, 0};
    for (long p = 0; p < u.size(); ++p) {
        grid->base_coords(p, x);
        double k = kappa(x);
        if (!(k > 0)) throw std::invalid_argument("kappa must be strictly positive on the base");
        u[p] = -std::log(k) / (m - 1);
    }
    return u;
}

namespace {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

EmbedResult embed_curve(const ScalarField& u, int b) {
    const BundleGrid& g = *u.grid;
    int N = g.fiber.n_theta;
    EmbedResult out;
    out.mesh.ambient_dim = 2;
    out.mesh.polyline = true;
    out.mesh.vertices.resize(N);
    for (int k = 0; k < N; ++k) {
        double r = std::exp(u[g.node(b, k)]);
        out.mesh.vertices[k] = {r * std::cos(g.fiber.theta[k]), r * std::sin(g.fiber.theta[k]),
                                0.0};
    }
    out.curvature.resize(N);
    double area2 = 0.0;
    for (int k = 0; k < N; ++k) {
        const auto& A = out.mesh.vertices[(k + N - 1) % N];
        const auto& B = out.mesh.vertices[k];
        const auto& C = out.mesh.vertices[(k + 1) % N];
        double abx = B[0] - A[0], aby = B[1] - A[1];
        double acx = C[0] - A[0], acy = C[1] - A[1];
        double cr = abx * acy - aby * acx;
        double lab = std::hypot(abx, aby);
        double lbc = std::hypot(C[0] - B[0], C[1] - B[1]);
        double lca = std::hypot(acx, acy);
        if (lab * lbc * lca < 1e-300 || std::abs(cr) < 1e-14 * lab * lca)
            out.mesh.degenerate_faces.push_back(k);
        out.curvature[k] = 2.0 * cr / (lab * lbc * lca);
        area2 += B[0] * C[1] - C[0] * B[1];
    }
    out.mesh.positively_oriented = area2 > 0.0;
    out.mesh.closed = true;
    return out;
}

EmbedResult embed_surface(const ScalarField& u, int b) {
    const BundleGrid& g = *u.grid;
    int np = g.fiber.n_phi, nt = g.fiber.n_theta;
    int N = np * nt;
    EmbedResult out;
    out.mesh.ambient_dim = 3;
    out.mesh.vertices.resize(N);
    double dir[3] = {0, 0, 0};
    for (int f = 0; f < N; ++f) {
        g.fiber_direction(f, dir);
        double r = std::exp(u[g.node(b, f)]);
        out.mesh.vertices[f] = {r * dir[0], r * dir[1], r * dir[2]};
    }
    auto vid = [&](int j, int k) { return j * nt + (k % nt); };
    auto& faces = out.mesh.faces;
    for (int j = 0; j + 1 < np; ++j)
        for (int k = 0; k < nt; ++k) {
            int A = vid(j, k), B = vid(j + 1, k), C = vid(j + 1, k + 1), D = vid(j, k + 1);
            faces.push_back({A, B, C});
            faces.push_back({A, C, D});
        }
    for (int k = 1; k + 1 < nt; ++k) {
        faces.push_back({vid(0, 0), vid(0, k), vid(0, k + 1)});           // north cap
        faces.push_back({vid(np - 1, 0), vid(np - 1, k + 1), vid(np - 1, k)});  // south cap
    }

    std::vector<double> angle_sum(N, 0.0), area_mixed(N, 0.0);
    std::map<std::pair<int, int>, int> edge_count;
    double vol6 = 0.0;
    double scale = 0.0;
    for (const auto& v : out.mesh.vertices) scale = std::max(scale, std::abs(v[0]) + std::abs(v[1]) + std::abs(v[2]));
    for (size_t fi = 0; fi < faces.size(); ++fi) {
        auto [i0, i1, i2] = faces[fi];
        Vec3 P{out.mesh.vertices[i0][0], out.mesh.vertices[i0][1], out.mesh.vertices[i0][2]};
        Vec3 Q{out.mesh.vertices[i1][0], out.mesh.vertices[i1][1], out.mesh.vertices[i1][2]};
        Vec3 R{out.mesh.vertices[i2][0], out.mesh.vertices[i2][1], out.mesh.vertices[i2][2]};
        Vec3 n = cross(Q - P, R - P);
        double a2 = norm(n);
        if (a2 < 1e-13 * scale * scale) {
            out.mesh.degenerate_faces.push_back((int)fi);
            continue;
        }
        vol6 += dot(P, cross(Q, R));
        int idx[3] = {i0, i1, i2};
        Vec3 pts[3] = {P, Q, R};
        double ang[3], cot[3];
        for (int c = 0; c < 3; ++c) {
            Vec3 e1 = pts[(c + 1) % 3] - pts[c];
            Vec3 e2 = pts[(c + 2) % 3] - pts[c];
            double cosv = dot(e1, e2) / (norm(e1) * norm(e2));
            cosv = std::clamp(cosv, -1.0, 1.0);
            ang[c] = std::acos(cosv);
            double s = norm(cross(e1, e2));
            cot[c] = dot(e1, e2) / (s > 1e-300 ? s : 1e-300);
        }
        double area = 0.5 * a2;
        bool obtuse = ang[0] > kPi / 2 || ang[1] > kPi / 2 || ang[2] > kPi / 2;
        for (int c = 0; c < 3; ++c) {
            angle_sum[idx[c]] += ang[c];
            if (!obtuse) {
                // Voronoi piece: 1/8 (|e2|^2 cot(angle opposite e2) + ...)
                Vec3 e1 = pts[(c + 1) % 3] - pts[c];
                Vec3 e2 = pts[(c + 2) % 3] - pts[c];
                area_mixed[idx[c]] +=
                    0.125 * (dot(e1, e1) * cot[(c + 2) % 3] + dot(e2, e2) * cot[(c + 1) % 3]);
            } else {
                area_mixed[idx[c]] += (ang[c] > kPi / 2) ? area / 2.0 : area / 4.0;
            }
        }
        for (int c = 0; c < 3; ++c) {
            int a = idx[c], bb = idx[(c + 1) % 3];
            edge_count[{std::min(a, bb), std::max(a, bb)}] += 1;
        }
    }
    out.mesh.positively_oriented = vol6 > 0.0;
    out.mesh.closed = true;
    for (const auto& [e, c] : edge_count)
        if (c != 2) out.mesh.closed = false;

    out.curvature.resize(N);
    for (int f = 0; f < N; ++f)
        out.curvature[f] = (2.0 * kPi - angle_sum[f]) / std::max(area_mixed[f], 1e-300);
    for (int k = 0; k < nt; ++k) {
        out.pole_adjacent.push_back(vid(0, k));
        out.pole_adjacent.push_back(vid(np - 1, k));
    }
    return out;
}

}  // namespace

EmbedResult embed_and_measure(const ScalarField& u, int base_node) {
    if (u.grid->d() == 1) return embed_curve(u, base_node);
    return embed_surface(u, base_node);
}

namespace {

// Component-parity-aware fetch of a fiber field across the poles: tensor
// components with an odd number of phi indices flip sign on reflection.
struct FiberField {
    const BundleGrid* g;
    int b;
    std::vector<double> v;  // per fiber node
    int parity = 0;         // number of phi indices mod 2

    double at(int j, int k) const {
        const SphereGrid& f = g->fiber;
        double sign = 1.0;
        if (j < 0) {
            j = -1 - j;
            k += f.n_theta / 2;
            if (parity % 2) sign = -1.0;
        } else if (j >= f.n_phi) {
            j = 2 * f.n_phi - 1 - j;
            k += f.n_theta / 2;
            if (parity % 2) sign = -1.0;
        }
        k %= f.n_theta;
        if (k < 0) k += f.n_theta;
        return sign * v[f.node(j, k)];
    }
};

double dphi_of(const FiberField& F, int j, int k, double dphi) {
    return (F.at(j + 1, k) - F.at(j - 1, k)) / (2.0 * dphi);
}
double dtheta_of(const FiberField& F, int j, int k, double dth) {
    return (F.at(j, k + 1) - F.at(j, k - 1)) / (2.0 * dth);
}

// Vertical curvature commutator violation on the round 2-sphere: the
// antisymmetrized discrete third covariant derivative against the exact
// curvature contraction, per fiber node of base node b.
void commutator_violation(const ScalarField& u, int b, std::vector<double>& viol) {
    const BundleGrid& g = *u.grid;
    const SphereGrid& f = g.fiber;
    int np = f.n_phi, nt = f.n_theta, N = np * nt;
    double dp = f.dphi, dt = f.dtheta;

    FiberField Hpp{&g, b, std::vector<double>(N), 0};
    FiberField Hpt{&g, b, std::vector<double>(N), 1};
    FiberField Htt{&g, b, std::vector<double>(N), 0};
    FiberField V{&g, b, std::vector<double>(N), 0};
    for (int fb = 0; fb < N; ++fb) V.v[fb] = u[g.node(b, fb)];

    // Coordinate covariant Hessian components.
    for (int j = 0; j < np; ++j)
        for (int k = 0; k < nt; ++k) {
            double s = std::sin(f.phi[j]), c = std::cos(f.phi[j]), cot = c / s;
            double vp = dphi_of(V, j, k, dp);
            double vt = dtheta_of(V, j, k, dt);
            double vpp = (V.at(j + 1, k) - 2 * V.at(j, k) + V.at(j - 1, k)) / (dp * dp);
            double vtt = (V.at(j, k + 1) - 2 * V.at(j, k) + V.at(j, k - 1)) / (dt * dt);
            double vpt = (V.at(j + 1, k + 1) - V.at(j + 1, k - 1) - V.at(j - 1, k + 1) +
                          V.at(j - 1, k - 1)) /
                         (4 * dp * dt);
            int id = f.node(j, k);
            Hpp.v[id] = vpp;
            Hpt.v[id] = vpt - cot * vt;
            Htt.v[id] = vtt + s * c * vp;
        }

    viol.assign(N, 0.0);
    for (int j = 0; j < np; ++j)
        for (int k = 0; k < nt; ++k) {
            double s = std::sin(f.phi[j]), c = std::cos(f.phi[j]), cot = c / s;
            int id = f.node(j, k);
            // third covariant derivatives in coordinates
            double T_ppt = dphi_of(Hpt, j, k, dp) - cot * Hpt.v[id];
            double T_tpp = dtheta_of(Hpp, j, k, dt) - 2.0 * cot * Hpt.v[id];
            double T_ptt = dphi_of(Htt, j, k, dp) - 2.0 * cot * Htt.v[id];
            double T_tpt = dtheta_of(Hpt, j, k, dt) - cot * Htt.v[id] + s * c * Hpp.v[id];
            // orthonormal frame gradient
            double w1 = dphi_of(V, j, k, dp);
            double w2 = dtheta_of(V, j, k, dt) / s;
            // [D_1, D_2] applied to the gradient: component mu = 1 equals
            // +w2, component mu = 2 equals -w1.
            double delta1 = (T_ppt - T_tpp) / s;
            double delta2 = (T_ptt - T_tpt) / (s * s);
            viol[id] = std::max(std::abs(delta1 - w2), std::abs(delta2 + w1));
        }
}

}  // namespace

IdentityReport structure_identities_for(const ScalarField& v) {
    const BundleGrid& g = *v.grid;
    IdentityReport rep;
    rep.fields_tested = 1;
    {
        if (g.d() == 2) {
            std::vector<double> viol;
            for (int b = 0; b < g.base.count(); ++b) {
                commutator_violation(v, b, viol);
                for (int f = 0; f < g.fiber.count(); ++f) {
                    rep.commutator_max_all = std::max(rep.commutator_max_all, viol[f]);
                    // The 1/sin(phi) weights of the coordinate frame keep a
                    // fixed-index ring near the poles from converging; the
                    // headline maximum is taken over the fixed collar
                    // sin(phi) >= 0.4 and the all-node value reported beside.
                    if (std::sin(g.fiber.phi[g.fiber.ring(f)]) < 0.4) continue;
                    rep.commutator_max = std::max(rep.commutator_max, viol[f]);
                }
            }
        }

        if (g.n() > 0) {
            for (int i = 0; i < g.n(); ++i) {
                std::vector<double> ei = frame_direction_derivative(g, v.v, i);
                for (int al = 0; al < g.d(); ++al) {
                    std::vector<double> m1 = frame_direction_derivative(g, ei, g.n() + al);
                    std::vector<double> dal = frame_direction_derivative(g, v.v, g.n() + al);
                    std::vector<double> m2 = frame_direction_derivative(g, dal, i);
                    for (long p = 0; p < (long)m1.size(); ++p)
                        rep.mixed_max = std::max(rep.mixed_max, std::abs(m1[p] - m2[p]));
                }
            }
        }

        FrameDerivatives base = covariant_gradient(v);
        for (double rho : {0.5, 2.0}) {
            FrameDerivatives shell = covariant_hessian_at_radius(v, rho);
            for (long p = 0; p < base.count; ++p)
                for (int a = 0; a < g.frame_count(); ++a) {
                    double expect = std::pow(rho, g.mu[a] - 1) * base.g(p, a);
                    rep.homogeneity_max =
                        std::max(rep.homogeneity_max, std::abs(shell.g(p, a) - expect));
                }
        }
    }
    if (g.d() == 1) rep.commutator_max = rep.commutator_max_all = 0.0;
    return rep;
}

IdentityReport structure_identity_suite(std::shared_ptr<const BundleGrid> grid, unsigned seed,
                                        int n_fields) {
    IdentityReport rep;
    rep.fields_tested = n_fields;
    for (int fi = 0; fi < n_fields; ++fi) {
        IdentityReport one = structure_identities_for(random_smooth_field(grid, seed + 101 * fi, 0.5));
        rep.commutator_max = std::max(rep.commutator_max, one.commutator_max);
        rep.commutator_max_all = std::max(rep.commutator_max_all, one.commutator_max_all);
        rep.mixed_max = std::max(rep.mixed_max, one.mixed_max);
        rep.homogeneity_max = std::max(rep.homogeneity_max, one.homogeneity_max);
    }
    return rep;
}

std::vector<double> convexity_diagnostic(const ScalarField& u) {
    const BundleGrid& g = *u.grid;
    int n = g.n(), d = g.d(), A = n + d;
    long N = g.node_count();
    FrameDerivatives der = covariant_hessian(u);
    std::vector<double> mineig(N);
    Eigen::MatrixXd M(A, A);
    for (long p = 0; p < N; ++p) {
        for (int a = 0; a < A; ++a)
            for (int b = 0; b < A; ++b) {
                double scale = std::exp((g.mu[a] + g.mu[b]) * u[p]);
                double grad_a = a < n ? der.gh(p, a) : der.gv(p, a - n);
                double grad_b = b < n ? der.gh(p, b) : der.gv(p, b - n);
                double hess;
                if (a < n && b < n)
                    hess = der.hh(p, a, b);
                else if (a >= n && b >= n)
                    hess = der.hv(p, a - n, b - n);
                else
                    hess = a < n ? der.hm(p, a, b - n) : der.hm(p, b, a - n);
                double gab = (a == b) ? 1.0 : 0.0;
                M(a, b) = (1 - g.mu[a]) * gab + (1 - 2 * g.mu[a]) * scale * grad_a * grad_b -
                          scale * hess;
            }
        Eigen::MatrixXd S = 0.5 * (M + M.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        mineig[p] = es.eigenvalues().minCoeff();
    }
    return mineig;
}

ConvergenceResult convergence_study(const std::function<double(int)>& error_at,
                                    const std::vector<int>& resolutions) {
    if (resolutions.size() < 3)
        throw std::invalid_argument("convergence study needs at least 3 resolutions");
    ConvergenceResult res;
    for (int r : resolutions) res.errors.push_back(error_at(r));
    res.exact = true;
    for (double e : res.errors) res.exact = res.exact && e < 1e-12;
    if (!res.exact)
        for (size_t i = 0; i + 1 < res.errors.size(); ++i)
            res.orders.push_back(std::log2(res.errors[i] / res.errors[i + 1]));
    return res;
}

ScalarField random_smooth_field(std::shared_ptr<const BundleGrid> grid, unsigned seed,
                                double amplitude) {
    const BundleGrid& g = *grid;
    std::mt19937 rng(seed);
    // Low-degree polynomial in the ambient fiber coordinates; smooth on the
    // sphere (and across the poles) by construction.
    std::vector<std::array<int, 3>> monos;
    int mdim = g.m();
    for (int dx = 0; dx <= 3; ++dx)
        for (int dy = 0; dy <= 3 - dx; ++dy)
            for (int dz = 0; dz <= (mdim == 3 ? 3 - dx - dy : 0); ++dz)
                if (dx + dy + dz >= 1) monos.push_back({dx, dy, dz});
    std::vector<double> coef(monos.size());
    for (size_t i = 0; i < monos.size(); ++i) {
        int deg = monos[i][0] + monos[i][1] + monos[i][2];
        coef[i] = amplitude * rand_s(rng) / (1.0 + deg);
    }
    double bc[2] = {0.3 * rand_s(rng), 0.3 * rand_s(rng)};
    double bp[2] = {2 * kPi * rand_u(rng), 2 * kPi * rand_u(rng)};

    ScalarField u(grid);
    double dir[3] = {0, 0, 0}, x[2] = {0, 0};
    for (long p = 0; p < u.size(); ++p) {
        g.fiber_direction(g.fiber_of(p), dir);
        double s = 0.0;
        for (size_t i = 0; i < monos.size(); ++i)
            s += coef[i] * std::pow(dir[0], monos[i][0]) * std::pow(dir[1], monos[i][1]) *
                 std::pow(dir[2], monos[i][2]);
        g.base_coords(p, x);
        double fac = 1.0;
        for (int a = 0; a < g.n(); ++a) fac *= 1.0 + bc[a] * std::cos(x[a] + bp[a]);
        u[p] = s * fac;
    }
    return u;
}

double interpolate_field(const ScalarField& u, const double* x, const double* ang) {
    const BundleGrid& g = *u.grid;
    // Collect the 2^(n+d) corner stencil with per-axis weights.
    struct Axis {
        int i0, i1;          // neighbor indices along this axis
        double w1;           // weight of i1
        bool fiber_ring = false;
    };
    std::vector<Axis> axes;
    for (int a = 0; a < g.n(); ++a) {
        double t = x[a] / g.base.h[a];
        double f = std::floor(t);
        Axis ax;
        ax.i0 = (int)f % g.base.res[a];
        if (ax.i0 < 0) ax.i0 += g.base.res[a];
        ax.i1 = (ax.i0 + 1) % g.base.res[a];
        ax.w1 = t - f;
        axes.push_back(ax);
    }
    int ring0 = 0, ring1 = 0;
    double ringw = 0.0;
    if (g.d() == 2) {
        double t = ang[0] / g.fiber.dphi - 0.5;
        double f = std::floor(t);
        ring0 = (int)f;
        ring1 = ring0 + 1;
        ringw = t - f;
    }
    double tt = (g.d() == 2 ? ang[1] : ang[0]) / g.fiber.dtheta;
    double ft = std::floor(tt);
    int k0 = (int)ft % g.fiber.n_theta;
    if (k0 < 0) k0 += g.fiber.n_theta;
    double wt = tt - ft;

    double acc = 0.0;
    int corners = 1 << (g.n() + g.d());
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::array<int, 2> bij{0, 0};
        int bit = 0;
        for (int a = 0; a < g.n(); ++a, ++bit) {
            bool hi = c & (1 << bit);
            bij[a] = hi ? axes[a].i1 : axes[a].i0;
            w *= hi ? axes[a].w1 : 1.0 - axes[a].w1;
        }
        int fidx;
        if (g.d() == 2) {
            bool hj = c & (1 << bit);
            ++bit;
            bool hk = c & (1 << bit);
            int j = hj ? ring1 : ring0;
            int k = hk ? (k0 + 1) % g.fiber.n_theta : k0;
            w *= (hj ? ringw : 1.0 - ringw) * (hk ? wt : 1.0 - wt);
            int anchor = g.fiber.node(std::clamp(j, 0, g.fiber.n_phi - 1), k);
            fidx = g.fiber_neighbor(anchor, j - std::clamp(j, 0, g.fiber.n_phi - 1), 0);
        } else {
            bool hk = c & (1 << bit);
            fidx = hk ? (k0 + 1) % g.fiber.n_theta : k0;
            w *= hk ? wt : 1.0 - wt;
        }
        int b = g.base.dim == 2 ? bij[0] * g.base.res[1] + bij[1] : bij[0];
        acc += w * u[g.node(g.base.dim == 0 ? 0 : b, fidx)];
    }
    return acc;
}

ScalarField random_admissible_field(std::shared_ptr<const BundleGrid> grid, unsigned seed,
                                    double amplitude) {
    for (int tries = 0; tries < 40; ++tries) {
        ScalarField u = random_smooth_field(grid, seed, amplitude);
        AdmissibleTensor T = admissible_tensor(u);
        if (T.admissible && T.margin > 0.05) return u;
        amplitude *= 0.5;
    }
    return ScalarField(grid, 0.0);
}

}  // namespace rgc
