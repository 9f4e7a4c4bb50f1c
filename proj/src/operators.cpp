#include "rgc/operators.hpp"

#include <cmath>
#include <limits>

namespace rgc {

namespace {

// Symmetric 2x2 helpers on row-major storage {a, b, b, c}.
inline double det2(const double* A) { return A[0] * A[3] - A[1] * A[2]; }
inline double mineig2(const double* A) {
    double half = 0.5 * (A[0] + A[3]);
    double rad = std::sqrt(0.25 * (A[0] - A[3]) * (A[0] - A[3]) + A[1] * A[2]);
    return half - rad;
}
inline void inv2(const double* A, double det, double* out) {
    out[0] = A[3] / det;
    out[1] = -A[1] / det;
    out[2] = -A[2] / det;
    out[3] = A[0] / det;
}

}  // namespace

OperatorState build_state(const ScalarField& u) {
    const BundleGrid& g = *u.grid;
    int n = g.n(), d = g.d();
    long N = g.node_count();

    OperatorState st;
    st.der = covariant_hessian(u);
    st.n1.assign(N, 1.0);
    st.n2.assign(N, 1.0);
    st.inv_v.assign(N * d * d, 0.0);
    st.mineig_v.assign(N, 0.0);
    st.v1.assign(N, 0.0);
    if (n > 0) {
        st.inv_h.assign(N * n * n, 0.0);
        st.mineig_h.assign(N, 1.0);
    }

    double margin = std::numeric_limits<double>::infinity();
    double A[4], inv[4];
    for (long p = 0; p < N; ++p) {
        st.v1[p] = st.der.v1(p);
        if (d == 1) {
            double gv = st.der.gv(p, 0);
            A[0] = 1.0 + gv * gv - st.der.hv(p, 0, 0);
            st.n2[p] = A[0];
            st.mineig_v[p] = A[0];
            st.inv_v[p] = 1.0 / A[0];
        } else {
            for (int al = 0; al < 2; ++al)
                for (int be = 0; be < 2; ++be)
                    A[al * 2 + be] = (al == be ? 1.0 : 0.0) +
                                     st.der.gv(p, al) * st.der.gv(p, be) - st.der.hv(p, al, be);
            double det = det2(A);
            st.n2[p] = det;
            st.mineig_v[p] = mineig2(A);
            inv2(A, det, inv);
            for (int a = 0; a < 4; ++a) st.inv_v[p * 4 + a] = inv[a];
        }
        margin = std::min(margin, st.mineig_v[p]);

        if (n == 1) {
            double gh = st.der.gh(p, 0);
            A[0] = 1.0 + gh * gh - st.der.hh(p, 0, 0);
            st.n1[p] = A[0];
            st.mineig_h[p] = A[0];
            st.inv_h[p] = 1.0 / A[0];
            margin = std::min(margin, A[0]);
        } else if (n == 2) {
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    A[i * 2 + j] = (i == j ? 1.0 : 0.0) + st.der.gh(p, i) * st.der.gh(p, j) -
                                   st.der.hh(p, i, j);
            double det = det2(A);
            st.n1[p] = det;
            st.mineig_h[p] = mineig2(A);
            inv2(A, det, inv);
            for (int a = 0; a < 4; ++a) st.inv_h[p * 4 + a] = inv[a];
            margin = std::min(margin, st.mineig_h[p]);
        }
    }
    st.margin = margin;
    st.admissible = margin > 0.0;
    return st;
}

std::vector<double> n2_operator(const ScalarField& u) { return build_state(u).n2; }

std::vector<double> n1_operator(const ScalarField& u) { return build_state(u).n1; }

std::vector<double> vertical_gauss_curvature(const ScalarField& u) {
    const BundleGrid& g = *u.grid;
    int m = g.m();
    OperatorState st = build_state(u);
    std::vector<double> out(st.n2.size());
    for (long p = 0; p < (long)out.size(); ++p)
        out[p] = std::pow(1.0 + st.v1[p], -0.5 * (m + 1)) * std::exp(-(m - 1) * u[p]) * st.n2[p];
    return out;
}

AdmissibleTensor admissible_tensor(const ScalarField& u) {
    const BundleGrid& g = *u.grid;
    int n = g.n(), d = g.d();
    long N = g.node_count();
    OperatorState st = build_state(u);

    AdmissibleTensor T;
    T.n = n;
    T.d = d;
    T.count = N;
    T.block_v.assign(N * d * d, 0.0);
    T.block_h.assign(N * n * n, 0.0);
    T.mineig_v = st.mineig_v;
    T.mineig_h = n > 0 ? st.mineig_h : std::vector<double>(N, 1.0);
    for (long p = 0; p < N; ++p) {
        for (int al = 0; al < d; ++al)
            for (int be = 0; be < d; ++be)
                T.block_v[(p * d + al) * d + be] = (al == be ? 1.0 : 0.0) +
                                                   st.der.gv(p, al) * st.der.gv(p, be) -
                                                   st.der.hv(p, al, be);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                T.block_h[(p * n + i) * n + j] = (i == j ? 1.0 : 0.0) +
                                                 st.der.gh(p, i) * st.der.gh(p, j) -
                                                 st.der.hh(p, i, j);
    }
    T.margin = st.margin;
    T.admissible = st.admissible;
    return T;
}

std::vector<double> residual_direct(const ScalarField& u, const CurvatureSpec& K) {
    const BundleGrid& g = *u.grid;
    int m = g.m();
    OperatorState st = build_state(u);
    std::vector<double> r(st.n2.size());
    for (long p = 0; p < (long)r.size(); ++p) {
        double rho = std::exp(u[p]);
        r[p] = st.n2[p] - std::pow(1.0 + st.v1[p], 0.5 * (m + 1)) *
                              std::exp((m - 1) * u[p]) * K.eval(g, p, rho);
    }
    return r;
}

std::pair<std::vector<double>, std::vector<double>> residual_theorem3(const ScalarField& u,
                                                                      const CurvatureSpec& f,
                                                                      double lambda, double t) {
    const BundleGrid& g = *u.grid;
    int m = g.m();
    OperatorState st = build_state(u);
    long N = g.node_count();
    std::vector<double> r1(N), r2(N);
    for (long p = 0; p < N; ++p) {
        r1[p] = st.n1[p] - 1.0;
        double rhs = std::exp(-lambda * u[p]) *
                     std::pow(f.eval(g, p, 1.0) * std::pow(1.0 + st.v1[p], 0.5 * (m + 1)), t);
        r2[p] = st.n2[p] - rhs;
    }
    return {std::move(r1), std::move(r2)};
}

std::pair<std::vector<double>, std::vector<double>> residual_theorem4(const ScalarField& u,
                                                                      const ScalarField& w,
                                                                      const CurvatureSpec& K,
                                                                      double t) {
    const BundleGrid& g = *u.grid;
    int m = g.m();
    OperatorState st = build_state(u);
    long N = g.node_count();
    std::vector<double> r1(N), r2(N);
    for (long p = 0; p < N; ++p) {
        r1[p] = st.n1[p] - 1.0;
        double rw = std::exp(w[p]);
        double rhs = std::exp(-u[p]) * std::pow(std::exp(m * w[p]) * K.eval(g, p, rw), t) *
                     std::pow(1.0 + st.v1[p], 0.5 * (m + 1));
        r2[p] = st.n2[p] - rhs;
    }
    return {std::move(r1), std::move(r2)};
}

namespace detail {

std::vector<double> apply_vertical_jacobian(const BundleGrid& g, const OperatorState& st,
                                            const std::vector<double>& w,
                                            const std::vector<double>& c0,
                                            const std::vector<double>& gc) {
    int d = g.d();
    long N = g.node_count();
    std::vector<double> out(N);
    double gw[2], Hw[4];
    for (long p = 0; p < N; ++p) {
        fiber_gradient(g, w, p, gw);
        fiber_hessian(g, w, p, Hw);
        double acc = 0.0;
        if (d == 1) {
            acc = st.inv_v[p] * (2.0 * st.der.gv(p, 0) * gw[0] - Hw[0]);
            acc -= gc[p] * st.der.gv(p, 0) * gw[0];
        } else {
            for (int al = 0; al < 2; ++al)
                for (int be = 0; be < 2; ++be)
                    acc += st.inv_v[p * 4 + al * 2 + be] *
                           (2.0 * st.der.gv(p, al) * gw[be] - Hw[al * 2 + be]);
            acc -= gc[p] * (st.der.gv(p, 0) * gw[0] + st.der.gv(p, 1) * gw[1]);
        }
        out[p] = acc + c0[p] * w[p];
    }
    return out;
}

std::vector<double> apply_horizontal_jacobian(const BundleGrid& g, const OperatorState& st,
                                              const std::vector<double>& w) {
    int n = g.n();
    long N = g.node_count();
    std::vector<double> out(N, 0.0);
    if (n == 0) return out;
    double gw[2], Hw[4];
    for (long p = 0; p < N; ++p) {
        for (int i = 0; i < n; ++i) gw[i] = horizontal_plain_derivative(g, w, p, i);
        horizontal_plain_hessian(g, w, p, Hw);
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                acc += st.inv_h[p * n * n + i * n + j] *
                       (2.0 * st.der.gh(p, i) * gw[j] - Hw[i * n + j]);
        out[p] = acc;
    }
    return out;
}

std::vector<double> vertical_jacobian_diagonal(const BundleGrid& g, const OperatorState& st,
                                               const std::vector<double>& c0) {
    int d = g.d();
    long N = g.node_count();
    std::vector<double> diag(N);
    double dth = g.fiber.dtheta;
    for (long p = 0; p < N; ++p) {
        if (d == 1) {
            diag[p] = 2.0 * st.inv_v[p] / (dth * dth) + c0[p];
        } else {
            double s = std::sin(g.fiber.phi[g.fiber.ring(g.fiber_of(p))]);
            double dphi = g.fiber.dphi;
            diag[p] = 2.0 * st.inv_v[p * 4 + 0] / (dphi * dphi) +
                      2.0 * st.inv_v[p * 4 + 3] / (s * s * dth * dth) + c0[p];
        }
    }
    return diag;
}

}  // namespace detail

VerticalLinearOp::VerticalLinearOp(const ScalarField& u, double lambda, double t)
    : grid_(u.grid), st_(build_state(u)), lambda_(lambda), t_(t) {
    for (double e : st_.mineig_v)
        if (e <= 1e-12)
            throw singular_linearization(
                "vertical block has eigenvalue <= 1e-12: admissibility lost");
}

std::vector<double> VerticalLinearOp::apply(const std::vector<double>& w) const {
    long N = grid_->node_count();
    int m = grid_->m();
    std::vector<double> c0(N, lambda_), gc(N);
    for (long p = 0; p < N; ++p) gc[p] = t_ * (m + 1) / (1.0 + st_.v1[p]);
    return detail::apply_vertical_jacobian(*grid_, st_, w, c0, gc);
}

HorizontalLinearOp::HorizontalLinearOp(const ScalarField& u) : grid_(u.grid), st_(build_state(u)) {
    if (grid_->n() > 0)
        for (double e : st_.mineig_h)
            if (e <= 1e-12)
                throw singular_linearization(
                    "horizontal block has eigenvalue <= 1e-12: admissibility lost");
}

std::vector<double> HorizontalLinearOp::apply(const std::vector<double>& w) const {
    return detail::apply_horizontal_jacobian(*grid_, st_, w);
}

}  // namespace rgc
