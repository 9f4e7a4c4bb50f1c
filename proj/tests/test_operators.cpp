#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"
#include "rgc/linsolve.hpp"
#include "rgc/operators.hpp"
#include "rgc/verification.hpp"

using namespace rgc;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("block determinants of a constant field are exactly 1") {
    auto g = build_bundle_grid(1, 2, 8, 8);
    ScalarField u(g, 0.42);
    for (double v : n2_operator(u)) CHECK(v == 1.0);
    for (double v : n1_operator(u)) CHECK(v == 1.0);
}

TEST_CASE("n = 0 horizontal determinant is the empty product") {
    auto g = build_bundle_grid(0, 1, 0, 32);
    ScalarField u = random_smooth_field(g, 7, 0.3);
    for (double v : n1_operator(u)) CHECK(v == 1.0);
}

TEST_CASE("circle vertical determinant matches the closed form for eps cos theta") {
    auto g = build_bundle_grid(0, 1, 0, 128);
    const double eps = 0.25;
    ScalarField u =
        make_field(g, [eps](const double*, const double* a) { return eps * std::cos(a[0]); });
    std::vector<double> n2 = n2_operator(u);
    double err = 0.0;
    for (long p = 0; p < (long)n2.size(); ++p) {
        double th = g->fiber.theta[p];
        double expect = 1.0 + eps * eps * std::sin(th) * std::sin(th) + eps * std::cos(th);
        err = std::max(err, std::abs(n2[p] - expect));
    }
    double h = g->h_max();
    CHECK(err < 2.0 * h * h);
}

TEST_CASE("base-direction determinant matches the closed form for eps cos x") {
    auto g = build_bundle_grid(1, 1, 128, 16);
    const double eps = 0.25;
    ScalarField u =
        make_field(g, [eps](const double* x, const double*) { return eps * std::cos(x[0]); });
    std::vector<double> n1 = n1_operator(u);
    double err = 0.0;
    double x[1];
    for (long p = 0; p < (long)n1.size(); ++p) {
        g->base_coords(p, x);
        double expect = 1.0 + eps * eps * std::sin(x[0]) * std::sin(x[0]) + eps * std::cos(x[0]);
        err = std::max(err, std::abs(n1[p] - expect));
    }
    CHECK(err < 2.0 * std::pow(2.0 * kPi / 128, 2));
}

TEST_CASE("vertical Gaussian curvature of round spheres and the fiber-constant family") {
    for (int d : {1, 2}) {
        auto g = build_bundle_grid(0, d, 0, d == 1 ? 64 : 16);
        int m = d + 1;
        double r = 1.7;
        ScalarField u(g, std::log(r));
        for (double v : vertical_gauss_curvature(u))
            CHECK(v == doctest::Approx(std::pow(r, -(m - 1))).epsilon(1e-12));
        ScalarField z(g, 0.0);
        for (double v : vertical_gauss_curvature(z)) CHECK(v == doctest::Approx(1.0));
    }
    auto g = build_bundle_grid(1, 2, 12, 8);
    ScalarField u = theorem1_oracle(g, [](const double* x) { return 2.0 + std::cos(x[0]); });
    std::vector<double> gv = vertical_gauss_curvature(u);
    double x[1];
    for (long p = 0; p < (long)gv.size(); ++p) {
        g->base_coords(p, x);
        CHECK(gv[p] == doctest::Approx(2.0 + std::cos(x[0])).epsilon(1e-12));
    }
}

TEST_CASE("admissible tensor: identity at zero, closed-form margin, loss for large fields") {
    auto g = build_bundle_grid(0, 1, 0, 64);
    AdmissibleTensor T0 = admissible_tensor(ScalarField(g, 0.0));
    CHECK(T0.admissible);
    CHECK(T0.margin == doctest::Approx(1.0));

    const double eps = 0.1;
    ScalarField u =
        make_field(g, [eps](const double*, const double* a) { return eps * std::cos(a[0]); });
    AdmissibleTensor T = admissible_tensor(u);
    CHECK(T.admissible);
    double h = g->h_max();
    for (long p = 0; p < T.count; ++p) {
        double th = g->fiber.theta[p];
        double expect = 1.0 + eps * std::cos(th) + eps * eps * std::sin(th) * std::sin(th);
        CHECK(std::abs(T.mineig_v[p] - expect) < 2.0 * h * h);
    }

    ScalarField big =
        make_field(g, [](const double*, const double* a) { return 2.0 * std::cos(a[0]); });
    CHECK_FALSE(admissible_tensor(big).admissible);  // 1 + 4 sin^2 + 2 cos = -1 at theta = pi
}

TEST_CASE("direct residual: round solutions and manufactured data") {
    auto g = build_bundle_grid(0, 1, 0, 64);
    CHECK(max_abs(residual_direct(ScalarField(g, 0.0), CurvatureSpec::constant(1.0))) < 1e-14);

    CurvatureSpec K = CurvatureSpec::radial(Expression::parse("2/(1+rho)"));
    CHECK(max_abs(residual_direct(ScalarField(g, 0.0), K)) < 1e-14);

    // manufactured: K taken from the discrete forward curvature of u*
    ScalarField ustar =
        make_field(g, [](const double*, const double* a) { return 0.1 * std::cos(a[0]); });
    std::vector<double> gv = vertical_gauss_curvature(ustar);
    auto grid = g;
    CurvatureSpec Kman = CurvatureSpec::callable(
        [grid, gv](const double*, const double* ang, double) {
            long k = std::lround(ang[0] / grid->fiber.dtheta) % grid->fiber.n_theta;
            return gv[k];
        },
        "manufactured");
    CHECK(max_abs(residual_direct(ustar, Kman)) < 1e-12);
}

TEST_CASE("theorem3 residual: homotopy start, constant ansatz, unit data") {
    auto g = build_bundle_grid(1, 1, 16, 32);
    {
        auto [r1, r2] =
            residual_theorem3(ScalarField(g, 0.0), CurvatureSpec::constant(3.0), 2.0, 0.0);
        CHECK(max_abs(r1) < 1e-14);
        CHECK(max_abs(r2) < 1e-14);
    }
    {
        double c = 3.0, lam = 2.0;
        auto [r1, r2] = residual_theorem3(ScalarField(g, std::log(c) / lam),
                                          CurvatureSpec::constant(c), lam, 1.0);
        CHECK(max_abs(r1) < 1e-13);
        CHECK(max_abs(r2) < 1e-13);
    }
    {
        auto [r1, r2] =
            residual_theorem3(ScalarField(g, 0.0), CurvatureSpec::constant(1.0), 1.0, 1.0);
        CHECK(max_abs(r1) < 1e-14);
        CHECK(max_abs(r2) < 1e-14);
    }
}

TEST_CASE("theorem4 residual: t = 0 and the two unit-radius fixed points") {
    auto g = build_bundle_grid(0, 1, 0, 48);
    ScalarField zero(g, 0.0);
    ScalarField w = random_smooth_field(g, 3, 0.2);
    {
        auto [r1, r2] = residual_theorem4(zero, w, CurvatureSpec::constant(5.0), 0.0);
        CHECK(max_abs(r1) < 1e-14);
        CHECK(max_abs(r2) < 1e-14);
    }
    for (const char* expr : {"rho^(-2)", "2/(1+rho)"}) {
        CurvatureSpec K = CurvatureSpec::radial(Expression::parse(expr));
        auto [r1, r2] = residual_theorem4(zero, zero, K, 1.0);
        CHECK(max_abs(r1) < 1e-14);
        CHECK(max_abs(r2) < 1e-14);
    }
}

TEST_CASE("homothety covariance: constant shifts leave N2 and the residual unchanged") {
    auto g = build_bundle_grid(0, 2, {0, 0}, {16, 32});
    CurvatureSpec K = CurvatureSpec::homothety(Expression::parse("1"), 3);
    for (int trial = 0; trial < 3; ++trial) {
        ScalarField u = random_smooth_field(g, 50 + trial, 0.2);
        ScalarField shifted = u;
        double c = trial == 0 ? -1.0 : (trial == 1 ? 0.5 : 2.0);
        for (long p = 0; p < u.size(); ++p) shifted[p] += c;
        CHECK(max_abs_diff(n2_operator(u), n2_operator(shifted)) < 1e-11);
        CHECK(max_abs_diff(residual_direct(u, K), residual_direct(shifted, K)) < 1e-11);
    }
}

TEST_CASE("log-determinant concavity on matrix segments between admissible fields") {
    auto g = build_bundle_grid(0, 2, {0, 0}, {16, 32});
    ScalarField u0 = random_admissible_field(g, 21, 0.15);
    ScalarField u1 = random_admissible_field(g, 22, 0.15);
    AdmissibleTensor A0 = admissible_tensor(u0), A1 = admissible_tensor(u1);
    REQUIRE(A0.admissible);
    REQUIRE(A1.admissible);
    int d = g->d();
    auto det_at = [d](const AdmissibleTensor& A, long p) {
        return A.block_v[p * 4] * A.block_v[p * 4 + 3] -
               A.block_v[p * 4 + 1] * A.block_v[p * 4 + 2];
    };
    for (int si = 0; si <= 10; ++si) {
        double s = si / 10.0;
        for (long p = 0; p < A0.count; ++p) {
            double M[4];
            for (int a = 0; a < d * d; ++a)
                M[a] = (1 - s) * A0.block_v[p * d * d + a] + s * A1.block_v[p * d * d + a];
            double lhs = std::log(M[0] * M[3] - M[1] * M[2]);
            double rhs = (1 - s) * std::log(det_at(A0, p)) + s * std::log(det_at(A1, p));
            CHECK(lhs >= rhs - 1e-12);
        }
    }
}

TEST_CASE("vertical linearization at u = 0 is the shifted vertical Laplacian") {
    auto g = build_bundle_grid(0, 1, 0, 64);
    ScalarField zero(g, 0.0);
    ScalarField w = random_smooth_field(g, 5, 0.3);
    FrameDerivatives dw = covariant_hessian(w);
    for (double lam : {0.0, 2.0}) {
        VerticalLinearOp op(zero, lam, 0.0);
        std::vector<double> got = op.apply(w.v);
        for (long p = 0; p < (long)got.size(); ++p)
            CHECK(got[p] == doctest::Approx(-dw.hv(p, 0, 0) + lam * w[p]).epsilon(1e-12));
    }
}

TEST_CASE("horizontal linearization: zero operator at n = 0, -Laplacian at u = 0") {
    auto g0 = build_bundle_grid(0, 1, 0, 32);
    ScalarField w0 = random_smooth_field(g0, 6, 0.3);
    HorizontalLinearOp op0(ScalarField(g0, 0.0));
    for (double v : op0.apply(w0.v)) CHECK(v == 0.0);

    auto g = build_bundle_grid(1, 1, 32, 16);
    ScalarField w = random_smooth_field(g, 8, 0.3);
    HorizontalLinearOp op(ScalarField(g, 0.0));
    std::vector<double> got = op.apply(w.v);
    FrameDerivatives dw = covariant_hessian(w);
    for (long p = 0; p < (long)got.size(); ++p)
        CHECK(got[p] == doctest::Approx(-dw.hh(p, 0, 0)).epsilon(1e-12));
}

TEST_CASE("linearizations match central finite differences of the log residuals") {
    auto fd_check_vertical = [](std::shared_ptr<const BundleGrid> g, unsigned seed) {
        int m = g->m();
        double lam = 0.7, t = 0.6, eps = 1e-5;
        ScalarField u = random_admissible_field(g, seed, 0.12);
        ScalarField w = random_smooth_field(g, seed + 1000, 0.5);
        VerticalLinearOp op(u, lam, t);
        std::vector<double> got = op.apply(w.v);
        auto gamma = [&](const ScalarField& v) {
            OperatorState st = build_state(v);
            std::vector<double> out(v.size());
            for (long p = 0; p < v.size(); ++p)
                out[p] =
                    std::log(st.n2[p]) + lam * v[p] - 0.5 * t * (m + 1) * std::log1p(st.v1[p]);
            return out;
        };
        ScalarField up = u, um = u;
        for (long p = 0; p < u.size(); ++p) {
            up[p] += eps * w[p];
            um[p] -= eps * w[p];
        }
        std::vector<double> gp = gamma(up), gm = gamma(um);
        double worst = 0.0, scale = 0.0;
        for (long p = 0; p < u.size(); ++p) {
            double fd = (gp[p] - gm[p]) / (2 * eps);
            worst = std::max(worst, std::abs(fd - got[p]));
            scale = std::max(scale, std::abs(fd));
        }
        return worst / std::max(scale, 1e-30);
    };
    CHECK(fd_check_vertical(build_bundle_grid(0, 1, 0, 64), 31) < 1e-6);
    CHECK(fd_check_vertical(build_bundle_grid(0, 2, {0, 0}, {16, 32}), 32) < 1e-6);

    auto g = build_bundle_grid(1, 1, 16, 32);
    ScalarField u = random_admissible_field(g, 33, 0.12);
    ScalarField w = random_smooth_field(g, 34, 0.5);
    HorizontalLinearOp op(u);
    std::vector<double> got = op.apply(w.v);
    double eps = 1e-5;
    auto logn1 = [](const ScalarField& v) {
        std::vector<double> out = n1_operator(v);
        for (double& x : out) x = std::log(x);
        return out;
    };
    ScalarField up = u, um = u;
    for (long p = 0; p < u.size(); ++p) {
        up[p] += eps * w[p];
        um[p] -= eps * w[p];
    }
    std::vector<double> gp = logn1(up), gm = logn1(um);
    double worst = 0.0, scale = 0.0;
    for (long p = 0; p < u.size(); ++p) {
        double fd = (gp[p] - gm[p]) / (2 * eps);
        worst = std::max(worst, std::abs(fd - got[p]));
        scale = std::max(scale, std::abs(fd));
    }
    CHECK(worst / scale < 1e-6);
}

TEST_CASE("linearization rejects inadmissible states") {
    auto g = build_bundle_grid(0, 1, 0, 64);
    ScalarField bad =
        make_field(g, [](const double*, const double* a) { return 2.0 * std::cos(a[0]); });
    CHECK_THROWS_AS(VerticalLinearOp(bad, 1.0, 1.0), singular_linearization);
}

TEST_CASE("vertical linearization with positive lambda has no numerical kernel") {
    auto g = build_bundle_grid(0, 1, 0, 64);
    long N = g->node_count();
    for (double lam : {0.5, 2.0}) {
        ScalarField u = random_admissible_field(g, 77, 0.1);
        VerticalLinearOp op(u, lam, 0.0);
        Eigen::MatrixXd J(N, N);
        std::vector<double> e(N, 0.0);
        for (long j = 0; j < N; ++j) {
            e[j] = 1.0;
            std::vector<double> col = op.apply(e);
            e[j] = 0.0;
            for (long i = 0; i < N; ++i) J(i, j) = col[i];
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
        CHECK(svd.singularValues().minCoeff() >= lam / 2.0);
    }
}
