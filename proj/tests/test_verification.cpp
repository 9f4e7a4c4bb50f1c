#include <cmath>

#include "doctest.h"
#include "rgc/linsolve.hpp"
#include "rgc/solver.hpp"
#include "rgc/verification.hpp"

using namespace rgc;

TEST_CASE("fiber-constant oracle: closed-form values and positivity guard") {
    {
        auto g = build_bundle_grid(0, 1, 0, 32);
        ScalarField u = theorem1_oracle(g, [](const double*) { return 1.0; });
        for (long p = 0; p < u.size(); ++p) CHECK(u[p] == 0.0);
        ScalarField u4 = theorem1_oracle(g, [](const double*) { return 4.0; });
        for (long p = 0; p < u4.size(); ++p) CHECK(u4[p] == doctest::Approx(-std::log(4.0)));
    }
    {
        auto g = build_bundle_grid(1, 2, 16, 8);  // m = 3
        ScalarField u = theorem1_oracle(g, [](const double* x) { return 2.0 + std::cos(x[0]); });
        double x[1];
        for (long p = 0; p < u.size(); ++p) {
            g->base_coords(p, x);
            CHECK(u[p] == doctest::Approx(-0.5 * std::log(2.0 + std::cos(x[0]))).epsilon(1e-14));
        }
        // constant on fibers
        for (int b = 0; b < g->base.count(); ++b)
            for (int f = 1; f < g->fiber.count(); ++f)
                CHECK(u[g->node(b, f)] == u[g->node(b, 0)]);
    }
    auto g = build_bundle_grid(1, 1, 16, 16);
    CHECK_THROWS_AS(theorem1_oracle(g, [](const double* x) { return std::cos(x[0]); }),
                    std::invalid_argument);
}

TEST_CASE("oracle fields solve the prescription to round-off") {
    for (int m : {2, 3}) {
        auto g = m == 2 ? build_bundle_grid(1, 1, 16, 32) : build_bundle_grid(1, 2, 16, 8);
        ScalarField u = theorem1_oracle(g, [](const double* x) { return 2.0 + std::cos(x[0]); });
        CurvatureSpec K = CurvatureSpec::fiber_constant(Expression::parse("2+cos(x)"));
        CHECK(max_abs(residual_direct(u, K)) < 1e-12);
    }
}

TEST_CASE("radius finding: linear and rational profiles, degenerate family, no bracket") {
    CHECK(theorem2_radius(CurvatureSpec::constant(4.0), 2, 0.01, 10.0).r ==
          doctest::Approx(0.25).epsilon(1e-9));
    CHECK(theorem2_radius(CurvatureSpec::radial(Expression::parse("2/(1+rho)")), 2, 0.1, 10.0).r ==
          doctest::Approx(1.0).epsilon(1e-9));

    RadiusResult deg =
        theorem2_radius(CurvatureSpec::homothety(Expression::parse("1"), 3), 3, 0.5, 2.0);
    CHECK(deg.degenerate);
    CHECK(deg.r == doctest::Approx(1.25));

    CHECK_THROWS_AS(theorem2_radius(CurvatureSpec::constant(2.0), 2, 2.0, 3.0), bracket_error);
}

TEST_CASE("embedded circle: exact Menger curvature, orientation, closed polyline") {
    auto g = build_bundle_grid(0, 1, 0, 48);
    EmbedResult emb = embed_and_measure(ScalarField(g, std::log(2.0)), 0);
    CHECK(emb.mesh.polyline);
    CHECK((int)emb.mesh.vertices.size() == g->fiber.count());
    CHECK(emb.mesh.positively_oriented);
    CHECK(emb.mesh.degenerate_faces.empty());
    for (double k : emb.curvature) CHECK(k == doctest::Approx(0.5).epsilon(1e-12));
    for (const auto& v : emb.mesh.vertices)
        CHECK(std::hypot(v[0], v[1]) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("embedded unit sphere: angle defect within 5 percent away from the poles") {
    auto g = build_bundle_grid(0, 2, {0, 0}, {32, 64});
    EmbedResult emb = embed_and_measure(ScalarField(g, 0.0), 0);
    CHECK((int)emb.mesh.vertices.size() == g->fiber.count());
    CHECK(emb.mesh.closed);
    CHECK(emb.mesh.positively_oriented);
    std::vector<bool> pole(g->fiber.count(), false);
    for (int f : emb.pole_adjacent) pole[f] = true;
    for (int f = 0; f < g->fiber.count(); ++f)
        if (!pole[f]) CHECK(std::abs(emb.curvature[f] - 1.0) < 0.05);
}

TEST_CASE("measured curvature of a solved curve matches the prescription") {
    auto g = build_bundle_grid(0, 1, 0, 64);
    CurvatureSpec K = CurvatureSpec::expression(Expression::parse("exp(0.1*cos(theta))/(rho*rho)"));
    SolverConfig cfg;
    SolveOutcome out = solve_direct(g, K, cfg);
    REQUIRE(out.report.converged);
    EmbedResult emb = embed_and_measure(out.u, 0);
    double tol = std::max(0.02, 10.0 * g->h_max());
    for (int k = 0; k < g->fiber.count(); ++k) {
        double expect = K.eval(*g, k, std::exp(out.u[k]));
        CHECK(std::abs(emb.curvature[k] - expect) <= tol * std::abs(expect));
    }
}

TEST_CASE("structure identities: constants are exact, cos phi converges at second order") {
    auto g = build_bundle_grid(0, 2, {0, 0}, {16, 32});
    IdentityReport c = structure_identities_for(ScalarField(g, 2.0));
    CHECK(c.commutator_max_all == 0.0);
    CHECK(c.homogeneity_max == 0.0);

    auto viol = [](int Np) {
        auto gg = build_bundle_grid(0, 2, {0, 0}, {Np, 2 * Np});
        ScalarField v =
            make_field(gg, [](const double*, const double* a) { return std::cos(a[0]); });
        return structure_identities_for(v).commutator_max;
    };
    double v1 = viol(16), v2 = viol(32), v3 = viol(64);
    CHECK(std::log2(v1 / v2) > 1.7);
    CHECK(std::log2(v2 / v3) > 1.8);
}

TEST_CASE("structure identities: seeded suite decays at order >= 1.8, flat product exact") {
    double prev = 0.0;
    std::vector<double> vals;
    for (int Np : {32, 64, 128}) {
        auto g = build_bundle_grid(0, 2, {0, 0}, {Np, 2 * Np});
        vals.push_back(structure_identity_suite(g, 42, 5).commutator_max);
    }
    CHECK(std::log2(vals[0] / vals[1]) >= 1.8);
    CHECK(std::log2(vals[1] / vals[2]) >= 1.8);
    (void)prev;

    auto gp = build_bundle_grid(1, 1, 16, 32);
    IdentityReport rp = structure_identity_suite(gp, 42, 5);
    CHECK(rp.mixed_max <= 1e-12);
    CHECK(rp.homogeneity_max <= 1e-12);

    auto gp2 = build_bundle_grid(2, 1, 8, 16);
    CHECK(structure_identity_suite(gp2, 42, 3).mixed_max <= 1e-12);
}

TEST_CASE("base-only fields commute exactly on the flat product") {
    auto g = build_bundle_grid(1, 1, 16, 32);
    ScalarField v = make_field(g, [](const double* x, const double*) { return std::sin(x[0]); });
    IdentityReport rep = structure_identities_for(v);
    CHECK(rep.mixed_max == 0.0);
}

TEST_CASE("convergence study: order extraction and exact detection") {
    std::vector<int> res = {16, 32, 64};
    ConvergenceResult r =
        convergence_study([](int N) { return 1.0 / (N * N); }, res);
    CHECK_FALSE(r.exact);
    REQUIRE(r.orders.size() == 2);
    CHECK(r.orders[0] == doctest::Approx(2.0));
    CHECK(r.orders[1] == doctest::Approx(2.0));

    ConvergenceResult e = convergence_study([](int) { return 1e-15; }, res);
    CHECK(e.exact);
    CHECK(e.orders.empty());

    CHECK_THROWS_AS(convergence_study([](int) { return 1.0; }, std::vector<int>{16, 32}),
                    std::invalid_argument);
}

TEST_CASE("random admissible fields really are admissible with margin") {
    for (unsigned seed : {1u, 2u, 3u}) {
        auto g = build_bundle_grid(0, 2, {0, 0}, {16, 32});
        ScalarField u = random_admissible_field(g, seed, 0.15);
        AdmissibleTensor T = admissible_tensor(u);
        CHECK(T.admissible);
        CHECK(T.margin > 0.05);
    }
}

TEST_CASE("convexity diagnostic: round spheres weakly convex, nonconstant oracle graphs not") {
    {
        auto g = build_bundle_grid(0, 2, {0, 0}, {16, 32});
        std::vector<double> me = convexity_diagnostic(ScalarField(g, 0.3));
        for (double v : me) CHECK(v > 0.0);  // n = 0: the fiber sphere itself
    }
    {
        auto g = build_bundle_grid(1, 1, 32, 32);
        ScalarField u = theorem1_oracle(g, [](const double* x) { return 2.0 + std::cos(x[0]); });
        std::vector<double> me = convexity_diagnostic(u);
        double lowest = 0.0;
        for (double v : me) lowest = std::min(lowest, v);
        CHECK(lowest < -1e-3);  // nonconstant fiber-constant prescriptions are never convex
    }
}
