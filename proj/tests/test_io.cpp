#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "rgc/io.hpp"
#include "rgc/linsolve.hpp"

using namespace rgc;

namespace {

std::string write_tmp(const std::string& name, const std::string& content) {
    std::string path = "/tmp/rgc_test_" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("minimal config gets defaults, flags override file values") {
    RunConfig cfg = parse_config(R"({"mode":"direct","fiber_dim":1,"curvature":{"constant":1.0}})");
    CHECK(cfg.mode == "direct");
    CHECK(cfg.d == 1);
    CHECK(cfg.tol == 1e-10);
    CHECK(cfg.max_iters == 50);
    CHECK(cfg.seed == 42);
    CHECK_FALSE(cfg.mean_pin.has_value());

    RunConfig over = parse_config(R"({"mode":"direct","curvature":{"constant":1.0},"tol":1e-8})",
                                  R"({"tol":1e-6,"seed":7})");
    CHECK(over.tol == 1e-6);
    CHECK(over.seed == 7);
}

TEST_CASE("validation lists every violated constraint") {
    try {
        parse_config(R"({"mode":"theorem4","fiber_dim":1,"curvature":{"constant":1.0}})");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("r1") != std::string::npos);
        CHECK(msg.find("r2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config(R"({"mode":"direct","curvature":{"constant":1.0},"bogus":1})"),
                    config_error);
    try {
        parse_config(
            R"({"mode":"direct","curvature":{"constant":1.0,"table":"k.csv"}})");
        FAIL("expected mutual-exclusion error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("mutually exclusive") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("{"), config_error);
}

TEST_CASE("curvature flag syntax") {
    CurvatureDesc d = parse_curvature_flag("radial:2/(1+rho)");
    CHECK(d.kind == "radial");
    CHECK(d.payload == "2/(1+rho)");
    CHECK(parse_curvature_flag("@/tmp/k.csv").kind == "table");
    CHECK_THROWS_AS(parse_curvature_flag("bogus:1"), config_error);
    CHECK_THROWS_AS(parse_curvature_flag("42"), config_error);
}

TEST_CASE("expression grammar: operators, functions, variables, errors") {
    Expression e = Expression::parse("2*exp(-rho)+sin(theta)^2/(1+x)");
    std::map<std::string, double> vars{{"rho", 0.0}, {"theta", kPi / 2}, {"x", 1.0}};
    CHECK(e.eval(vars) == doctest::Approx(2.0 + 0.5));
    CHECK(Expression::parse("2^3^2").eval({}) == doctest::Approx(512.0));  // right assoc
    CHECK(Expression::parse("pi").eval({}) == doctest::Approx(kPi));
    CHECK_THROWS_AS(Expression::parse("2*"), std::invalid_argument);
    CHECK_THROWS_AS(Expression::parse("foo(2)"), std::invalid_argument);
    CHECK_THROWS_AS(Expression::parse("(1+2"), std::invalid_argument);
    CHECK_THROWS_AS(Expression::parse("1+2)"), std::invalid_argument);
}

TEST_CASE("curvature tables: interpolation accuracy and validation") {
    {
        std::string rows = "rho,K\n";
        for (double r : {0.5, 0.8, 1.1, 1.4, 1.7}) rows += std::to_string(r) + ",1.0\n";
        CurvatureSpec K = load_curvature_table(write_tmp("const.csv", rows));
        auto g = build_bundle_grid(0, 1, 0, 8);
        for (double rho : {0.55, 0.9, 1.3, 1.65})
            CHECK(K.eval(*g, 0, rho) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_FALSE(K.extrapolation_used());
        K.eval(*g, 0, 3.0);  // outside the sampled range
        CHECK(K.extrapolation_used());
    }
    {
        char buf[64];
        std::string rows = "rho,K\n";
        for (int i = 0; i < 9; ++i) {
            double r = 0.76 + i * 0.06;
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", r, 2.0 / (1.0 + r));
            rows += buf;
        }
        CurvatureSpec K = load_curvature_table(write_tmp("rational.csv", rows));
        RadiusResult res = theorem2_radius(K, 2, 0.8, 1.2);
        CHECK(std::abs(res.r - 1.0) < 1e-6);
    }
    {
        std::string rows = "rho,K\n0.5,1.0\n1.0,0.0\n1.5,1.0\n";
        try {
            load_curvature_table(write_tmp("bad.csv", rows));
            FAIL("expected io_error");
        } catch (const io_error& e) {
            CHECK(std::string(e.what()).find("row 3") != std::string::npos);
        }
    }
    CHECK_THROWS_AS(load_curvature_table("/nonexistent/path.csv"), io_error);
}

TEST_CASE("emitted artifacts: unit sphere OBJ, bit-exact CSV round-trip, report keys") {
    auto g = build_bundle_grid(0, 2, {0, 0}, {16, 32});
    ScalarField u(g, 0.0);
    SolveReport rep;
    rep.mode = "direct";
    rep.converged = true;
    rep.monitors.valid = true;
    RunConfig cfg = parse_config(R"({"mode":"direct","fiber_dim":2,"curvature":{"constant":1.0}})");
    emit_solution(u, rep, config_echo_json(cfg), "/tmp/rgc_test_unit");

    // OBJ: every vertex on the unit sphere
    std::ifstream obj("/tmp/rgc_test_unit.obj");
    REQUIRE(obj.good());
    std::string tok;
    int verts = 0;
    while (obj >> tok) {
        if (tok == "v") {
            double x, y, z;
            obj >> x >> y >> z;
            CHECK(std::abs(std::sqrt(x * x + y * y + z * z) - 1.0) <= 1e-15);
            ++verts;
        }
    }
    CHECK(verts == g->fiber.count());

    // CSV: bit-identical round trip
    std::vector<double> loaded = load_solution_csv("/tmp/rgc_test_unit.csv");
    REQUIRE((long)loaded.size() == u.size());
    for (long p = 0; p < u.size(); ++p) CHECK(loaded[p] == u[p]);

    std::string rj = read_text_file("/tmp/rgc_test_unit.json");
    for (const char* key : {"mode", "status", "config_echo", "homotopy_trace", "residuals",
                            "monitors", "identity_checks", "timings", "warnings"})
        CHECK(rj.find(std::string("\"") + key + "\"") != std::string::npos);
}

TEST_CASE("nonconstant field round-trips bit-identically through the 17-digit CSV") {
    auto g = build_bundle_grid(1, 1, 8, 16);
    ScalarField u = make_field(
        g, [](const double* x, const double* a) { return 0.1 * std::cos(a[0]) * std::sin(x[0]) + 1.0 / 3.0; });
    SolveReport rep;
    rep.mode = "direct";
    rep.converged = true;
    RunConfig cfg = parse_config(R"({"mode":"direct","fiber_dim":1,"curvature":{"constant":1.0}})");
    emit_solution(u, rep, config_echo_json(cfg), "/tmp/rgc_test_rt");
    std::vector<double> loaded = load_solution_csv("/tmp/rgc_test_rt.csv");
    REQUIRE((long)loaded.size() == u.size());
    for (long p = 0; p < u.size(); ++p) CHECK(loaded[p] == u[p]);
}

TEST_CASE("config echo round-trips to the same effective configuration") {
    RunConfig cfg = parse_config(
        R"({"mode":"theorem3","base_dim":1,"fiber_dim":1,"base_res":16,"fiber_res":32,
            "curvature":{"constant":2.0},"lambda":1.5,"seed":9,"out_prefix":"x"})");
    RunConfig again = parse_config(config_echo_json(cfg));
    CHECK(again.mode == cfg.mode);
    CHECK(again.n == cfg.n);
    CHECK(again.d == cfg.d);
    CHECK(again.base_res == cfg.base_res);
    CHECK(again.fiber_res == cfg.fiber_res);
    CHECK(again.lambda == cfg.lambda);
    CHECK(again.seed == cfg.seed);
    CHECK(again.curvature.kind == cfg.curvature.kind);
    CHECK(again.curvature.payload == cfg.curvature.payload);
}
