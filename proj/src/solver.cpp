#include "rgc/solver.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <limits>

#include "rgc/linsolve.hpp"

namespace rgc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double max_residual(const std::vector<double>& r) {
    double m = 0.0;
    for (double x : r) {
        if (std::isnan(x)) return kInf;
        m = std::max(m, std::abs(x));
    }
    return m;
}

double weighted_mean(const ScalarField& u) {
    const BundleGrid& g = *u.grid;
    double s = 0.0, wsum = 0.0;
    for (long p = 0; p < u.size(); ++p) {
        double w = g.weight(p);
        s += w * u[p];
        wsum += w;
    }
    return s / wsum;
}

struct GradBoundCheck {
    double osc = 0.0, grad_h = 0.0, grad_v = 0.0, bound = 0.0;
    bool holds = true;
};

GradBoundCheck grad_bound_check(const ScalarField& u, const OperatorState& st) {
    const BundleGrid& g = *u.grid;
    int n = g.n(), d = g.d();
    GradBoundCheck c;
    double umin = kInf, umax = -kInf;
    for (long p = 0; p < u.size(); ++p) {
        umin = std::min(umin, u[p]);
        umax = std::max(umax, u[p]);
        double sh = 0.0, sv = 0.0;
        for (int i = 0; i < n; ++i) sh += st.der.gh(p, i) * st.der.gh(p, i);
        for (int al = 0; al < d; ++al) sv += st.der.gv(p, al) * st.der.gv(p, al);
        c.grad_h = std::max(c.grad_h, sh);
        c.grad_v = std::max(c.grad_v, sv);
    }
    c.osc = umax - umin;
    c.bound = std::expm1(2.0 * c.osc);
    double slack = 1e-12 * (1.0 + c.bound);
    c.holds = std::max(c.grad_h, c.grad_v) <= c.bound + slack;
    return c;
}

// log N2 - rhs_log, NaN where the determinant is nonpositive.
std::vector<double> log_residual(const OperatorState& st, const std::vector<double>& rhs_log) {
    std::vector<double> r(rhs_log.size());
    for (size_t p = 0; p < r.size(); ++p)
        r[p] = st.n2[p] > 0.0 ? std::log(st.n2[p]) - rhs_log[p]
                              : std::numeric_limits<double>::quiet_NaN();
    return r;
}

std::vector<double> log_n1_residual(const OperatorState& st) {
    std::vector<double> r(st.n1.size());
    for (size_t p = 0; p < r.size(); ++p)
        r[p] = st.n1[p] > 0.0 ? std::log(st.n1[p]) : std::numeric_limits<double>::quiet_NaN();
    return r;
}

struct JacContext {
    std::vector<double> c0_jac;  // -c0 (applied as + c0_jac * w)
    std::vector<double> gc;     // 2 p /(1+v1)
};

JacContext jac_context(const OperatorState& st, const std::vector<double>& c0, double p_coeff) {
    JacContext jc;
    long N = (long)c0.size();
    jc.c0_jac.resize(N);
    jc.gc.resize(N);
    for (long p = 0; p < N; ++p) {
        jc.c0_jac[p] = -c0[p];
        jc.gc[p] = 2.0 * p_coeff / (1.0 + st.v1[p]);
    }
    return jc;
}

// Dense Jacobian assembly through unit-vector applies; reuses the same
// stencil code as the matrix-free path.
Eigen::MatrixXd assemble_dense(long N,
                               const std::function<std::vector<double>(const std::vector<double>&)>& apply) {
    Eigen::MatrixXd J(N, N);
    std::vector<double> e(N, 0.0);
    for (long j = 0; j < N; ++j) {
        e[j] = 1.0;
        std::vector<double> col = apply(e);
        e[j] = 0.0;
        for (long i = 0; i < N; ++i) J(i, j) = col[i];
    }
    return J;
}

struct StepSolve {
    std::vector<double> delta;
    bool ok = true;
    std::string message;
};

// Square vertical Newton system, optionally bordered with the scalar
// mean-pin constraint.
StepSolve solve_vertical_step(const BundleGrid& g, const OperatorState& st, const JacContext& jc,
                              const std::vector<double>& r, const ScalarField& u,
                              std::optional<double> pin, const SolverConfig& cfg) {
    long N = g.node_count();
    auto apply = [&](const std::vector<double>& w) {
        return detail::apply_vertical_jacobian(g, st, w, jc.c0_jac, jc.gc);
    };
    StepSolve out;
    if (pin || N <= cfg.dense_threshold) {
        long M = N + (pin ? 1 : 0);
        if (pin && N > 4096) {
            out.ok = false;
            out.message = "mean-pinned solve requires the dense path (grid too large)";
            return out;
        }
        Eigen::MatrixXd J(M, M);
        J.topLeftCorner(N, N) = assemble_dense(N, apply);
        Eigen::VectorXd rhs(M);
        for (long i = 0; i < N; ++i) rhs(i) = -r[i];
        if (pin) {
            double wsum = 0.0;
            for (long p = 0; p < N; ++p) wsum += g.weight(p);
            for (long i = 0; i < N; ++i) {
                J(i, N) = 1.0;
                J(N, i) = g.weight(i) / wsum;
            }
            J(N, N) = 0.0;
            rhs(N) = *pin - weighted_mean(u);
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
        Eigen::VectorXd x = lu.solve(rhs);
        if (!x.allFinite()) {
            out.ok = false;
            out.message = "dense factorization produced non-finite step";
            return out;
        }
        out.delta.assign(N, 0.0);
        for (long i = 0; i < N; ++i) out.delta[i] = x(i);
        return out;
    }
    std::vector<double> diag = detail::vertical_jacobian_diagonal(g, st, jc.c0_jac);
    std::vector<double> b(N);
    for (long i = 0; i < N; ++i) b[i] = -r[i];
    out.delta.assign(N, 0.0);
    GmresResult gr = gmres(apply, diag, b, out.delta, cfg.linear_rtol);
    if (!std::isfinite(max_abs(out.delta))) {
        out.ok = false;
        out.message = "iterative solve produced non-finite step";
    }
    (void)gr;  // non-convergence tolerated: Newton self-corrects inexact steps
    return out;
}

// Stacked Gauss-Newton step for the coupled system: least squares over
// [J2; sqrt(beta) J1] with the constraint block weighted up.
StepSolve solve_coupled_step(const BundleGrid& g, const OperatorState& st, const JacContext& jc,
                             const std::vector<double>& r2, const std::vector<double>& r1) {
    long N = g.node_count();
    StepSolve out;
    if (N > 2500) {
        out.ok = false;
        out.message = "coupled system exceeds the dense least-squares limit";
        return out;
    }
    const double w1 = 2.0;  // sqrt of the constraint weight
    Eigen::MatrixXd A(2 * N, N);
    std::vector<double> e(N, 0.0);
    for (long j = 0; j < N; ++j) {
        e[j] = 1.0;
        std::vector<double> c2 = detail::apply_vertical_jacobian(g, st, e, jc.c0_jac, jc.gc);
        std::vector<double> c1 = detail::apply_horizontal_jacobian(g, st, e);
        e[j] = 0.0;
        for (long i = 0; i < N; ++i) {
            A(i, j) = c2[i];
            A(N + i, j) = w1 * c1[i];
        }
    }
    Eigen::VectorXd b(2 * N);
    for (long i = 0; i < N; ++i) {
        b(i) = -r2[i];
        b(N + i) = -w1 * r1[i];
    }
    Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
    if (!x.allFinite()) {
        out.ok = false;
        out.message = "least-squares step non-finite";
        return out;
    }
    out.delta.assign(N, 0.0);
    for (long i = 0; i < N; ++i) out.delta[i] = x(i);
    return out;
}

}  // namespace

void SolverConfig::validate() const {
    std::string err;
    if (!(tol_residual > 0)) err += " tol_residual";
    if (max_newton_iters < 1) err += " max_newton_iters";
    if (!(backtrack > 0 && backtrack < 1)) err += " backtrack";
    if (!(dt_initial > 0 && dt_initial <= 1)) err += " dt_initial";
    if (!(dt_min > 0)) err += " dt_min";
    if (!(r1 > 0 && r1 <= 1 && r2 >= 1)) err += " r1/r2";
    if (!err.empty()) throw std::invalid_argument("invalid solver configuration:" + err);
}

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::NonConvergence: return "NonConvergence";
        case SolveStatus::AdmissibilityLoss: return "AdmissibilityLoss";
        case SolveStatus::SingularLinearization: return "SingularLinearization";
        case SolveStatus::PathFailure: return "PathFailure";
        case SolveStatus::FixedPointStall: return "FixedPointStall";
        case SolveStatus::BarrierViolation: return "BarrierViolation";
    }
    return "unknown";
}

NewtonResult newton_solve(const NewtonProblem& problem, const ScalarField& u0,
                          const SolverConfig& cfg) {
    const BundleGrid& g = *problem.grid;
    long N = g.node_count();
    bool coupled = problem.couple_horizontal && g.n() > 0;

    NewtonResult res;
    res.u = u0;
    if (problem.mean_pin) {
        double shift = *problem.mean_pin - weighted_mean(res.u);
        for (long p = 0; p < N; ++p) res.u[p] += shift;
    }

    OperatorState st = build_state(res.u);
    std::vector<double> rhs_log, c0;
    problem.eq.parts(res.u, st, rhs_log, c0);
    std::vector<double> r2 = log_residual(st, rhs_log);
    std::vector<double> r1;
    if (coupled) r1 = log_n1_residual(st);
    double rmax = std::max(max_residual(r2), coupled ? max_residual(r1) : 0.0);

    if (cfg.admissibility_guard && !st.admissible) {
        res.status = SolveStatus::AdmissibilityLoss;
        res.message = "initial iterate is not admissible";
        res.residual = rmax;
        return res;
    }

    double best = kInf;
    int since_improve = 0;
    for (int iter = 0; iter <= cfg.max_newton_iters; ++iter) {
        res.history.push_back(rmax);
        res.margins.push_back(st.margin);
        res.adm_margin = st.margin;
        if (st.admissible) {
            GradBoundCheck lc = grad_bound_check(res.u, st);
            res.grad_bound_all = res.grad_bound_all && lc.holds;
            ++res.grad_bound_checked;
        }
        res.iterations = iter;
        res.residual = rmax;
        res.residual_n1 = coupled ? max_residual(r1) : 0.0;
        if (rmax <= cfg.tol_residual) {
            res.converged = true;
            res.status = SolveStatus::Converged;
            return res;
        }
        if (iter == cfg.max_newton_iters) break;
        if (rmax < best * 0.99) {
            best = rmax;
            since_improve = 0;
        } else if (++since_improve >= 6) {
            res.status = SolveStatus::NonConvergence;
            res.message = "stalled: no residual improvement over 6 iterations";
            return res;
        }

        JacContext jc = jac_context(st, c0, problem.eq.p);
        StepSolve step = coupled ? solve_coupled_step(g, st, jc, r2, r1)
                                 : solve_vertical_step(g, st, jc, r2, res.u, problem.mean_pin, cfg);
        if (!step.ok) {
            res.status = SolveStatus::SingularLinearization;
            res.message = step.message;
            return res;
        }

        // Backtracking with the admissibility guard.
        double s = 1.0;
        bool accepted = false;
        bool guard_blocked = false;
        ScalarField trial(res.u);
        while (s >= cfg.min_step) {
            for (long p = 0; p < N; ++p) trial[p] = res.u[p] + s * step.delta[p];
            OperatorState st_t = build_state(trial);
            if (cfg.admissibility_guard && !st_t.admissible) {
                guard_blocked = true;
                s *= cfg.backtrack;
                continue;
            }
            std::vector<double> rhs_t, c0_t;
            problem.eq.parts(trial, st_t, rhs_t, c0_t);
            std::vector<double> r2t = log_residual(st_t, rhs_t);
            std::vector<double> r1t;
            if (coupled) r1t = log_n1_residual(st_t);
            double rt = std::max(max_residual(r2t), coupled ? max_residual(r1t) : 0.0);
            if (rt <= (1.0 - 1e-4 * s) * rmax) {
                res.u = trial;
                st = std::move(st_t);
                rhs_log = std::move(rhs_t);
                c0 = std::move(c0_t);
                r2 = std::move(r2t);
                r1 = std::move(r1t);
                rmax = rt;
                accepted = true;
                guard_blocked = false;
                break;
            }
            s *= cfg.backtrack;
        }
        if (!accepted) {
            res.status = guard_blocked ? SolveStatus::AdmissibilityLoss : SolveStatus::NonConvergence;
            res.message = guard_blocked ? "admissibility guard exhausted the step size"
                                        : "line search failed below the minimum step";
            return res;
        }
    }
    res.status = SolveStatus::NonConvergence;
    res.message = "maximum Newton iterations reached";
    return res;
}

namespace {

VerticalEquation direct_equation(const CurvatureSpec& K) {
    VerticalEquation eq;
    eq.parts = [pk = &K](const ScalarField& u, const OperatorState& st, std::vector<double>& rhs,
                         std::vector<double>& c0) {
        const BundleGrid& g = *u.grid;
        int m = g.m();
        long N = g.node_count();
        rhs.resize(N);
        c0.resize(N);
        for (long p = 0; p < N; ++p) {
            double rho = std::exp(u[p]);
            rhs[p] = (m - 1) * u[p] + std::log(pk->eval(g, p, rho)) +
                     0.5 * (m + 1) * std::log1p(st.v1[p]);
            c0[p] = (m - 1) + pk->dlog_drho(g, p, rho);
        }
    };
    eq.p = 0.0;  // set by caller: (m+1)/2
    return eq;
}

VerticalEquation theorem3_equation(const std::vector<double>& logf, double lambda, double t,
                                   int m) {
    VerticalEquation eq;
    eq.parts = [pf = &logf, lambda, t, m](const ScalarField& u, const OperatorState& st,
                                          std::vector<double>& rhs, std::vector<double>& c0) {
        long N = u.size();
        rhs.resize(N);
        c0.assign(N, -lambda);
        for (long p = 0; p < N; ++p)
            rhs[p] = -lambda * u[p] + t * (*pf)[p] + 0.5 * t * (m + 1) * std::log1p(st.v1[p]);
    };
    eq.p = 0.5 * t * (m + 1);
    return eq;
}

VerticalEquation theorem4_inner_equation(const std::vector<double>& data_log, int m) {
    // data_log[p] = t * (m w[p] + log K(e^{w} xi)); zeroth-order coefficient 1
    // from the e^{-u} coupling.
    VerticalEquation eq;
    eq.parts = [pd = &data_log, m](const ScalarField& u, const OperatorState& st,
                                   std::vector<double>& rhs, std::vector<double>& c0) {
        long N = u.size();
        rhs.resize(N);
        c0.assign(N, -1.0);
        for (long p = 0; p < N; ++p)
            rhs[p] = -u[p] + (*pd)[p] + 0.5 * (m + 1) * std::log1p(st.v1[p]);
    };
    eq.p = 0.5 * (m + 1);
    return eq;
}

void fill_report_from_newton(SolveReport& rep, const NewtonResult& nr) {
    rep.residual_history = nr.history;
    rep.adm_margin_trace = nr.margins;
    rep.grad_bound_all_iterates = rep.grad_bound_all_iterates && nr.grad_bound_all;
    rep.grad_bound_iterates_checked += nr.grad_bound_checked;
    rep.final_residual = nr.residual;
}

std::vector<double> omega_third_norm(const ScalarField& u, const OperatorState& st) {
    const BundleGrid& g = *u.grid;
    int n = g.n(), d = g.d(), A = n + d;
    long N = g.node_count();
    // Frame-direction differences of the Hessian entry fields; crude but
    // thresholdless.
    std::vector<std::vector<double>> hfield(A * A, std::vector<double>(N));
    for (long p = 0; p < N; ++p)
        for (int a = 0; a < A; ++a)
            for (int b = 0; b < A; ++b) {
                double v;
                if (a < n && b < n)
                    v = st.der.hh(p, a, b);
                else if (a >= n && b >= n)
                    v = st.der.hv(p, a - n, b - n);
                else if (a < n)
                    v = st.der.hm(p, a, b - n);
                else
                    v = st.der.hm(p, b, a - n);
                hfield[a * A + b][p] = v;
            }
    std::vector<std::vector<double>> T(A * A * A);
    for (int a = 0; a < A; ++a)
        for (int c = 0; c < A; ++c)
            for (int e = 0; e < A; ++e)
                T[(a * A + c) * A + e] = frame_direction_derivative(g, hfield[c * A + e], a);

    auto gp = [&](long p, int a, int b) -> double {
        if (a < n && b < n) return st.inv_h[p * n * n + a * n + b];
        if (a >= n && b >= n) return st.inv_v[p * d * d + (a - n) * d + (b - n)];
        return 0.0;
    };
    std::vector<double> om(N, 0.0);
    for (long p = 0; p < N; ++p) {
        double s = 0.0;
        for (int a = 0; a < A; ++a)
            for (int b = 0; b < A; ++b) {
                double gab = gp(p, a, b);
                if (gab == 0.0) continue;
                for (int c = 0; c < A; ++c)
                    for (int dd = 0; dd < A; ++dd) {
                        double gcd = gp(p, c, dd);
                        if (gcd == 0.0) continue;
                        for (int e = 0; e < A; ++e)
                            for (int f = 0; f < A; ++f) {
                                double gef = gp(p, e, f);
                                if (gef == 0.0) continue;
                                s += gab * gcd * gef * T[(a * A + c) * A + e][p] *
                                     T[(b * A + dd) * A + f][p];
                            }
                    }
            }
        om[p] = std::sqrt(std::max(0.0, s));
    }
    return om;
}

}  // namespace

MonitorRecord monitor_bounds(const ScalarField& u, const MonitorContext& ctx) {
    const BundleGrid& g = *u.grid;
    int n = g.n(), d = g.d();
    long N = g.node_count();
    OperatorState st = build_state(u);

    MonitorRecord rec;
    rec.valid = true;
    rec.admissible = st.admissible;
    rec.adm_margin = st.margin;
    GradBoundCheck lc = grad_bound_check(u, st);
    rec.osc = lc.osc;
    rec.grad_h_max = lc.grad_h;
    rec.grad_v_max = lc.grad_v;
    rec.grad_bound = lc.bound;
    rec.grad_bound_holds = !st.admissible || lc.holds;

    double band_min = kInf;
    for (long p = 0; p < N; ++p) {
        double lap = 0.0, grad2 = 0.0;
        for (int i = 0; i < n; ++i) {
            lap += st.der.hh(p, i, i);
            grad2 += st.der.gh(p, i) * st.der.gh(p, i);
        }
        for (int al = 0; al < d; ++al) {
            lap += st.der.hv(p, al, al);
            grad2 += st.der.gv(p, al) * st.der.gv(p, al);
        }
        band_min = std::min(band_min, (n + d) + grad2 - lap);
    }
    rec.band_min = band_min;
    if (ctx.rhs_F) {
        std::vector<double> F = ctx.rhs_F(u, st);
        double fmin = kInf;
        for (double x : F) fmin = std::min(fmin, x);
        if (fmin > 0.0) {
            rec.band_c1 = (n + d) * std::pow(fmin, 1.0 / (n + d));
            double h = g.h_max();
            rec.band_holds = band_min >= rec.band_c1 - 10.0 * h * h;
            rec.band_checked = true;
        }
    }
    if (ctx.c0_bound) {
        double worst = 0.0;
        for (long p = 0; p < N; ++p) worst = std::max(worst, std::abs(u[p]));
        double h = g.h_max();
        rec.c0_checked = true;
        rec.c0_margin = *ctx.c0_bound + 10.0 * h * h - worst;
        rec.c0_holds = rec.c0_margin >= 0.0;
    } else if (ctx.c0_box) {
        double h = g.h_max();
        double lo = ctx.c0_box->first - 10.0 * h * h, hi = ctx.c0_box->second + 10.0 * h * h;
        double margin = kInf;
        for (long p = 0; p < N; ++p) margin = std::min({margin, u[p] - lo, hi - u[p]});
        rec.c0_checked = true;
        rec.c0_margin = margin;
        rec.c0_holds = margin >= 0.0;
    }
    if (ctx.with_omega && st.admissible) {
        std::vector<double> om = omega_third_norm(u, st);
        // The crude third difference is unreliable on the pole-adjacent
        // rings; they are skipped in the reported maximum.
        for (long p = 0; p < N; ++p) {
            if (d == 2) {
                int j = g.fiber.ring(g.fiber_of(p));
                if (j == 0 || j == g.fiber.n_phi - 1) continue;
            }
            rec.omega_max = std::max(rec.omega_max, om[p]);
        }
    }
    return rec;
}

SolveOutcome solve_direct(std::shared_ptr<const BundleGrid> grid, const CurvatureSpec& K,
                          const SolverConfig& cfg, std::optional<double> mean_pin,
                          const ScalarField* u0) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    SolveOutcome out;
    out.report.mode = "direct";
    int m = grid->m();

    NewtonProblem prob;
    prob.grid = grid;
    prob.eq = direct_equation(K);
    prob.eq.p = 0.5 * (m + 1);
    if (K.shift_invariant() && !mean_pin) mean_pin = 0.0;  // removes the homothety family
    prob.mean_pin = mean_pin;

    ScalarField start = u0 ? *u0 : ScalarField(grid, 0.0);
    NewtonResult nr = newton_solve(prob, start, cfg);
    out.u = nr.u;
    fill_report_from_newton(out.report, nr);
    out.report.converged = nr.converged;
    out.report.status = nr.status;
    out.report.failure = nr.converged ? "" : to_string(nr.status) + ": " + nr.message;
    out.report.trace.push_back({1.0, nr.iterations, nr.residual, nr.adm_margin, true});
    out.report.final_t = 1.0;
    out.report.final_residual_n2 = max_residual(residual_direct(out.u, K));

    MonitorContext mctx;
    mctx.rhs_F = [&K, m](const ScalarField& u, const OperatorState& st) {
        // Product-form right-hand side N1 e^{(m-1)u} K(e^u xi); N1 is the
        // discrete horizontal determinant (identically 1 when n = 0).
        const BundleGrid& g = *u.grid;
        std::vector<double> F(u.size());
        for (long p = 0; p < u.size(); ++p)
            F[p] = st.n1[p] * std::exp((m - 1) * u[p]) * K.eval(g, p, std::exp(u[p]));
        return F;
    };
    out.report.monitors = monitor_bounds(out.u, mctx);
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (K.extrapolation_used())
        out.report.warnings.push_back("curvature table evaluated outside its radial range");
    return out;
}

SolveOutcome continuity_path_theorem3(std::shared_ptr<const BundleGrid> grid,
                                      const CurvatureSpec& f, double lambda,
                                      const SolverConfig& cfg) {
    cfg.validate();
    if (!(lambda > 0)) throw std::invalid_argument("lambda must be strictly positive");
    auto t0 = std::chrono::steady_clock::now();
    SolveOutcome out;
    out.report.mode = "theorem3";
    const BundleGrid& g = *grid;
    int m = g.m();
    long N = g.node_count();

    std::vector<double> logf(N);
    for (long p = 0; p < N; ++p) logf[p] = std::log(f.eval(g, p, 1.0));
    double c0_bound = 0.0;
    for (double x : logf) c0_bound = std::max(c0_bound, std::abs(x));
    c0_bound /= lambda;
    double h = g.h_max();

    out.u = ScalarField(grid, 0.0);
    double t = 0.0, dt = cfg.dt_initial;
    std::string inner_failure;
    {  // t = 0 starts exactly at u = 0
        out.report.trace.push_back({0.0, 0, 0.0, 1.0, true});
    }
    while (t < 1.0) {
        double tn = std::min(t + dt, 1.0);
        NewtonProblem prob;
        prob.grid = grid;
        prob.eq = theorem3_equation(logf, lambda, tn, m);
        prob.couple_horizontal = g.n() > 0;
        NewtonResult nr = newton_solve(prob, out.u, cfg);
        if (nr.converged) {
            out.u = nr.u;
            t = tn;
            double worst = 0.0;
            for (long p = 0; p < N; ++p) worst = std::max(worst, std::abs(out.u[p]));
            bool c0ok = worst <= c0_bound + 10.0 * h * h;
            out.report.trace.push_back({t, nr.iterations, nr.residual, nr.adm_margin, c0ok});
            fill_report_from_newton(out.report, nr);
            dt = std::min(dt * 2.0, cfg.dt_initial);
        } else {
            inner_failure = to_string(nr.status) + ": " + nr.message;
            out.report.grad_bound_all_iterates = out.report.grad_bound_all_iterates && nr.grad_bound_all;
            out.report.grad_bound_iterates_checked += nr.grad_bound_checked;
            dt *= 0.5;
            if (dt < cfg.dt_min) {
                out.u = nr.u;
                out.report.status = SolveStatus::PathFailure;
                out.report.failure =
                    "PathFailure: homotopy step underflow at t = " + std::to_string(tn) +
                    " (last inner failure: " + inner_failure + ")";
                break;
            }
        }
    }
    out.report.final_t = t;
    auto rr = residual_theorem3(out.u, f, lambda, t);
    out.report.final_residual_n1 = max_residual(rr.first);
    out.report.final_residual_n2 = max_residual(rr.second);
    if (t >= 1.0) {
        out.report.converged = true;
        out.report.status = SolveStatus::Converged;
    }

    MonitorContext mctx;
    double tf = t;
    mctx.rhs_F = [&f, lambda, tf, m](const ScalarField& u, const OperatorState& st) {
        const BundleGrid& g2 = *u.grid;
        std::vector<double> F(u.size());
        for (long p = 0; p < u.size(); ++p)
            F[p] = st.n1[p] * std::exp(-lambda * u[p]) * std::pow(f.eval(g2, p, 1.0), tf) *
                   std::pow(1.0 + st.v1[p], 0.5 * (m + 1) * (tf - 1.0));
        return F;
    };
    mctx.c0_bound = c0_bound;
    out.report.monitors = monitor_bounds(out.u, mctx);
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (f.extrapolation_used())
        out.report.warnings.push_back("curvature table evaluated outside its radial range");
    return out;
}

SolveOutcome nagumo_iteration_theorem4(std::shared_ptr<const BundleGrid> grid,
                                       const CurvatureSpec& K, const SolverConfig& cfg) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    SolveOutcome out;
    out.report.mode = "theorem4";
    const BundleGrid& g = *grid;
    int m = g.m();
    long N = g.node_count();
    double h = g.h_max();

    // Barrier inequalities sampled at r1/2 and 2 r2; violations are
    // reported, not fatal.
    {
        long bad_lo = 0, bad_hi = 0;
        double rlo = 0.5 * cfg.r1, rhi = 2.0 * cfg.r2;
        for (long p = 0; p < N; ++p) {
            if (!(K.eval(g, p, rlo) > std::pow(rlo, 1 - m))) ++bad_lo;
            if (!(K.eval(g, p, rhi) < std::pow(rhi, 1 - m))) ++bad_hi;
        }
        if (bad_lo || bad_hi)
            out.report.warnings.push_back(
                "barrier inequalities violated at sampled radii (" + std::to_string(bad_lo) +
                " nodes at r1/2, " + std::to_string(bad_hi) + " nodes at 2 r2)");
    }

    ScalarField w(grid, 0.0);
    out.u = ScalarField(grid, 0.0);
    double t = 0.0, dt = cfg.dt_initial;
    std::string inner_failure;
    bool stalled = false;  // last stage failure was a non-contracting sweep

    auto stage = [&](double tn) -> bool {
        stalled = false;
        std::vector<double> data_log(N);
        double prev_delta = kInf;
        int noncontract = 0;
        for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
            for (long p = 0; p < N; ++p)
                data_log[p] = tn * (m * w[p] + std::log(K.eval(g, p, std::exp(w[p]))));
            NewtonProblem prob;
            prob.grid = grid;
            prob.eq = theorem4_inner_equation(data_log, m);
            prob.couple_horizontal = g.n() > 0;
            NewtonResult nr = newton_solve(prob, out.u, cfg);
            if (!nr.converged) {
                inner_failure = to_string(nr.status) + ": " + nr.message;
                out.report.grad_bound_all_iterates = out.report.grad_bound_all_iterates && nr.grad_bound_all;
                out.report.grad_bound_iterates_checked += nr.grad_bound_checked;
                return false;
            }
            out.u = nr.u;
            fill_report_from_newton(out.report, nr);
            double delta = 0.0;
            for (long p = 0; p < N; ++p) delta = std::max(delta, std::abs(w[p] - out.u[p]));
            if (delta <= cfg.tol_residual) {
                w = out.u;
                out.report.trace.push_back({tn, nr.iterations, delta, nr.adm_margin, true});
                return true;
            }
            if (delta >= prev_delta) {
                if (++noncontract >= 20) {
                    inner_failure = "contraction estimate >= 1 over 20 sweeps";
                    stalled = true;
                    return false;
                }
            } else {
                noncontract = 0;
            }
            prev_delta = delta;
            double sig = cfg.krasnoselskii_sigma;
            for (long p = 0; p < N; ++p) w[p] = (1.0 - sig) * w[p] + sig * out.u[p];
        }
        inner_failure = "sweep budget exhausted";
        return false;
    };

    while (t < 1.0) {
        double tn = std::min(t + dt, 1.0);
        if (stage(tn)) {
            t = tn;
            dt = std::min(dt * 2.0, cfg.dt_initial);
        } else {
            dt *= 0.5;
            if (dt < cfg.dt_min) {
                if (stalled) {
                    out.report.status = SolveStatus::FixedPointStall;
                    out.report.failure = "FixedPointStall: " + inner_failure +
                                         " at t = " + std::to_string(tn);
                } else {
                    out.report.status = SolveStatus::PathFailure;
                    out.report.failure = "PathFailure: fixed-point homotopy underflow at t = " +
                                         std::to_string(tn) + " (" + inner_failure + ")";
                }
                break;
            }
        }
    }
    out.report.final_t = t;

    // Residual of the target prescription and the barrier window.
    out.report.final_residual_n2 = max_residual(residual_direct(out.u, K));
    {
        OperatorState st = build_state(out.u);
        std::vector<double> rhs(N);
        for (long p = 0; p < N; ++p)
            rhs[p] = (m - 1) * out.u[p] + std::log(K.eval(g, p, std::exp(out.u[p]))) +
                     0.5 * (m + 1) * std::log1p(st.v1[p]);
        out.report.final_residual = max_residual(log_residual(st, rhs));
        auto rr1 = log_n1_residual(st);
        out.report.final_residual_n1 = g.n() > 0 ? max_residual(rr1) : 0.0;
    }
    if (t >= 1.0) {
        double lo = std::log(cfg.r1) - h * h, hi = std::log(cfg.r2) + h * h;
        bool inside = true;
        for (long p = 0; p < N; ++p) inside = inside && out.u[p] >= lo && out.u[p] <= hi;
        if (!inside) {
            out.report.status = SolveStatus::BarrierViolation;
            out.report.failure = "BarrierViolation: solution left [log r1 - h^2, log r2 + h^2]";
        } else if (out.report.final_residual <= 100.0 * cfg.tol_residual) {
            out.report.converged = true;
            out.report.status = SolveStatus::Converged;
        } else {
            out.report.status = SolveStatus::NonConvergence;
            out.report.failure = "NonConvergence: fixed point reached but residual above tolerance";
        }
    }

    MonitorContext mctx;
    mctx.rhs_F = [&K, m](const ScalarField& u, const OperatorState& st) {
        const BundleGrid& g2 = *u.grid;
        std::vector<double> F(u.size());
        for (long p = 0; p < u.size(); ++p)
            F[p] = st.n1[p] * std::exp((m - 1) * u[p]) * K.eval(g2, p, std::exp(u[p]));
        return F;
    };
    mctx.c0_box = std::make_pair(std::log(cfg.r1), std::log(cfg.r2));
    out.report.monitors = monitor_bounds(out.u, mctx);
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (K.extrapolation_used())
        out.report.warnings.push_back("curvature table evaluated outside its radial range");
    return out;
}

double uniqueness_probe(ProbeProblem kind, std::shared_ptr<const BundleGrid> grid,
                        const CurvatureSpec& spec, double lambda, const ScalarField& u0a,
                        const ScalarField& u0b, const SolverConfig& cfg, SolveReport* report_a,
                        SolveReport* report_b) {
    const BundleGrid& g = *grid;
    int m = g.m();
    long N = g.node_count();

    auto run = [&](const ScalarField& start, SolveReport* rep) -> ScalarField {
        NewtonProblem prob;
        prob.grid = grid;
        std::vector<double> logf;
        if (kind == ProbeProblem::Theorem3) {
            logf.resize(N);
            for (long p = 0; p < N; ++p) logf[p] = std::log(spec.eval(g, p, 1.0));
            prob.eq = theorem3_equation(logf, lambda, 1.0, m);
            prob.couple_horizontal = g.n() > 0;
        } else {
            prob.eq = direct_equation(spec);
            prob.eq.p = 0.5 * (m + 1);
            if (spec.shift_invariant()) prob.mean_pin = weighted_mean(start);
        }
        NewtonResult nr = newton_solve(prob, start, cfg);
        if (rep) {
            rep->mode = kind == ProbeProblem::Theorem3 ? "theorem3" : "direct";
            fill_report_from_newton(*rep, nr);
            rep->converged = nr.converged;
            rep->status = nr.status;
            rep->failure = nr.converged ? "" : to_string(nr.status) + ": " + nr.message;
        }
        return nr.u;
    };
    ScalarField ua = run(u0a, report_a);
    ScalarField ub = run(u0b, report_b);
    double disc = 0.0;
    for (long p = 0; p < N; ++p) disc = std::max(disc, std::abs(ua[p] - ub[p]));
    return disc;
}

}  // namespace rgc
