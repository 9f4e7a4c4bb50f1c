#pragma once

#include <optional>
#include <string>

#include "rgc/operators.hpp"

namespace rgc {

struct SolverConfig {
    double tol_residual = 1e-10;   // max-norm of the log-residual
    int max_newton_iters = 50;
    double backtrack = 0.5;
    double min_step = std::pow(2.0, -20);
    double dt_initial = 0.1;
    double dt_min = 1e-4;
    double lambda = 1.0;           // zeroth-order coefficient (theorem3 mode)
    double r1 = 1.0, r2 = 1.0;     // barrier radii (theorem4 mode)
    bool admissibility_guard = true;
    double linear_rtol = 1e-12;
    long dense_threshold = 1100;   // unknown count up to which dense factorization is used
    double krasnoselskii_sigma = 0.5;
    int max_sweeps = 200;
    unsigned seed = 42;

    void validate() const;
};

/// Outcome snapshot of the a priori bound monitors for one field.
struct MonitorRecord {
    bool valid = false;
    bool admissible = false;
    double adm_margin = 0.0;
    double osc = 0.0;
    double grad_h_max = 0.0;        // max over nodes of sum_i (D_i u)^2
    double grad_v_max = 0.0;        // max over nodes of sum_al (D_al u)^2
    double grad_bound = 0.0;      // e^{2 osc} - 1
    bool grad_bound_holds = true;       // checked only when admissible
    double band_min = 0.0;          // min over nodes of n+m-1+|Du|^2 - Lap u
    double band_c1 = 0.0;           // (n+m-1) (min F)^{1/(n+m-1)}
    bool band_holds = true;
    bool band_checked = false;
    bool c0_checked = false;
    bool c0_holds = true;
    double c0_margin = 0.0;
    double omega_max = 0.0;         // G'-weighted third-difference norm, no threshold
};

struct HomotopyStep {
    double t = 0.0;
    int newton_iters = 0;
    double final_residual = 0.0;
    double adm_margin = 0.0;
    bool c0_holds = true;
};

enum class SolveStatus {
    Converged,
    NonConvergence,
    AdmissibilityLoss,
    SingularLinearization,
    PathFailure,
    FixedPointStall,
    BarrierViolation
};

std::string to_string(SolveStatus s);

struct SolveReport {
    std::string mode;
    SolveStatus status = SolveStatus::Converged;
    bool converged = false;
    std::string failure;  // empty when converged
    std::vector<HomotopyStep> trace;
    std::vector<double> residual_history;   // last Newton solve, accepted iterates
    std::vector<double> adm_margin_trace;
    MonitorRecord monitors;
    bool grad_bound_all_iterates = true;        // across every admissible accepted iterate
    int grad_bound_iterates_checked = 0;
    double final_residual = 0.0;            // max-norm log residual
    double final_residual_n1 = 0.0;         // raw N1 - 1 max-norm (coupled modes)
    double final_residual_n2 = 0.0;         // raw N2 - RHS max-norm
    double final_t = 0.0;
    double wall_seconds = 0.0;
    std::vector<std::string> warnings;
};

/// Right-hand side description of one vertical equation
/// log N2(u) = rhs_log(u); c0 is the u-derivative of rhs_log's zeroth-order
/// part (the Newton Jacobian gets -c0) and p scales the log(1+|D^v u|^2)
/// term (gradient coefficient 2p/(1+v1)).
struct VerticalEquation {
    std::function<void(const ScalarField& u, const OperatorState& st, std::vector<double>& rhs_log,
                       std::vector<double>& c0)>
        parts;
    double p = 0.0;
};

/// Newton problem bundle: a vertical equation, optionally coupled with the
/// horizontal constraint log N1(u) = 0 (n >= 1 modes), plus a scalar
/// mean-pin constraint for shift-invariant prescriptions.
struct NewtonProblem {
    std::shared_ptr<const BundleGrid> grid;
    VerticalEquation eq;
    bool couple_horizontal = false;
    std::optional<double> mean_pin;
};

struct NewtonResult {
    ScalarField u;
    int iterations = 0;
    double residual = 0.0;
    double residual_n1 = 0.0;
    bool converged = false;
    SolveStatus status = SolveStatus::Converged;
    std::string message;
    std::vector<double> history;
    std::vector<double> margins;
    bool grad_bound_all = true;
    int grad_bound_checked = 0;
    double adm_margin = 0.0;
};

/// Damped Newton on the log-form residual with the admissibility guard.
NewtonResult newton_solve(const NewtonProblem& problem, const ScalarField& u0,
                          const SolverConfig& cfg);

struct SolveOutcome {
    ScalarField u;
    SolveReport report;
};

/// Direct prescription mode: N2(u) = (1+|D^v u|^2)^{(m+1)/2} e^{(m-1)u} K(e^u xi).
SolveOutcome solve_direct(std::shared_ptr<const BundleGrid> grid, const CurvatureSpec& K,
                          const SolverConfig& cfg, std::optional<double> mean_pin = std::nullopt,
                          const ScalarField* u0 = nullptr);

/// Homotopy continuation for the coupled system N1(u) = 1,
/// N2(u) = e^{-lambda u} [f (1+|D^v u|^2)^{(m+1)/2}]^t from t = 0 to t = 1.
SolveOutcome continuity_path_theorem3(std::shared_ptr<const BundleGrid> grid,
                                      const CurvatureSpec& f, double lambda,
                                      const SolverConfig& cfg);

/// Fixed-point homotopy for the barrier-bounded prescription: inner solves
/// of the coupled system with unit zeroth-order coefficient, damped
/// averaging sweeps, final solution checked against [log r1, log r2].
SolveOutcome nagumo_iteration_theorem4(std::shared_ptr<const BundleGrid> grid,
                                       const CurvatureSpec& K, const SolverConfig& cfg);

/// Bound monitors; reports, never aborts. rhs_F supplies the nodal
/// right-hand side F of the product-form equation N1 N2 = (1+v1)^{(m+1)/2} F
/// for the lower band constant (n+m-1)(min F)^{1/(n+m-1)}.
struct MonitorContext {
    std::function<std::vector<double>(const ScalarField&, const OperatorState&)> rhs_F;
    std::optional<double> c0_bound;                  // symmetric window |u| <= bound
    std::optional<std::pair<double, double>> c0_box; // window [lo, hi]
    bool with_omega = true;
};

MonitorRecord monitor_bounds(const ScalarField& u, const MonitorContext& ctx);

enum class ProbeProblem { Direct, Theorem3 };

/// Two independent solves from distinct starts; returns the max-norm
/// discrepancy of the converged fields. For a shift-invariant direct
/// problem each run pins the mean of u to the mean of its own start.
double uniqueness_probe(ProbeProblem kind, std::shared_ptr<const BundleGrid> grid,
                        const CurvatureSpec& spec, double lambda, const ScalarField& u0a,
                        const ScalarField& u0b, const SolverConfig& cfg,
                        SolveReport* report_a = nullptr, SolveReport* report_b = nullptr);

}  // namespace rgc
