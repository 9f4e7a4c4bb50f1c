#pragma once

#include <optional>
#include <string>

#include "rgc/solver.hpp"
#include "rgc/verification.hpp"

namespace rgc {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Curvature descriptor as written in configs/flags; resolved to a
/// CurvatureSpec once the grid dimensions are known.
struct CurvatureDesc {
    std::string kind;     // constant | fiber | radial | homothety | expression | table
    std::string payload;  // value text, expression text or file path
    bool empty() const { return kind.empty(); }
};

struct RunConfig {
    std::string mode;  // direct | theorem3 | theorem4 | verify | convergence
    int n = 0, d = 1;
    std::array<int, 2> base_res{16, 16};
    std::array<int, 2> fiber_res{64, 0};
    CurvatureDesc curvature;
    double lambda = 1.0;
    double r1 = 1.0, r2 = 1.0;
    double tol = 1e-10;
    int max_iters = 50;
    std::optional<double> mean_pin;
    unsigned seed = 42;
    std::string out_prefix = "run";
    std::vector<int> resolutions;       // convergence mode
    std::array<double, 2> bracket{0.1, 10.0};  // radius verb
    int base_node = 0;

    SolverConfig solver_config() const;
};

/// Reads a JSON config file; unknown keys are rejected. Returns the raw
/// document for merging with flag overrides.
std::string read_text_file(const std::string& path);

/// Validates and materializes a config from a JSON document merged with
/// overrides (overrides win). Throws config_error listing every violated
/// constraint.
RunConfig parse_config(const std::string& json_text, const std::string& overrides_json = "{}");

/// Parses the --curvature flag syntax "kind:args" or "@path".
CurvatureDesc parse_curvature_flag(const std::string& text);

CurvatureSpec build_curvature(const CurvatureDesc& desc, int d);

/// Loads a sampled curvature table: CSV with header columns from
/// {x, y, theta, phi, rho, K}; rho and K required, K > 0, rows forming a
/// product of spatial keys and radii.
CurvatureSpec load_curvature_table(const std::string& path);

/// Serialized run artifacts: <prefix>.csv (solution field),
/// <prefix>.obj (embedded mesh of base node 0), <prefix>.json (report).
void emit_solution(const ScalarField& u, const SolveReport& report,
                   const std::string& config_echo_json, const std::string& prefix,
                   const IdentityReport* identities = nullptr);

/// Reads back a solution CSV written by emit_solution (round-trip checks).
std::vector<double> load_solution_csv(const std::string& path);

/// Report JSON for a failed run (no field available).
void emit_failure_report(const std::string& mode, const std::string& message,
                         const std::string& config_echo_json, const std::string& prefix);

std::string config_echo_json(const RunConfig& cfg);

}  // namespace rgc
