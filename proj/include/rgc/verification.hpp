#pragma once

#include <array>

#include "rgc/operators.hpp"

namespace rgc {

/// Exact solution for a fiber-constant prescription kappa > 0 on the base:
/// u = -log(kappa)/(m-1), constant along every fiber.
ScalarField theorem1_oracle(std::shared_ptr<const BundleGrid> grid,
                            const std::function<double(const double* x)>& kappa);

/// Radial graph e^{u} xi embedded over one base node: a closed polyline in
/// R^2 (d = 1) or a closed triangulated surface in R^3 (d = 2, polar caps
/// triangulated from the boundary rings so the vertex count equals the
/// fiber node count).
struct EmbeddedMesh {
    int ambient_dim = 2;
    std::vector<std::array<double, 3>> vertices;  // grid order
    std::vector<std::array<int, 3>> faces;        // d = 2 only
    bool polyline = false;                        // d = 1: closed loop in vertex order
    std::vector<int> degenerate_faces;
    bool closed = true;
    bool positively_oriented = true;
};

struct EmbedResult {
    EmbeddedMesh mesh;
    std::vector<double> curvature;     // per fiber node
    std::vector<int> pole_adjacent;    // fiber nodes excluded from tolerance checks (d = 2)
};

/// Independent discrete curvature of the embedded graph: circumscribed
/// circle (Menger) curvature for curves, angle defect over the mixed
/// Voronoi area for surfaces.
EmbedResult embed_and_measure(const ScalarField& u, int base_node = 0);

struct IdentityReport {
    // Vertical curvature commutator check (d = 2): discrete
    // [D_1, D_2] on the gradient against the round-sphere curvature terms.
    double commutator_max = 0.0;           // pole-adjacent rings excluded
    double commutator_max_all = 0.0;       // every node
    // Horizontal-vertical commutators on a flat product (zero to round-off).
    double mixed_max = 0.0;
    // Homogeneity of D_a u under radial extension.
    double homogeneity_max = 0.0;
    int fields_tested = 0;
    // Convexity diagnostic of a solved graph (when one was produced).
    bool has_convexity = false;
    double convexity_min = 0.0;
};

/// Identity checks for a single test field.
IdentityReport structure_identities_for(const ScalarField& v);

/// Runs the curvature-commutator, flat-commutation and homogeneity checks
/// on a seeded set of smooth test fields (aggregated maxima).
IdentityReport structure_identity_suite(std::shared_ptr<const BundleGrid> grid,
                                        unsigned seed = 42, int n_fields = 5);

struct ConvergenceResult {
    std::vector<double> errors;
    std::vector<double> orders;  // log2(e_k / e_{k+1})
    bool exact = false;          // all errors at round-off (< 1e-12)
};

/// Observed order from errors at a geometric resolution ladder.
ConvergenceResult convergence_study(const std::function<double(int)>& error_at,
                                    const std::vector<int>& resolutions);

/// Seeded smooth test field: a low-degree polynomial in the ambient fiber
/// coordinates (restricted to the sphere), optionally modulated along the
/// base. Smooth across the poles by construction.
ScalarField random_smooth_field(std::shared_ptr<const BundleGrid> grid, unsigned seed,
                                double amplitude = 0.1);

/// As above but rescaled until the field is admissible with margin.
ScalarField random_admissible_field(std::shared_ptr<const BundleGrid> grid, unsigned seed,
                                    double amplitude = 0.1);

/// Multi-linear interpolation of a nodal field at arbitrary base
/// coordinates and fiber angles (periodic wrap, across-pole reflection).
double interpolate_field(const ScalarField& u, const double* x, const double* ang);

/// Signed-eigenvalue convexity diagnostic of the embedded graph: per-node
/// minimum eigenvalue of the (symmetrized) second fundamental form proxy
///   (1-mu_a) G_ab + (1-2 mu_a) e^{(mu_a+mu_b) u} D_a u D_b u
///   - e^{(mu_a+mu_b) u} D_ab u.
/// Negative values flag non-convex graphs; reported without a threshold.
std::vector<double> convexity_diagnostic(const ScalarField& u);

}  // namespace rgc
