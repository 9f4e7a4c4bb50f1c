#pragma once

#include "rgc/curvature.hpp"
#include "rgc/derivatives.hpp"
#include "rgc/grid.hpp"

namespace rgc {

/// Per-node blocks of G'_u = G + Du Du - D^2 u together with their
/// determinants, inverses and minimum eigenvalues. The off-diagonal
/// horizontal-vertical block is zero by definition.
struct AdmissibleTensor {
    int n = 0, d = 1;
    long count = 0;
    std::vector<double> block_h;    // count * n * n
    std::vector<double> block_v;    // count * d * d
    std::vector<double> mineig_h;   // count (n = 0: +inf sentinel omitted, filled with 1)
    std::vector<double> mineig_v;   // count
    bool admissible = false;        // every block positive definite at every node
    double margin = 0.0;            // smallest eigenvalue over all nodes and blocks
};

/// Cached derivative and block data for one field; every operator and
/// Jacobian application reads from here.
struct OperatorState {
    FrameDerivatives der;
    std::vector<double> n1, n2;          // block determinants
    std::vector<double> inv_v;           // vertical block inverse, count * d * d
    std::vector<double> inv_h;           // horizontal block inverse, count * n * n
    std::vector<double> mineig_v, mineig_h;
    std::vector<double> v1;              // |D^v u|^2
    double margin = 0.0;
    bool admissible = false;
};

OperatorState build_state(const ScalarField& u);

/// det of the vertical block (delta + D_al u D^be u - D_al^be u); for d = 1
/// the scalar 1 + (D_theta u)^2 - D_theta_theta u.
std::vector<double> n2_operator(const ScalarField& u);

/// det of the horizontal block; identically 1 when n = 0 (empty product).
std::vector<double> n1_operator(const ScalarField& u);

/// Vertical Gaussian curvature of the radial graph at e^u xi:
/// (1 + |D^v u|^2)^{-(m+1)/2} e^{-(m-1)u} N2(u).
std::vector<double> vertical_gauss_curvature(const ScalarField& u);

AdmissibleTensor admissible_tensor(const ScalarField& u);

/// Signed prescription residual N2(u) - (1+|D^v u|^2)^{(m+1)/2} e^{(m-1)u}
/// K(e^u xi), zero iff u solves the graph equation at that node.
std::vector<double> residual_direct(const ScalarField& u, const CurvatureSpec& K);

/// Residual pair (N1(u) - 1, N2(u) - e^{-lambda u} [f (1+|D^v u|^2)^{(m+1)/2}]^t).
std::pair<std::vector<double>, std::vector<double>> residual_theorem3(const ScalarField& u,
                                                                      const CurvatureSpec& f,
                                                                      double lambda, double t);

/// Residual pair (N1(u) - 1,
///   N2(u) - e^{-u} [e^{m w} K(e^w xi)]^t (1+|D^v u|^2)^{(m+1)/2}).
std::pair<std::vector<double>, std::vector<double>> residual_theorem4(const ScalarField& u,
                                                                      const ScalarField& w,
                                                                      const CurvatureSpec& K,
                                                                      double t);

struct singular_linearization : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Action of the vertical log-residual linearization
///   w -> G'^{al be} (2 D_al u D_be w - D_{al be} w) + lambda w
///        - t (m+1) D^al u D_al w / (1 + |D^v u|^2).
/// Throws singular_linearization when the vertical block has an eigenvalue
/// <= 1e-12 somewhere (loss of admissibility).
class VerticalLinearOp {
  public:
    VerticalLinearOp(const ScalarField& u, double lambda, double t);
    std::vector<double> apply(const std::vector<double>& w) const;

  private:
    std::shared_ptr<const BundleGrid> grid_;
    OperatorState st_;
    double lambda_, t_;
};

/// Action of the horizontal log-determinant linearization
///   w -> G'^{ij} (2 D_i u D_j w - D_ij w); the zero operator when n = 0.
class HorizontalLinearOp {
  public:
    explicit HorizontalLinearOp(const ScalarField& u);
    std::vector<double> apply(const std::vector<double>& w) const;

  private:
    std::shared_ptr<const BundleGrid> grid_;
    OperatorState st_;
};

namespace detail {

/// Shared kernel for the vertical linearization: J(w) = dlogN2(w)
/// + c0 w - gc * sum_al D^al u D_al w, with nodal coefficient fields.
std::vector<double> apply_vertical_jacobian(const BundleGrid& g, const OperatorState& st,
                                            const std::vector<double>& w,
                                            const std::vector<double>& c0,
                                            const std::vector<double>& gc);

std::vector<double> apply_horizontal_jacobian(const BundleGrid& g, const OperatorState& st,
                                              const std::vector<double>& w);

/// Analytic diagonal of the vertical Jacobian (for preconditioning).
std::vector<double> vertical_jacobian_diagonal(const BundleGrid& g, const OperatorState& st,
                                               const std::vector<double>& c0);

}  // namespace detail

}  // namespace rgc
