#pragma once

#include <functional>
#include <vector>

namespace rgc {

using ApplyFn = std::function<std::vector<double>(const std::vector<double>&)>;

struct GmresResult {
    bool converged = false;
    int iterations = 0;
    double rel_residual = 1.0;
};

/// Restarted GMRES with diagonal (Jacobi) preconditioning. Solves A x = b to
/// a relative residual of rtol; x carries the best iterate on exit.
GmresResult gmres(const ApplyFn& A, const std::vector<double>& diag, const std::vector<double>& b,
                  std::vector<double>& x, double rtol = 1e-12, int restart = 80,
                  int max_iters = 5000);

double max_abs(const std::vector<double>& v);
double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& v);
void axpy(double a, const std::vector<double>& x, std::vector<double>& y);

}  // namespace rgc
