#include "rgc/linsolve.hpp"

#include <cmath>
#include <cstdlib>

namespace rgc {

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

GmresResult gmres(const ApplyFn& A, const std::vector<double>& diag, const std::vector<double>& b,
                  std::vector<double>& x, double rtol, int restart, int max_iters) {
    const long N = (long)b.size();
    if (x.empty()) x.assign(N, 0.0);
    std::vector<double> minv(N);
    for (long i = 0; i < N; ++i) minv[i] = std::abs(diag[i]) > 1e-300 ? 1.0 / diag[i] : 1.0;
    auto precond = [&](std::vector<double>& v) {
        for (long i = 0; i < N; ++i) v[i] *= minv[i];
    };

    GmresResult res;
    std::vector<double> r = A(x);
    for (long i = 0; i < N; ++i) r[i] = b[i] - r[i];
    precond(r);
    double bnorm;
    {
        std::vector<double> pb = b;
        precond(pb);
        bnorm = norm2(pb);
    }
    if (bnorm == 0.0) {
        x.assign(N, 0.0);
        res.converged = true;
        res.rel_residual = 0.0;
        return res;
    }

    int iters = 0;
    while (iters < max_iters) {
        double beta = norm2(r);
        res.rel_residual = beta / bnorm;
        if (res.rel_residual <= rtol) {
            res.converged = true;
            break;
        }
        int mdim = std::min(restart, max_iters - iters);
        std::vector<std::vector<double>> V;
        V.reserve(mdim + 1);
        std::vector<double> v0 = r;
        for (long i = 0; i < N; ++i) v0[i] /= beta;
        V.push_back(std::move(v0));

        std::vector<double> H((mdim + 1) * mdim, 0.0);
        std::vector<double> cs(mdim), sn(mdim), g(mdim + 1, 0.0);
        g[0] = beta;
        int k = 0;
        for (; k < mdim; ++k) {
            std::vector<double> w = A(V[k]);
            precond(w);
            for (int i = 0; i <= k; ++i) {
                double h = dot(w, V[i]);
                H[i * mdim + k] = h;
                axpy(-h, V[i], w);
            }
            double hk1 = norm2(w);
            ++iters;
            if (hk1 > 1e-300) {
                for (long i = 0; i < N; ++i) w[i] /= hk1;
                V.push_back(std::move(w));
            }
            // Givens rotations keep the least-squares residual explicit.
            for (int i = 0; i < k; ++i) {
                double t1 = cs[i] * H[i * mdim + k] + sn[i] * H[(i + 1) * mdim + k];
                double t2 = -sn[i] * H[i * mdim + k] + cs[i] * H[(i + 1) * mdim + k];
                H[i * mdim + k] = t1;
                H[(i + 1) * mdim + k] = t2;
            }
            double denom = std::hypot(H[k * mdim + k], hk1);
            if (denom < 1e-300) {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = H[k * mdim + k] / denom;
                sn[k] = hk1 / denom;
            }
            H[k * mdim + k] = denom;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            if (std::abs(g[k + 1]) / bnorm <= rtol || (int)V.size() == k + 1) {
                ++k;
                break;
            }
        }
        // back substitution
        std::vector<double> y(k, 0.0);
        for (int i = k - 1; i >= 0; --i) {
            double s = g[i];
            for (int j = i + 1; j < k; ++j) s -= H[i * mdim + j] * y[j];
            y[i] = s / H[i * mdim + i];
        }
        for (int i = 0; i < k; ++i) axpy(y[i], V[i], x);

        r = A(x);
        for (long i = 0; i < N; ++i) r[i] = b[i] - r[i];
        precond(r);
        res.rel_residual = norm2(r) / bnorm;
        if (res.rel_residual <= rtol) {
            res.converged = true;
            break;
        }
    }
    res.iterations = iters;
    return res;
}

}  // namespace rgc
