#include "bnlab/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bnlab/error.hpp"

namespace bnlab {

namespace {

constexpr int kMaxSweeps = 80;
constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_square_finite(const Tensor& x, const char* what) {
    if (x.rank() != 2 || x.dim(0) != x.dim(1))
        throw DimensionError(std::string(what) + ": expected a square matrix, got " + shape_string(x.shape()));
    if (!x.all_finite()) throw ValueError(std::string(what) + ": non-finite entries");
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

std::vector<double> gram_eigenvalues(const Tensor& x) {
    check_square_finite(x, "gram_eigenvalues");
    const std::size_t n = x.dim(0);

    // cols[j] holds column j of x contiguously.
    std::vector<double> cols(n * n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) cols[c * n + r] = x[r * n + c];

    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) norms[j] = dot(&cols[j * n], &cols[j * n], n);

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* up = &cols[p * n];
                double* uq = &cols[q * n];
                const double alpha = norms[p];
                const double beta = norms[q];
                if (alpha == 0.0 || beta == 0.0) continue;
                const double gamma = dot(up, uq, n);
                if (std::fabs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::fabs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t k = 0; k < n; ++k) {
                    const double a = up[k];
                    const double b = uq[k];
                    up[k] = c * a - s * b;
                    uq[k] = s * a + c * b;
                }
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        // Refresh the running norms so rounding drift cannot stall convergence.
        for (std::size_t j = 0; j < n; ++j) norms[j] = dot(&cols[j * n], &cols[j * n], n);
        if (!rotated) break;
    }

    std::sort(norms.begin(), norms.end());
    for (auto& v : norms) v = std::max(v, 0.0);
    return norms;
}

std::vector<double> symmetric_eigenvalues(const Tensor& a) {
    check_square_finite(a, "symmetric_eigenvalues");
    const std::size_t n = a.dim(0);
    std::vector<double> m(a.data().begin(), a.data().end());
    auto at = [&](std::size_t r, std::size_t c) -> double& { return m[r * n + c]; };

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) (r == c ? diag : off) += at(r, c) * at(r, c);
        if (off <= kEps * kEps * diag || off == 0.0) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (apq == 0.0) continue;
                const double app = at(p, p);
                const double aqq = at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::fabs(theta) + std::hypot(1.0, theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = at(k, p);
                    const double akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = at(p, k);
                    const double aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
                at(p, q) = 0.0;
                at(q, p) = 0.0;
            }
        }
    }

    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = at(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

}  // namespace bnlab
