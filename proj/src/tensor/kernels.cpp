#include "bnlab/kernels.hpp"

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kernel_checks.hpp"

namespace bnlab {

int kernel_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_kernel_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto d = detail::check_matmul(a, b);
    Tensor c({d.m, d.n});
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = c.data().data();
    const auto m = static_cast<std::int64_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        double* row = C + i * d.n;
        for (std::size_t p = 0; p < d.k; ++p) {
            const double aip = A[i * d.k + p];
            const double* brow = B + p * d.n;
            for (std::size_t j = 0; j < d.n; ++j) row[j] += aip * brow[j];
        }
    }
    return c;
}

Tensor matmul_at_b(const Tensor& a, const Tensor& b) {
    const auto d = detail::check_matmul_at_b(a, b);
    Tensor c({d.m, d.n});
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = c.data().data();
    const auto m = static_cast<std::int64_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        double* row = C + i * d.n;
        for (std::size_t p = 0; p < d.k; ++p) {
            const double api = A[p * d.m + i];
            const double* brow = B + p * d.n;
            for (std::size_t j = 0; j < d.n; ++j) row[j] += api * brow[j];
        }
    }
    return c;
}

Tensor matmul_a_bt(const Tensor& a, const Tensor& b) {
    const auto d = detail::check_matmul_a_bt(a, b);
    Tensor c({d.m, d.n});
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = c.data().data();
    const auto m = static_cast<std::int64_t>(d.m);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const double* arow = A + i * d.k;
        for (std::size_t j = 0; j < d.n; ++j) {
            const double* brow = B + j * d.k;
            double acc = 0.0;
            for (std::size_t p = 0; p < d.k; ++p) acc += arow[p] * brow[p];
            C[i * d.n + j] = acc;
        }
    }
    return c;
}

namespace {

// Valid output range [lo, hi) along one axis for kernel tap k in {0,1,2}
// (offset k-1) so that the shifted index stays inside [0, n).
inline void tap_range(std::size_t k, std::size_t n, std::size_t& lo, std::size_t& hi) {
    lo = (k == 0) ? 1 : 0;
    hi = (k == 2) ? n - 1 : n;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel) {
    const auto d = detail::check_conv(input, kernel);
    Tensor out({d.batch, d.c_out, d.h, d.w});
    const double* in = input.data().data();
    const double* K = kernel.data().data();
    double* O = out.data().data();
    const std::size_t plane = d.h * d.w;
    const auto jobs = static_cast<std::int64_t>(d.batch * d.c_out);

#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::size_t b = static_cast<std::size_t>(job) / d.c_out;
        const std::size_t o = static_cast<std::size_t>(job) % d.c_out;
        double* dst = O + (b * d.c_out + o) * plane;
        for (std::size_t c = 0; c < d.c_in; ++c) {
            const double* src = in + (b * d.c_in + c) * plane;
            const double* k = K + (o * d.c_in + c) * 9;
            for (std::size_t kx = 0; kx < 3; ++kx) {
                std::size_t x0, x1;
                tap_range(kx, d.h, x0, x1);
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    std::size_t y0, y1;
                    tap_range(ky, d.w, y0, y1);
                    const double wgt = k[kx * 3 + ky];
                    for (std::size_t x = x0; x < x1; ++x) {
                        const double* s = src + (x + kx - 1) * d.w;
                        double* t = dst + x * d.w;
                        for (std::size_t y = y0; y < y1; ++y) t[y] += s[y + ky - 1] * wgt;
                    }
                }
            }
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& upstream, const Tensor& input, const Tensor& kernel) {
    const auto d = detail::check_conv_backward(upstream, input, kernel);
    ConvGrads g{Tensor(input.shape()), Tensor(kernel.shape())};
    const double* up = upstream.data().data();
    const double* in = input.data().data();
    const double* K = kernel.data().data();
    double* GK = g.grad_kernel.data().data();
    double* GI = g.grad_input.data().data();
    const std::size_t plane = d.h * d.w;

    const auto kjobs = static_cast<std::int64_t>(d.c_out * d.c_in);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < kjobs; ++job) {
        const std::size_t o = static_cast<std::size_t>(job) / d.c_in;
        const std::size_t i = static_cast<std::size_t>(job) % d.c_in;
        double* gk = GK + (o * d.c_in + i) * 9;
        for (std::size_t b = 0; b < d.batch; ++b) {
            const double* u = up + (b * d.c_out + o) * plane;
            const double* src = in + (b * d.c_in + i) * plane;
            for (std::size_t kx = 0; kx < 3; ++kx) {
                std::size_t x0, x1;
                tap_range(kx, d.h, x0, x1);
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    std::size_t y0, y1;
                    tap_range(ky, d.w, y0, y1);
                    double acc = gk[kx * 3 + ky];
                    for (std::size_t x = x0; x < x1; ++x) {
                        const double* s = src + (x + kx - 1) * d.w;
                        const double* uu = u + x * d.w;
                        for (std::size_t y = y0; y < y1; ++y) acc += uu[y] * s[y + ky - 1];
                    }
                    gk[kx * 3 + ky] = acc;
                }
            }
        }
    }

    const auto ijobs = static_cast<std::int64_t>(d.batch * d.c_in);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < ijobs; ++job) {
        const std::size_t b = static_cast<std::size_t>(job) / d.c_in;
        const std::size_t i = static_cast<std::size_t>(job) % d.c_in;
        double* gi = GI + (b * d.c_in + i) * plane;
        for (std::size_t o = 0; o < d.c_out; ++o) {
            const double* u = up + (b * d.c_out + o) * plane;
            const double* k = K + (o * d.c_in + i) * 9;
            for (std::size_t kx = 0; kx < 3; ++kx) {
                std::size_t x0, x1;
                tap_range(kx, d.h, x0, x1);
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    std::size_t y0, y1;
                    tap_range(ky, d.w, y0, y1);
                    const double wgt = k[kx * 3 + ky];
                    // gi[x+kx-1, y+ky-1] += u[x,y] * wgt over valid (x,y)
                    for (std::size_t x = x0; x < x1; ++x) {
                        double* t = gi + (x + kx - 1) * d.w;
                        const double* uu = u + x * d.w;
                        for (std::size_t y = y0; y < y1; ++y) t[y + ky - 1] += uu[y] * wgt;
                    }
                }
            }
        }
    }
    return g;
}

Tensor conv2d_summands(const Tensor& upstream, const Tensor& input) {
    detail::require_rank(upstream, 4, "conv2d_summands upstream");
    detail::require_rank(input, 4, "conv2d_summands input");
    if (upstream.dim(0) != input.dim(0) || upstream.dim(2) != input.dim(2) || upstream.dim(3) != input.dim(3))
        throw DimensionError("conv2d_summands: upstream " + shape_string(upstream.shape()) + " and input " +
                             shape_string(input.shape()) + " disagree");
    const std::size_t nb = input.dim(0), ci = input.dim(1), co = upstream.dim(1);
    const std::size_t h = input.dim(2), w = input.dim(3), plane = h * w;
    Tensor d({co, ci, 3, 3, nb, h, w});
    const double* up = upstream.data().data();
    const double* in = input.data().data();
    double* D = d.data().data();

    const auto jobs = static_cast<std::int64_t>(co * ci);
#pragma omp parallel for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const std::size_t o = static_cast<std::size_t>(job) / ci;
        const std::size_t i = static_cast<std::size_t>(job) % ci;
        for (std::size_t kx = 0; kx < 3; ++kx) {
            std::size_t x0, x1;
            tap_range(kx, h, x0, x1);
            for (std::size_t ky = 0; ky < 3; ++ky) {
                std::size_t y0, y1;
                tap_range(ky, w, y0, y1);
                double* dst = D + ((((o * ci + i) * 3 + kx) * 3 + ky) * nb) * plane;
                for (std::size_t b = 0; b < nb; ++b) {
                    const double* u = up + (b * co + o) * plane;
                    const double* src = in + (b * ci + i) * plane;
                    for (std::size_t x = x0; x < x1; ++x)
                        for (std::size_t y = y0; y < y1; ++y)
                            dst[b * plane + x * w + y] = u[x * w + y] * src[(x + kx - 1) * w + (y + ky - 1)];
                }
            }
        }
    }
    return d;
}

Tensor gram(const Tensor& x) {
    detail::require_rank(x, 2, "gram");
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor g({n, n});
    const double* X = x.data().data();
    double* G = g.data().data();
    const auto jobs = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < jobs; ++p) {
        double* row = G + p * n;
        for (std::size_t k = 0; k < m; ++k) {
            const double xkp = X[k * n + p];
            const double* xr = X + k * n;
            for (std::size_t q = 0; q < n; ++q) row[q] += xkp * xr[q];
        }
    }
    return g;
}

}  // namespace kernels
}  // namespace bnlab
