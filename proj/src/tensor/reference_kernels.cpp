// Serial reference kernels. Straightforward loops, one output element at a
// time, in the accumulation order the parallel kernels must reproduce.

#include "bnlab/kernels.hpp"
#include "kernel_checks.hpp"

namespace bnlab::reference {

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto d = detail::check_matmul(a, b);
    Tensor c({d.m, d.n});
    for (std::size_t i = 0; i < d.m; ++i)
        for (std::size_t j = 0; j < d.n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < d.k; ++p) acc += a[i * d.k + p] * b[p * d.n + j];
            c[i * d.n + j] = acc;
        }
    return c;
}

Tensor matmul_at_b(const Tensor& a, const Tensor& b) {
    const auto d = detail::check_matmul_at_b(a, b);
    Tensor c({d.m, d.n});
    for (std::size_t i = 0; i < d.m; ++i)
        for (std::size_t j = 0; j < d.n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < d.k; ++p) acc += a[p * d.m + i] * b[p * d.n + j];
            c[i * d.n + j] = acc;
        }
    return c;
}

Tensor matmul_a_bt(const Tensor& a, const Tensor& b) {
    const auto d = detail::check_matmul_a_bt(a, b);
    Tensor c({d.m, d.n});
    for (std::size_t i = 0; i < d.m; ++i)
        for (std::size_t j = 0; j < d.n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < d.k; ++p) acc += a[i * d.k + p] * b[j * d.k + p];
            c[i * d.n + j] = acc;
        }
    return c;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel) {
    const auto d = detail::check_conv(input, kernel);
    Tensor out({d.batch, d.c_out, d.h, d.w});
    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t o = 0; o < d.c_out; ++o)
            for (std::size_t x = 0; x < d.h; ++x)
                for (std::size_t y = 0; y < d.w; ++y) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < d.c_in; ++c)
                        for (std::size_t kx = 0; kx < 3; ++kx)
                            for (std::size_t ky = 0; ky < 3; ++ky) {
                                const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
                                const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                                if (sx < 0 || sy < 0 || sx >= static_cast<std::ptrdiff_t>(d.h) ||
                                    sy >= static_cast<std::ptrdiff_t>(d.w))
                                    continue;
                                acc += input.at({b, c, static_cast<std::size_t>(sx), static_cast<std::size_t>(sy)}) *
                                       kernel.at({o, c, kx, ky});
                            }
                    out.at({b, o, x, y}) = acc;
                }
    return out;
}

ConvGrads conv2d_backward(const Tensor& upstream, const Tensor& input, const Tensor& kernel) {
    const auto d = detail::check_conv_backward(upstream, input, kernel);
    const auto h = static_cast<std::ptrdiff_t>(d.h);
    const auto w = static_cast<std::ptrdiff_t>(d.w);
    ConvGrads g{Tensor(input.shape()), Tensor(kernel.shape())};

    for (std::size_t o = 0; o < d.c_out; ++o)
        for (std::size_t i = 0; i < d.c_in; ++i)
            for (std::size_t kx = 0; kx < 3; ++kx)
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    double acc = 0.0;
                    for (std::size_t b = 0; b < d.batch; ++b)
                        for (std::ptrdiff_t x = 0; x < h; ++x)
                            for (std::ptrdiff_t y = 0; y < w; ++y) {
                                const std::ptrdiff_t sx = x + static_cast<std::ptrdiff_t>(kx) - 1;
                                const std::ptrdiff_t sy = y + static_cast<std::ptrdiff_t>(ky) - 1;
                                if (sx < 0 || sy < 0 || sx >= h || sy >= w) continue;
                                acc += upstream.at({b, o, static_cast<std::size_t>(x), static_cast<std::size_t>(y)}) *
                                       input.at({b, i, static_cast<std::size_t>(sx), static_cast<std::size_t>(sy)});
                            }
                    g.grad_kernel.at({o, i, kx, ky}) = acc;
                }

    for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t i = 0; i < d.c_in; ++i)
            for (std::ptrdiff_t X = 0; X < h; ++X)
                for (std::ptrdiff_t Y = 0; Y < w; ++Y) {
                    double acc = 0.0;
                    for (std::size_t o = 0; o < d.c_out; ++o)
                        for (std::size_t kx = 0; kx < 3; ++kx)
                            for (std::size_t ky = 0; ky < 3; ++ky) {
                                const std::ptrdiff_t x = X - static_cast<std::ptrdiff_t>(kx) + 1;
                                const std::ptrdiff_t y = Y - static_cast<std::ptrdiff_t>(ky) + 1;
                                if (x < 0 || y < 0 || x >= h || y >= w) continue;
                                acc += upstream.at({b, o, static_cast<std::size_t>(x), static_cast<std::size_t>(y)}) *
                                       kernel.at({o, i, kx, ky});
                            }
                    g.grad_input.at({b, i, static_cast<std::size_t>(X), static_cast<std::size_t>(Y)}) = acc;
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
    const auto h = static_cast<std::ptrdiff_t>(input.dim(2));
    const auto w = static_cast<std::ptrdiff_t>(input.dim(3));
    Tensor d({co, ci, 3, 3, nb, input.dim(2), input.dim(3)});
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t i = 0; i < ci; ++i)
            for (std::size_t kx = 0; kx < 3; ++kx)
                for (std::size_t ky = 0; ky < 3; ++ky)
                    for (std::size_t b = 0; b < nb; ++b)
                        for (std::ptrdiff_t x = 0; x < h; ++x)
                            for (std::ptrdiff_t y = 0; y < w; ++y) {
                                const std::ptrdiff_t sx = x + static_cast<std::ptrdiff_t>(kx) - 1;
                                const std::ptrdiff_t sy = y + static_cast<std::ptrdiff_t>(ky) - 1;
                                if (sx < 0 || sy < 0 || sx >= h || sy >= w) continue;
                                const auto ux = static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
                                d.at({o, i, kx, ky, b, ux, uy}) =
                                    upstream.at({b, o, ux, uy}) *
                                    input.at({b, i, static_cast<std::size_t>(sx), static_cast<std::size_t>(sy)});
                            }
    return d;
}

Tensor gram(const Tensor& x) {
    detail::require_rank(x, 2, "gram");
    const std::size_t m = x.dim(0), n = x.dim(1);
    Tensor g({n, n});
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) acc += x[k * n + p] * x[k * n + q];
            g[p * n + q] = acc;
        }
    return g;
}

}  // namespace bnlab::reference
