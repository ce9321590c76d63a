#include "ldg/kernels/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ldg::kernels {

std::array<std::size_t, 3> Conv3dGeometry::out() const {
    std::array<std::size_t, 3> o{};
    for (int a = 0; a < 3; ++a) {
        if (stride[a] == 0 || kernel[a] == 0) throw std::invalid_argument("conv3d: zero stride or kernel");
        const std::size_t padded = in[a] + 2 * padding[a];
        if (padded < kernel[a]) {
            throw std::invalid_argument("conv3d: kernel extent " + std::to_string(kernel[a]) +
                                        " exceeds padded input " + std::to_string(padded));
        }
        o[a] = (padded - kernel[a]) / stride[a] + 1;
    }
    return o;
}

std::size_t Conv3dGeometry::out_volume() const {
    auto o = out();
    return o[0] * o[1] * o[2];
}

double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

bool openmp_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

namespace {

// Output columns ow whose input column ow*stride + k - pad falls inside [0, n).
std::pair<std::size_t, std::size_t> valid_range(std::size_t k, std::size_t pad, std::size_t stride, std::size_t n,
                                                 std::size_t out) {
    const std::size_t lo = pad > k ? (pad - k + stride - 1) / stride : 0;
    if (n + pad <= k) return {0, 0};
    const std::size_t hi = std::min(out, (n - 1 + pad - k) / stride + 1);
    return {std::min(lo, hi), hi};
}

// Column matrix for one sample: rows = (ci, kd, kh, kw), cols = output voxels.
void im2col(const Conv3dGeometry& g, const double* x, double* col) {
    const auto o = g.out();
    const std::size_t P = o[0] * o[1] * o[2];
    const auto [D, H, W] = g.in;
    const std::size_t sw = g.stride[2];
    std::size_t r = 0;
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        const double* xc = x + ci * D * H * W;
        for (std::size_t a = 0; a < g.kernel[0]; ++a)
            for (std::size_t b = 0; b < g.kernel[1]; ++b)
                for (std::size_t c = 0; c < g.kernel[2]; ++c, ++r) {
                    double* row = col + r * P;
                    const auto [lo, hi] = valid_range(c, g.padding[2], sw, W, o[2]);
                    for (std::size_t od = 0; od < o[0]; ++od) {
                        const auto id = static_cast<std::int64_t>(od * g.stride[0] + a) -
                                        static_cast<std::int64_t>(g.padding[0]);
                        for (std::size_t oh = 0; oh < o[1]; ++oh) {
                            double* dst = row + (od * o[1] + oh) * o[2];
                            const auto ih = static_cast<std::int64_t>(oh * g.stride[1] + b) -
                                            static_cast<std::int64_t>(g.padding[1]);
                            const bool inside = id >= 0 && id < static_cast<std::int64_t>(D) && ih >= 0 &&
                                                ih < static_cast<std::int64_t>(H);
                            if (!inside || lo == hi) {
                                std::fill(dst, dst + o[2], 0.0);
                                continue;
                            }
                            const double* src = xc + (static_cast<std::size_t>(id) * H + static_cast<std::size_t>(ih)) * W;
                            std::fill(dst, dst + lo, 0.0);
                            for (std::size_t ow = lo; ow < hi; ++ow) dst[ow] = src[ow * sw + c - g.padding[2]];
                            std::fill(dst + hi, dst + o[2], 0.0);
                        }
                    }
                }
    }
}

void col2im_acc(const Conv3dGeometry& g, const double* col, double* dx) {
    const auto o = g.out();
    const std::size_t P = o[0] * o[1] * o[2];
    const auto [D, H, W] = g.in;
    const std::size_t sw = g.stride[2];
    std::size_t r = 0;
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        double* xc = dx + ci * D * H * W;
        for (std::size_t a = 0; a < g.kernel[0]; ++a)
            for (std::size_t b = 0; b < g.kernel[1]; ++b)
                for (std::size_t c = 0; c < g.kernel[2]; ++c, ++r) {
                    const double* row = col + r * P;
                    const auto [lo, hi] = valid_range(c, g.padding[2], sw, W, o[2]);
                    if (lo == hi) continue;
                    for (std::size_t od = 0; od < o[0]; ++od) {
                        const auto id = static_cast<std::int64_t>(od * g.stride[0] + a) -
                                        static_cast<std::int64_t>(g.padding[0]);
                        if (id < 0 || id >= static_cast<std::int64_t>(D)) continue;
                        for (std::size_t oh = 0; oh < o[1]; ++oh) {
                            const auto ih = static_cast<std::int64_t>(oh * g.stride[1] + b) -
                                            static_cast<std::int64_t>(g.padding[1]);
                            if (ih < 0 || ih >= static_cast<std::int64_t>(H)) continue;
                            const double* src = row + (od * o[1] + oh) * o[2];
                            double* dst = xc + (static_cast<std::size_t>(id) * H + static_cast<std::size_t>(ih)) * W;
                            for (std::size_t ow = lo; ow < hi; ++ow) dst[ow * sw + c - g.padding[2]] += src[ow];
                        }
                    }
                }
    }
}

template <bool Par>
void conv_forward_impl(const Conv3dGeometry& g, std::span<const double> x, std::span<const double> w,
                       std::span<const double> bias, std::span<double> y) {
    const std::size_t P = g.out_volume();
    const std::size_t R = g.in_channels * g.kernel_volume();
    const std::size_t in_stride = g.in_channels * g.in_volume();
    const std::size_t out_stride = g.out_channels * P;
    const auto batch = static_cast<std::int64_t>(g.batch);
#pragma omp parallel if (Par)
    {
        std::vector<double> col(R * P);
#pragma omp for schedule(static)
        for (std::int64_t n = 0; n < batch; ++n) {
            im2col(g, x.data() + n * in_stride, col.data());
            double* yn = y.data() + n * out_stride;
            for (std::size_t co = 0; co < g.out_channels; ++co) {
                double* yrow = yn + co * P;
                const double b0 = bias.empty() ? 0.0 : bias[co];
                std::fill(yrow, yrow + P, b0);
                const double* wrow = w.data() + co * R;
                for (std::size_t r = 0; r < R; ++r) {
                    const double wv = wrow[r];
                    const double* crow = col.data() + r * P;
                    for (std::size_t p = 0; p < P; ++p) yrow[p] += wv * crow[p];
                }
            }
        }
    }
}

template <bool Par>
void conv_backward_input_impl(const Conv3dGeometry& g, std::span<const double> dy, std::span<const double> w,
                              std::span<double> dx) {
    const std::size_t P = g.out_volume();
    const std::size_t R = g.in_channels * g.kernel_volume();
    const std::size_t in_stride = g.in_channels * g.in_volume();
    const std::size_t out_stride = g.out_channels * P;
    const auto batch = static_cast<std::int64_t>(g.batch);
#pragma omp parallel if (Par)
    {
        std::vector<double> dcol(R * P);
#pragma omp for schedule(static)
        for (std::int64_t n = 0; n < batch; ++n) {
            std::fill(dcol.begin(), dcol.end(), 0.0);
            const double* dyn = dy.data() + n * out_stride;
            for (std::size_t co = 0; co < g.out_channels; ++co) {
                const double* dyrow = dyn + co * P;
                const double* wrow = w.data() + co * R;
                for (std::size_t r = 0; r < R; ++r) {
                    const double wv = wrow[r];
                    double* drow = dcol.data() + r * P;
                    for (std::size_t p = 0; p < P; ++p) drow[p] += wv * dyrow[p];
                }
            }
            col2im_acc(g, dcol.data(), dx.data() + n * in_stride);
        }
    }
}

template <bool Par>
void conv_backward_weight_impl(const Conv3dGeometry& g, std::span<const double> x, std::span<const double> dy,
                               std::span<double> dw, std::span<double> db) {
    const std::size_t P = g.out_volume();
    const std::size_t R = g.in_channels * g.kernel_volume();
    const std::size_t in_stride = g.in_channels * g.in_volume();
    const std::size_t out_stride = g.out_channels * P;
    const std::size_t wsize = g.out_channels * R;
    const auto batch = static_cast<std::int64_t>(g.batch);
    // Per-sample partials, then a sequential sum over the batch.
    std::vector<double> part_w(g.batch * wsize);
    std::vector<double> part_b(g.batch * g.out_channels);
#pragma omp parallel if (Par)
    {
        std::vector<double> col(R * P);
#pragma omp for schedule(static)
        for (std::int64_t n = 0; n < batch; ++n) {
            im2col(g, x.data() + n * in_stride, col.data());
            const double* dyn = dy.data() + n * out_stride;
            double* pw = part_w.data() + n * wsize;
            double* pb = part_b.data() + n * g.out_channels;
            for (std::size_t co = 0; co < g.out_channels; ++co) {
                const double* dyrow = dyn + co * P;
                for (std::size_t r = 0; r < R; ++r) pw[co * R + r] = dot(dyrow, col.data() + r * P, P);
                double s = 0.0;
                for (std::size_t p = 0; p < P; ++p) s += dyrow[p];
                pb[co] = s;
            }
        }
    }
    for (std::size_t n = 0; n < g.batch; ++n) {
        const double* pw = part_w.data() + n * wsize;
        for (std::size_t i = 0; i < wsize; ++i) dw[i] += pw[i];
        if (!db.empty()) {
            const double* pb = part_b.data() + n * g.out_channels;
            for (std::size_t co = 0; co < g.out_channels; ++co) db[co] += pb[co];
        }
    }
}

template <bool Par>
void matmul_impl(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                 std::span<const double> b, std::span<double> c) {
    const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for if (Par) schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) {
        double* crow = c.data() + i * n;
        std::fill(crow, crow + n, 0.0);
        const double* arow = a.data() + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = b.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <bool Par>
void matmul_nt_impl(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                    std::span<const double> b, std::span<double> c) {
    const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for if (Par) schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) {
        const double* arow = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot(arow, b.data() + j * k, k);
    }
}

template <bool Par>
void matmul_tn_acc_impl(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                        std::span<const double> b, std::span<double> c) {
    const auto cols = static_cast<std::int64_t>(k);
#pragma omp parallel for if (Par) schedule(static)
    for (std::int64_t kk = 0; kk < cols; ++kk) {
        double* crow = c.data() + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a[i * k + kk];
            const double* brow = b.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

namespace serial {
void conv3d_forward(const Conv3dGeometry& g, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y) {
    conv_forward_impl<false>(g, x, weight, bias, y);
}
void conv3d_backward_input(const Conv3dGeometry& g, std::span<const double> dy, std::span<const double> weight,
                           std::span<double> dx) {
    conv_backward_input_impl<false>(g, dy, weight, dx);
}
void conv3d_backward_weight(const Conv3dGeometry& g, std::span<const double> x, std::span<const double> dy,
                            std::span<double> dweight, std::span<double> dbias) {
    conv_backward_weight_impl<false>(g, x, dy, dweight, dbias);
}
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
            std::span<double> c) {
    matmul_impl<false>(m, k, n, a, b, c);
}
void matmul_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
               std::span<double> c) {
    matmul_nt_impl<false>(m, k, n, a, b, c);
}
void matmul_tn_acc(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                   std::span<const double> b, std::span<double> c) {
    matmul_tn_acc_impl<false>(m, k, n, a, b, c);
}
}  // namespace serial

namespace parallel {
void conv3d_forward(const Conv3dGeometry& g, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y) {
    conv_forward_impl<true>(g, x, weight, bias, y);
}
void conv3d_backward_input(const Conv3dGeometry& g, std::span<const double> dy, std::span<const double> weight,
                           std::span<double> dx) {
    conv_backward_input_impl<true>(g, dy, weight, dx);
}
void conv3d_backward_weight(const Conv3dGeometry& g, std::span<const double> x, std::span<const double> dy,
                            std::span<double> dweight, std::span<double> dbias) {
    conv_backward_weight_impl<true>(g, x, dy, dweight, dbias);
}
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
            std::span<double> c) {
    matmul_impl<true>(m, k, n, a, b, c);
}
void matmul_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
               std::span<double> c) {
    matmul_nt_impl<true>(m, k, n, a, b, c);
}
void matmul_tn_acc(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                   std::span<const double> b, std::span<double> c) {
    matmul_tn_acc_impl<true>(m, k, n, a, b, c);
}
}  // namespace parallel

}  // namespace ldg::kernels
