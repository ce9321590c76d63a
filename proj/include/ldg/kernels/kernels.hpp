#pragma once

// Hot loops behind the conv3d / matmul primitives.
//
// Each kernel exists twice: `serial` is the reference, `parallel` splits the
// outermost independent loop across OpenMP threads. Every output element is
// accumulated in the same sequential order in both, so the two agree bit for
// bit at any thread count.

#include <array>
#include <cstddef>
#include <span>

namespace ldg::kernels {

struct Conv3dGeometry {
    std::size_t batch = 1;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::array<std::size_t, 3> in{};      // depth, height, width
    std::array<std::size_t, 3> kernel{};  // kd, kh, kw
    std::array<std::size_t, 3> stride{1, 1, 1};
    std::array<std::size_t, 3> padding{0, 0, 0};

    /// Throws std::invalid_argument when the window does not fit.
    std::array<std::size_t, 3> out() const;
    std::size_t in_volume() const { return in[0] * in[1] * in[2]; }
    std::size_t out_volume() const;
    std::size_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
};

// x: [batch, cin, D, H, W]; weight: [cout, cin, kd, kh, kw]; bias: [cout] or empty.
namespace serial {
void conv3d_forward(const Conv3dGeometry& g, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y);
void conv3d_backward_input(const Conv3dGeometry& g, std::span<const double> dy,
                           std::span<const double> weight, std::span<double> dx);
void conv3d_backward_weight(const Conv3dGeometry& g, std::span<const double> x, std::span<const double> dy,
                            std::span<double> dweight, std::span<double> dbias);
/// c[m,n] = sum_k a[m,k] * b[k,n]  (overwrites c)
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
            std::span<const double> b, std::span<double> c);
/// c[m,n] = sum_k a[m,k] * b[n,k]  (overwrites c)
void matmul_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
               std::span<const double> b, std::span<double> c);
/// c[k,n] += sum_m a[m,k] * b[m,n]
void matmul_tn_acc(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                   std::span<const double> b, std::span<double> c);
}  // namespace serial

namespace parallel {
void conv3d_forward(const Conv3dGeometry& g, std::span<const double> x, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> y);
void conv3d_backward_input(const Conv3dGeometry& g, std::span<const double> dy,
                           std::span<const double> weight, std::span<double> dx);
void conv3d_backward_weight(const Conv3dGeometry& g, std::span<const double> x, std::span<const double> dy,
                            std::span<double> dweight, std::span<double> dbias);
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
            std::span<const double> b, std::span<double> c);
void matmul_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
               std::span<const double> b, std::span<double> c);
void matmul_tn_acc(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
                   std::span<const double> b, std::span<double> c);
}  // namespace parallel

/// True when the parallel namespace was compiled with OpenMP.
bool openmp_enabled();

/// Fixed-order dot product (four interleaved partial sums, combined pairwise).
double dot(const double* a, const double* b, std::size_t n);

}  // namespace ldg::kernels
