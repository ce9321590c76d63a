#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ldg/nd/tensor.hpp"

namespace ldg::nd {

// Layernorm / batchnorm variance floor.
inline constexpr double kNormEpsilon = 1e-5;

// Elementwise. `b` may equal `a` in shape, hold a single value, or match a
// trailing suffix of `a`'s shape (broadcast over the leading axes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);

// Linear algebra on rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// x: [..., in]; weight: [in, out]; bias: [out] (may be undefined).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct Conv3dAttrs {
    std::array<std::size_t, 3> stride{1, 1, 1};
    std::array<std::size_t, 3> padding{0, 0, 0};
};

/// x: [N, Cin, D, H, W]; weight: [Cout, Cin, kd, kh, kw]; bias: [Cout] or undefined.
Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv3dAttrs& attrs = {});

struct Pool3dAttrs {
    std::array<std::size_t, 3> kernel{2, 2, 2};
    std::array<std::size_t, 3> stride{2, 2, 2};
};

/// Max over each window; ties go to the lowest flat index.
Tensor maxpool3d(const Tensor& x, const Pool3dAttrs& attrs = {});

struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

/// Per-channel normalization of [N, C, D, H, W]. Training mode normalizes with
/// batch statistics and updates `state`; eval mode uses the running statistics.
Tensor batchnorm3d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                   bool training);

// Last-axis reductions and normalizations.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta);
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
/// log(sum(exp(x))) over the last axis, restricted to entries whose `mask`
/// byte is nonzero (empty mask = all entries). Output drops the last axis.
Tensor logsumexp(const Tensor& x, std::span<const std::uint8_t> mask = {});
Tensor l2_normalize(const Tensor& x);

/// Rows of `table` ([rows, width]) picked by `ids`, giving [ids.size(), width].
Tensor embedding(const Tensor& table, std::span<const std::size_t> ids);

struct AttentionAttrs {
    std::size_t heads = 1;
    bool causal = false;
    /// One byte per key position; zero marks a padded key that no query may see.
    std::vector<std::uint8_t> key_mask;
};

/// Scaled dot-product attention over one sequence: q, k, v are [L, width],
/// split into `heads` contiguous slices of the width axis.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionAttrs& attrs);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Generic entry point over the primitive set; attributes unused by a kind are ignored.
struct PrimitiveAttrs {
    Conv3dAttrs conv;
    Pool3dAttrs pool;
    AttentionAttrs attention;
    BatchNormState* batchnorm = nullptr;
    bool training = true;
    double factor = 1.0;
    std::size_t axis = 0;
    Shape shape;
    std::vector<std::size_t> ids;
    std::vector<std::uint8_t> mask;
};

Tensor eval_primitive(OpKind kind, std::span<const Tensor> inputs, const PrimitiveAttrs& attrs = {});

}  // namespace ldg::nd
