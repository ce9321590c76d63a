#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ldg/model/params.hpp"
#include "ldg/nd/ops.hpp"

namespace ldg::model {

struct ImageEncoderConfig {
    std::size_t patch = 13;
    std::size_t bands = 48;
    std::array<std::size_t, 2> widths{8, 16};
    std::size_t kernel = 3;
    std::size_t d_sem = 64;
    std::size_t classes = 7;
    /// Inputs are band-wise min-max scaled per scene before patch extraction.
    bool normalize = true;

    /// Throws std::invalid_argument for even patch/kernel, empty widths, d_sem < 2,
    /// or a patch/band extent that the two pooling stages would exhaust.
    void validate() const;
    /// [depth(bands), height, width] after both pooling stages.
    std::array<std::size_t, 3> pooled_extent() const;
    std::size_t flat_features() const;
};

/// Conv3d -> BatchNorm3d -> ReLU.
struct ConvBnRelu {
    Tensor weight, bias, gamma, beta;
    nd::BatchNormState bn;

    static ConvBnRelu make(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);
    Tensor forward(const Tensor& x, bool training);
};

/// out = relu(conv3(cbr2(cbr1(x))) + cbr1(x)).
struct ResidualBlock {
    ConvBnRelu cbr1, cbr2;
    Tensor conv3_weight, conv3_bias;

    static ResidualBlock make(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);
    Tensor forward(const Tensor& x, bool training);
};

struct ImageOutput {
    Tensor logits;   // [N, C]
    Tensor probs;    // [N, C]
    Tensor feature;  // [N, d_sem], unit rows; undefined when the projection head is skipped
};

class ImageEncoder {
public:
    ImageEncoder() = default;
    ImageEncoder(const ImageEncoderConfig& config, std::uint64_t seed);

    const ImageEncoderConfig& config() const noexcept { return config_; }

    /// x: [N, 1, bands, patch, patch]. Training mode uses batch statistics in BatchNorm.
    ImageOutput forward(const Tensor& x, bool training, bool with_projection = true);
    /// Flattened output of the final convolution, [N, flat_features].
    Tensor embed(const Tensor& x, bool training);

    /// Trainable tensors under "img." names, in a fixed order.
    ParamList parameters() const;
    /// Parameters plus BatchNorm running statistics, ready for serialization.
    ParamList state() const;
    /// Overwrites values from `state` entries (names as produced by state()).
    void load_state(const ParamList& state);

    std::vector<ResidualBlock>& blocks() { return blocks_; }
    Tensor& final_weight() { return final_weight_; }

private:
    ImageEncoderConfig config_;
    std::vector<ResidualBlock> blocks_;
    Tensor final_weight_, final_bias_;
    Tensor cls_weight_, cls_bias_;
    Tensor proj_weight_, proj_bias_;
};

/// Packs the (patch, bands) batch into a [N, 1, bands, patch, patch] tensor.
Tensor patches_to_tensor(const std::vector<const std::vector<double>*>& patches, std::size_t bands, std::size_t patch);

}  // namespace ldg::model
