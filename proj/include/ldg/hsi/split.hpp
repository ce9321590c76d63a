#pragma once

#include <cstdint>
#include <vector>

#include "ldg/hsi/cube.hpp"

namespace ldg::hsi {

/// Labeled pixel coordinate.
struct PixelIndex {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    std::uint16_t label = 0;

    bool operator==(const PixelIndex&) const = default;
};

struct TrainValSplit {
    std::vector<PixelIndex> train;
    std::vector<PixelIndex> val;
};

/// All labeled pixels, row-major.
std::vector<PixelIndex> labeled_pixels(const LabelRaster& labels);

/// Stratified split: class c contributes round(fraction * n_c) pixels to train
/// and the rest to val. Throws if 0 < fraction < 1 fails or a present class has
/// fewer than two pixels.
TrainValSplit split_train_val(const LabelRaster& labels, double fraction, std::uint64_t seed);

}  // namespace ldg::hsi
