#pragma once

#include <string>

#include "ldg/hsi/cube.hpp"
#include "ldg/model/image_encoder.hpp"

namespace ldg::app {

/// CSV, one row per labeled pixel: row, col, label, then the unit-norm semantic feature.
std::string export_features(model::ImageEncoder& image, const hsi::HsiCube& cube, const hsi::LabelRaster& labels,
                            std::size_t batch = 256);

}  // namespace ldg::app
