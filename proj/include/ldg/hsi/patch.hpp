#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ldg/hsi/cube.hpp"
#include "ldg/util/rng.hpp"

namespace ldg::hsi {

/// s x s x d window around one pixel, laid out (band, row, col) so it feeds a
/// [1, d, s, s] convolution input directly.
struct Patch {
    std::size_t size = 0;
    std::size_t bands = 0;
    std::vector<double> values;
    std::uint16_t label = 0;

    double at(std::size_t band, std::size_t row, std::size_t col) const {
        return values[(band * size + row) * size + col];
    }
};

/// Mirror index for a coordinate that may fall outside [0, n): -1 -> 1, n -> n-2.
std::size_t reflect_index(std::int64_t i, std::size_t n);

/// Writes the window centred at (row, col) into `out` (size s*s*d), reflecting at borders.
void extract_window(const HsiCube& cube, std::size_t row, std::size_t col, std::size_t s, std::span<double> out);

/// Patch around a pixel; throws std::invalid_argument for even `s` or a center outside the raster.
Patch extract_patch(const HsiCube& cube, std::size_t row, std::size_t col, std::size_t s);
/// As above, carrying the center label; the center must be labeled.
Patch extract_patch(const Scene& scene, std::size_t row, std::size_t col, std::size_t s);

struct AugmentDraws {
    bool flip_horizontal = false;
    bool flip_vertical = false;
    double gain = 1.0;
    std::vector<double> noise;  // one per value; empty means zero noise
};

inline constexpr double kAugmentGainSpread = 0.1;
inline constexpr double kAugmentNoise = 0.02;

/// Flip each axis with probability 1/2, gain in [0.9, 1.1], noise in [-0.02, 0.02].
AugmentDraws draw_augmentation(Rng& rng, std::size_t value_count);
Patch apply_augmentation(const Patch& patch, const AugmentDraws& draws);
Patch augment_patch(const Patch& patch, Rng& rng);

}  // namespace ldg::hsi
