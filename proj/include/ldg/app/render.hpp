#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include "ldg/hsi/cube.hpp"

namespace ldg::app {

using Rgb = std::array<std::uint8_t, 3>;
using Palette = std::map<std::uint16_t, Rgb>;

/// Binary PPM: "P6\n{W} {H}\n255\n" then row-major RGB triples. Id 0 is black;
/// any other id missing from the palette throws std::invalid_argument.
std::string render_map(const hsi::LabelRaster& ids, const Palette& palette);

/// {"1": [r, g, b], "2": [...], ...}
Palette parse_palette(const std::string& json);
std::string palette_to_json(const Palette& palette);
/// Fixed, well-separated colors for ids 1..classes.
Palette default_palette(std::size_t classes);

}  // namespace ldg::app
