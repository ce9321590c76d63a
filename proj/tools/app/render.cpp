#include "ldg/app/render.hpp"

#include <stdexcept>

#include "json.hpp"

namespace ldg::app {

std::string render_map(const hsi::LabelRaster& ids, const Palette& palette) {
    std::string out = "P6\n" + std::to_string(ids.width()) + " " + std::to_string(ids.height()) + "\n255\n";
    out.reserve(out.size() + 3 * ids.ids().size());
    for (const auto id : ids.ids()) {
        Rgb c{0, 0, 0};
        if (id != 0) {
            const auto it = palette.find(id);
            if (it == palette.end()) throw std::invalid_argument("palette has no color for class id " + std::to_string(id));
            c = it->second;
        }
        out.append(reinterpret_cast<const char*>(c.data()), 3);
    }
    return out;
}

Palette parse_palette(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("palette must be a JSON object of id -> [r, g, b]");
    Palette p;
    for (const auto& [key, value] : j.items()) {
        std::size_t used = 0;
        unsigned long id = 0;
        try {
            id = std::stoul(key, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != key.size() || id == 0 || id > 65535) throw std::invalid_argument("palette key '" + key + "' is not a class id");
        if (!value.is_array() || value.size() != 3) throw std::invalid_argument("palette entry " + key + " needs three channels");
        Rgb c{};
        for (std::size_t k = 0; k < 3; ++k) {
            if (!value[k].is_number_unsigned() || value[k].get<unsigned>() > 255) {
                throw std::invalid_argument("palette entry " + key + " has a channel outside 0..255");
            }
            c[k] = static_cast<std::uint8_t>(value[k].get<unsigned>());
        }
        p[static_cast<std::uint16_t>(id)] = c;
    }
    return p;
}

std::string palette_to_json(const Palette& palette) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [id, c] : palette) j[std::to_string(id)] = {c[0], c[1], c[2]};
    return j.dump(2) + "\n";
}

Palette default_palette(std::size_t classes) {
    static constexpr Rgb base[] = {{230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
                                   {245, 130, 48}, {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
                                   {210, 245, 60}, {250, 190, 212}, {0, 128, 128},  {170, 110, 40}};
    constexpr std::size_t n = sizeof base / sizeof base[0];
    Palette p;
    for (std::size_t k = 0; k < classes; ++k) {
        Rgb c = base[k % n];
        // Darken on wrap so repeated hues stay distinguishable.
        for (auto& ch : c) ch = static_cast<std::uint8_t>(ch >> (k / n));
        p[static_cast<std::uint16_t>(k + 1)] = c;
    }
    return p;
}

}  // namespace ldg::app
