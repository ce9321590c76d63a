#include "ldg/hsi/split.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "ldg/util/rng.hpp"

namespace ldg::hsi {

std::vector<PixelIndex> labeled_pixels(const LabelRaster& labels) {
    std::vector<PixelIndex> out;
    for (std::size_t r = 0; r < labels.height(); ++r)
        for (std::size_t c = 0; c < labels.width(); ++c)
            if (const auto id = labels.at(r, c); id != 0) {
                out.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c), id});
            }
    return out;
}

TrainValSplit split_train_val(const LabelRaster& labels, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("train fraction must lie strictly between 0 and 1");
    }
    std::map<std::uint16_t, std::vector<PixelIndex>> by_class;
    for (const auto& p : labeled_pixels(labels)) by_class[p.label].push_back(p);

    Rng rng(seed);
    TrainValSplit split;
    for (auto& [id, pixels] : by_class) {
        if (pixels.size() < 2) {
            throw std::invalid_argument("class " + std::to_string(id) + " has fewer than 2 labeled pixels");
        }
        rng.shuffle(pixels);
        const auto n_train = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(pixels.size())));
        split.train.insert(split.train.end(), pixels.begin(), pixels.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.val.insert(split.val.end(), pixels.begin() + static_cast<std::ptrdiff_t>(n_train), pixels.end());
    }
    return split;
}

}  // namespace ldg::hsi
