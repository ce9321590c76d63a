#include "ldg/hsi/patch.hpp"

#include <stdexcept>
#include <string>

namespace ldg::hsi {

std::size_t reflect_index(std::int64_t i, std::size_t n) {
    if (n == 1) return 0;
    const auto period = static_cast<std::int64_t>(2 * (n - 1));
    std::int64_t m = i % period;
    if (m < 0) m += period;
    if (m >= static_cast<std::int64_t>(n)) m = period - m;
    return static_cast<std::size_t>(m);
}

void extract_window(const HsiCube& cube, std::size_t row, std::size_t col, std::size_t s, std::span<double> out) {
    if (s % 2 == 0) throw std::invalid_argument("patch size must be odd, got " + std::to_string(s));
    if (row >= cube.height() || col >= cube.width()) {
        throw std::invalid_argument("patch center (" + std::to_string(row) + "," + std::to_string(col) +
                                    ") outside the raster");
    }
    if (out.size() != s * s * cube.bands()) throw std::invalid_argument("patch buffer has the wrong size");
    const auto half = static_cast<std::int64_t>(s / 2);
    std::vector<std::size_t> rows(s), cols(s);
    for (std::size_t k = 0; k < s; ++k) {
        rows[k] = reflect_index(static_cast<std::int64_t>(row) - half + static_cast<std::int64_t>(k), cube.height());
        cols[k] = reflect_index(static_cast<std::int64_t>(col) - half + static_cast<std::int64_t>(k), cube.width());
    }
    std::size_t q = 0;
    for (std::size_t b = 0; b < cube.bands(); ++b)
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = 0; j < s; ++j) out[q++] = cube.at(rows[i], cols[j], b);
}

Patch extract_patch(const HsiCube& cube, std::size_t row, std::size_t col, std::size_t s) {
    Patch p;
    p.size = s;
    p.bands = cube.bands();
    p.values.resize(s * s * cube.bands());
    extract_window(cube, row, col, s, p.values);
    return p;
}

Patch extract_patch(const Scene& scene, std::size_t row, std::size_t col, std::size_t s) {
    Patch p = extract_patch(scene.cube, row, col, s);
    p.label = scene.labels.at(row, col);
    if (p.label == 0) throw std::invalid_argument("patch center is unlabeled");
    return p;
}

AugmentDraws draw_augmentation(Rng& rng, std::size_t value_count) {
    AugmentDraws d;
    d.flip_horizontal = rng.bernoulli(0.5);
    d.flip_vertical = rng.bernoulli(0.5);
    d.gain = rng.uniform(1.0 - kAugmentGainSpread, 1.0 + kAugmentGainSpread);
    d.noise.resize(value_count);
    for (auto& n : d.noise) n = rng.uniform(-kAugmentNoise, kAugmentNoise);
    return d;
}

Patch apply_augmentation(const Patch& patch, const AugmentDraws& draws) {
    if (!draws.noise.empty() && draws.noise.size() != patch.values.size()) {
        throw std::invalid_argument("augmentation noise length does not match patch");
    }
    Patch out = patch;
    const std::size_t s = patch.size;
    std::size_t q = 0;
    for (std::size_t b = 0; b < patch.bands; ++b)
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = 0; j < s; ++j, ++q) {
                const std::size_t si = draws.flip_vertical ? s - 1 - i : i;
                const std::size_t sj = draws.flip_horizontal ? s - 1 - j : j;
                const double noise = draws.noise.empty() ? 0.0 : draws.noise[q];
                out.values[q] = patch.at(b, si, sj) * draws.gain + noise;
            }
    return out;
}

Patch augment_patch(const Patch& patch, Rng& rng) {
    return apply_augmentation(patch, draw_augmentation(rng, patch.values.size()));
}

}  // namespace ldg::hsi
