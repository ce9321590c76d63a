#include "ldg/app/features.hpp"

#include <cstdio>
#include <stdexcept>

#include "ldg/hsi/patch.hpp"
#include "ldg/hsi/split.hpp"
#include "ldg/train/trainer.hpp"

namespace ldg::app {

std::string export_features(model::ImageEncoder& image, const hsi::HsiCube& cube, const hsi::LabelRaster& labels,
                            std::size_t batch) {
    const auto& ic = image.config();
    if (cube.bands() != ic.bands) {
        throw std::invalid_argument("cube has " + std::to_string(cube.bands()) + " bands, model expects " +
                                    std::to_string(ic.bands));
    }
    if (cube.height() != labels.height() || cube.width() != labels.width()) {
        throw std::invalid_argument("cube and label raster differ in size");
    }
    if (batch == 0) throw std::invalid_argument("batch must be >= 1");
    const auto prepared = train::prepare_cube(cube, ic.normalize);
    const auto pixels = hsi::labeled_pixels(labels);
    const std::size_t s = ic.patch, per = ic.bands * s * s;

    std::string csv = "row,col,label";
    for (std::size_t k = 0; k < ic.d_sem; ++k) csv += ",f" + std::to_string(k);
    csv += "\n";
    nd::NoGradGuard no_grad;
    char buf[32];
    for (std::size_t start = 0; start < pixels.size(); start += batch) {
        const std::size_t m = std::min(batch, pixels.size() - start);
        std::vector<double> x(m * per);
        for (std::size_t i = 0; i < m; ++i) {
            const auto& px = pixels[start + i];
            hsi::extract_window(prepared, px.row, px.col, s, std::span<double>(x.data() + i * per, per));
        }
        const auto res = image.forward(nd::Tensor::from({m, 1, ic.bands, s, s}, std::move(x)), false, true);
        const auto f = res.feature.values();
        for (std::size_t i = 0; i < m; ++i) {
            const auto& px = pixels[start + i];
            csv += std::to_string(px.row) + "," + std::to_string(px.col) + "," + std::to_string(px.label);
            for (std::size_t k = 0; k < ic.d_sem; ++k) {
                std::snprintf(buf, sizeof buf, ",%.9g", f[i * ic.d_sem + k]);
                csv += buf;
            }
            csv += "\n";
        }
    }
    return csv;
}

}  // namespace ldg::app
