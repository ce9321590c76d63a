#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldg/util/binio.hpp"

namespace ldg::hsi {

using FormatError = ldg::FormatError;

/// H x W x d reflectance cube, stored band-sequential (band, row, col).
class HsiCube {
public:
    HsiCube() = default;
    HsiCube(std::size_t height, std::size_t width, std::size_t bands);
    HsiCube(std::size_t height, std::size_t width, std::size_t bands, std::vector<float> values);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t bands() const noexcept { return bands_; }
    std::size_t pixels() const noexcept { return height_ * width_; }

    float at(std::size_t row, std::size_t col, std::size_t band) const {
#ifdef LDG_CHECKED_ACCESS
        check(row, col, band);
#endif
        return values_[(band * height_ + row) * width_ + col];
    }
    float& at(std::size_t row, std::size_t col, std::size_t band) {
#ifdef LDG_CHECKED_ACCESS
        check(row, col, band);
#endif
        return values_[(band * height_ + row) * width_ + col];
    }

    const std::vector<float>& values() const noexcept { return values_; }
    std::vector<float>& values() noexcept { return values_; }

    bool operator==(const HsiCube&) const = default;

private:
    void check(std::size_t row, std::size_t col, std::size_t band) const;

    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t bands_ = 0;
    std::vector<float> values_;
};

/// Per-pixel class ids, row-major; 0 = unlabeled.
class LabelRaster {
public:
    LabelRaster() = default;
    LabelRaster(std::size_t height, std::size_t width);
    LabelRaster(std::size_t height, std::size_t width, std::vector<std::uint16_t> ids);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::uint16_t at(std::size_t row, std::size_t col) const { return ids_[row * width_ + col]; }
    std::uint16_t& at(std::size_t row, std::size_t col) { return ids_[row * width_ + col]; }
    const std::vector<std::uint16_t>& ids() const noexcept { return ids_; }

    std::uint16_t max_class() const;
    std::size_t labeled_count() const;

    bool operator==(const LabelRaster&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint16_t> ids_;
};

struct Scene {
    HsiCube cube;
    LabelRaster labels;
};

/// Source and target scenes that share band count and class-id meaning.
struct DomainPair {
    Scene source;
    Scene target;
    std::size_t classes = 0;

    /// Throws std::invalid_argument on band/size/class inconsistencies.
    void validate() const;
};

/// Throws std::invalid_argument if sizes differ or a label exceeds `classes`.
void check_scene(const Scene& scene, std::size_t classes);

// HSIC1 / HSIL1 files: ASCII magic line, one JSON header line, little-endian payload.
void save_cube(const HsiCube& cube, const std::filesystem::path& path);
HsiCube load_cube(const std::filesystem::path& path);
void save_labels(const LabelRaster& labels, const std::filesystem::path& path);
LabelRaster load_labels(const std::filesystem::path& path);

std::string encode_cube(const HsiCube& cube);
HsiCube decode_cube(const std::string& bytes);
std::string encode_labels(const LabelRaster& labels);
LabelRaster decode_labels(const std::string& bytes);

/// Directory layout: src.hsic, src.hsil, tgt.hsic, tgt.hsil.
void save_pair(const DomainPair& pair, const std::filesystem::path& dir);
/// Class count is taken as the largest label id present in either scene.
DomainPair load_pair(const std::filesystem::path& dir);

/// Band-wise min-max scaling to [0, 1]; a constant band becomes all zeros.
HsiCube normalize(const HsiCube& cube);

}  // namespace ldg::hsi
