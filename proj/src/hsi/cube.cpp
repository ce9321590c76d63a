#include "ldg/hsi/cube.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "ldg/util/binio.hpp"
#include "ldg/util/fileio.hpp"

namespace ldg::hsi {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kCubeMagic = "HSIC1\n";
constexpr std::string_view kLabelMagic = "HSIL1\n";

std::size_t header_dim(const nlohmann::json& h, const char* key) {
    if (!h.contains(key) || !h[key].is_number_unsigned() || h[key].get<std::size_t>() == 0) {
        throw FormatError(std::string("header field '") + key + "' missing or not a positive integer");
    }
    return h[key].get<std::size_t>();
}

}  // namespace

HsiCube::HsiCube(std::size_t height, std::size_t width, std::size_t bands)
    : HsiCube(height, width, bands, std::vector<float>(height * width * bands, 0.0f)) {}

HsiCube::HsiCube(std::size_t height, std::size_t width, std::size_t bands, std::vector<float> values)
    : height_(height), width_(width), bands_(bands), values_(std::move(values)) {
    if (height == 0 || width == 0 || bands == 0) throw std::invalid_argument("cube extents must be >= 1");
    if (values_.size() != height * width * bands) throw std::invalid_argument("cube value count does not match H*W*d");
    for (float v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("cube contains a non-finite value");
}

void HsiCube::check(std::size_t row, std::size_t col, std::size_t band) const {
    if (row >= height_ || col >= width_ || band >= bands_) {
        throw std::out_of_range("cube access (" + std::to_string(row) + "," + std::to_string(col) + "," +
                                std::to_string(band) + ") outside " + std::to_string(height_) + "x" +
                                std::to_string(width_) + "x" + std::to_string(bands_));
    }
}

LabelRaster::LabelRaster(std::size_t height, std::size_t width)
    : LabelRaster(height, width, std::vector<std::uint16_t>(height * width, 0)) {}

LabelRaster::LabelRaster(std::size_t height, std::size_t width, std::vector<std::uint16_t> ids)
    : height_(height), width_(width), ids_(std::move(ids)) {
    if (height == 0 || width == 0) throw std::invalid_argument("label raster extents must be >= 1");
    if (ids_.size() != height * width) throw std::invalid_argument("label count does not match H*W");
}

std::uint16_t LabelRaster::max_class() const {
    return ids_.empty() ? 0 : *std::max_element(ids_.begin(), ids_.end());
}

std::size_t LabelRaster::labeled_count() const {
    return static_cast<std::size_t>(std::count_if(ids_.begin(), ids_.end(), [](auto v) { return v != 0; }));
}

void check_scene(const Scene& scene, std::size_t classes) {
    if (scene.cube.height() != scene.labels.height() || scene.cube.width() != scene.labels.width()) {
        throw std::invalid_argument("label raster size does not match cube");
    }
    if (scene.labels.max_class() > classes) {
        throw std::invalid_argument("label id " + std::to_string(scene.labels.max_class()) + " exceeds class count " +
                                    std::to_string(classes));
    }
}

void DomainPair::validate() const {
    if (source.cube.bands() != target.cube.bands()) throw std::invalid_argument("source and target band counts differ");
    check_scene(source, classes);
    check_scene(target, classes);
}

std::string encode_cube(const HsiCube& cube) {
    ordered_json h;
    h["h"] = cube.height();
    h["w"] = cube.width();
    h["d"] = cube.bands();
    h["dtype"] = "f32";
    h["layout"] = "bsq";
    std::string out(kCubeMagic);
    out += h.dump();
    out.push_back('\n');
    out.reserve(out.size() + cube.values().size() * 4);
    for (float v : cube.values()) put_le(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

HsiCube decode_cube(const std::string& bytes) {
    const auto f = split_frame(bytes, kCubeMagic);
    const std::size_t H = header_dim(f.header, "h"), W = header_dim(f.header, "w"), D = header_dim(f.header, "d");
    if (f.header.value("dtype", "") != "f32") throw FormatError("unsupported dtype; expected f32");
    if (f.header.value("layout", "") != "bsq") throw FormatError("unsupported layout; expected bsq");
    const std::size_t n = H * W * D;
    check_payload(f.payload.size(), n * 4);
    std::vector<float> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<float>(get_le<std::uint32_t>(f.payload.data() + 4 * i));
    return HsiCube(H, W, D, std::move(values));
}

std::string encode_labels(const LabelRaster& labels) {
    ordered_json h;
    h["h"] = labels.height();
    h["w"] = labels.width();
    std::string out(kLabelMagic);
    out += h.dump();
    out.push_back('\n');
    for (auto v : labels.ids()) put_le(out, v);
    return out;
}

LabelRaster decode_labels(const std::string& bytes) {
    const auto f = split_frame(bytes, kLabelMagic);
    const std::size_t H = header_dim(f.header, "h"), W = header_dim(f.header, "w");
    check_payload(f.payload.size(), H * W * 2);
    std::vector<std::uint16_t> ids(H * W);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = get_le<std::uint16_t>(f.payload.data() + 2 * i);
    return LabelRaster(H, W, std::move(ids));
}

void save_cube(const HsiCube& cube, const std::filesystem::path& path) { write_file_atomic(path, encode_cube(cube)); }
HsiCube load_cube(const std::filesystem::path& path) { return decode_cube(read_file(path)); }
void save_labels(const LabelRaster& labels, const std::filesystem::path& path) {
    write_file_atomic(path, encode_labels(labels));
}
LabelRaster load_labels(const std::filesystem::path& path) { return decode_labels(read_file(path)); }

void save_pair(const DomainPair& pair, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_cube(pair.source.cube, dir / "src.hsic");
    save_labels(pair.source.labels, dir / "src.hsil");
    save_cube(pair.target.cube, dir / "tgt.hsic");
    save_labels(pair.target.labels, dir / "tgt.hsil");
}

DomainPair load_pair(const std::filesystem::path& dir) {
    DomainPair pair;
    pair.source = {load_cube(dir / "src.hsic"), load_labels(dir / "src.hsil")};
    pair.target = {load_cube(dir / "tgt.hsic"), load_labels(dir / "tgt.hsil")};
    pair.classes = std::max(pair.source.labels.max_class(), pair.target.labels.max_class());
    pair.validate();
    return pair;
}

HsiCube normalize(const HsiCube& cube) {
    HsiCube out = cube;
    const std::size_t plane = cube.pixels();
    for (std::size_t b = 0; b < cube.bands(); ++b) {
        float* p = out.values().data() + b * plane;
        const auto [lo, hi] = std::minmax_element(p, p + plane);
        const double mn = *lo, mx = *hi;
        for (std::size_t i = 0; i < plane; ++i) {
            p[i] = mx > mn ? static_cast<float>((p[i] - mn) / (mx - mn)) : 0.0f;
        }
    }
    return out;
}

}  // namespace ldg::hsi
