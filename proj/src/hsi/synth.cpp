#include "ldg/hsi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ldg/util/rng.hpp"

namespace ldg::hsi {

namespace {

enum StreamSalt : std::uint64_t { kMeans = 1, kSourceLayout, kSourcePixels, kTargetLayout, kTargetPixels };

LabelRaster voronoi_layout(std::size_t h, std::size_t w, std::size_t blobs, std::size_t classes, Rng& rng) {
    struct Site {
        double r, c;
        std::uint16_t label;
    };
    std::vector<std::uint16_t> blob_class(blobs);
    for (std::size_t k = 0; k < blobs; ++k) blob_class[k] = static_cast<std::uint16_t>(k % classes + 1);
    rng.shuffle(blob_class);
    std::vector<Site> sites(blobs);
    for (std::size_t k = 0; k < blobs; ++k) {
        sites[k] = {rng.uniform(0.0, static_cast<double>(h)), rng.uniform(0.0, static_cast<double>(w)), blob_class[k]};
    }
    LabelRaster labels(h, w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            double best = std::numeric_limits<double>::max();
            std::uint16_t id = 0;
            for (const auto& s : sites) {
                const double dr = static_cast<double>(r) + 0.5 - s.r;
                const double dc = static_cast<double>(c) + 0.5 - s.c;
                const double d = dr * dr + dc * dc;
                if (d < best) {
                    best = d;
                    id = s.label;
                }
            }
            labels.at(r, c) = id;
        }
    return labels;
}

HsiCube draw_pixels(const LabelRaster& labels, const SynthSpec& spec, const DomainShift* shift, Rng& rng) {
    const std::size_t h = labels.height(), w = labels.width();
    HsiCube cube(h, w, spec.bands);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t k = labels.at(r, c) - 1u;
            const double sigma = spec.noise_for(k);
            for (std::size_t b = 0; b < spec.bands; ++b) {
                double v = spec.class_means[k][b] + sigma * rng.normal();
                if (shift) v = shift->apply(b, v);
                cube.at(r, c, b) = static_cast<float>(v);
            }
        }
    return cube;
}

}  // namespace

DomainShift DomainShift::uniform(std::size_t bands, double gain, double offset, double nonlinearity) {
    return {std::vector<double>(bands, gain), std::vector<double>(bands, offset), std::vector<double>(bands, nonlinearity)};
}

void SynthSpec::validate() const {
    if (classes == 0 || classes > 65535) throw std::invalid_argument("synth: classes must be in [1, 65535]");
    if (bands == 0) throw std::invalid_argument("synth: bands must be >= 1");
    if (source_height == 0 || source_width == 0 || target_height == 0 || target_width == 0) {
        throw std::invalid_argument("synth: scene extents must be >= 1");
    }
    if (blobs < classes) throw std::invalid_argument("synth: need at least one blob per class");
    if (!(noise_std > 0.0)) throw std::invalid_argument("synth: covariance scale must be > 0");
    if (!class_noise.empty()) {
        if (class_noise.size() != classes) throw std::invalid_argument("synth: class_noise needs one entry per class");
        for (double s : class_noise)
            if (!(s > 0.0)) throw std::invalid_argument("synth: covariance scale must be > 0");
    }
    if (!class_means.empty()) {
        if (class_means.size() != classes) throw std::invalid_argument("synth: class_means needs one row per class");
        for (const auto& m : class_means)
            if (m.size() != bands) throw std::invalid_argument("synth: class mean length != bands");
    }
    const auto check_len = [&](const std::vector<double>& v, const char* name) {
        if (!v.empty() && v.size() != bands) {
            throw std::invalid_argument(std::string("synth: shift ") + name + " needs one entry per band");
        }
    };
    check_len(shift.gain, "gain");
    check_len(shift.offset, "offset");
    check_len(shift.nonlinearity, "nonlinearity");
    for (double g : shift.gain)
        if (!(g > 0.0)) throw std::invalid_argument("synth: shift gain must be > 0");
}

std::vector<std::vector<double>> generate_class_means(std::size_t classes, std::size_t bands, std::uint64_t seed) {
    Rng rng(seed);
    const double d = static_cast<double>(bands);
    std::vector<std::vector<double>> means(classes, std::vector<double>(bands));
    for (auto& m : means) {
        const double level = rng.uniform(0.25, 0.65);
        const double slope = rng.uniform(-0.15, 0.15);
        struct Bump {
            double amp, center, width;
        };
        Bump bumps[2];
        for (auto& bp : bumps) bp = {rng.uniform(-0.2, 0.2), rng.uniform(0.0, d), d / 5.0 + 0.5};
        for (std::size_t b = 0; b < bands; ++b) {
            const double x = static_cast<double>(b);
            double v = level + slope * (x / std::max(1.0, d - 1.0) - 0.5);
            for (const auto& bp : bumps) v += bp.amp * std::exp(-0.5 * std::pow((x - bp.center) / bp.width, 2.0));
            m[b] = std::clamp(v, 0.02, 0.98);
        }
    }
    return means;
}

DomainPair generate_synthetic_pair(SynthSpec spec) {
    if (spec.shift.gain.empty() && spec.shift.offset.empty() && spec.shift.nonlinearity.empty()) {
        spec.shift = DomainShift::uniform(spec.bands, 1.0, 0.0, 0.0);
    }
    if (spec.shift.gain.empty()) spec.shift.gain.assign(spec.bands, 1.0);
    if (spec.shift.offset.empty()) spec.shift.offset.assign(spec.bands, 0.0);
    if (spec.shift.nonlinearity.empty()) spec.shift.nonlinearity.assign(spec.bands, 0.0);
    spec.validate();
    if (spec.class_means.empty()) spec.class_means = generate_class_means(spec.classes, spec.bands, mix_seed(spec.seed, kMeans));

    DomainPair pair;
    pair.classes = spec.classes;
    {
        Rng layout(mix_seed(spec.seed, kSourceLayout));
        Rng pixels(mix_seed(spec.seed, kSourcePixels));
        pair.source.labels = voronoi_layout(spec.source_height, spec.source_width, spec.blobs, spec.classes, layout);
        pair.source.cube = draw_pixels(pair.source.labels, spec, nullptr, pixels);
    }
    {
        Rng layout(mix_seed(spec.seed, kTargetLayout));
        Rng pixels(mix_seed(spec.seed, kTargetPixels));
        pair.target.labels = voronoi_layout(spec.target_height, spec.target_width, spec.blobs, spec.classes, layout);
        pair.target.cube = draw_pixels(pair.target.labels, spec, &spec.shift, pixels);
    }
    return pair;
}

}  // namespace ldg::hsi
