#pragma once

#include <cstdint>
#include <vector>

#include "ldg/hsi/cube.hpp"

namespace ldg::hsi {

/// Per-band transform applied to target values: v -> gain*v + offset + nonlinearity*v^2.
struct DomainShift {
    std::vector<double> gain;
    std::vector<double> offset;
    std::vector<double> nonlinearity;

    static DomainShift uniform(std::size_t bands, double gain, double offset, double nonlinearity);
    double apply(std::size_t band, double v) const {
        return gain[band] * v + offset[band] + nonlinearity[band] * v * v;
    }
};

struct SynthSpec {
    std::size_t classes = 5;
    std::size_t bands = 16;
    std::size_t source_height = 32;
    std::size_t source_width = 32;
    std::size_t target_height = 32;
    std::size_t target_width = 32;
    std::size_t blobs = 12;
    /// Per-pixel spectral noise standard deviation (isotropic covariance scale).
    double noise_std = 0.05;
    /// Optional per-class override of `noise_std`.
    std::vector<double> class_noise;
    /// Optional explicit class mean spectra (classes x bands); generated from the seed when empty.
    std::vector<std::vector<double>> class_means;
    DomainShift shift;
    std::uint64_t seed = 0;

    /// Fills `shift` with the identity when unset; throws std::invalid_argument on bad fields.
    void validate() const;
    double noise_for(std::size_t class_index) const {
        return class_noise.empty() ? noise_std : class_noise[class_index];
    }
};

/// Smooth random reflectance curves, one per class.
std::vector<std::vector<double>> generate_class_means(std::size_t classes, std::size_t bands, std::uint64_t seed);

/// Source: Gaussian spectra around the class means, placed in Voronoi blobs.
/// Target: same means and noise on an independent blob layout, then shifted per band.
DomainPair generate_synthetic_pair(SynthSpec spec);

}  // namespace ldg::hsi
