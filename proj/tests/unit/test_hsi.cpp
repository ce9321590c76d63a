#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "ldg/hsi/cube.hpp"
#include "ldg/hsi/patch.hpp"
#include "ldg/hsi/split.hpp"
#include "ldg/hsi/synth.hpp"
#include "ldg/util/rng.hpp"

using namespace ldg;
using namespace ldg::hsi;

namespace {

HsiCube random_cube(std::size_t h, std::size_t w, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    HsiCube c(h, w, d);
    for (auto& v : c.values()) v = static_cast<float>(rng.uniform(-3.0, 3.0));
    return c;
}

std::filesystem::path temp_dir(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Per-class sample mean and std of one band over all labeled pixels.
struct Moments {
    double mean = 0.0, sd = 0.0;
    std::size_t n = 0;
};

Moments band_moments(const Scene& s, std::uint16_t cls, std::size_t band) {
    Moments m;
    double sum = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < s.labels.height(); ++r)
        for (std::size_t c = 0; c < s.labels.width(); ++c)
            if (s.labels.at(r, c) == cls) {
                const double v = s.cube.at(r, c, band);
                sum += v;
                sq += v * v;
                ++m.n;
            }
    m.mean = sum / static_cast<double>(m.n);
    m.sd = std::sqrt(std::max(0.0, sq / static_cast<double>(m.n) - m.mean * m.mean));
    return m;
}

}  // namespace

TEST_CASE("cube file round trip") {
    SUBCASE("single value") {
        HsiCube c(1, 1, 1, {0.5f});
        const std::string bytes = encode_cube(c);
        const std::string header = "HSIC1\n{\"h\":1,\"w\":1,\"d\":1,\"dtype\":\"f32\",\"layout\":\"bsq\"}\n";
        CHECK(bytes.size() == header.size() + 4);
        CHECK(bytes.substr(0, header.size()) == header);
        CHECK(decode_cube(bytes).at(0, 0, 0) == 0.5f);
    }
    SUBCASE("random cube through a file") {
        const auto dir = temp_dir("ldg_test_cube");
        const HsiCube c = random_cube(8, 8, 4, 11);
        save_cube(c, dir / "a.hsic");
        CHECK(load_cube(dir / "a.hsic") == c);
    }
    SUBCASE("labels and pairs") {
        const auto dir = temp_dir("ldg_test_pair");
        SynthSpec spec;
        spec.classes = 3;
        spec.bands = 4;
        spec.source_height = spec.source_width = 9;
        spec.target_height = 7;
        spec.target_width = 11;
        spec.blobs = 5;
        spec.seed = 3;
        const DomainPair pair = generate_synthetic_pair(spec);
        save_pair(pair, dir);
        const DomainPair back = load_pair(dir);
        CHECK(back.source.cube == pair.source.cube);
        CHECK(back.source.labels == pair.source.labels);
        CHECK(back.target.cube == pair.target.cube);
        CHECK(back.target.labels == pair.target.labels);
        CHECK(back.classes == 3);
    }
}

TEST_CASE("cube decode errors") {
    const std::string good = encode_cube(random_cube(2, 2, 3, 1));
    SUBCASE("bad magic") {
        std::string bad = good;
        bad[0] = 'X';
        CHECK_THROWS_AS(decode_cube(bad), FormatError);
    }
    SUBCASE("11 of 12 floats is truncated") {
        CHECK_THROWS_WITH_AS(decode_cube(good.substr(0, good.size() - 4)), doctest::Contains("truncated"),
                             FormatError);
    }
    SUBCASE("extra payload is a size mismatch") {
        CHECK_THROWS_AS(decode_cube(good + std::string(4, '\0')), FormatError);
    }
    SUBCASE("label file magic") {
        CHECK_THROWS_AS(decode_labels(good), FormatError);
    }
    SUBCASE("non-finite values are rejected") {
        CHECK_THROWS(HsiCube(1, 1, 1, {std::nanf("")}));
    }
}

TEST_CASE("normalize") {
    SUBCASE("two values") {
        HsiCube c(1, 2, 1, {2.0f, 4.0f});
        const HsiCube n = normalize(c);
        CHECK(n.at(0, 0, 0) == 0.0f);
        CHECK(n.at(0, 1, 0) == 1.0f);
    }
    SUBCASE("constant band") {
        const HsiCube n = normalize(HsiCube(1, 2, 1, {7.0f, 7.0f}));
        CHECK(n.at(0, 0, 0) == 0.0f);
        CHECK(n.at(0, 1, 0) == 0.0f);
    }
    SUBCASE("random band keeps order and spans [0,1]") {
        const HsiCube c = random_cube(6, 5, 3, 4);
        const HsiCube n = normalize(c);
        for (std::size_t b = 0; b < 3; ++b) {
            float lo = 2.0f, hi = -1.0f;
            for (std::size_t i = 0; i < 30; ++i) {
                const float v = n.at(i / 5, i % 5, b);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                for (std::size_t j = 0; j < 30; ++j) {
                    const float a = c.at(i / 5, i % 5, b), o = c.at(j / 5, j % 5, b);
                    if (a < o) CHECK(v <= n.at(j / 5, j % 5, b));
                }
            }
            CHECK(lo == 0.0f);
            CHECK(hi == 1.0f);
        }
    }
}

TEST_CASE("patch extraction") {
    HsiCube c(5, 5, 2);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t col = 0; col < 5; ++col) c.at(r, col, b) = static_cast<float>(100 * b + 10 * r + col);

    SUBCASE("interior window is literal") {
        const Patch p = extract_patch(c, 2, 3, 3);
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) CHECK(p.at(b, i, j) == c.at(1 + i, 2 + j, b));
    }
    SUBCASE("corner reflects to (1,0,1)") {
        const Patch p = extract_patch(c, 0, 0, 3);
        const std::size_t idx[3] = {1, 0, 1};
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) CHECK(p.at(b, i, j) == c.at(idx[i], idx[j], b));
    }
    SUBCASE("even size and bad center") {
        CHECK_THROWS_AS(extract_patch(c, 2, 2, 4), std::invalid_argument);
        CHECK_THROWS_AS(extract_patch(c, 5, 0, 3), std::invalid_argument);
    }
    SUBCASE("reflect_index") {
        CHECK(reflect_index(-1, 5) == 1);
        CHECK(reflect_index(-2, 5) == 2);
        CHECK(reflect_index(5, 5) == 3);
        CHECK(reflect_index(6, 5) == 2);
        CHECK(reflect_index(-3, 1) == 0);
    }
    SUBCASE("scene patch carries label") {
        Scene s{c, LabelRaster(5, 5)};
        s.labels.at(1, 1) = 4;
        CHECK(extract_patch(s, 1, 1, 3).label == 4);
        CHECK_THROWS(extract_patch(s, 0, 0, 3));
    }
}

TEST_CASE("augmentation") {
    Patch p = extract_patch(random_cube(4, 4, 3, 9), 1, 2, 3);
    SUBCASE("no flip, unit gain, zero noise is identity") {
        AugmentDraws d;
        const Patch q = apply_augmentation(p, d);
        CHECK(q.values == p.values);
    }
    SUBCASE("both flips rotate each band by 180 degrees") {
        AugmentDraws d;
        d.flip_horizontal = d.flip_vertical = true;
        const Patch q = apply_augmentation(p, d);
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) CHECK(q.at(b, i, j) == p.at(b, 2 - i, 2 - j));
    }
    SUBCASE("draws stay in range and replay per seed") {
        Rng a(5), b(5);
        for (int k = 0; k < 50; ++k) {
            const AugmentDraws d = draw_augmentation(a, p.values.size());
            CHECK(d.gain >= 0.9);
            CHECK(d.gain <= 1.1);
            for (double n : d.noise) CHECK(std::abs(n) <= 0.02);
            const Patch x = apply_augmentation(p, d);
            const Patch y = augment_patch(p, b);
            CHECK(x.values == y.values);
            CHECK(y.label == p.label);
        }
    }
}

TEST_CASE("stratified split") {
    SUBCASE("10 per class at 0.8") {
        LabelRaster l(5, 6);
        for (std::size_t i = 0; i < 30; ++i) l.at(i / 6, i % 6) = static_cast<std::uint16_t>(i % 3 + 1);
        const auto s = split_train_val(l, 0.8, 1);
        std::map<int, int> tr, va;
        for (auto& p : s.train) ++tr[p.label];
        for (auto& p : s.val) ++va[p.label];
        for (int c = 1; c <= 3; ++c) {
            CHECK(tr[c] == 8);
            CHECK(va[c] == 2);
        }
        std::set<std::pair<int, int>> all;
        for (auto& p : s.train) all.insert({p.row, p.col});
        for (auto& p : s.val) all.insert({p.row, p.col});
        CHECK(all.size() == 30);
        const auto again = split_train_val(l, 0.8, 1);
        CHECK(again.train == s.train);
        CHECK(again.val == s.val);
    }
    SUBCASE("two pixels at 0.5") {
        LabelRaster l(1, 4, {1, 2, 1, 2});
        const auto s = split_train_val(l, 0.5, 7);
        CHECK(s.train.size() == 2);
        CHECK(s.val.size() == 2);
    }
    SUBCASE("unequal class sizes use round(fraction * n)") {
        Rng rng(2);
        for (int trial = 0; trial < 20; ++trial) {
            LabelRaster l(7, 9);
            for (std::size_t r = 0; r < 7; ++r)
                for (std::size_t c = 0; c < 9; ++c) l.at(r, c) = static_cast<std::uint16_t>(rng.index(4));
            std::map<int, int> n;
            for (auto id : l.ids())
                if (id) ++n[id];
            bool ok = true;
            for (auto& [k, v] : n) ok = ok && v >= 2;
            if (!ok) continue;
            const double f = rng.uniform(0.1, 0.9);
            const auto s = split_train_val(l, f, trial);
            std::map<int, int> tr;
            for (auto& p : s.train) ++tr[p.label];
            for (auto& [k, v] : n) CHECK(tr[k] == std::lround(f * v));
        }
    }
    SUBCASE("errors") {
        LabelRaster l(1, 3, {1, 2, 2});
        CHECK_THROWS(split_train_val(l, 0.5, 0));
        LabelRaster ok(1, 4, {1, 2, 1, 2});
        CHECK_THROWS(split_train_val(ok, 0.0, 0));
        CHECK_THROWS(split_train_val(ok, 1.0, 0));
    }
}

TEST_CASE("synthetic pair") {
    SynthSpec spec;
    spec.classes = 4;
    spec.bands = 6;
    spec.source_height = spec.source_width = 40;
    spec.target_height = spec.target_width = 40;
    spec.blobs = 10;
    spec.noise_std = 0.05;
    spec.seed = 21;

    SUBCASE("identity shift keeps class means") {
        const DomainPair pair = generate_synthetic_pair(spec);
        pair.validate();
        for (std::uint16_t k = 1; k <= 4; ++k)
            for (std::size_t b = 0; b < 6; ++b) {
                const Moments s = band_moments(pair.source, k, b), t = band_moments(pair.target, k, b);
                REQUIRE(s.n > 0);
                REQUIRE(t.n > 0);
                const double tol = 3.0 * spec.noise_std * std::sqrt(1.0 / s.n + 1.0 / t.n);
                CHECK(std::abs(s.mean - t.mean) <= tol);
            }
    }
    SUBCASE("band-0 offset moves the target mean") {
        spec.shift = DomainShift::uniform(6, 1.0, 0.0, 0.0);
        spec.shift.offset[0] = 0.2;
        const DomainPair pair = generate_synthetic_pair(spec);
        for (std::uint16_t k = 1; k <= 4; ++k) {
            const Moments s = band_moments(pair.source, k, 0), t = band_moments(pair.target, k, 0);
            const double tol = 3.0 * spec.noise_std * std::sqrt(1.0 / s.n + 1.0 / t.n);
            CHECK(std::abs(t.mean - s.mean - 0.2) <= tol);
        }
    }
    SUBCASE("deterministic per seed") {
        const DomainPair a = generate_synthetic_pair(spec), b = generate_synthetic_pair(spec);
        CHECK(a.source.cube == b.source.cube);
        CHECK(a.target.cube == b.target.cube);
        CHECK(a.target.labels == b.target.labels);
        spec.seed = 22;
        CHECK_FALSE(generate_synthetic_pair(spec).source.cube == a.source.cube);
    }
    SUBCASE("every class appears and blobs are contiguous regions") {
        const DomainPair pair = generate_synthetic_pair(spec);
        CHECK(pair.source.labels.max_class() == 4);
        CHECK(pair.source.labels.labeled_count() == 1600);
    }
    SUBCASE("invalid fields") {
        SynthSpec bad = spec;
        bad.noise_std = 0.0;
        CHECK_THROWS_AS(generate_synthetic_pair(bad), std::invalid_argument);
        bad = spec;
        bad.shift = DomainShift::uniform(6, 0.0, 0.0, 0.0);
        CHECK_THROWS_AS(generate_synthetic_pair(bad), std::invalid_argument);
        bad = spec;
        bad.shift = DomainShift::uniform(5, 1.0, 0.0, 0.0);
        CHECK_THROWS_AS(generate_synthetic_pair(bad), std::invalid_argument);
        bad = spec;
        bad.blobs = 2;
        CHECK_THROWS_AS(generate_synthetic_pair(bad), std::invalid_argument);
    }
}
