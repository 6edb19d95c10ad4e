#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <cstdlib>
#include <set>

#include "shield/dataio.hpp"
#include "shield/shortcuts.hpp"

using namespace shield;
using shield::testing::bitwise_equal;
using shield::testing::random_dataset;
using shield::testing::random_image;

namespace {

const Shape kCifar{32, 32, 3};

bool channel_constant(const Eigen::ArrayXd& values, const Shape& s)
{
    for (int c = 1; c < s.channels; ++c) {
        if (!(values.segment(c * s.plane(), s.plane()) == values.segment(0, s.plane())).all()) {
            return false;
        }
    }
    return true;
}

bool binary(const Eigen::ArrayXd& v)
{
    return ((v == 0.0) || (v == 1.0)).all();
}

} // namespace

TEST_CASE("pixel mask density matches the normal tail")
{
    // P(N(0.01, 0.2) > 0.5) * 3072
    const double expected = 3072.0 * 0.5 * std::erfc((0.5 - 0.01) / (0.2 * std::sqrt(2.0)));
    CHECK(expected == doctest::Approx(21.94).epsilon(0.001));

    double total = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const PixelMask m = generate_pixel_mask(k, kCifar, 0.01, 0.2, 99);
        REQUIRE(binary(m.values));
        const double ones = m.values.sum();
        // at most 2% of the pixels altered
        CHECK(ones <= 0.02 * 3072);
        total += ones;
    }
    const double mean = total / 1000.0;
    CHECK(mean >= 21.0);
    CHECK(mean <= 23.0);
    CHECK(std::abs(mean - expected) < 0.6);
}

TEST_CASE("pixel mask extremes and determinism")
{
    CHECK((generate_pixel_mask(0, kCifar, -10.0, 0.2, 1).values == 0.0).all());
    CHECK((generate_pixel_mask(0, kCifar, 10.0, 0.2, 1).values == 1.0).all());
    CHECK((generate_pixel_mask(4, kCifar, 0.1, 0.2, 5).values == generate_pixel_mask(4, kCifar, 0.1, 0.2, 5).values).all());
    CHECK_THROWS_AS((void)generate_pixel_mask(0, kCifar, 0.0, 0.0, 1), ParameterError);
}

TEST_CASE("pixel masks do not depend on generation order")
{
    std::vector<PixelMask> forward, backward(10);
    for (int k = 0; k < 10; ++k) {
        forward.push_back(generate_pixel_mask(k, kCifar, 0.1, 0.2, 8));
    }
    for (int k = 9; k >= 0; --k) {
        backward[static_cast<std::size_t>(k)] = generate_pixel_mask(k, kCifar, 0.1, 0.2, 8);
    }
    for (int k = 0; k < 10; ++k) {
        CHECK((forward[static_cast<std::size_t>(k)].values == backward[static_cast<std::size_t>(k)].values).all());
    }
    CHECK(!(forward[0].values == forward[1].values).all());
}

TEST_CASE("apply_pixel_pattern saturates masked entries only")
{
    Prng rng(1);
    const Image img = random_image(kCifar, rng);

    PixelMask empty{kCifar, 0, Eigen::ArrayXd::Zero(kCifar.size())};
    CHECK(bitwise_equal(apply_pixel_pattern(img, empty), img));

    Image probe = img;
    probe.at(1, 5, 7) = 0.3;
    PixelMask single = empty;
    single.values[probe.index(1, 5, 7)] = 1.0;
    const Image out = apply_pixel_pattern(probe, single);
    CHECK(out.at(1, 5, 7) == 1.0);
    Image expected = probe;
    expected.at(1, 5, 7) = 1.0;
    CHECK(bitwise_equal(out, expected));

    PixelMask wrong{{16, 16, 3}, 0, Eigen::ArrayXd::Zero(16 * 16 * 3)};
    CHECK_THROWS_AS((void)apply_pixel_pattern(img, wrong), ShapeError);
}

TEST_CASE("apply_pixel_pattern agrees with a per-pixel loop")
{
    Prng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const Image img = random_image(kCifar, rng);
        const PixelMask mask = generate_pixel_mask(trial, kCifar, 0.3, 0.2, 23);
        const Image out = apply_pixel_pattern(img, mask);
        for (Eigen::Index i = 0; i < img.data.size(); ++i) {
            const double d = mask.values[i];
            REQUIRE(out.data[i] == (1.0 - d) * img.data[i] + d * 1.0);
        }
    }
}

TEST_CASE("apply_watermark blends only inside the stamp")
{
    const Shape s{4, 4, 1};
    Image img = Image::constant(s, 0.4);
    WatermarkStamp stamp{s, Eigen::ArrayXd::Zero(16)};
    stamp.values[5] = 1.0;

    CHECK(bitwise_equal(apply_watermark(img, stamp, 0.0), img));
    CHECK(apply_watermark(img, stamp, 1.0).data[5] == 1.0);
    const Image half = apply_watermark(img, stamp, 0.5);
    CHECK(half.data[5] == doctest::Approx(0.7));
    CHECK(half.data[4] == 0.4);

    CHECK_THROWS_AS((void)apply_watermark(img, stamp, 1.5), ParameterError);
    CHECK_THROWS_AS((void)apply_watermark(img, stamp, -0.1), ParameterError);
}

TEST_CASE("watermark changes a pixel iff M=1, alpha>0 and x<1")
{
    Prng rng(8);
    const Shape s{8, 8, 3};
    for (int trial = 0; trial < 30; ++trial) {
        Image img = random_image(s, rng);
        for (Eigen::Index i = 0; i < img.data.size(); i += 7) {
            img.data[i] = 1.0;
        }
        WatermarkStamp stamp{s, Eigen::ArrayXd::Zero(s.size())};
        for (Eigen::Index i = 0; i < stamp.values.size(); ++i) {
            stamp.values[i] = rng.next_unit() < 0.3 ? 1.0 : 0.0;
        }
        const double alpha = trial % 5 == 0 ? 0.0 : rng.next_unit();
        const Image out = apply_watermark(img, stamp, alpha);
        for (Eigen::Index i = 0; i < img.data.size(); ++i) {
            const bool expect_change = stamp.values[i] == 1.0 && alpha > 0.0 && img.data[i] < 1.0;
            REQUIRE((out.data[i] != img.data[i]) == expect_change);
        }
    }
}

TEST_CASE("class 0 watermark is a single centered digit")
{
    const GlyphSource glyphs = GlyphSource::builtin();
    Prng rng(3);
    const WatermarkStamp stamp = render_class_watermark(0, kCifar, glyphs, rng);
    CHECK(binary(stamp.values));
    CHECK(channel_constant(stamp.values, kCifar));
    REQUIRE(stamp.values.sum() > 0.0);

    int left = 32, right = -1, top = 32, bottom = -1;
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            if (stamp.values[y * 32 + x] > 0.0) {
                left = std::min(left, x);
                right = std::max(right, x);
                top = std::min(top, y);
                bottom = std::max(bottom, y);
            }
        }
    }
    CHECK(bottom - top + 1 == 28);
    CHECK(std::abs(left - (31 - right)) <= 1);
    CHECK(std::abs(top - (31 - bottom)) <= 1);

    Prng replay(3);
    CHECK((render_class_watermark(0, kCifar, glyphs, replay).values == stamp.values).all());
}

TEST_CASE("class 263 watermark renders three separated digits")
{
    const GlyphSource glyphs = GlyphSource::builtin();
    // wide enough that the block is not shrunk and the 1-pixel gaps survive
    const Shape big{224, 56, 3};
    Prng rng(5);
    const WatermarkStamp stamp = render_class_watermark(263, big, glyphs, rng);
    CHECK(binary(stamp.values));
    CHECK(channel_constant(stamp.values, big));

    // Count ink runs along columns: three digits give three column groups.
    std::vector<bool> ink_col(224, false);
    for (int y = 0; y < 56; ++y) {
        for (int x = 0; x < 224; ++x) {
            if (stamp.values[y * 224 + x] > 0.0) {
                ink_col[static_cast<std::size_t>(x)] = true;
            }
        }
    }
    int runs = 0;
    for (std::size_t x = 0; x < ink_col.size(); ++x) {
        if (ink_col[x] && (x == 0 || !ink_col[x - 1])) {
            ++runs;
        }
    }
    CHECK(runs == 3);

    // on a narrow image the block shrinks to the full width
    Prng small_rng(5);
    const WatermarkStamp small = render_class_watermark(263, kCifar, glyphs, small_rng);
    CHECK(small.values.sum() > 0.0);
    CHECK(binary(small.values));
    bool left_ink = false, right_ink = false;
    for (int y = 0; y < 32; ++y) {
        left_ink = left_ink || small.values[y * 32] > 0.0;
        right_ink = right_ink || small.values[y * 32 + 31] > 0.0;
    }
    CHECK((left_ink && right_ink));
}

TEST_CASE("watermark glyphs can come from MNIST IDX files")
{
    shield::testing::TempDir dir;
    const GlyphSource builtin = GlyphSource::builtin(1, 2);
    std::vector<Image> images;
    std::vector<int> labels;
    for (int d = 0; d < 10; ++d) {
        for (const auto& g : builtin.exemplars(d)) {
            images.push_back(g);
            labels.push_back(d);
        }
    }
    write_file_atomic(dir / "images.idx", encode_idx_images(images));
    write_file_atomic(dir / "labels.idx", encode_idx_labels(labels));
    const GlyphSource mnist = read_mnist_glyphs(dir / "images.idx", dir / "labels.idx");
    CHECK(mnist.complete());
    CHECK(mnist.size() == 20);

    Prng rng(2);
    const WatermarkStamp stamp = render_class_watermark(0, kCifar, mnist, rng);
    CHECK(binary(stamp.values));
    CHECK(stamp.values.sum() > 0.0);
}

TEST_CASE("watermarking without glyphs is a configuration error")
{
    GlyphSource empty;
    Prng rng(1);
    CHECK_THROWS_AS((void)render_class_watermark(3, kCifar, empty, rng), ConfigError);

    const Dataset ds = random_dataset({8, 8, 3}, 2, 4, 1);
    ShortcutParams p;
    p.method = Method::watermark;
    CHECK_THROWS_AS((void)protect_dataset(ds, p, empty), ConfigError);
}

TEST_CASE("brightness mask with gamma 1 is all ones")
{
    const BrightnessMask m = generate_brightness_mask(2, kCifar, 1.0, 50, 8, 4);
    CHECK((m.values == 1.0).all());
}

TEST_CASE("single darkening step covers one clipped square")
{
    const int side = 8;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        // replay the documented draw order: cx, cy, sign
        Prng replay = Prng::child(seed, 0);
        const int cx = static_cast<int>(std::floor(replay.next_unit() * 32));
        const int cy = static_cast<int>(std::floor(replay.next_unit() * 32));
        const bool darken = replay.next_unit() < 0.5;

        const BrightnessMask m = generate_brightness_mask(0, kCifar, 0.9, 1, side, seed);
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < 32; ++y) {
                for (int x = 0; x < 32; ++x) {
                    const bool inside = x >= cx - side / 2 && x < cx - side / 2 + side && y >= cy - side / 2 &&
                                        y < cy - side / 2 + side;
                    const double expected = inside ? (darken ? 0.9 : 1.1) : 1.0;
                    REQUIRE(m.values[c * 1024 + y * 32 + x] == expected);
                }
            }
        }
    }
}

TEST_CASE("overlapping brightening squares compound")
{
    bool found = false;
    for (std::uint64_t seed = 0; seed < 200 && !found; ++seed) {
        Prng replay = Prng::child(seed, 0);
        bool both_brighten = true;
        for (int t = 0; t < 2; ++t) {
            (void)replay.next_unit();
            (void)replay.next_unit();
            both_brighten = both_brighten && replay.next_unit() >= 0.5;
        }
        if (!both_brighten) {
            continue;
        }
        found = true;
        // side 64 covers the whole 32x32 image from any center
        const BrightnessMask m = generate_brightness_mask(0, kCifar, 0.9, 2, 64, seed);
        for (Eigen::Index i = 0; i < m.values.size(); ++i) {
            REQUIRE(m.values[i] == doctest::Approx(1.21));
        }
    }
    CHECK(found);
}

TEST_CASE("brightness entries are products of gamma and 2-gamma")
{
    const double gamma = 0.7;
    const int T = 32;
    for (int k = 0; k < 5; ++k) {
        const BrightnessMask m = generate_brightness_mask(k, kCifar, gamma, T, 8, 31);
        CHECK((m.values > 0.0).all());
        CHECK(channel_constant(m.values, kCifar));
        std::set<double> distinct(m.values.data(), m.values.data() + m.values.size());
        for (double v : distinct) {
            bool representable = false;
            for (int a = 0; a <= T && !representable; ++a) {
                for (int b = 0; a + b <= T && !representable; ++b) {
                    representable = std::abs(std::pow(gamma, a) * std::pow(2.0 - gamma, b) - v) < 1e-9;
                }
            }
            CHECK(representable);
        }
    }
    CHECK_THROWS_AS((void)generate_brightness_mask(0, kCifar, 0.4, 1, 8, 1), ParameterError);
}

TEST_CASE("apply_brightness_modulation multiplies then clamps")
{
    const Shape s{3, 1, 1};
    Image img(s);
    img.data << 0.5, 0.9, 0.2;
    BrightnessMask ones{s, 0, Eigen::ArrayXd::Ones(3)};
    CHECK(bitwise_equal(apply_brightness_modulation(img, ones), img));

    BrightnessMask m{s, 0, Eigen::ArrayXd(3)};
    m.values << 0.9, 1.21, 1.0;
    const Image out = apply_brightness_modulation(img, m);
    CHECK(out.data[0] == doctest::Approx(0.45));
    CHECK(out.data[1] == 1.0);
    CHECK(out.data[2] == 0.2);
}

TEST_CASE("protect_dataset keeps labels and is deterministic")
{
    const Dataset ds = random_dataset(kCifar, 4, 24, 12);
    for (Method method : {Method::pixel, Method::watermark, Method::brightness}) {
        ShortcutParams p;
        p.method = method;
        p.mu = 0.1;
        p.seed = 77;
        const Dataset a = protect_dataset(ds, p);
        const Dataset b = protect_dataset(ds, p);
        CHECK(a.labels == ds.labels);
        CHECK(a.size() == ds.size());
        CHECK(bitwise_equal(a, b));
    }
}

TEST_CASE("protect_dataset degenerate parameters leave data untouched")
{
    const Dataset ds = random_dataset(kCifar, 3, 9, 4);
    ShortcutParams p;
    p.mu = -10.0;
    CHECK(bitwise_equal(protect_dataset(ds, p), ds));
    p.method = Method::watermark;
    p.alpha = 0.0;
    CHECK(bitwise_equal(protect_dataset(ds, p), ds));
    p.method = Method::brightness;
    p.gamma = 1.0;
    CHECK(bitwise_equal(protect_dataset(ds, p), ds));
}

TEST_CASE("pixel and brightness shortcuts are class-consistent")
{
    Dataset ds = random_dataset(kCifar, 3, 12, 6);
    for (auto& img : ds.images) {
        img.data = img.data * 0.5; // keeps saturated pixels distinguishable
    }
    ShortcutParams p;
    p.mu = 0.1;
    p.seed = 3;
    const Dataset out = protect_dataset(ds, p);

    auto saturated = [&](std::size_t i) {
        std::set<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < out.images[i].data.size(); ++j) {
            if (out.images[i].data[j] != ds.images[i].data[j]) {
                idx.insert(j);
            }
        }
        return idx;
    };
    // images i and i+3 share a class
    CHECK(saturated(0) == saturated(3));
    CHECK(saturated(1) == saturated(4));
    CHECK(saturated(0) != saturated(1));

    p.method = Method::brightness;
    p.gamma = 0.7;
    const Dataset bright = protect_dataset(ds, p);
    // compare the multiplicative field where neither image clamps
    auto same_field = [&](std::size_t a, std::size_t b) {
        const Eigen::ArrayXd ra = bright.images[a].data / ds.images[a].data;
        const Eigen::ArrayXd rb = bright.images[b].data / ds.images[b].data;
        for (Eigen::Index j = 0; j < ra.size(); ++j) {
            if (bright.images[a].data[j] < 1.0 && bright.images[b].data[j] < 1.0 &&
                std::abs(ra[j] - rb[j]) > 1e-9) {
                return false;
            }
        }
        return true;
    };
    CHECK(same_field(0, 3));
    CHECK(!same_field(0, 1));
}

TEST_CASE("protect_dataset output does not depend on worker count")
{
    const Dataset ds = random_dataset(kCifar, 5, 40, 9);
    ShortcutParams p;
    p.method = Method::watermark;
    p.seed = 1;
    ::setenv("SHIELD_THREADS", "1", 1);
    const Dataset serial = protect_dataset(ds, p);
    ::setenv("SHIELD_THREADS", "4", 1);
    const Dataset parallel = protect_dataset(ds, p);
    ::unsetenv("SHIELD_THREADS");
    CHECK(bitwise_equal(serial, parallel));
}

TEST_CASE("shortcut parameter validation")
{
    ShortcutParams p;
    CHECK_NOTHROW(p.validate());
    p.alpha = 1.1;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = {};
    p.gamma = 0.49;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = {};
    p.sigma = 0.0;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = {};
    p.iterations = 0;
    CHECK_THROWS_AS(p.validate(), ParameterError);
    p = {};
    CHECK(p.square_side_for({32, 32, 3}) == 8);
    CHECK(p.square_side_for({224, 224, 3}) == 56);
    CHECK(p.square_side_for({30, 30, 3}) == 8);
    CHECK(parse_method("brightness") == Method::brightness);
    CHECK_THROWS_AS(parse_method("blur"), ParameterError);
}
