#include <algorithm>
#include <cmath>
#include <string>

#include "shield/shortcuts.hpp"

namespace shield {
namespace {

using Bitmap = Eigen::ArrayXXd; // rows = y, cols = x

// 5x7 seed font; each row is five bits, most significant bit on the left.
constexpr std::array<std::array<unsigned, 7>, 10> kFont = {{
    {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110},
    {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110},
    {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111},
    {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110},
    {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010},
    {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110},
    {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110},
    {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000},
    {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110},
    {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100},
}};

constexpr int kGlyphSide = 28;

// Stamps a disc per lit font cell after a random scale/shear/offset, giving
// stroke-like 28x28 grayscale digits with per-exemplar variation.
Image draw_digit(int digit, Prng& rng)
{
    const double scale = rng.next_uniform(2.6, 3.2);
    const double shear = rng.next_uniform(-0.25, 0.25);
    const double cx = 14.0 + rng.next_uniform(-1.5, 1.5);
    const double cy = 14.0 + rng.next_uniform(-1.5, 1.5);
    const double radius = rng.next_uniform(1.4, 1.9);

    Image glyph(Shape{kGlyphSide, kGlyphSide, 1});
    for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
            if (((kFont[digit][row] >> (4 - col)) & 1u) == 0) {
                continue;
            }
            const double v = row - 3.0;
            const double px = cx + scale * ((col - 2.0) - shear * v);
            const double py = cy + scale * v;
            for (int y = 0; y < kGlyphSide; ++y) {
                for (int x = 0; x < kGlyphSide; ++x) {
                    const double d = std::hypot(x - px, y - py);
                    const double ink = std::clamp(radius + 0.5 - d, 0.0, 1.0);
                    glyph.at(0, y, x) = std::max(glyph.at(0, y, x), ink);
                }
            }
        }
    }
    return glyph;
}

Bitmap binarize(const Image& glyph, double threshold)
{
    Bitmap bits(glyph.shape.height, glyph.shape.width);
    for (int y = 0; y < glyph.shape.height; ++y) {
        for (int x = 0; x < glyph.shape.width; ++x) {
            bits(y, x) = glyph.at(0, y, x) >= threshold ? 1.0 : 0.0;
        }
    }
    return bits;
}

Bitmap crop_to_ink(const Bitmap& bits)
{
    int top = static_cast<int>(bits.rows()), bottom = -1;
    int left = static_cast<int>(bits.cols()), right = -1;
    for (int y = 0; y < bits.rows(); ++y) {
        for (int x = 0; x < bits.cols(); ++x) {
            if (bits(y, x) > 0.0) {
                top = std::min(top, y);
                bottom = std::max(bottom, y);
                left = std::min(left, x);
                right = std::max(right, x);
            }
        }
    }
    if (bottom < 0) {
        return bits;
    }
    return bits.block(top, left, bottom - top + 1, right - left + 1);
}

Bitmap resize_nearest(const Bitmap& src, Eigen::Index rows, Eigen::Index cols)
{
    Bitmap dst(rows, cols);
    for (Eigen::Index y = 0; y < rows; ++y) {
        const Eigen::Index sy = std::min<Eigen::Index>(src.rows() - 1, (2 * y + 1) * src.rows() / (2 * rows));
        for (Eigen::Index x = 0; x < cols; ++x) {
            const Eigen::Index sx =
                std::min<Eigen::Index>(src.cols() - 1, (2 * x + 1) * src.cols() / (2 * cols));
            dst(y, x) = src(sy, sx);
        }
    }
    return dst;
}

} // namespace

void GlyphSource::add(int digit, Image glyph)
{
    if (digit < 0 || digit > 9) {
        throw ConfigError("glyph digit must be 0..9, got " + std::to_string(digit));
    }
    if (glyph.shape.channels != 1 || glyph.shape.size() == 0) {
        throw ShapeError("glyph exemplars must be non-empty single-channel images");
    }
    digits_[static_cast<std::size_t>(digit)].push_back(std::move(glyph));
}

const std::vector<Image>& GlyphSource::exemplars(int digit) const
{
    return digits_.at(static_cast<std::size_t>(digit));
}

bool GlyphSource::complete() const
{
    return std::all_of(digits_.begin(), digits_.end(), [](const auto& v) { return !v.empty(); });
}

std::size_t GlyphSource::size() const
{
    std::size_t n = 0;
    for (const auto& v : digits_) {
        n += v.size();
    }
    return n;
}

GlyphSource GlyphSource::from_labeled(const std::vector<Image>& images, const std::vector<int>& labels)
{
    if (images.size() != labels.size()) {
        throw ShapeError("glyph images and labels differ in length");
    }
    GlyphSource source;
    for (std::size_t i = 0; i < images.size(); ++i) {
        source.add(labels[i], images[i]);
    }
    return source;
}

GlyphSource GlyphSource::builtin(std::uint64_t seed, int per_digit)
{
    GlyphSource source;
    for (int digit = 0; digit < 10; ++digit) {
        Prng rng = Prng::child(seed, static_cast<std::uint64_t>(digit));
        for (int i = 0; i < per_digit; ++i) {
            source.add(digit, draw_digit(digit, rng));
        }
    }
    return source;
}

WatermarkStamp render_class_watermark(int label, Shape shape, const GlyphSource& glyphs, Prng& rng,
                                      const WatermarkLayout& layout)
{
    if (label < 0) {
        throw ParameterError("class index must be non-negative");
    }
    const std::string digits = std::to_string(label);
    for (char ch : digits) {
        if (glyphs.exemplars(ch - '0').empty()) {
            throw ConfigError(std::string("glyph source has no exemplar for digit ") + ch);
        }
    }

    const Eigen::Index target_h =
        std::max<Eigen::Index>(1, std::min<Eigen::Index>(shape.height, static_cast<Eigen::Index>(shape.height) *
                                                                           layout.height_numerator /
                                                                           layout.height_denominator));
    std::vector<Bitmap> parts;
    Eigen::Index block_w = 0;
    for (char ch : digits) {
        const auto& pool = glyphs.exemplars(ch - '0');
        const auto& exemplar = pool[static_cast<std::size_t>(rng.next_below(pool.size()))];
        const Bitmap ink = crop_to_ink(binarize(exemplar, layout.binarize_threshold));
        const auto w = std::max<Eigen::Index>(
            1, static_cast<Eigen::Index>(std::lround(static_cast<double>(ink.cols()) * target_h /
                                                     static_cast<double>(ink.rows()))));
        parts.push_back(resize_nearest(ink, target_h, w));
        block_w += w;
    }
    block_w += layout.gap * static_cast<Eigen::Index>(parts.size() - 1);

    Bitmap block = Bitmap::Zero(target_h, block_w);
    Eigen::Index x = 0;
    for (const auto& part : parts) {
        block.block(0, x, part.rows(), part.cols()) = part;
        x += part.cols() + layout.gap;
    }
    if (block.cols() > shape.width) {
        const auto rows = std::max<Eigen::Index>(
            1, static_cast<Eigen::Index>(static_cast<double>(block.rows()) * shape.width /
                                         static_cast<double>(block.cols())));
        block = resize_nearest(block, rows, shape.width);
    }

    WatermarkStamp stamp{shape, Eigen::ArrayXd::Zero(shape.size())};
    const Eigen::Index ox = (shape.width - block.cols()) / 2;
    const Eigen::Index oy = (shape.height - block.rows()) / 2;
    for (int c = 0; c < shape.channels; ++c) {
        for (Eigen::Index y = 0; y < block.rows(); ++y) {
            for (Eigen::Index xx = 0; xx < block.cols(); ++xx) {
                stamp.values[c * shape.plane() + (oy + y) * shape.width + ox + xx] = block(y, xx);
            }
        }
    }
    return stamp;
}

} // namespace shield
