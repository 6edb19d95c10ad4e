#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shield/core.hpp"
#include "shield/rng.hpp"

namespace shield {

/// Brightest representable intensity after [0,1] normalization.
inline constexpr double kMaxIntensity = 1.0;

enum class Method { pixel, watermark, brightness };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct ShortcutParams {
    Method method = Method::pixel;
    double mu = 0.01;
    double sigma = 0.2;
    double alpha = 0.5;
    double gamma = 0.9;
    int iterations = 32;
    /// Brightness square side in pixels; 0 selects ceil(width / 4).
    int square_side = 0;
    std::uint64_t seed = 0;

    /// Throws ParameterError when any field is outside its domain.
    void validate() const;
    [[nodiscard]] int square_side_for(const Shape& shape) const;
};

/// Class-level binary mask: entries set to 1 are saturated by the pixel pattern.
struct PixelMask {
    Shape shape;
    int label = 0;
    Eigen::ArrayXd values;
};

/// Class-level multiplicative field; every entry is gamma^a (2 - gamma)^b.
struct BrightnessMask {
    Shape shape;
    int label = 0;
    Eigen::ArrayXd values;
};

/// Per-image binary overlay, constant across channels.
struct WatermarkStamp {
    Shape shape;
    Eigen::ArrayXd values;
};

/// Digit exemplars (single-channel, any size) used to draw class indices.
class GlyphSource {
public:
    GlyphSource() = default;

    void add(int digit, Image glyph);
    [[nodiscard]] const std::vector<Image>& exemplars(int digit) const;
    /// True when every decimal digit has at least one exemplar.
    [[nodiscard]] bool complete() const;
    [[nodiscard]] std::size_t size() const;

    /// Builds a source from MNIST-style images and labels (labels 0..9).
    static GlyphSource from_labeled(const std::vector<Image>& images, const std::vector<int>& labels);

    /// Procedurally drawn 28x28 handwritten-style digits, used when no MNIST
    /// files are supplied. Deterministic in (seed, per_digit).
    static GlyphSource builtin(std::uint64_t seed = 0x5EED, int per_digit = 16);

private:
    std::array<std::vector<Image>, 10> digits_;
};

/// Geometry of the rendered class-index overlay.
struct WatermarkLayout {
    double binarize_threshold = 0.5;
    int height_numerator = 28;
    int height_denominator = 32;
    int gap = 1;
};

[[nodiscard]] PixelMask generate_pixel_mask(int label, Shape shape, double mu, double sigma,
                                            std::uint64_t seed);

[[nodiscard]] BrightnessMask generate_brightness_mask(int label, Shape shape, double gamma,
                                                      int iterations, int square_side,
                                                      std::uint64_t seed);

[[nodiscard]] WatermarkStamp render_class_watermark(int label, Shape shape, const GlyphSource& glyphs,
                                                    Prng& rng, const WatermarkLayout& layout = {});

/// x' = (1 - mask) * x + mask * x_max
template <typename Scalar>
[[nodiscard]] BasicImage<Scalar> apply_pixel_pattern(const BasicImage<Scalar>& img,
                                                     const PixelMask& mask)
{
    require_same_shape(img.shape, mask.shape, "apply_pixel_pattern");
    const auto delta = mask.values.cast<Scalar>();
    return BasicImage<Scalar>(img.shape, (Scalar(1) - delta) * img.data +
                                             delta * static_cast<Scalar>(kMaxIntensity));
}

/// x' = alpha * M + (1 - alpha) * M * x + (1 - M) * x
template <typename Scalar>
[[nodiscard]] BasicImage<Scalar> apply_watermark(const BasicImage<Scalar>& img,
                                                 const WatermarkStamp& stamp, double alpha)
{
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ParameterError("watermark alpha must lie in [0,1], got " + std::to_string(alpha));
    }
    require_same_shape(img.shape, stamp.shape, "apply_watermark");
    const auto m = stamp.values.cast<Scalar>();
    const auto a = static_cast<Scalar>(alpha);
    return BasicImage<Scalar>(img.shape,
                              a * m + (Scalar(1) - a) * m * img.data + (Scalar(1) - m) * img.data);
}

/// x' = clamp01(B * x)
template <typename Scalar>
[[nodiscard]] BasicImage<Scalar> apply_brightness_modulation(const BasicImage<Scalar>& img,
                                                             const BrightnessMask& mask)
{
    require_same_shape(img.shape, mask.shape, "apply_brightness_modulation");
    return BasicImage<Scalar>(
        img.shape, (mask.values.cast<Scalar>() * img.data).max(Scalar(0)).min(Scalar(1)));
}

/// Applies the selected shortcut to every image. Labels and order are kept;
/// class masks come from child(seed, k), watermark stamps from
/// child(seed, K + image_index). Output does not depend on worker count.
[[nodiscard]] Dataset protect_dataset(const Dataset& ds, const ShortcutParams& params,
                                      const GlyphSource& glyphs);
[[nodiscard]] Dataset protect_dataset(const Dataset& ds, const ShortcutParams& params);

/// Renders a mask or stamp as an image for inspection; brightness masks are
/// divided by their maximum entry so they fit in [0,1].
[[nodiscard]] Image to_image(const PixelMask& mask);
[[nodiscard]] Image to_image(const BrightnessMask& mask);
[[nodiscard]] Image to_image(const WatermarkStamp& stamp);

} // namespace shield
