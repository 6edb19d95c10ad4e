#include "shield/shortcuts.hpp"

#include <algorithm>
#include <cmath>

#include "shield/parallel.hpp"

namespace shield {

std::string_view to_string(Method m)
{
    switch (m) {
    case Method::pixel: return "pixel";
    case Method::watermark: return "watermark";
    case Method::brightness: return "brightness";
    }
    return "pixel";
}

Method parse_method(std::string_view name)
{
    if (name == "pixel") return Method::pixel;
    if (name == "watermark") return Method::watermark;
    if (name == "brightness") return Method::brightness;
    throw ParameterError("unknown shortcut method '" + std::string(name) + "'");
}

void ShortcutParams::validate() const
{
    if (!(sigma > 0.0)) {
        throw ParameterError("sigma must be > 0, got " + std::to_string(sigma));
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ParameterError("alpha must lie in [0,1], got " + std::to_string(alpha));
    }
    if (!(gamma >= 0.5 && gamma <= 1.0)) {
        throw ParameterError("gamma must lie in [0.5,1], got " + std::to_string(gamma));
    }
    if (iterations < 1) {
        throw ParameterError("iterations must be >= 1, got " + std::to_string(iterations));
    }
    if (square_side < 0) {
        throw ParameterError("square side must be >= 1, got " + std::to_string(square_side));
    }
    if (!std::isfinite(mu)) {
        throw ParameterError("mu must be finite");
    }
}

int ShortcutParams::square_side_for(const Shape& shape) const
{
    return square_side > 0 ? square_side : (shape.width + 3) / 4;
}

PixelMask generate_pixel_mask(int label, Shape shape, double mu, double sigma, std::uint64_t seed)
{
    if (!(sigma > 0.0)) {
        throw ParameterError("pixel mask sigma must be > 0, got " + std::to_string(sigma));
    }
    Prng rng = Prng::child(seed, static_cast<std::uint64_t>(label));
    PixelMask mask{shape, label, Eigen::ArrayXd::Zero(shape.size())};
    for (Eigen::Index i = 0; i < mask.values.size(); ++i) {
        mask.values[i] = rng.next_gaussian(mu, sigma) > 0.5 ? 1.0 : 0.0;
    }
    return mask;
}

BrightnessMask generate_brightness_mask(int label, Shape shape, double gamma, int iterations,
                                        int square_side, std::uint64_t seed)
{
    if (!(gamma >= 0.5 && gamma <= 1.0)) {
        throw ParameterError("gamma must lie in [0.5,1], got " + std::to_string(gamma));
    }
    if (iterations < 1 || square_side < 1) {
        throw ParameterError("brightness modulation needs iterations >= 1 and square side >= 1");
    }
    Prng rng = Prng::child(seed, static_cast<std::uint64_t>(label));
    BrightnessMask mask{shape, label, Eigen::ArrayXd::Ones(shape.size())};
    const int half = square_side / 2;
    for (int t = 0; t < iterations; ++t) {
        const int cx = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(shape.width)));
        const int cy = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(shape.height)));
        const bool darken = rng.next_unit() < 0.5;
        const double factor = darken ? gamma : 2.0 - gamma;

        const int x0 = std::max(0, cx - half);
        const int x1 = std::min(shape.width, cx - half + square_side);
        const int y0 = std::max(0, cy - half);
        const int y1 = std::min(shape.height, cy - half + square_side);
        for (int c = 0; c < shape.channels; ++c) {
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    mask.values[c * shape.plane() + static_cast<Eigen::Index>(y) * shape.width + x] *=
                        factor;
                }
            }
        }
    }
    return mask;
}

Dataset protect_dataset(const Dataset& ds, const ShortcutParams& params, const GlyphSource& glyphs)
{
    params.validate();
    validate(ds);
    const Shape shape = ds.shape();
    const int K = ds.num_classes;

    Dataset out;
    out.num_classes = K;
    out.labels = ds.labels;
    out.images.resize(ds.size());
    if (ds.empty()) {
        return out;
    }

    switch (params.method) {
    case Method::pixel: {
        std::vector<PixelMask> masks;
        masks.reserve(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            masks.push_back(generate_pixel_mask(k, shape, params.mu, params.sigma, params.seed));
        }
        parallel_for(ds.size(), [&](std::size_t i) {
            out.images[i] = apply_pixel_pattern(ds.images[i], masks[ds.labels[i]]);
        });
        break;
    }
    case Method::brightness: {
        const int side = params.square_side_for(shape);
        std::vector<BrightnessMask> masks;
        masks.reserve(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            masks.push_back(
                generate_brightness_mask(k, shape, params.gamma, params.iterations, side, params.seed));
        }
        parallel_for(ds.size(), [&](std::size_t i) {
            out.images[i] = apply_brightness_modulation(ds.images[i], masks[ds.labels[i]]);
        });
        break;
    }
    case Method::watermark: {
        if (!glyphs.complete()) {
            throw ConfigError("watermarking needs at least one glyph exemplar for every digit");
        }
        parallel_for(ds.size(), [&](std::size_t i) {
            Prng rng = Prng::child(params.seed, static_cast<std::uint64_t>(K) + i);
            const auto stamp = render_class_watermark(ds.labels[i], shape, glyphs, rng);
            out.images[i] = apply_watermark(ds.images[i], stamp, params.alpha);
        });
        break;
    }
    }
    return out;
}

Dataset protect_dataset(const Dataset& ds, const ShortcutParams& params)
{
    static const GlyphSource fallback = GlyphSource::builtin();
    return protect_dataset(ds, params, fallback);
}

Image to_image(const PixelMask& mask) { return Image(mask.shape, mask.values); }

Image to_image(const BrightnessMask& mask)
{
    const double peak = mask.values.maxCoeff();
    return Image(mask.shape, mask.values / peak);
}

Image to_image(const WatermarkStamp& stamp) { return Image(stamp.shape, stamp.values); }

} // namespace shield
