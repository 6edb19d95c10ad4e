#include "shield/countermeasures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace shield {

AugmentationConfig AugmentationConfig::disabled()
{
    AugmentationConfig cfg;
    cfg.crop_size = 0;
    cfg.translate_frac = 0.0;
    cfg.rotate_deg_max = 0.0;
    cfg.brightness_delta = 0.0;
    cfg.contrast_low = 1.0;
    cfg.contrast_high = 1.0;
    cfg.flip_prob = 0.0;
    cfg.noise_sigma = 0.0;
    return cfg;
}

void AugmentationConfig::validate(const Shape& input) const
{
    if (crop_size < 0 || crop_size > std::min(input.width, input.height)) {
        throw ParameterError("crop size " + std::to_string(crop_size) + " does not fit image " +
                             input.str());
    }
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
        throw ParameterError("flip probability must lie in [0,1]");
    }
    if (!(contrast_low <= contrast_high) || contrast_low < 0.0) {
        throw ParameterError("contrast range must satisfy 0 <= low <= high");
    }
    if (!(brightness_delta >= 0.0 && brightness_delta <= 1.0)) {
        throw ParameterError("brightness delta must lie in [0,1]");
    }
    if (!(translate_frac >= 0.0 && translate_frac <= 1.0) || !(rotate_deg_max >= 0.0)) {
        throw ParameterError("affine translation must lie in [0,1] and rotation must be >= 0");
    }
    if (!(noise_sigma >= 0.0)) {
        throw ParameterError("noise sigma must be >= 0");
    }
}

Shape AugmentationConfig::output_shape(const Shape& input) const
{
    if (crop_size <= 0) {
        return input;
    }
    return Shape{crop_size, crop_size, input.channels};
}

Image gaussian_noise(const Image& img, double sigma, Prng& rng)
{
    if (!(sigma >= 0.0)) {
        throw ParameterError("noise sigma must be >= 0, got " + std::to_string(sigma));
    }
    if (sigma == 0.0) {
        return img;
    }
    Image out = img;
    for (Eigen::Index i = 0; i < out.data.size(); ++i) {
        out.data[i] += rng.next_gaussian(0.0, sigma);
    }
    return clamp01(out);
}

Image crop(const Image& img, int left, int top, int crop_size)
{
    if (left < 0 || top < 0 || left + crop_size > img.shape.width ||
        top + crop_size > img.shape.height || crop_size < 1) {
        throw ParameterError("crop window outside image " + img.shape.str());
    }
    Image out(Shape{crop_size, crop_size, img.shape.channels});
    for (int c = 0; c < img.shape.channels; ++c) {
        for (int y = 0; y < crop_size; ++y) {
            out.data.segment(out.index(c, y, 0), crop_size) =
                img.data.segment(img.index(c, top + y, left), crop_size);
        }
    }
    return out;
}

Image random_crop(const Image& img, int crop_size, Prng& rng)
{
    if (crop_size < 1 || crop_size > std::min(img.shape.width, img.shape.height)) {
        throw ParameterError("crop size " + std::to_string(crop_size) + " does not fit image " +
                             img.shape.str());
    }
    const int left = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(img.shape.width - crop_size + 1)));
    const int top = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(img.shape.height - crop_size + 1)));
    return crop(img, left, top, crop_size);
}

Image center_crop(const Image& img, int crop_size)
{
    return crop(img, (img.shape.width - crop_size) / 2, (img.shape.height - crop_size) / 2, crop_size);
}

Image flip_columns(const Image& img)
{
    Image out(img.shape);
    for (int c = 0; c < img.shape.channels; ++c) {
        for (int y = 0; y < img.shape.height; ++y) {
            out.data.segment(out.index(c, y, 0), img.shape.width) =
                img.data.segment(img.index(c, y, 0), img.shape.width).reverse();
        }
    }
    return out;
}

Image horizontal_flip(const Image& img, double prob, Prng& rng)
{
    if (!(prob >= 0.0 && prob <= 1.0)) {
        throw ParameterError("flip probability must lie in [0,1]");
    }
    return rng.next_unit() < prob ? flip_columns(img) : img;
}

Image affine_transform(const Image& img, double theta_rad, double tx, double ty)
{
    const int w = img.shape.width;
    const int h = img.shape.height;
    const double cx = 0.5 * (w - 1);
    const double cy = 0.5 * (h - 1);
    const double cos_t = std::cos(theta_rad);
    const double sin_t = std::sin(theta_rad);

    auto sample = [&](int c, int x, int y) {
        return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : img.at(c, y, x);
    };

    Image out(img.shape);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = x - cx - tx;
            const double dy = y - cy - ty;
            // inverse rotation
            const double sx = cos_t * dx + sin_t * dy + cx;
            const double sy = -sin_t * dx + cos_t * dy + cy;
            const double fx0 = std::floor(sx);
            const double fy0 = std::floor(sy);
            const int x0 = static_cast<int>(fx0);
            const int y0 = static_cast<int>(fy0);
            const double ax = sx - fx0;
            const double ay = sy - fy0;
            for (int c = 0; c < img.shape.channels; ++c) {
                const double top = (1.0 - ax) * sample(c, x0, y0) + ax * sample(c, x0 + 1, y0);
                const double bottom = (1.0 - ax) * sample(c, x0, y0 + 1) + ax * sample(c, x0 + 1, y0 + 1);
                out.at(c, y, x) = (1.0 - ay) * top + ay * bottom;
            }
        }
    }
    return out;
}

Image random_affine(const Image& img, double translate_frac, double rotate_deg_max, Prng& rng)
{
    const double theta = rng.next_uniform(-rotate_deg_max, rotate_deg_max) * std::numbers::pi / 180.0;
    const double tx = rng.next_uniform(-translate_frac, translate_frac) * img.shape.width;
    const double ty = rng.next_uniform(-translate_frac, translate_frac) * img.shape.height;
    return affine_transform(img, theta, tx, ty);
}

Image adjust_color(const Image& img, double brightness, double contrast)
{
    const Image::Array scaled = brightness * img.data;
    double mean = 0.0;
    if (img.shape.channels == 3) {
        const Eigen::Index n = img.shape.plane();
        mean = (0.299 * scaled.segment(0, n) + 0.587 * scaled.segment(n, n) +
                0.114 * scaled.segment(2 * n, n))
                   .mean();
    } else {
        mean = scaled.mean();
    }
    return Image(img.shape, (mean + contrast * (scaled - mean)).max(0.0).min(1.0));
}

Image color_jitter(const Image& img, double brightness_delta, double contrast_low,
                   double contrast_high, Prng& rng)
{
    if (!(contrast_low <= contrast_high) || !(brightness_delta >= 0.0)) {
        throw ParameterError("color jitter needs delta >= 0 and contrast low <= high");
    }
    const double brightness = rng.next_uniform(1.0 - brightness_delta, 1.0 + brightness_delta);
    const double contrast = rng.next_uniform(contrast_low, contrast_high);
    return adjust_color(img, brightness, contrast);
}

Image augmentation_pipeline(const Image& img, const AugmentationConfig& cfg, Prng& rng,
                            bool include_noise)
{
    cfg.validate(img.shape);
    Image out = img;
    if (cfg.crop_size > 0 && cfg.crop_size < std::max(img.shape.width, img.shape.height)) {
        out = random_crop(out, cfg.crop_size, rng);
    }
    if (cfg.flip_prob > 0.0) {
        out = horizontal_flip(out, cfg.flip_prob, rng);
    }
    if (cfg.translate_frac > 0.0 || cfg.rotate_deg_max > 0.0) {
        out = random_affine(out, cfg.translate_frac, cfg.rotate_deg_max, rng);
    }
    if (cfg.brightness_delta > 0.0 || cfg.contrast_low != 1.0 || cfg.contrast_high != 1.0) {
        out = color_jitter(out, cfg.brightness_delta, cfg.contrast_low, cfg.contrast_high, rng);
    }
    if (include_noise && cfg.noise_sigma > 0.0) {
        out = gaussian_noise(out, cfg.noise_sigma, rng);
    }
    return out;
}

} // namespace shield
