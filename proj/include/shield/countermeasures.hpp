#pragma once

#include <optional>

#include "shield/core.hpp"
#include "shield/rng.hpp"

namespace shield {

/// Train-time augmentations an adversary may use against a protected release.
/// Neutral values disable a stage: crop_size 0 (or the full side), flip_prob 0,
/// translate/rotate 0, brightness_delta 0 with contrast [1,1], noise_sigma 0.
struct AugmentationConfig {
    int crop_size = 28;
    double translate_frac = 0.1;
    double rotate_deg_max = 30.0;
    double brightness_delta = 0.8;
    double contrast_low = 0.9;
    double contrast_high = 1.08;
    double flip_prob = 0.5;
    double noise_sigma = 0.05;

    /// Every stage neutral; the pipeline is then the identity.
    static AugmentationConfig disabled();

    void validate(const Shape& input) const;
    /// Output shape of the pipeline for a given input shape.
    [[nodiscard]] Shape output_shape(const Shape& input) const;
};

/// Adds N(0, sigma) to every pixel, then clamps to [0,1].
[[nodiscard]] Image gaussian_noise(const Image& img, double sigma, Prng& rng);

[[nodiscard]] Image random_crop(const Image& img, int crop_size, Prng& rng);
[[nodiscard]] Image crop(const Image& img, int left, int top, int crop_size);
[[nodiscard]] Image center_crop(const Image& img, int crop_size);

[[nodiscard]] Image horizontal_flip(const Image& img, double prob, Prng& rng);
[[nodiscard]] Image flip_columns(const Image& img);

/// Samples theta ~ U[-max, max] degrees and (tx, ty) ~ U[-frac, frac] * (w, h).
[[nodiscard]] Image random_affine(const Image& img, double translate_frac, double rotate_deg_max,
                                  Prng& rng);
/// Inverse-maps each output pixel through a rotation about the image center
/// followed by a translation; bilinear sampling, zero outside the image.
[[nodiscard]] Image affine_transform(const Image& img, double theta_rad, double tx, double ty);

/// brightness factor ~ U[1 - delta, 1 + delta], contrast ~ U[low, high].
[[nodiscard]] Image color_jitter(const Image& img, double brightness_delta, double contrast_low,
                                 double contrast_high, Prng& rng);
/// clamp01(mean + contrast * (brightness * x - mean)), mean = grayscale mean of brightness * x.
[[nodiscard]] Image adjust_color(const Image& img, double brightness, double contrast);

/// crop -> flip -> affine -> jitter, then optional noise when include_noise is set.
[[nodiscard]] Image augmentation_pipeline(const Image& img, const AugmentationConfig& cfg, Prng& rng,
                                          bool include_noise = true);

} // namespace shield
