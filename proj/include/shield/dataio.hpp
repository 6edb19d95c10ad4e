#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shield/core.hpp"
#include "shield/countermeasures.hpp"
#include "shield/shortcuts.hpp"

namespace shield {

namespace fs = std::filesystem;

inline constexpr Shape kCifarShape{32, 32, 3};
inline constexpr int kCifarClasses = 10;
inline constexpr std::size_t kCifarRecordBytes = 3073;

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// ---- raw file helpers -------------------------------------------------------

std::vector<std::uint8_t> read_file_bytes(const fs::path& path);

/// Writes to a sibling temporary file and renames it into place, so a failed
/// write never leaves a partial file at `path`.
void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const fs::path& path, const std::string& text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

// ---- CIFAR-10 binary --------------------------------------------------------

/// Records of one label byte followed by w*h*c planar pixel bytes. The
/// CIFAR-10 functions below fix the shape to 32x32x3 and K to 10; these
/// generic forms carry other shapes (crops) and class counts up to 255.
Dataset decode_records(std::span<const std::uint8_t> bytes, Shape shape, int num_classes);
std::vector<std::uint8_t> encode_records(const Dataset& ds);
Dataset read_records(const fs::path& path, Shape shape, int num_classes);
void write_records(const Dataset& ds, const fs::path& path);

Dataset read_cifar10_bin(const fs::path& path);
void write_cifar10_bin(const Dataset& ds, const fs::path& path);

// ---- MNIST IDX --------------------------------------------------------------

std::vector<Image> decode_idx_images(std::span<const std::uint8_t> bytes);
std::vector<int> decode_idx_labels(std::span<const std::uint8_t> bytes);
std::vector<Image> read_mnist_idx_images(const fs::path& path);
std::vector<int> read_mnist_idx_labels(const fs::path& path);
std::vector<std::uint8_t> encode_idx_images(const std::vector<Image>& images);
std::vector<std::uint8_t> encode_idx_labels(const std::vector<int>& labels);

/// Loads an MNIST image/label pair as a glyph source; counts must agree.
GlyphSource read_mnist_glyphs(const fs::path& images, const fs::path& labels);

// ---- PPM / PGM --------------------------------------------------------------

/// Binary P6 (3 channels) or P5 (1 channel), maxval 255.
Image decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const Image& img);
Image read_ppm(const fs::path& path);
void write_ppm(const Image& img, const fs::path& path);

// ---- manifests --------------------------------------------------------------

/// Provenance record written next to every released dataset file.
struct DatasetManifest {
    int version = 1;
    /// "pixel", "watermark", "brightness", or "none" for unprotected data.
    std::string method = "none";
    ShortcutParams params;
    std::uint64_t checksum = 0;
    Shape shape = kCifarShape;
    int classes = kCifarClasses;
    std::uint64_t seed = 0;
    /// Present when a countermeasure produced the file.
    std::optional<AugmentationConfig> augmentation;
    /// "builtin" or the MNIST image/label paths used for watermarks.
    std::string glyphs = "builtin";

    [[nodiscard]] std::string to_json() const;
    static DatasetManifest from_json(const std::string& text);

    friend bool operator==(const DatasetManifest& a, const DatasetManifest& b)
    {
        return a.to_json() == b.to_json();
    }
};

DatasetManifest read_manifest(const fs::path& path);
void write_manifest(const DatasetManifest& manifest, const fs::path& path);
/// Default manifest location for a dataset file: "<file>.manifest.json".
fs::path manifest_path_for(const fs::path& dataset);

// ---- synthetic data ---------------------------------------------------------

struct SyntheticSpec {
    int num_classes = 10;
    int n_per_class = 100;
    int n_val_per_class = 100;
    Shape shape = kCifarShape;
    double signal_strength = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Learnable clean task: class k is a gray field with a colored square at a
/// class-specific position, blended with uniform noise as
///   x = clamp01((1 - s) * u + s * prototype_k + N(0, noise_sigma)).
/// Returns (train, val); both splits come from the same per-class process
/// with disjoint image streams.
std::pair<Dataset, Dataset> generate_synthetic_dataset(const SyntheticSpec& spec);

} // namespace shield
