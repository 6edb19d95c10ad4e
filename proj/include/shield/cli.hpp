#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shield/countermeasures.hpp"
#include "shield/dataio.hpp"
#include "shield/shortcuts.hpp"
#include "shield/trainer.hpp"

namespace shield::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
    kSuccess = 0,
    kUsageError = 2,
    kFormatError = 3,
    kConfigError = 4,
};

/// Where a dataset file lives and how to interpret its records.
struct DatasetLocation {
    fs::path path;
    /// Defaults to "<path>.manifest.json" when that file exists.
    std::optional<fs::path> manifest;
};

struct ProtectOptions {
    DatasetLocation input;
    fs::path output;
    std::optional<fs::path> manifest;
    ShortcutParams params;
    std::optional<fs::path> mnist_images;
    std::optional<fs::path> mnist_labels;
    /// Single-image PPM/PGM input needs its class and the class count.
    std::optional<int> label;
    std::optional<int> classes;
};

struct EvaluateOptions {
    DatasetLocation train;
    DatasetLocation val;
    fs::path out_dir;
    ModelConfig model;
    std::vector<double> learning_rates{0.1, 0.01};
    std::vector<std::uint64_t> seeds{0};
    int epochs = 30;
    int batch_size = 64;
    std::optional<AugmentationConfig> augmentation;
    /// Noise applied once to the training set before training, or freshly
    /// per image and epoch inside the augmentation pipeline.
    bool noise_per_epoch = false;
};

struct RunSummary {
    double learning_rate = 0.0;
    std::uint64_t seed = 0;
    EvalReport report;
    fs::path csv;
};

struct CountermeasureOptions {
    DatasetLocation input;
    fs::path output;
    std::optional<fs::path> manifest;
    AugmentationConfig config = AugmentationConfig::disabled();
    std::uint64_t seed = 0;
};

struct SynthOptions {
    SyntheticSpec spec;
    fs::path out_dir;
};

struct InspectOptions {
    DatasetLocation input;
    std::size_t index = 0;
    fs::path output;
    std::optional<fs::path> mnist_images;
    std::optional<fs::path> mnist_labels;
};

/// Loads a record file using its manifest's shape and class count (CIFAR-10
/// layout when there is no manifest).
Dataset load_dataset(const DatasetLocation& loc, DatasetManifest* manifest_out = nullptr);

DatasetManifest cmd_protect(const ProtectOptions& opts);
std::vector<RunSummary> cmd_evaluate(const EvaluateOptions& opts);
DatasetManifest cmd_countermeasure(const CountermeasureOptions& opts);
std::pair<DatasetManifest, DatasetManifest> cmd_synth(const SynthOptions& opts);
/// Writes the image and, when the manifest names a shortcut, its mask or
/// stamp next to it. Returns the written paths.
std::vector<fs::path> cmd_inspect(const InspectOptions& opts);

/// Parses arguments and dispatches; returns the process exit code.
int run(int argc, const char* const* argv);

} // namespace shield::cli
