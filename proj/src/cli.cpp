#include "shield/cli.hpp"

#include <cstdio>
#include <iostream>
#include <system_error>

#include "CLI11.hpp"
#include "shield/parallel.hpp"

namespace shield::cli {
namespace {

/// Raised for flag combinations that are rejected before any I/O.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr std::uint64_t kOnceNoiseTag = 0x4E015EULL;

bool is_pnm_path(const fs::path& p)
{
    const auto ext = p.extension().string();
    return ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

std::optional<fs::path> manifest_for(const DatasetLocation& loc)
{
    if (loc.manifest) {
        return loc.manifest;
    }
    const fs::path implicit = manifest_path_for(loc.path);
    if (fs::exists(implicit)) {
        return implicit;
    }
    return std::nullopt;
}

GlyphSource load_glyphs(const std::optional<fs::path>& images, const std::optional<fs::path>& labels)
{
    if (images && labels) {
        return read_mnist_glyphs(*images, *labels);
    }
    return GlyphSource::builtin();
}

std::string glyph_tag(const std::optional<fs::path>& images, const std::optional<fs::path>& labels)
{
    if (images && labels) {
        return "mnist:" + images->string() + "," + labels->string();
    }
    return "builtin";
}

std::string format_lr(double lr)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", lr);
    return buf;
}

Dataset apply_noise_once(const Dataset& ds, double sigma, std::uint64_t seed)
{
    Dataset out = ds;
    const std::uint64_t noise_seed = Prng::derive_seed(seed, kOnceNoiseTag);
    parallel_for(ds.size(), [&](std::size_t i) {
        Prng rng = Prng::child(noise_seed, i);
        out.images[i] = gaussian_noise(ds.images[i], sigma, rng);
    });
    return out;
}

fs::path mask_path_for(const fs::path& image_out)
{
    fs::path p = image_out;
    p.replace_extension();
    p += ".mask.ppm";
    return p;
}

} // namespace

Dataset load_dataset(const DatasetLocation& loc, DatasetManifest* manifest_out)
{
    if (const auto mpath = manifest_for(loc)) {
        const DatasetManifest m = read_manifest(*mpath);
        if (manifest_out != nullptr) {
            *manifest_out = m;
        }
        return read_records(loc.path, m.shape, m.classes);
    }
    if (manifest_out != nullptr) {
        *manifest_out = DatasetManifest{};
    }
    return read_cifar10_bin(loc.path);
}

DatasetManifest cmd_protect(const ProtectOptions& opts)
{
    opts.params.validate();
    DatasetManifest manifest;
    manifest.method = std::string(to_string(opts.params.method));
    manifest.params = opts.params;
    manifest.seed = opts.params.seed;
    manifest.glyphs = glyph_tag(opts.mnist_images, opts.mnist_labels);

    const GlyphSource glyphs = opts.params.method == Method::watermark
                                   ? load_glyphs(opts.mnist_images, opts.mnist_labels)
                                   : GlyphSource{};

    const auto bytes = read_file_bytes(opts.input.path);
    manifest.checksum = fnv1a64(bytes);

    if (is_pnm_path(opts.input.path)) {
        if (!opts.label || !opts.classes) {
            throw UsageError("image input needs --label and --classes");
        }
        Dataset ds;
        ds.num_classes = *opts.classes;
        ds.images.push_back(decode_pnm(bytes));
        ds.labels.push_back(*opts.label);
        const Dataset protectedset = protect_dataset(ds, opts.params, glyphs);
        manifest.shape = ds.shape();
        manifest.classes = ds.num_classes;
        write_ppm(protectedset.images.front(), opts.output);
    } else {
        Shape shape = kCifarShape;
        int classes = kCifarClasses;
        if (const auto mpath = manifest_for(opts.input)) {
            const DatasetManifest in = read_manifest(*mpath);
            shape = in.shape;
            classes = in.classes;
        }
        const Dataset ds = decode_records(bytes, shape, classes);
        manifest.shape = shape;
        manifest.classes = classes;
        write_records(protect_dataset(ds, opts.params, glyphs), opts.output);
    }
    write_manifest(manifest, opts.manifest.value_or(manifest_path_for(opts.output)));
    return manifest;
}

std::vector<RunSummary> cmd_evaluate(const EvaluateOptions& opts)
{
    if (opts.learning_rates.empty() || opts.seeds.empty()) {
        throw UsageError("evaluate needs at least one learning rate and one seed");
    }
    const Dataset train_ds = load_dataset(opts.train);
    const Dataset val_ds = load_dataset(opts.val);
    fs::create_directories(opts.out_dir);

    std::optional<AugmentationConfig> aug = opts.augmentation;
    double once_sigma = 0.0;
    if (aug && !opts.noise_per_epoch) {
        once_sigma = aug->noise_sigma;
        aug->noise_sigma = 0.0;
    }

    std::vector<RunSummary> runs;
    for (double lr : opts.learning_rates) {
        for (std::uint64_t seed : opts.seeds) {
            TrainConfig cfg;
            cfg.learning_rate = lr;
            cfg.epochs = opts.epochs;
            cfg.batch_size = opts.batch_size;
            cfg.seed = seed;
            cfg.augmentation = aug;
            const Dataset noisy = once_sigma > 0.0 ? apply_noise_once(train_ds, once_sigma, seed) : Dataset{};
            RunSummary run;
            run.learning_rate = lr;
            run.seed = seed;
            run.report = train(opts.model, once_sigma > 0.0 ? noisy : train_ds, val_ds, cfg).report;
            run.csv = opts.out_dir / ("run_lr" + format_lr(lr) + "_seed" + std::to_string(seed) + ".csv");
            write_file_atomic(run.csv, run.report.to_csv());
            runs.push_back(std::move(run));
        }
    }

    std::string summary = "lr,seed,best_val_acc,best_epoch,final_train_acc,final_val_acc,final_gap\n";
    const RunSummary* best = nullptr;
    char line[256];
    for (const auto& r : runs) {
        std::snprintf(line, sizeof line, "%s,%llu,%.6f,%d,%.6f,%.6f,%.6f\n", format_lr(r.learning_rate).c_str(),
                      static_cast<unsigned long long>(r.seed), r.report.best_val_accuracy,
                      r.report.best().epoch, r.report.final_epoch().train_accuracy,
                      r.report.final_epoch().val_accuracy, r.report.generalization_gap);
        summary += line;
        if (best == nullptr || r.report.best_val_accuracy > best->report.best_val_accuracy) {
            best = &r;
        }
    }
    std::snprintf(line, sizeof line, "best,%s,%llu,%.6f\n", format_lr(best->learning_rate).c_str(),
                  static_cast<unsigned long long>(best->seed), best->report.best_val_accuracy);
    summary += line;
    write_file_atomic(opts.out_dir / "summary.csv", summary);
    return runs;
}

DatasetManifest cmd_countermeasure(const CountermeasureOptions& opts)
{
    DatasetManifest manifest;
    const auto bytes = read_file_bytes(opts.input.path);
    Dataset ds;
    if (const auto mpath = manifest_for(opts.input)) {
        manifest = read_manifest(*mpath);
        ds = decode_records(bytes, manifest.shape, manifest.classes);
    } else {
        ds = decode_records(bytes, kCifarShape, kCifarClasses);
    }
    opts.config.validate(manifest.shape);

    Dataset out;
    out.num_classes = ds.num_classes;
    out.labels = ds.labels;
    out.images.resize(ds.size());
    parallel_for(ds.size(), [&](std::size_t i) {
        Prng rng = Prng::child(opts.seed, i);
        out.images[i] = augmentation_pipeline(ds.images[i], opts.config, rng);
    });

    manifest.checksum = fnv1a64(bytes);
    manifest.shape = opts.config.output_shape(manifest.shape);
    manifest.augmentation = opts.config;
    manifest.seed = opts.seed;
    write_records(out, opts.output);
    write_manifest(manifest, opts.manifest.value_or(manifest_path_for(opts.output)));
    return manifest;
}

std::pair<DatasetManifest, DatasetManifest> cmd_synth(const SynthOptions& opts)
{
    opts.spec.validate();
    if (opts.spec.num_classes > 256) {
        throw ParameterError("record files hold at most 256 classes");
    }
    const auto [train_ds, val_ds] = generate_synthetic_dataset(opts.spec);
    fs::create_directories(opts.out_dir);

    auto emit = [&](const Dataset& ds, const std::string& name) {
        const fs::path path = opts.out_dir / (name + ".bin");
        const auto bytes = encode_records(ds);
        write_file_atomic(path, bytes);
        DatasetManifest m;
        m.method = "none";
        m.shape = opts.spec.shape;
        m.classes = opts.spec.num_classes;
        m.seed = opts.spec.seed;
        m.checksum = fnv1a64(bytes);
        write_manifest(m, manifest_path_for(path));
        return m;
    };
    return {emit(train_ds, "train"), emit(val_ds, "val")};
}

std::vector<fs::path> cmd_inspect(const InspectOptions& opts)
{
    DatasetManifest manifest;
    const Dataset ds = load_dataset(opts.input, &manifest);
    if (opts.index >= ds.size()) {
        throw ParameterError("index " + std::to_string(opts.index) + " out of range (dataset has " +
                             std::to_string(ds.size()) + " images)");
    }
    std::vector<fs::path> written;
    write_ppm(ds.images[opts.index], opts.output);
    written.push_back(opts.output);

    if (manifest.method == "none" || manifest.augmentation) {
        return written;
    }
    const int label = ds.labels[opts.index];
    const ShortcutParams& p = manifest.params;
    Image mask;
    switch (parse_method(manifest.method)) {
    case Method::pixel:
        mask = to_image(generate_pixel_mask(label, ds.shape(), p.mu, p.sigma, p.seed));
        break;
    case Method::brightness:
        mask = to_image(generate_brightness_mask(label, ds.shape(), p.gamma, p.iterations,
                                                 p.square_side_for(ds.shape()), p.seed));
        break;
    case Method::watermark: {
        std::optional<fs::path> images = opts.mnist_images;
        std::optional<fs::path> labels = opts.mnist_labels;
        if (!images && manifest.glyphs.rfind("mnist:", 0) == 0) {
            const std::string spec = manifest.glyphs.substr(6);
            const auto comma = spec.find(',');
            images = spec.substr(0, comma);
            labels = spec.substr(comma + 1);
        }
        Prng rng = Prng::child(p.seed, static_cast<std::uint64_t>(ds.num_classes) + opts.index);
        mask = to_image(render_class_watermark(label, ds.shape(), load_glyphs(images, labels), rng));
        break;
    }
    }
    const fs::path mpath = mask_path_for(opts.output);
    write_ppm(mask, mpath);
    written.push_back(mpath);
    return written;
}

namespace {

void add_augmentation_flags(CLI::App& cmd, AugmentationConfig& cfg, bool& enable)
{
    cmd.add_flag("--augment", enable, "Start from the aggressive augmentation defaults");
    cmd.add_option("--crop", cfg.crop_size, "Random crop side (0 disables)");
    cmd.add_option("--translate", cfg.translate_frac, "Max affine translation as a fraction of size");
    cmd.add_option("--rotate", cfg.rotate_deg_max, "Max affine rotation in degrees");
    cmd.add_option("--brightness", cfg.brightness_delta, "Brightness factor range 1 +/- delta");
    cmd.add_option("--contrast-low", cfg.contrast_low, "Lower contrast factor");
    cmd.add_option("--contrast-high", cfg.contrast_high, "Upper contrast factor");
    cmd.add_option("--flip-prob", cfg.flip_prob, "Horizontal flip probability");
    cmd.add_option("--noise-sigma", cfg.noise_sigma, "Gaussian noise standard deviation");
}

// Options given explicitly override the chosen base configuration.
AugmentationConfig resolve_augmentation(const CLI::App& cmd, const AugmentationConfig& parsed, bool enable)
{
    AugmentationConfig cfg = enable ? AugmentationConfig{} : AugmentationConfig::disabled();
    auto given = [&](const char* name) { return cmd.get_option(name)->count() > 0; };
    if (given("--crop")) cfg.crop_size = parsed.crop_size;
    if (given("--translate")) cfg.translate_frac = parsed.translate_frac;
    if (given("--rotate")) cfg.rotate_deg_max = parsed.rotate_deg_max;
    if (given("--brightness")) cfg.brightness_delta = parsed.brightness_delta;
    if (given("--contrast-low")) cfg.contrast_low = parsed.contrast_low;
    if (given("--contrast-high")) cfg.contrast_high = parsed.contrast_high;
    if (given("--flip-prob")) cfg.flip_prob = parsed.flip_prob;
    if (given("--noise-sigma")) cfg.noise_sigma = parsed.noise_sigma;
    return cfg;
}

bool any_given(const CLI::App& cmd, std::initializer_list<const char*> names)
{
    for (const char* n : names) {
        if (cmd.get_option(n)->count() > 0) {
            return true;
        }
    }
    return false;
}

} // namespace

int run(int argc, const char* const* argv)
{
    CLI::App app{"Protect image datasets with class-conditional adversarial shortcuts"};
    app.require_subcommand(1);

    // protect
    ProtectOptions protect;
    std::string protect_method = "pixel";
    std::string protect_seed = "0";
    std::string protect_manifest, protect_in_manifest, mnist_images, mnist_labels;
    int label = -1, classes = -1;
    auto* p = app.add_subcommand("protect", "Apply a shortcut to a dataset file");
    p->add_option("--in", protect.input.path, "Input dataset (records) or PPM/PGM image")->required();
    p->add_option("--out", protect.output, "Output path")->required();
    p->add_option("--manifest", protect_manifest, "Output manifest path");
    p->add_option("--in-manifest", protect_in_manifest, "Manifest describing the input records");
    p->add_option("--method", protect_method, "pixel | watermark | brightness")
        ->check(CLI::IsMember({"pixel", "watermark", "brightness"}));
    p->add_option("--mu", protect.params.mu, "Pixel mask mean");
    p->add_option("--sigma", protect.params.sigma, "Pixel mask standard deviation");
    p->add_option("--alpha", protect.params.alpha, "Watermark blend factor");
    p->add_option("--gamma", protect.params.gamma, "Brightness factor");
    p->add_option("--iterations", protect.params.iterations, "Brightness squares");
    p->add_option("--square-side", protect.params.square_side, "Brightness square side (0 = width/4)");
    p->add_option("--seed", protect_seed, "Release seed (decimal or 0x hex)");
    p->add_option("--mnist-images", mnist_images, "MNIST IDX images for watermark glyphs");
    p->add_option("--mnist-labels", mnist_labels, "MNIST IDX labels for watermark glyphs");
    p->add_option("--label", label, "Class of a single-image input");
    p->add_option("--classes", classes, "Class count for a single-image input");

    // evaluate
    EvaluateOptions evaluate;
    std::vector<std::string> eval_seeds{"0"};
    std::string model_kind = "linear";
    std::string train_manifest, val_manifest, noise_mode = "once";
    AugmentationConfig eval_aug_parsed;
    bool eval_augment = false;
    auto* e = app.add_subcommand("evaluate", "Train the oracle over a (lr, seed) sweep");
    e->add_option("--train", evaluate.train.path, "Training records")->required();
    e->add_option("--val", evaluate.val.path, "Clean validation records")->required();
    e->add_option("--train-manifest", train_manifest);
    e->add_option("--val-manifest", val_manifest);
    e->add_option("--out", evaluate.out_dir, "Directory for run CSVs and summary.csv")->required();
    e->add_option("--lr", evaluate.learning_rates, "Learning rates (comma separated or repeated)")->delimiter(',');
    e->add_option("--seed", eval_seeds, "Training seeds (comma separated or repeated)")->delimiter(',');
    e->add_option("--epochs", evaluate.epochs);
    e->add_option("--batch-size", evaluate.batch_size);
    e->add_option("--model", model_kind, "linear | mlp")->check(CLI::IsMember({"linear", "mlp"}));
    e->add_option("--hidden", evaluate.model.hidden_dim, "MLP hidden width");
    e->add_option("--noise-mode", noise_mode, "once | per-epoch")->check(CLI::IsMember({"once", "per-epoch"}));
    add_augmentation_flags(*e, eval_aug_parsed, eval_augment);

    // countermeasure
    CountermeasureOptions counter;
    std::string counter_seed = "0", counter_manifest, counter_in_manifest;
    AugmentationConfig counter_parsed;
    bool counter_augment = false;
    auto* c = app.add_subcommand("countermeasure", "Apply noise/augmentations to a dataset file");
    c->add_option("--in", counter.input.path)->required();
    c->add_option("--out", counter.output)->required();
    c->add_option("--manifest", counter_manifest);
    c->add_option("--in-manifest", counter_in_manifest);
    c->add_option("--seed", counter_seed);
    add_augmentation_flags(*c, counter_parsed, counter_augment);

    // synth
    SynthOptions synth;
    std::string synth_seed = "0";
    auto* s = app.add_subcommand("synth", "Generate a synthetic train/val task");
    s->add_option("--out", synth.out_dir, "Output directory (train.bin, val.bin)")->required();
    s->add_option("--classes", synth.spec.num_classes);
    s->add_option("--per-class", synth.spec.n_per_class);
    s->add_option("--val-per-class", synth.spec.n_val_per_class);
    s->add_option("--signal", synth.spec.signal_strength);
    s->add_option("--noise", synth.spec.noise_sigma);
    s->add_option("--width", synth.spec.shape.width);
    s->add_option("--height", synth.spec.shape.height);
    s->add_option("--channels", synth.spec.shape.channels);
    s->add_option("--seed", synth_seed);

    // inspect
    InspectOptions inspect;
    std::string inspect_manifest, inspect_mnist_images, inspect_mnist_labels;
    auto* i = app.add_subcommand("inspect", "Export one image (and its mask) as PPM/PGM");
    i->add_option("--in", inspect.input.path)->required();
    i->add_option("--index", inspect.index)->required();
    i->add_option("--out", inspect.output)->required();
    i->add_option("--manifest", inspect_manifest);
    i->add_option("--mnist-images", inspect_mnist_images);
    i->add_option("--mnist-labels", inspect_mnist_labels);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kSuccess : kUsageError;
    }

    auto opt_path = [](const std::string& v) -> std::optional<fs::path> {
        return v.empty() ? std::nullopt : std::optional<fs::path>(v);
    };

    try {
        if (p->parsed()) {
            protect.params.method = parse_method(protect_method);
            const Method m = protect.params.method;
            if (m != Method::pixel && any_given(*p, {"--mu", "--sigma"})) {
                throw UsageError("--mu/--sigma only apply to --method pixel");
            }
            if (m != Method::watermark && any_given(*p, {"--alpha", "--mnist-images", "--mnist-labels"})) {
                throw UsageError("--alpha and MNIST glyph flags only apply to --method watermark");
            }
            if (m != Method::brightness && any_given(*p, {"--gamma", "--iterations", "--square-side"})) {
                throw UsageError("--gamma/--iterations/--square-side only apply to --method brightness");
            }
            if (mnist_images.empty() != mnist_labels.empty()) {
                throw UsageError("--mnist-images and --mnist-labels must be given together");
            }
            protect.params.seed = parse_seed(protect_seed);
            protect.manifest = opt_path(protect_manifest);
            protect.input.manifest = opt_path(protect_in_manifest);
            protect.mnist_images = opt_path(mnist_images);
            protect.mnist_labels = opt_path(mnist_labels);
            if (label >= 0) protect.label = label;
            if (classes >= 0) protect.classes = classes;
            protect.params.validate();
            cmd_protect(protect);
        } else if (e->parsed()) {
            evaluate.model.kind = parse_model_kind(model_kind);
            evaluate.seeds.clear();
            for (const auto& seed : eval_seeds) {
                evaluate.seeds.push_back(parse_seed(seed));
            }
            evaluate.train.manifest = opt_path(train_manifest);
            evaluate.val.manifest = opt_path(val_manifest);
            const bool any_aug = eval_augment || any_given(*e, {"--crop", "--translate", "--rotate", "--brightness",
                                                                "--contrast-low", "--contrast-high", "--flip-prob",
                                                                "--noise-sigma"});
            if (any_aug) {
                evaluate.augmentation = resolve_augmentation(*e, eval_aug_parsed, eval_augment);
            }
            evaluate.noise_per_epoch = noise_mode == "per-epoch";
            const auto runs = cmd_evaluate(evaluate);
            for (const auto& r : runs) {
                std::cout << "lr=" << format_lr(r.learning_rate) << " seed=" << r.seed
                          << " best_val=" << r.report.best_val_accuracy
                          << " gap=" << r.report.generalization_gap << "\n";
            }
        } else if (c->parsed()) {
            counter.seed = parse_seed(counter_seed);
            counter.manifest = opt_path(counter_manifest);
            counter.input.manifest = opt_path(counter_in_manifest);
            counter.config = resolve_augmentation(*c, counter_parsed, counter_augment);
            cmd_countermeasure(counter);
        } else if (s->parsed()) {
            synth.spec.seed = parse_seed(synth_seed);
            cmd_synth(synth);
        } else if (i->parsed()) {
            inspect.input.manifest = opt_path(inspect_manifest);
            inspect.mnist_images = opt_path(inspect_mnist_images);
            inspect.mnist_labels = opt_path(inspect_mnist_labels);
            for (const auto& path : cmd_inspect(inspect)) {
                std::cout << path.string() << "\n";
            }
        }
    } catch (const UsageError& err) {
        std::cerr << "usage error: " << err.what() << "\n";
        return kUsageError;
    } catch (const FormatError& err) {
        std::cerr << "format error: " << err.what() << "\n";
        return kFormatError;
    } catch (const std::system_error& err) {
        std::cerr << "i/o error: " << err.what() << "\n";
        return kFormatError;
    } catch (const ParameterError& err) {
        std::cerr << "parameter error: " << err.what() << "\n";
        return kConfigError;
    } catch (const ConfigError& err) {
        std::cerr << "configuration error: " << err.what() << "\n";
        return kConfigError;
    } catch (const ShapeError& err) {
        std::cerr << "shape error: " << err.what() << "\n";
        return kConfigError;
    }
    return kSuccess;
}

} // namespace shield::cli
