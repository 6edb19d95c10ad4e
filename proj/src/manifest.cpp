#include <cstdio>

#include "json.hpp"
#include "shield/dataio.hpp"

namespace shield {
namespace {

using nlohmann::json;

std::string hex64(std::uint64_t v)
{
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json shape_json(const Shape& s)
{
    return json{{"width", s.width}, {"height", s.height}, {"channels", s.channels}};
}

Shape shape_from(const json& j)
{
    return Shape{j.at("width").get<int>(), j.at("height").get<int>(), j.at("channels").get<int>()};
}

} // namespace

std::string DatasetManifest::to_json() const
{
    json j;
    j["version"] = version;
    j["method"] = method;
    j["params"] = json{{"method", std::string(shield::to_string(params.method))},
                       {"mu", params.mu},
                       {"sigma", params.sigma},
                       {"alpha", params.alpha},
                       {"gamma", params.gamma},
                       {"iterations", params.iterations},
                       {"square_side", params.square_side},
                       {"seed", params.seed}};
    j["checksum"] = hex64(checksum);
    j["shape"] = shape_json(shape);
    j["classes"] = classes;
    j["seed"] = seed;
    j["glyphs"] = glyphs;
    if (augmentation) {
        const auto& a = *augmentation;
        j["augmentation"] = json{{"crop_size", a.crop_size},
                                 {"translate_frac", a.translate_frac},
                                 {"rotate_deg_max", a.rotate_deg_max},
                                 {"brightness_delta", a.brightness_delta},
                                 {"contrast_low", a.contrast_low},
                                 {"contrast_high", a.contrast_high},
                                 {"flip_prob", a.flip_prob},
                                 {"noise_sigma", a.noise_sigma}};
    }
    return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text)
{
    try {
        const json j = json::parse(text);
        DatasetManifest m;
        m.version = j.at("version").get<int>();
        m.method = j.at("method").get<std::string>();
        if (m.method != "none") {
            (void)parse_method(m.method);
        }
        const auto& p = j.at("params");
        m.params.method = parse_method(p.at("method").get<std::string>());
        m.params.mu = p.at("mu").get<double>();
        m.params.sigma = p.at("sigma").get<double>();
        m.params.alpha = p.at("alpha").get<double>();
        m.params.gamma = p.at("gamma").get<double>();
        m.params.iterations = p.at("iterations").get<int>();
        m.params.square_side = p.at("square_side").get<int>();
        m.params.seed = p.at("seed").get<std::uint64_t>();
        m.checksum = parse_seed(j.at("checksum").get<std::string>());
        m.shape = shape_from(j.at("shape"));
        m.classes = j.at("classes").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.glyphs = j.value("glyphs", std::string("builtin"));
        if (j.contains("augmentation")) {
            const auto& a = j.at("augmentation");
            AugmentationConfig cfg;
            cfg.crop_size = a.at("crop_size").get<int>();
            cfg.translate_frac = a.at("translate_frac").get<double>();
            cfg.rotate_deg_max = a.at("rotate_deg_max").get<double>();
            cfg.brightness_delta = a.at("brightness_delta").get<double>();
            cfg.contrast_low = a.at("contrast_low").get<double>();
            cfg.contrast_high = a.at("contrast_high").get<double>();
            cfg.flip_prob = a.at("flip_prob").get<double>();
            cfg.noise_sigma = a.at("noise_sigma").get<double>();
            m.augmentation = cfg;
        }
        if (!m.shape.valid() || m.classes < 1) {
            throw FormatError("manifest declares an invalid shape or class count");
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    } catch (const ParameterError& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
}

DatasetManifest read_manifest(const fs::path& path)
{
    const auto bytes = read_file_bytes(path);
    return DatasetManifest::from_json(std::string(bytes.begin(), bytes.end()));
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path)
{
    write_file_atomic(path, manifest.to_json());
}

fs::path manifest_path_for(const fs::path& dataset)
{
    fs::path p = dataset;
    p += ".manifest.json";
    return p;
}

} // namespace shield
