#include <algorithm>

#include "shield/dataio.hpp"
#include "shield/parallel.hpp"

namespace shield {
namespace {

struct Prototype {
    int left = 0;
    int top = 0;
    int side = 0;
    std::vector<double> color;
};

constexpr double kBackground = 0.5;

Prototype make_prototype(const SyntheticSpec& spec, int label)
{
    Prng rng = Prng::child(spec.seed, static_cast<std::uint64_t>(label));
    Prototype p;
    p.side = std::max(1, std::min(spec.shape.width, spec.shape.height) / 4);
    p.left = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.shape.width - p.side + 1)));
    p.top = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.shape.height - p.side + 1)));
    for (int c = 0; c < spec.shape.channels; ++c) {
        p.color.push_back(rng.next_unit());
    }
    return p;
}

Image render(const SyntheticSpec& spec, const Prototype& proto, Prng& rng)
{
    const Shape& s = spec.shape;
    const double strength = spec.signal_strength;
    Image img(s);
    for (int c = 0; c < s.channels; ++c) {
        for (int y = 0; y < s.height; ++y) {
            for (int x = 0; x < s.width; ++x) {
                const bool inside = x >= proto.left && x < proto.left + proto.side && y >= proto.top &&
                                    y < proto.top + proto.side;
                const double prototype = inside ? proto.color[static_cast<std::size_t>(c)] : kBackground;
                double v = (1.0 - strength) * rng.next_unit() + strength * prototype;
                if (spec.noise_sigma > 0.0) {
                    v += rng.next_gaussian(0.0, spec.noise_sigma);
                }
                img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return img;
}

Dataset draw_split(const SyntheticSpec& spec, const std::vector<Prototype>& protos, int per_class,
                   std::uint64_t first_tag)
{
    const std::size_t n = static_cast<std::size_t>(per_class) * static_cast<std::size_t>(spec.num_classes);
    Dataset ds;
    ds.num_classes = spec.num_classes;
    ds.images.resize(n);
    ds.labels.resize(n);
    parallel_for(n, [&](std::size_t i) {
        const int label = static_cast<int>(i % static_cast<std::size_t>(spec.num_classes));
        Prng rng = Prng::child(spec.seed, first_tag + i);
        ds.labels[i] = label;
        ds.images[i] = render(spec, protos[static_cast<std::size_t>(label)], rng);
    });
    return ds;
}

} // namespace

void SyntheticSpec::validate() const
{
    if (num_classes < 2) {
        throw ParameterError("synthetic data needs at least two classes");
    }
    if (n_per_class < 0 || n_val_per_class < 0) {
        throw ParameterError("per-class counts must be non-negative");
    }
    if (!shape.valid()) {
        throw ParameterError("invalid synthetic shape " + shape.str());
    }
    if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) {
        throw ParameterError("signal strength must lie in [0,1]");
    }
    if (!(noise_sigma >= 0.0)) {
        throw ParameterError("noise sigma must be >= 0");
    }
}

std::pair<Dataset, Dataset> generate_synthetic_dataset(const SyntheticSpec& spec)
{
    spec.validate();
    std::vector<Prototype> protos;
    for (int k = 0; k < spec.num_classes; ++k) {
        protos.push_back(make_prototype(spec, k));
    }
    const auto K = static_cast<std::uint64_t>(spec.num_classes);
    const std::uint64_t n_train = K * static_cast<std::uint64_t>(spec.n_per_class);
    return {draw_split(spec, protos, spec.n_per_class, K),
            draw_split(spec, protos, spec.n_val_per_class, K + n_train)};
}

} // namespace shield
