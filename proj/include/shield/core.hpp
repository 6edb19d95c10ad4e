#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shield/error.hpp"

namespace shield {

struct Shape {
    int width = 0;
    int height = 0;
    int channels = 0;

    [[nodiscard]] Eigen::Index size() const
    {
        return static_cast<Eigen::Index>(width) * height * channels;
    }
    [[nodiscard]] Eigen::Index plane() const { return static_cast<Eigen::Index>(width) * height; }
    [[nodiscard]] bool valid() const
    {
        return width > 0 && height > 0 && (channels == 1 || channels == 3);
    }
    [[nodiscard]] std::string str() const
    {
        return std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(channels);
    }

    friend bool operator==(const Shape&, const Shape&) = default;
};

/// A w x h x c image with intensities in [0,1], stored channel-planar:
/// all of channel 0 in row-major order, then channel 1, and so on.
template <typename Scalar>
struct BasicImage {
    using ScalarType = Scalar;
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Shape shape;
    Array data;

    BasicImage() = default;
    explicit BasicImage(Shape s) : shape(s), data(Array::Zero(s.size())) {}
    BasicImage(Shape s, Array values) : shape(s), data(std::move(values))
    {
        if (data.size() != shape.size()) {
            throw ShapeError("image data length " + std::to_string(data.size()) +
                             " does not match shape " + shape.str());
        }
    }

    static BasicImage constant(Shape s, Scalar value)
    {
        return BasicImage(s, Array::Constant(s.size(), value));
    }

    [[nodiscard]] Eigen::Index index(int c, int y, int x) const
    {
        return c * shape.plane() + static_cast<Eigen::Index>(y) * shape.width + x;
    }
    Scalar& at(int c, int y, int x) { return data[index(c, y, x)]; }
    [[nodiscard]] Scalar at(int c, int y, int x) const { return data[index(c, y, x)]; }

    template <typename Other>
    [[nodiscard]] BasicImage<Other> cast() const
    {
        return BasicImage<Other>(shape, data.template cast<Other>());
    }
};

using Image = BasicImage<double>;

/// Images with class labels in {0..num_classes-1}; all images share one shape.
template <typename Scalar>
struct BasicDataset {
    std::vector<BasicImage<Scalar>> images;
    std::vector<int> labels;
    int num_classes = 0;

    [[nodiscard]] std::size_t size() const { return images.size(); }
    [[nodiscard]] bool empty() const { return images.empty(); }
    [[nodiscard]] Shape shape() const { return images.empty() ? Shape{} : images.front().shape; }
};

using Dataset = BasicDataset<double>;

inline void require_same_shape(const Shape& a, const Shape& b, const char* what)
{
    if (!(a == b)) {
        throw ShapeError(std::string(what) + ": shape " + a.str() + " vs " + b.str());
    }
}

/// Throws if the dataset breaks any of its invariants.
template <typename Scalar>
void validate(const BasicDataset<Scalar>& ds)
{
    if (ds.images.size() != ds.labels.size()) {
        throw ShapeError("dataset has " + std::to_string(ds.images.size()) + " images but " +
                         std::to_string(ds.labels.size()) + " labels");
    }
    if (ds.num_classes < 1) {
        throw ConfigError("dataset must declare at least one class");
    }
    const Shape s = ds.shape();
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
        if (!(ds.images[i].shape == s) || ds.images[i].data.size() != s.size()) {
            throw ShapeError("image " + std::to_string(i) + " has shape " +
                             ds.images[i].shape.str() + ", expected " + s.str());
        }
        if (ds.labels[i] < 0 || ds.labels[i] >= ds.num_classes) {
            throw ConfigError("label " + std::to_string(ds.labels[i]) + " at index " +
                              std::to_string(i) + " outside [0, " +
                              std::to_string(ds.num_classes) + ")");
        }
    }
}

template <typename Scalar>
[[nodiscard]] BasicImage<Scalar> clamp01(const BasicImage<Scalar>& img)
{
    return BasicImage<Scalar>(img.shape, img.data.max(Scalar(0)).min(Scalar(1)));
}

/// round(v * 255), half up, as 8-bit values in planar order.
template <typename Scalar>
[[nodiscard]] std::vector<std::uint8_t> quantize(const BasicImage<Scalar>& img)
{
    std::vector<std::uint8_t> out(static_cast<std::size_t>(img.data.size()));
    for (Eigen::Index i = 0; i < img.data.size(); ++i) {
        const double v = std::floor(static_cast<double>(img.data[i]) * 255.0 + 0.5);
        out[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v));
    }
    return out;
}

template <typename Scalar = double>
[[nodiscard]] BasicImage<Scalar> dequantize(std::span<const std::uint8_t> bytes, Shape shape)
{
    if (static_cast<Eigen::Index>(bytes.size()) != shape.size()) {
        throw ShapeError("byte count " + std::to_string(bytes.size()) + " does not match shape " +
                         shape.str());
    }
    BasicImage<Scalar> img(shape);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        img.data[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(bytes[i]) / Scalar(255);
    }
    return img;
}

} // namespace shield
