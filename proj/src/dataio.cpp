#include "shield/dataio.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <system_error>

namespace shield {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset)
{
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

} // namespace

std::vector<std::uint8_t> read_file_bytes(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::system_error(errno, std::generic_category(), "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::system_error(errno, std::generic_category(), "cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            std::error_code ignored;
            fs::remove(tmp, ignored);
            throw std::system_error(errno, std::generic_category(), "short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

void write_file_atomic(const fs::path& path, const std::string& text)
{
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes)
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

// ---- records ----------------------------------------------------------------

Dataset decode_records(std::span<const std::uint8_t> bytes, Shape shape, int num_classes)
{
    if (!shape.valid()) {
        throw FormatError("invalid record shape " + shape.str());
    }
    if (num_classes < 1 || num_classes > 256) {
        throw FormatError("record files hold between 1 and 256 classes");
    }
    const std::size_t pixels = static_cast<std::size_t>(shape.size());
    const std::size_t record = pixels + 1;
    if (bytes.size() % record != 0) {
        throw FormatError("file length " + std::to_string(bytes.size()) +
                          " is not a multiple of the record size " + std::to_string(record));
    }
    Dataset ds;
    ds.num_classes = num_classes;
    const std::size_t n = bytes.size() / record;
    ds.images.reserve(n);
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto rec = bytes.subspan(i * record, record);
        if (rec[0] >= num_classes) {
            throw FormatError("record " + std::to_string(i) + " has label " + std::to_string(rec[0]) +
                              ", expected < " + std::to_string(num_classes));
        }
        ds.labels.push_back(rec[0]);
        ds.images.push_back(dequantize(rec.subspan(1), shape));
    }
    return ds;
}

std::vector<std::uint8_t> encode_records(const Dataset& ds)
{
    validate(ds);
    if (ds.num_classes > 256) {
        throw FormatError("labels do not fit one byte for " + std::to_string(ds.num_classes) + " classes");
    }
    const std::size_t record = static_cast<std::size_t>(ds.shape().size()) + 1;
    std::vector<std::uint8_t> out;
    out.reserve(record * ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out.push_back(static_cast<std::uint8_t>(ds.labels[i]));
        const auto px = quantize(ds.images[i]);
        out.insert(out.end(), px.begin(), px.end());
    }
    return out;
}

Dataset read_records(const fs::path& path, Shape shape, int num_classes)
{
    return decode_records(read_file_bytes(path), shape, num_classes);
}

void write_records(const Dataset& ds, const fs::path& path)
{
    write_file_atomic(path, encode_records(ds));
}

Dataset read_cifar10_bin(const fs::path& path)
{
    return read_records(path, kCifarShape, kCifarClasses);
}

void write_cifar10_bin(const Dataset& ds, const fs::path& path)
{
    if (!ds.empty() && !(ds.shape() == kCifarShape)) {
        throw FormatError("CIFAR-10 records need 32x32x3 images, got " + ds.shape().str());
    }
    if (ds.num_classes > kCifarClasses) {
        throw FormatError("CIFAR-10 records hold at most 10 classes");
    }
    write_records(ds, path);
}

// ---- IDX --------------------------------------------------------------------

std::vector<Image> decode_idx_images(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 16) {
        throw FormatError("IDX image header truncated");
    }
    if (read_be32(bytes, 0) != kIdxImageMagic) {
        throw FormatError("bad IDX image magic");
    }
    const std::size_t count = read_be32(bytes, 4);
    const int rows = static_cast<int>(read_be32(bytes, 8));
    const int cols = static_cast<int>(read_be32(bytes, 12));
    const Shape shape{cols, rows, 1};
    const std::size_t pixels = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (count > 0 && (rows <= 0 || cols <= 0)) {
        throw FormatError("IDX image dimensions must be positive");
    }
    if (bytes.size() != 16 + count * pixels) {
        throw FormatError("IDX image payload has " + std::to_string(bytes.size() - 16) +
                          " bytes, expected " + std::to_string(count * pixels));
    }
    std::vector<Image> images;
    images.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        images.push_back(dequantize(bytes.subspan(16 + i * pixels, pixels), shape));
    }
    return images;
}

std::vector<int> decode_idx_labels(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 8) {
        throw FormatError("IDX label header truncated");
    }
    if (read_be32(bytes, 0) != kIdxLabelMagic) {
        throw FormatError("bad IDX label magic");
    }
    const std::size_t count = read_be32(bytes, 4);
    if (bytes.size() != 8 + count) {
        throw FormatError("IDX label payload has " + std::to_string(bytes.size() - 8) +
                          " bytes, expected " + std::to_string(count));
    }
    return {bytes.begin() + 8, bytes.end()};
}

std::vector<Image> read_mnist_idx_images(const fs::path& path)
{
    return decode_idx_images(read_file_bytes(path));
}

std::vector<int> read_mnist_idx_labels(const fs::path& path)
{
    return decode_idx_labels(read_file_bytes(path));
}

std::vector<std::uint8_t> encode_idx_images(const std::vector<Image>& images)
{
    std::vector<std::uint8_t> out;
    const Shape shape = images.empty() ? Shape{28, 28, 1} : images.front().shape;
    append_be32(out, kIdxImageMagic);
    append_be32(out, static_cast<std::uint32_t>(images.size()));
    append_be32(out, static_cast<std::uint32_t>(shape.height));
    append_be32(out, static_cast<std::uint32_t>(shape.width));
    for (const auto& img : images) {
        if (!(img.shape == shape) || shape.channels != 1) {
            throw ShapeError("IDX images must be single-channel and uniformly shaped");
        }
        const auto px = quantize(img);
        out.insert(out.end(), px.begin(), px.end());
    }
    return out;
}

std::vector<std::uint8_t> encode_idx_labels(const std::vector<int>& labels)
{
    std::vector<std::uint8_t> out;
    append_be32(out, kIdxLabelMagic);
    append_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (int label : labels) {
        if (label < 0 || label > 255) {
            throw FormatError("IDX label out of byte range");
        }
        out.push_back(static_cast<std::uint8_t>(label));
    }
    return out;
}

GlyphSource read_mnist_glyphs(const fs::path& images, const fs::path& labels)
{
    const auto imgs = read_mnist_idx_images(images);
    const auto labs = read_mnist_idx_labels(labels);
    if (imgs.size() != labs.size()) {
        throw FormatError("MNIST image and label counts differ (" + std::to_string(imgs.size()) +
                          " vs " + std::to_string(labs.size()) + ")");
    }
    for (int l : labs) {
        if (l > 9) {
            throw FormatError("MNIST label " + std::to_string(l) + " is not a digit");
        }
    }
    return GlyphSource::from_labeled(imgs, labs);
}

// ---- PNM --------------------------------------------------------------------

Image decode_pnm(std::span<const std::uint8_t> bytes)
{
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') {
                    ++pos;
                }
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&] {
        skip_space();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
            throw FormatError("malformed PNM header");
        }
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > (1L << 24)) {
                throw FormatError("PNM header value too large");
            }
            ++pos;
        }
        return static_cast<int>(v);
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw FormatError("not a binary PPM/PGM file (expected P5 or P6)");
    }
    const int channels = bytes[1] == '6' ? 3 : 1;
    pos = 2;
    const int width = read_int();
    const int height = read_int();
    const int maxval = read_int();
    if (maxval != 255) {
        throw FormatError("only maxval 255 is supported, got " + std::to_string(maxval));
    }
    if (width <= 0 || height <= 0) {
        throw FormatError("PNM dimensions must be positive");
    }
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        throw FormatError("malformed PNM header");
    }
    ++pos;

    const Shape shape{width, height, channels};
    const std::size_t n = static_cast<std::size_t>(shape.size());
    if (bytes.size() - pos != n) {
        throw FormatError("PNM payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                          std::to_string(n));
    }
    // interleaved -> planar
    std::vector<std::uint8_t> planar(n);
    const std::size_t plane = static_cast<std::size_t>(shape.plane());
    for (std::size_t p = 0; p < plane; ++p) {
        for (int c = 0; c < channels; ++c) {
            planar[static_cast<std::size_t>(c) * plane + p] = bytes[pos + p * channels + c];
        }
    }
    return dequantize(planar, shape);
}

std::vector<std::uint8_t> encode_pnm(const Image& img)
{
    if (img.shape.channels != 1 && img.shape.channels != 3) {
        throw ShapeError("PNM export needs 1 or 3 channels");
    }
    const std::string header = std::string(img.shape.channels == 3 ? "P6" : "P5") + "\n" +
                               std::to_string(img.shape.width) + " " + std::to_string(img.shape.height) +
                               "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const auto planar = quantize(img);
    const std::size_t plane = static_cast<std::size_t>(img.shape.plane());
    for (std::size_t p = 0; p < plane; ++p) {
        for (int c = 0; c < img.shape.channels; ++c) {
            out.push_back(planar[static_cast<std::size_t>(c) * plane + p]);
        }
    }
    return out;
}

Image read_ppm(const fs::path& path) { return decode_pnm(read_file_bytes(path)); }

void write_ppm(const Image& img, const fs::path& path) { write_file_atomic(path, encode_pnm(img)); }

} // namespace shield
