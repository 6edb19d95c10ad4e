#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>
#include <fstream>

#include "shield/dataio.hpp"

using namespace shield;
using shield::testing::bitwise_equal;
using shield::testing::TempDir;

namespace {

/// Hand-built CIFAR-style record: label, then 1024 R, 1024 G, 1024 B bytes.
std::vector<std::uint8_t> cifar_record(std::uint8_t label, std::uint8_t r, std::uint8_t g, std::uint8_t b)
{
    std::vector<std::uint8_t> rec(kCifarRecordBytes, r);
    rec[0] = label;
    std::fill(rec.begin() + 1025, rec.begin() + 2049, g);
    std::fill(rec.begin() + 2049, rec.end(), b);
    return rec;
}

std::vector<std::uint8_t> random_bytes(std::size_t n, std::uint64_t seed)
{
    Prng rng(seed);
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) {
        b = static_cast<std::uint8_t>(rng.next_below(256));
    }
    return out;
}

} // namespace

TEST_CASE("CIFAR records decode into planar channels")
{
    auto bytes = cifar_record(3, 255, 0, 51);
    const auto second = cifar_record(9, 0, 128, 255);
    bytes.insert(bytes.end(), second.begin(), second.end());
    REQUIRE(bytes.size() == 2 * kCifarRecordBytes);

    const Dataset ds = decode_records(bytes, kCifarShape, 10);
    REQUIRE(ds.size() == 2);
    CHECK(ds.labels == std::vector<int>{3, 9});
    CHECK(ds.images[0].at(0, 5, 5) == 1.0);
    CHECK(ds.images[0].at(1, 31, 31) == 0.0);
    CHECK(ds.images[0].at(2, 0, 0) == doctest::Approx(0.2));
    CHECK(ds.images[1].at(1, 0, 0) == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("CIFAR bytes round-trip exactly")
{
    std::vector<std::uint8_t> bytes = random_bytes(5 * kCifarRecordBytes, 3);
    for (std::size_t i = 0; i < 5; ++i) {
        bytes[i * kCifarRecordBytes] = static_cast<std::uint8_t>(i * 2);
    }
    const Dataset ds = decode_records(bytes, kCifarShape, 10);
    CHECK(encode_records(ds) == bytes);

    TempDir dir;
    write_cifar10_bin(ds, dir / "data.bin");
    CHECK(read_file_bytes(dir / "data.bin") == bytes);
    CHECK(bitwise_equal(read_cifar10_bin(dir / "data.bin"), ds));
}

TEST_CASE("records of other shapes round-trip")
{
    const Shape s{28, 28, 3};
    const std::size_t record = static_cast<std::size_t>(s.size()) + 1;
    std::vector<std::uint8_t> bytes = random_bytes(3 * record, 4);
    for (std::size_t i = 0; i < 3; ++i) {
        bytes[i * record] = static_cast<std::uint8_t>(i);
    }
    const Dataset ds = decode_records(bytes, s, 3);
    CHECK(ds.shape() == s);
    CHECK(encode_records(ds) == bytes);
    CHECK_THROWS_AS(write_cifar10_bin(ds, "/nonexistent/x.bin"), FormatError);
}

TEST_CASE("malformed record files are rejected")
{
    auto bytes = cifar_record(1, 0, 0, 0);
    bytes.pop_back();
    CHECK_THROWS_AS((void)decode_records(bytes, kCifarShape, 10), FormatError);

    const auto bad_label = cifar_record(10, 0, 0, 0);
    CHECK_THROWS_AS((void)decode_records(bad_label, kCifarShape, 10), FormatError);
    CHECK_NOTHROW((void)decode_records(bad_label, kCifarShape, 11));

    CHECK(decode_records({}, kCifarShape, 10).empty());
    CHECK_THROWS_AS((void)read_cifar10_bin("/nonexistent/file.bin"), std::system_error);
}

TEST_CASE("IDX images and labels")
{
    std::vector<std::uint8_t> images{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3};
    const std::vector<std::uint8_t> pixels{0, 255, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    images.insert(images.end(), pixels.begin(), pixels.end());
    const auto decoded = decode_idx_images(images);
    REQUIRE(decoded.size() == 2);
    CHECK(decoded[0].shape == Shape{3, 2, 1});
    CHECK(decoded[0].at(0, 0, 1) == 1.0);
    CHECK(decoded[1].at(0, 1, 2) == doctest::Approx(100.0 / 255.0));
    CHECK(encode_idx_images(decoded) == images);

    const std::vector<std::uint8_t> labels{0, 0, 8, 1, 0, 0, 0, 2, 7, 4};
    CHECK(decode_idx_labels(labels) == std::vector<int>{7, 4});
    CHECK(encode_idx_labels({7, 4}) == labels);
}

TEST_CASE("malformed IDX files are rejected")
{
    std::vector<std::uint8_t> images{0, 0, 8, 2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3, 4};
    CHECK_THROWS_AS((void)decode_idx_images(images), FormatError);
    images[3] = 3;
    CHECK_NOTHROW((void)decode_idx_images(images));
    images.pop_back();
    CHECK_THROWS_AS((void)decode_idx_images(images), FormatError);
    CHECK_THROWS_AS((void)decode_idx_images(std::vector<std::uint8_t>{0, 0, 8}), FormatError);

    const std::vector<std::uint8_t> labels{0, 0, 8, 1, 0, 0, 0, 3, 1, 2};
    CHECK_THROWS_AS((void)decode_idx_labels(labels), FormatError);
}

TEST_CASE("MNIST glyph loading checks counts and digits")
{
    TempDir dir;
    std::vector<Image> imgs(3, Image::constant({28, 28, 1}, 0.0));
    write_file_atomic(dir / "img", encode_idx_images(imgs));
    write_file_atomic(dir / "lbl", encode_idx_labels({1, 2}));
    CHECK_THROWS_AS((void)read_mnist_glyphs(dir / "img", dir / "lbl"), FormatError);
    write_file_atomic(dir / "lbl", encode_idx_labels({1, 2, 12}));
    CHECK_THROWS_AS((void)read_mnist_glyphs(dir / "img", dir / "lbl"), FormatError);
    write_file_atomic(dir / "lbl", encode_idx_labels({1, 2, 3}));
    const GlyphSource g = read_mnist_glyphs(dir / "img", dir / "lbl");
    CHECK(g.size() == 3);
    CHECK(!g.complete());
}

TEST_CASE("PPM and PGM decoding")
{
    const std::string header = "P6\n# comment\n2 1\n255\n";
    std::vector<std::uint8_t> ppm(header.begin(), header.end());
    for (std::uint8_t b : {255, 0, 0, 0, 0, 255}) {
        ppm.push_back(b);
    }
    const Image img = decode_pnm(ppm);
    CHECK(img.shape == Shape{2, 1, 3});
    CHECK(img.at(0, 0, 0) == 1.0);
    CHECK(img.at(2, 0, 0) == 0.0);
    CHECK(img.at(2, 0, 1) == 1.0);

    const std::string pgm_header = "P5 2 2 255\n";
    std::vector<std::uint8_t> pgm(pgm_header.begin(), pgm_header.end());
    for (std::uint8_t b : {0, 64, 128, 255}) {
        pgm.push_back(b);
    }
    const Image gray = decode_pnm(pgm);
    CHECK(gray.shape == Shape{2, 2, 1});
    CHECK(encode_pnm(gray).size() == std::string("P5\n2 2\n255\n").size() + 4);
    CHECK(bitwise_equal(decode_pnm(encode_pnm(gray)), gray));
}

TEST_CASE("PPM round trip through files preserves bytes")
{
    TempDir dir;
    const auto bytes = random_bytes(static_cast<std::size_t>(kCifarShape.size()), 5);
    const Image img = dequantize(bytes, kCifarShape);
    write_ppm(img, dir / "x.ppm");
    const Image back = read_ppm(dir / "x.ppm");
    CHECK(quantize(back) == bytes);
}

TEST_CASE("malformed PNM files are rejected")
{
    auto as_bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
    CHECK_THROWS_AS((void)decode_pnm(as_bytes("P3\n1 1\n255\n0 0 0")), FormatError);
    CHECK_THROWS_AS((void)decode_pnm(as_bytes("P6\n1 1\n65535\n")), FormatError);
    CHECK_THROWS_AS((void)decode_pnm(as_bytes("P6\n2 1\n255\nabc")), FormatError);
    CHECK_THROWS_AS((void)decode_pnm(as_bytes("P6\n0 1\n255\n")), FormatError);
    CHECK_THROWS_AS((void)decode_pnm(as_bytes("P6\nx")), FormatError);
}

TEST_CASE("checksums detect single-byte corruption")
{
    auto bytes = random_bytes(4096, 6);
    const auto original = fnv1a64(bytes);
    CHECK(fnv1a64(bytes) == original);
    bytes[100] ^= 1;
    CHECK(fnv1a64(bytes) != original);
    // FNV-1a reference value for the empty input and "a"
    CHECK(fnv1a64({}) == 0xcbf29ce484222325ULL);
    const std::uint8_t a[] = {'a'};
    CHECK(fnv1a64(a) == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("atomic writes leave no temporary file behind")
{
    TempDir dir;
    write_file_atomic(dir / "f.txt", std::string("hello"));
    CHECK(std::filesystem::exists(dir / "f.txt"));
    CHECK(!std::filesystem::exists(dir / "f.txt.tmp"));
    CHECK_THROWS((void)write_file_atomic(dir.path() / "missing" / "f.txt", std::string("x")));
}

TEST_CASE("manifest JSON round trip")
{
    DatasetManifest m;
    m.method = "watermark";
    m.params.method = Method::watermark;
    m.params.alpha = 0.35;
    m.params.seed = 0xDEADBEEFCAFEULL;
    m.checksum = 0xFFFFFFFFFFFFFFFFULL;
    m.shape = {28, 28, 3};
    m.classes = 7;
    m.seed = 12;
    AugmentationConfig aug;
    aug.crop_size = 28;
    m.augmentation = aug;
    m.glyphs = "mnist:a.idx,b.idx";

    const std::string text = m.to_json();
    const DatasetManifest back = DatasetManifest::from_json(text);
    CHECK(back == m);
    CHECK(back.checksum == m.checksum);
    CHECK(back.params.seed == m.params.seed);
    CHECK(back.shape == m.shape);
    CHECK(back.augmentation.has_value());
    CHECK(text.find("\"0xffffffffffffffff\"") != std::string::npos);

    TempDir dir;
    write_manifest(m, dir / "m.json");
    CHECK(read_manifest(dir / "m.json") == m);
    CHECK(manifest_path_for("/a/b.bin") == std::filesystem::path("/a/b.bin.manifest.json"));
}

TEST_CASE("malformed manifests raise format errors")
{
    CHECK_THROWS_AS((void)DatasetManifest::from_json("{"), FormatError);
    CHECK_THROWS_AS((void)DatasetManifest::from_json("[]"), FormatError);
    DatasetManifest m;
    std::string text = m.to_json();
    const auto pos = text.find("\"none\"");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 6, "\"blur\"");
    CHECK_THROWS_AS((void)DatasetManifest::from_json(text), FormatError);
}

TEST_CASE("synthetic data is deterministic and labeled round-robin")
{
    SyntheticSpec spec;
    spec.num_classes = 4;
    spec.n_per_class = 5;
    spec.n_val_per_class = 3;
    spec.seed = 2;
    spec.signal_strength = 0.3;
    const auto [train, val] = generate_synthetic_dataset(spec);
    CHECK(train.size() == 20);
    CHECK(val.size() == 12);
    for (std::size_t i = 0; i < train.size(); ++i) {
        CHECK(train.labels[i] == static_cast<int>(i % 4));
    }
    const auto again = generate_synthetic_dataset(spec);
    CHECK(bitwise_equal(again.first, train));
    CHECK(bitwise_equal(again.second, val));
    CHECK(!bitwise_equal(train.images[0], val.images[0]));
}

TEST_CASE("synthetic signal strength extremes")
{
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.n_per_class = 4;
    spec.n_val_per_class = 0;
    spec.shape = {8, 8, 3};

    spec.signal_strength = 1.0;
    const auto pure = generate_synthetic_dataset(spec).first;
    // every image of a class equals its prototype
    CHECK(bitwise_equal(pure.images[0], pure.images[3]));
    CHECK(!bitwise_equal(pure.images[0], pure.images[1]));

    spec.signal_strength = 0.0;
    const auto noise = generate_synthetic_dataset(spec).first;
    double mean = 0.0;
    for (const auto& img : noise.images) {
        mean += img.data.mean();
    }
    mean /= static_cast<double>(noise.size());
    CHECK(mean == doctest::Approx(0.5).epsilon(0.05));

    spec.num_classes = 1;
    CHECK_THROWS_AS((void)generate_synthetic_dataset(spec), ParameterError);
}
