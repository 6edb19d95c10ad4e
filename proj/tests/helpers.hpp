#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "shield/core.hpp"
#include "shield/rng.hpp"

namespace shield::testing {

/// Scratch directory removed on scope exit.
class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("shield_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Image random_image(Shape shape, Prng& rng)
{
    Image img(shape);
    for (Eigen::Index i = 0; i < img.data.size(); ++i) {
        img.data[i] = rng.next_unit();
    }
    return img;
}

inline Dataset random_dataset(Shape shape, int classes, int n, std::uint64_t seed)
{
    Prng rng(seed);
    Dataset ds;
    ds.num_classes = classes;
    for (int i = 0; i < n; ++i) {
        ds.images.push_back(random_image(shape, rng));
        ds.labels.push_back(i % classes);
    }
    return ds;
}

inline bool bitwise_equal(const Image& a, const Image& b)
{
    return a.shape == b.shape && a.data.size() == b.data.size() &&
           std::equal(a.data.data(), a.data.data() + a.data.size(), b.data.data());
}

inline bool bitwise_equal(const Dataset& a, const Dataset& b)
{
    if (a.size() != b.size() || a.labels != b.labels || a.num_classes != b.num_classes) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!bitwise_equal(a.images[i], b.images[i])) {
            return false;
        }
    }
    return true;
}

} // namespace shield::testing
