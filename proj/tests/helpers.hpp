#pragma once

#include "flamesense/imaging.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace testing {

inline flamesense::RgbImage random_image(int rows, int cols, std::uint64_t seed, int lo = 0, int hi = 255) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(lo, hi);
    flamesense::RgbImage img(rows, cols);
    for (auto& p : img.pixels()) {
        p.r = static_cast<std::uint8_t>(d(rng));
        p.g = static_cast<std::uint8_t>(d(rng));
        p.b = static_cast<std::uint8_t>(d(rng));
    }
    return img;
}

inline flamesense::ChannelPlane random_plane(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(0.0, 255.0);
    std::vector<double> v(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (auto& x : v) x = d(rng);
    return {flamesense::Channel::I, rows, cols, std::move(v)};
}

inline flamesense::ChannelPlane plane_of(int rows, int cols, std::vector<double> v) {
    return {flamesense::Channel::I, rows, cols, std::move(v)};
}

inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("flamesense_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
