#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flamesense {

enum class Channel : std::uint8_t { R = 0, G = 1, B = 2, I = 3 };

inline constexpr std::size_t kChannelCount = 4;

char channel_letter(Channel ch) noexcept;

/// Parses a channel string such as "RGB" or "G". Throws ConfigInvalid on an
/// unknown letter, an empty set or a repeated channel.
std::vector<Channel> parse_channels(std::string_view letters);
std::string channel_string(std::span<const Channel> channels);

struct Pixel {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Row-major 8-bit RGB frame.
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int rows, int cols, Pixel fill = {});
    RgbImage(int rows, int cols, std::vector<Pixel> pixels);

    [[nodiscard]] int rows() const noexcept { return rows_; }
    [[nodiscard]] int cols() const noexcept { return cols_; }
    [[nodiscard]] bool empty() const noexcept { return pixels_.empty(); }

    [[nodiscard]] const Pixel& at(int row, int col) const { return pixels_[index(row, col)]; }
    Pixel& at(int row, int col) { return pixels_[index(row, col)]; }

    [[nodiscard]] std::span<const Pixel> pixels() const noexcept { return pixels_; }
    std::span<Pixel> pixels() noexcept { return pixels_; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
    [[nodiscard]] std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(col);
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<Pixel> pixels_;
};

/// Real-valued single-channel intensity grid, row-major.
class ChannelPlane {
public:
    ChannelPlane() = default;
    ChannelPlane(Channel channel, int rows, int cols, std::vector<double> values);

    [[nodiscard]] Channel channel() const noexcept { return channel_; }
    [[nodiscard]] int rows() const noexcept { return rows_; }
    [[nodiscard]] int cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] double operator()(int row, int col) const {
        return values_[static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(col)];
    }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

private:
    Channel channel_ = Channel::R;
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> values_;
};

/// BT.601 luma, unrounded.
inline double gray_value(const Pixel& p) noexcept { return 0.299 * p.r + 0.587 * p.g + 0.114 * p.b; }

inline double channel_value(const Pixel& p, Channel ch) noexcept {
    switch (ch) {
        case Channel::R: return p.r;
        case Channel::G: return p.g;
        case Channel::B: return p.b;
        case Channel::I: return gray_value(p);
    }
    return 0.0;
}

ChannelPlane extract_channel(const RgbImage& img, Channel ch);

/// Grid of local windows laid over a plane: `rows` windows down, `cols` across.
struct GridSpec {
    int rows = 16;
    int cols = 16;

    [[nodiscard]] int window_count() const noexcept { return rows * cols; }
    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Window geometry for a concrete plane size. Throws GridMismatch unless the
/// spec divides the plane exactly.
struct WindowLayout {
    GridSpec grid;
    int window_rows = 0;  // m
    int window_cols = 0;  // n

    static WindowLayout for_plane(int plane_rows, int plane_cols, GridSpec grid);

    /// 0-based row-major window slot that owns pixel (row, col).
    [[nodiscard]] int slot_of(int row, int col) const noexcept {
        return (row / window_rows) * grid.cols + col / window_cols;
    }
};

struct Window {
    int index = 0;  // t, 1-based, row-major over window positions
    int top = 0;
    int left = 0;
    int rows = 0;
    int cols = 0;
    std::vector<double> block;  // rows x cols, row-major
};

std::vector<Window> grid_windows(const ChannelPlane& plane, GridSpec spec);

// Image files.
RgbImage decode_image(std::span<const std::uint8_t> bytes);
RgbImage read_image(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const RgbImage& img);
void write_png(const std::filesystem::path& path, const RgbImage& img);

}  // namespace flamesense
