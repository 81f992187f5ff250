#include "flamesense/imaging.hpp"

#include "flamesense/error.hpp"
#include "flamesense/textio.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <array>
#include <cstring>

namespace flamesense {

char channel_letter(Channel ch) noexcept {
    constexpr std::array<char, kChannelCount> letters{'R', 'G', 'B', 'I'};
    return letters[static_cast<std::size_t>(ch)];
}

std::vector<Channel> parse_channels(std::string_view letters) {
    std::vector<Channel> out;
    for (char c : letters) {
        Channel ch{};
        switch (c) {
            case 'R': case 'r': ch = Channel::R; break;
            case 'G': case 'g': ch = Channel::G; break;
            case 'B': case 'b': ch = Channel::B; break;
            case 'I': case 'i': ch = Channel::I; break;
            case '-': case ',': continue;
            default: fail(ErrorKind::ConfigInvalid, std::string("unknown channel '") + c + "'");
        }
        if (std::find(out.begin(), out.end(), ch) != out.end()) {
            fail(ErrorKind::ConfigInvalid, std::string("channel listed twice: ") + c);
        }
        out.push_back(ch);
    }
    if (out.empty()) fail(ErrorKind::ConfigInvalid, "empty channel set");
    return out;
}

std::string channel_string(std::span<const Channel> channels) {
    std::string s;
    for (auto ch : channels) s.push_back(channel_letter(ch));
    return s;
}

RgbImage::RgbImage(int rows, int cols, Pixel fill) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) fail(ErrorKind::DimensionMismatch, "image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
}

RgbImage::RgbImage(int rows, int cols, std::vector<Pixel> pixels) : rows_(rows), cols_(cols), pixels_(std::move(pixels)) {
    if (rows < 1 || cols < 1) fail(ErrorKind::DimensionMismatch, "image dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        fail(ErrorKind::DimensionMismatch, "pixel count does not match dimensions");
    }
}

ChannelPlane::ChannelPlane(Channel channel, int rows, int cols, std::vector<double> values)
    : channel_(channel), rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows < 1 || cols < 1 || values_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        fail(ErrorKind::DimensionMismatch, "plane size does not match dimensions");
    }
}

ChannelPlane extract_channel(const RgbImage& img, Channel ch) {
    std::vector<double> values;
    values.reserve(img.pixels().size());
    for (const auto& p : img.pixels()) values.push_back(channel_value(p, ch));
    return {ch, img.rows(), img.cols(), std::move(values)};
}

WindowLayout WindowLayout::for_plane(int plane_rows, int plane_cols, GridSpec grid) {
    if (grid.rows < 1 || grid.cols < 1) fail(ErrorKind::GridMismatch, "grid must have at least one window per axis");
    if (plane_rows % grid.rows != 0 || plane_cols % grid.cols != 0) {
        fail(ErrorKind::GridMismatch, "grid " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                                          " does not divide " + std::to_string(plane_rows) + "x" +
                                          std::to_string(plane_cols));
    }
    return {grid, plane_rows / grid.rows, plane_cols / grid.cols};
}

std::vector<Window> grid_windows(const ChannelPlane& plane, GridSpec spec) {
    const auto layout = WindowLayout::for_plane(plane.rows(), plane.cols(), spec);
    std::vector<Window> windows;
    windows.reserve(static_cast<std::size_t>(spec.window_count()));
    for (int wr = 0; wr < spec.rows; ++wr) {
        for (int wc = 0; wc < spec.cols; ++wc) {
            Window w;
            w.index = wr * spec.cols + wc + 1;
            w.top = wr * layout.window_rows;
            w.left = wc * layout.window_cols;
            w.rows = layout.window_rows;
            w.cols = layout.window_cols;
            w.block.reserve(static_cast<std::size_t>(w.rows) * static_cast<std::size_t>(w.cols));
            for (int i = 0; i < w.rows; ++i) {
                for (int j = 0; j < w.cols; ++j) w.block.push_back(plane(w.top + i, w.left + j));
            }
            windows.push_back(std::move(w));
        }
    }
    return windows;
}

namespace {

bool starts_with(std::span<const std::uint8_t> bytes, std::string_view magic) {
    return bytes.size() >= magic.size() && std::memcmp(bytes.data(), magic.data(), magic.size()) == 0;
}

enum class Container { Png, Jpeg, Bmp, Pnm, Tiff, Unknown };

Container sniff(std::span<const std::uint8_t> bytes) {
    using namespace std::string_view_literals;
    if (starts_with(bytes, "\x89PNG\r\n\x1a\n"sv)) return Container::Png;
    if (starts_with(bytes, "\xff\xd8\xff"sv)) return Container::Jpeg;
    if (starts_with(bytes, "BM"sv)) return Container::Bmp;
    if (starts_with(bytes, "P6"sv) || starts_with(bytes, "P5"sv) || starts_with(bytes, "P3"sv) ||
        starts_with(bytes, "P2"sv)) {
        return Container::Pnm;
    }
    if (starts_with(bytes, "II*\0"sv) || starts_with(bytes, "MM\0*"sv)) return Container::Tiff;
    return Container::Unknown;
}

// libpng tolerates some truncations silently; require the IEND trailer.
bool png_complete(std::span<const std::uint8_t> bytes) {
    using namespace std::string_view_literals;
    constexpr auto iend = "IEND\xae\x42\x60\x82"sv;
    if (bytes.size() < iend.size()) return false;
    return std::memcmp(bytes.data() + bytes.size() - iend.size(), iend.data(), iend.size()) == 0;
}

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
    const auto container = sniff(bytes);
    if (container == Container::Unknown) fail(ErrorKind::UnsupportedFormat, "unrecognised image container");
    if (container == Container::Png && !png_complete(bytes)) fail(ErrorKind::DecodeError, "truncated PNG stream");

    cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr;
    try {
        bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        fail(ErrorKind::DecodeError, e.what());
    }
    if (bgr.empty() || bgr.type() != CV_8UC3) fail(ErrorKind::DecodeError, "image data could not be decoded");

    std::vector<Pixel> pixels(static_cast<std::size_t>(bgr.rows) * static_cast<std::size_t>(bgr.cols));
    for (int i = 0; i < bgr.rows; ++i) {
        const auto* row = bgr.ptr<cv::Vec3b>(i);
        for (int j = 0; j < bgr.cols; ++j) {
            pixels[static_cast<std::size_t>(i) * static_cast<std::size_t>(bgr.cols) + static_cast<std::size_t>(j)] =
                Pixel{row[j][2], row[j][1], row[j][0]};
        }
    }
    return {bgr.rows, bgr.cols, std::move(pixels)};
}

RgbImage read_image(const std::filesystem::path& path) {
    const auto data = textio::read_file(path);
    return decode_image(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) {
    cv::Mat bgr(img.rows(), img.cols(), CV_8UC3);
    for (int i = 0; i < img.rows(); ++i) {
        auto* row = bgr.ptr<cv::Vec3b>(i);
        for (int j = 0; j < img.cols(); ++j) {
            const auto& p = img.at(i, j);
            row[j] = cv::Vec3b(p.b, p.g, p.r);
        }
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", bgr, out)) fail(ErrorKind::IoError, "PNG encoding failed");
    return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& img) {
    const auto bytes = encode_png(img);
    textio::write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace flamesense
