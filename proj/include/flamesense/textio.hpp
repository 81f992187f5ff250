#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace flamesense::textio {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

/// Strict parse of a full token; throws Error(kind) on junk.
double parse_double(std::string_view token);
long long parse_int(std::string_view token);

std::vector<std::string_view> split(std::string_view line, char delimiter);
std::vector<std::string_view> split_whitespace(std::string_view line);
std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

std::uint32_t crc32(std::string_view data);

/// Appends a trailing `checksum <crc32-hex>` line covering every preceding byte.
std::string seal(std::string body);

/// Verifies and strips the checksum line; throws CorruptModel on any mismatch.
std::string_view unseal(std::string_view text);

/// Line-oriented reader for the sealed key/value formats: `key v1 v2 ...`.
class LineReader {
public:
    explicit LineReader(std::string_view body);

    [[nodiscard]] bool done() const noexcept { return pos_ >= body_.size(); }
    std::vector<std::string_view> next();
    /// Reads the next line and checks its first token equals `key`.
    std::vector<std::string_view> expect(std::string_view key);

private:
    std::string_view body_;
    std::size_t pos_ = 0;
};

}  // namespace flamesense::textio
