#include "flamesense/textio.hpp"

#include "flamesense/error.hpp"

#include <zlib.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace flamesense::textio {

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) fail(ErrorKind::IoError, "cannot format number");
    return {buf.data(), end};
}

double parse_double(std::string_view token) {
    token = trim(token);
    double value = 0.0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || end != token.data() + token.size() || token.empty()) {
        fail(ErrorKind::CorruptModel, "not a number: '" + std::string(token) + "'");
    }
    return value;
}

long long parse_int(std::string_view token) {
    token = trim(token);
    long long value = 0;
    auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || end != token.data() + token.size() || token.empty()) {
        fail(ErrorKind::CorruptModel, "not an integer: '" + std::string(token) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(delimiter, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(ErrorKind::IoError, "short write to " + path.string());
}

std::uint32_t crc32(std::string_view data) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size()));
    return static_cast<std::uint32_t>(crc);
}

namespace {
std::string hex32(std::uint32_t v) {
    std::array<char, 9> buf{};
    std::snprintf(buf.data(), buf.size(), "%08x", v);
    return buf.data();
}
}  // namespace

std::string seal(std::string body) {
    if (!body.empty() && body.back() != '\n') body.push_back('\n');
    auto sum = hex32(crc32(body));
    body += "checksum " + sum + "\n";
    return body;
}

std::string_view unseal(std::string_view text) {
    if (text.empty() || text.back() != '\n') fail(ErrorKind::CorruptModel, "missing checksum line");
    auto without_nl = text.substr(0, text.size() - 1);
    auto line_start = without_nl.rfind('\n');
    if (line_start == std::string_view::npos) fail(ErrorKind::CorruptModel, "missing checksum line");
    auto body = text.substr(0, line_start + 1);
    auto last = without_nl.substr(line_start + 1);
    constexpr std::string_view prefix = "checksum ";
    if (last.substr(0, prefix.size()) != prefix) fail(ErrorKind::CorruptModel, "missing checksum line");
    if (last.substr(prefix.size()) != hex32(crc32(body))) fail(ErrorKind::CorruptModel, "checksum mismatch");
    return body;
}

LineReader::LineReader(std::string_view body) : body_(body) {}

std::vector<std::string_view> LineReader::next() {
    while (pos_ < body_.size()) {
        auto end = body_.find('\n', pos_);
        if (end == std::string_view::npos) end = body_.size();
        auto line = trim(body_.substr(pos_, end - pos_));
        pos_ = end + 1;
        if (!line.empty()) return split_whitespace(line);
    }
    fail(ErrorKind::CorruptModel, "unexpected end of file");
}

std::vector<std::string_view> LineReader::expect(std::string_view key) {
    auto tokens = next();
    if (tokens.front() != key) {
        fail(ErrorKind::CorruptModel, "expected '" + std::string(key) + "', found '" + std::string(tokens.front()) + "'");
    }
    return tokens;
}

}  // namespace flamesense::textio
