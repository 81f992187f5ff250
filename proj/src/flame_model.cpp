#include "flamesense/flame_model.hpp"

#include "flamesense/error.hpp"
#include "flamesense/textio.hpp"

#include <algorithm>
#include <cmath>

namespace flamesense {

namespace {

constexpr std::string_view kFormatName = "flamesense-ideal-model";
constexpr int kFormatVersion = 1;

constexpr std::array<Channel, 2> kRG{Channel::R, Channel::G};
constexpr std::array<Channel, 2> kRB{Channel::R, Channel::B};
constexpr std::array<Channel, 2> kGB{Channel::G, Channel::B};
constexpr std::array<Channel, 3> kRGB{Channel::R, Channel::G, Channel::B};

void require_same_shape(const ChannelPlane& a, const ChannelPlane& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) fail(ErrorKind::DimensionMismatch, "planes differ in size");
}

std::string subset_name(ChannelSubset s) { return channel_string(subset_channels(s)); }

}  // namespace

std::span<const Channel> subset_channels(ChannelSubset subset) noexcept {
    switch (subset) {
        case ChannelSubset::RG: return kRG;
        case ChannelSubset::RB: return kRB;
        case ChannelSubset::GB: return kGB;
        case ChannelSubset::RGB: return kRGB;
    }
    return kRGB;
}

ChannelSubset subset_for(std::span<const Channel> channels) {
    bool has[3] = {false, false, false};
    for (auto ch : channels) {
        if (ch == Channel::I) fail(ErrorKind::IllegalChannel, "gray channel I cannot join a joint channel subset");
        has[static_cast<int>(ch)] = true;
    }
    const int count = static_cast<int>(has[0]) + static_cast<int>(has[1]) + static_cast<int>(has[2]);
    if (count != static_cast<int>(channels.size()) || count < 2) {
        fail(ErrorKind::IllegalChannel, "joint subset needs 2 or 3 distinct colour channels");
    }
    if (count == 3) return ChannelSubset::RGB;
    if (!has[2]) return ChannelSubset::RG;
    if (!has[1]) return ChannelSubset::RB;
    return ChannelSubset::GB;
}

bool IdealFlameModel::degenerate() const noexcept {
    return std::any_of(stats.begin(), stats.end(), [](const ChannelStats& s) { return !(s.stddev > 0.0); });
}

double channel_mean(const ChannelPlane& plane) {
    if (plane.size() == 0) fail(ErrorKind::Empty, "empty plane");
    double sum = 0.0;
    for (double v : plane.values()) sum += v;
    return sum / static_cast<double>(plane.size());
}

double channel_std(const ChannelPlane& plane) {
    const double mu = channel_mean(plane);
    double acc = 0.0;
    for (double v : plane.values()) acc += (v - mu) * (v - mu);
    return std::sqrt(acc / static_cast<double>(plane.size()));
}

double channel_cov(const ChannelPlane& a, const ChannelPlane& b) {
    require_same_shape(a, b);
    const double mu_a = channel_mean(a);
    const double mu_b = channel_mean(b);
    const auto va = a.values();
    const auto vb = b.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) acc += (va[i] - mu_a) * (vb[i] - mu_b);
    return acc / static_cast<double>(va.size());
}

IdealFlameModel fit_ideal_model(std::span<const RgbImage> frames, std::span<const double> lambdas) {
    if (frames.empty()) fail(ErrorKind::EmptyReference, "no reference frames");
    if (frames.size() != lambdas.size()) fail(ErrorKind::DimensionMismatch, "one lambda per reference frame required");
    if (frames.size() < 2) fail(ErrorKind::EmptyReference, "at least two reference frames required");
    for (double l : lambdas) {
        if (!(l >= kIdealLambdaMin && l <= kIdealLambdaMax)) {
            fail(ErrorKind::LambdaOutOfBand, "reference lambda " + textio::format_double(l) + " outside [1.2, 1.5]");
        }
    }
    const int rows = frames.front().rows();
    const int cols = frames.front().cols();
    for (const auto& f : frames) {
        if (f.rows() != rows || f.cols() != cols) fail(ErrorKind::DimensionMismatch, "reference frames differ in size");
    }

    // Two passes over the pooled sample: means, then central second moments.
    std::array<double, kChannelCount> sum{};
    std::size_t n = 0;
    for (const auto& f : frames) {
        for (const auto& p : f.pixels()) {
            for (std::size_t k = 0; k < kChannelCount; ++k) sum[k] += channel_value(p, static_cast<Channel>(k));
        }
        n += f.pixels().size();
    }
    std::array<double, kChannelCount> mu{};
    for (std::size_t k = 0; k < kChannelCount; ++k) mu[k] = sum[k] / static_cast<double>(n);

    Eigen::Matrix4d co = Eigen::Matrix4d::Zero();
    for (const auto& f : frames) {
        for (const auto& p : f.pixels()) {
            Eigen::Vector4d d;
            for (std::size_t k = 0; k < kChannelCount; ++k) {
                d[static_cast<Eigen::Index>(k)] = channel_value(p, static_cast<Channel>(k)) - mu[k];
            }
            for (int a = 0; a < 4; ++a) {
                for (int b = a; b < 4; ++b) co(a, b) += d[a] * d[b];
            }
        }
    }
    co /= static_cast<double>(n);
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < a; ++b) co(a, b) = co(b, a);
    }

    IdealFlameModel model;
    for (std::size_t k = 0; k < kChannelCount; ++k) {
        const auto idx = static_cast<Eigen::Index>(k);
        model.stats[k] = ChannelStats{mu[k], std::sqrt(co(idx, idx))};
    }
    for (std::size_t s = 0; s < kSubsetCount; ++s) {
        const auto chans = subset_channels(static_cast<ChannelSubset>(s));
        CovMatrix cov;
        cov.channels.assign(chans.begin(), chans.end());
        const auto d = static_cast<Eigen::Index>(chans.size());
        cov.entries.resize(d, d);
        for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index b = 0; b < d; ++b) {
                cov.entries(a, b) = co(static_cast<int>(chans[static_cast<std::size_t>(a)]),
                                       static_cast<int>(chans[static_cast<std::size_t>(b)]));
            }
        }
        model.covs[s] = std::move(cov);
    }
    model.frame_count = frames.size();
    model.lambda_min = *std::min_element(lambdas.begin(), lambdas.end());
    model.lambda_max = *std::max_element(lambdas.begin(), lambdas.end());
    return model;
}

std::string serialize_model(const IdealFlameModel& model) {
    using textio::format_double;
    std::string out;
    out += std::string(kFormatName) + " v" + std::to_string(kFormatVersion) + "\n";
    out += "frame_count " + std::to_string(model.frame_count) + "\n";
    out += "lambda_range " + format_double(model.lambda_min) + " " + format_double(model.lambda_max) + "\n";
    out += std::string("degenerate ") + (model.degenerate() ? "1" : "0") + "\n";
    for (std::size_t k = 0; k < kChannelCount; ++k) {
        out += std::string("stats ") + channel_letter(static_cast<Channel>(k)) + " " +
               format_double(model.stats[k].mean) + " " + format_double(model.stats[k].stddev) + "\n";
    }
    for (std::size_t s = 0; s < kSubsetCount; ++s) {
        const auto& cov = model.covs[s];
        out += "cov " + subset_name(static_cast<ChannelSubset>(s));
        for (Eigen::Index a = 0; a < cov.entries.rows(); ++a) {
            for (Eigen::Index b = 0; b < cov.entries.cols(); ++b) out += " " + format_double(cov.entries(a, b));
        }
        out += "\n";
    }
    return textio::seal(std::move(out));
}

IdealFlameModel parse_model(std::string_view text) {
    // Version is checked before the checksum so a foreign version reports as such.
    const auto first_nl = text.find('\n');
    const auto header = textio::split_whitespace(text.substr(0, first_nl));
    if (header.size() != 2 || header[0] != kFormatName || header[1].size() < 2 || header[1][0] != 'v') {
        fail(ErrorKind::CorruptModel, "not an ideal flame model file");
    }
    if (header[1] != "v" + std::to_string(kFormatVersion)) {
        fail(ErrorKind::VersionMismatch, "unsupported model version " + std::string(header[1]));
    }
    textio::LineReader reader(textio::unseal(text));
    reader.next();

    IdealFlameModel model;
    auto tok = reader.expect("frame_count");
    if (tok.size() != 2) fail(ErrorKind::CorruptModel, "bad frame_count line");
    model.frame_count = static_cast<std::size_t>(textio::parse_int(tok[1]));
    tok = reader.expect("lambda_range");
    if (tok.size() != 3) fail(ErrorKind::CorruptModel, "bad lambda_range line");
    model.lambda_min = textio::parse_double(tok[1]);
    model.lambda_max = textio::parse_double(tok[2]);
    reader.expect("degenerate");
    for (std::size_t k = 0; k < kChannelCount; ++k) {
        tok = reader.expect("stats");
        if (tok.size() != 4 || tok[1].size() != 1 || tok[1][0] != channel_letter(static_cast<Channel>(k))) {
            fail(ErrorKind::CorruptModel, "bad stats line");
        }
        model.stats[k] = ChannelStats{textio::parse_double(tok[2]), textio::parse_double(tok[3])};
    }
    for (std::size_t s = 0; s < kSubsetCount; ++s) {
        const auto subset = static_cast<ChannelSubset>(s);
        const auto chans = subset_channels(subset);
        const auto d = static_cast<Eigen::Index>(chans.size());
        tok = reader.expect("cov");
        if (tok.size() != static_cast<std::size_t>(2 + d * d) || tok[1] != subset_name(subset)) {
            fail(ErrorKind::CorruptModel, "bad cov line");
        }
        CovMatrix cov;
        cov.channels.assign(chans.begin(), chans.end());
        cov.entries.resize(d, d);
        for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index b = 0; b < d; ++b) {
                cov.entries(a, b) = textio::parse_double(tok[static_cast<std::size_t>(2 + a * d + b)]);
            }
        }
        model.covs[s] = std::move(cov);
    }
    if (!reader.done()) fail(ErrorKind::CorruptModel, "trailing content in model file");
    return model;
}

void save_model(const IdealFlameModel& model, const std::filesystem::path& path) {
    textio::write_file(path, serialize_model(model));
}

IdealFlameModel load_model(const std::filesystem::path& path) { return parse_model(textio::read_file(path)); }

}  // namespace flamesense
