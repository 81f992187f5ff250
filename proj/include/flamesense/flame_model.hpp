#pragma once

#include "flamesense/imaging.hpp"

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace flamesense {

inline constexpr double kIdealLambdaMin = 1.2;
inline constexpr double kIdealLambdaMax = 1.5;

struct ChannelStats {
    double mean = 0.0;
    double stddev = 0.0;

    friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

/// Channel subsets with a stored covariance, in file order.
enum class ChannelSubset : std::uint8_t { RG = 0, RB = 1, GB = 2, RGB = 3 };

inline constexpr std::size_t kSubsetCount = 4;

std::span<const Channel> subset_channels(ChannelSubset subset) noexcept;

/// Throws IllegalChannel for I or for a set that is not one of RG/RB/GB/RGB
/// (any order).
ChannelSubset subset_for(std::span<const Channel> channels);

struct CovMatrix {
    std::vector<Channel> channels;  // ordered as in subset_channels
    Eigen::MatrixXd entries;

    friend bool operator==(const CovMatrix& a, const CovMatrix& b) {
        return a.channels == b.channels && a.entries.rows() == b.entries.rows() &&
               a.entries.cols() == b.entries.cols() && a.entries == b.entries;
    }
};

/// Statistics of flames recorded in the ideal combustion band.
struct IdealFlameModel {
    std::array<ChannelStats, kChannelCount> stats{};  // indexed by Channel
    std::array<CovMatrix, kSubsetCount> covs{};       // indexed by ChannelSubset
    std::size_t frame_count = 0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;

    [[nodiscard]] const ChannelStats& stats_for(Channel ch) const { return stats[static_cast<std::size_t>(ch)]; }
    [[nodiscard]] const CovMatrix& cov_for(ChannelSubset s) const { return covs[static_cast<std::size_t>(s)]; }

    /// True when some channel has zero spread; density evaluation will refuse it.
    [[nodiscard]] bool degenerate() const noexcept;

    friend bool operator==(const IdealFlameModel&, const IdealFlameModel&) = default;
};

double channel_mean(const ChannelPlane& plane);
double channel_std(const ChannelPlane& plane);
double channel_cov(const ChannelPlane& a, const ChannelPlane& b);

/// Pools every pixel of every reference frame into one sample per channel.
IdealFlameModel fit_ideal_model(std::span<const RgbImage> frames, std::span<const double> lambdas);

std::string serialize_model(const IdealFlameModel& model);
IdealFlameModel parse_model(std::string_view text);
void save_model(const IdealFlameModel& model, const std::filesystem::path& path);
IdealFlameModel load_model(const std::filesystem::path& path);

}  // namespace flamesense
