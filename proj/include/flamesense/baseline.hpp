#pragma once

#include "flamesense/imaging.hpp"

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace flamesense {

/// Reconstructed literature feature sets used for comparison runs.
enum class BaselineId { HueHist86, Cooc64, BlueHist255, Pca2, ResFroInf4, ResMean1, Moments4, Moments5Grad };

std::string_view baseline_name(BaselineId id) noexcept;
/// Throws ConfigInvalid for unknown names.
BaselineId parse_baseline(std::string_view name);
std::size_t baseline_length(BaselineId id) noexcept;

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;
    double kurtosis = 0.0;  // non-excess
    double skewness = 0.0;
};

Moments stat_moments(const ChannelPlane& plane);

/// Mean central-difference gradient magnitude over interior pixels.
double grad_magnitude_mean(const ChannelPlane& plane);

/// Hue quantised to 0..255; normalised counts of hues 0..84 and 230 (86 bins).
std::vector<double> hue_hist(const RgbImage& img);

/// Hue in [0, 255] for one pixel; gray pixels map to 0.
int quantized_hue(const Pixel& p) noexcept;

/// Normalised counts of blue values 1..255.
std::vector<double> blue_hist(const RgbImage& img);

/// 8-level gray co-occurrence at horizontal offset 1, normalised, row-major.
std::vector<double> cooccurrence64(const ChannelPlane& gray);

struct ResFeatures {
    double mean = 0.0;
    double frobenius = 0.0;
    double infinity = 0.0;
    double spectral = 0.0;
};

ResFeatures res_features(const ChannelPlane& gray);
double res_mean(const ChannelPlane& gray);

/// Largest singular value by power iteration on A^T A.
double spectral_norm(const ChannelPlane& plane, double rel_tol = 1e-8);

/// Two leading principal directions of window-mean downsampled gray planes.
class Pca2Basis {
public:
    static Pca2Basis fit(std::span<const ChannelPlane> planes, GridSpec downsample = {});

    [[nodiscard]] std::array<double, 2> apply(const ChannelPlane& plane) const;
    [[nodiscard]] Eigen::VectorXd downsample(const ChannelPlane& plane) const;
    /// Row-major window means; a plane of these fits the same basis as the full planes.
    static Eigen::VectorXd window_means(const ChannelPlane& plane, GridSpec grid);
    [[nodiscard]] Eigen::VectorXd reconstruct(const std::array<double, 2>& coords) const;

    [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
    [[nodiscard]] const Eigen::MatrixXd& basis() const noexcept { return basis_; }  // dims x 2
    [[nodiscard]] GridSpec grid() const noexcept { return grid_; }

private:
    GridSpec grid_;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd basis_;
};

/// Features of one frame for a stateless baseline, or Pca2 when `pca` is given.
std::vector<double> baseline_features(BaselineId id, const RgbImage& img, const Pca2Basis* pca = nullptr);

}  // namespace flamesense
