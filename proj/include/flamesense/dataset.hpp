#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace flamesense {

struct LambdaSample {
    double timestamp = 0.0;
    double lambda = 0.0;
};

/// Analyzer readings; timestamps strictly increasing, lambda > 0.
struct LambdaLog {
    std::vector<LambdaSample> entries;

    void validate() const;
};

struct FrameEntry {
    double timestamp = 0.0;
    std::string image_path;
};

struct FrameIndex {
    std::vector<FrameEntry> entries;

    void validate() const;
};

/// Not-a-knot cubic spline through (x, y); no extrapolation.
class CubicSpline {
public:
    CubicSpline(std::vector<double> x, std::vector<double> y);

    /// Throws OutOfRange outside [x.front(), x.back()].
    [[nodiscard]] double operator()(double t) const;

    [[nodiscard]] double lower() const noexcept { return x_.front(); }
    [[nodiscard]] double upper() const noexcept { return x_.back(); }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_;  // second derivatives at the knots
};

CubicSpline make_lambda_spline(const LambdaLog& log);
double cubic_interp(const LambdaLog& log, double t);

struct SyncedSample {
    double timestamp = 0.0;
    std::string image_path;
    double lambda = 0.0;
};

struct SyncedDataset {
    std::vector<SyncedSample> samples;
    std::size_t dropped = 0;  // frames outside the lambda log span
};

SyncedDataset sync(const FrameIndex& frames, const LambdaLog& log);

struct SplitSpec {
    double train = 0.70;
    double validation = 0.15;
    double test = 0.15;
    std::uint64_t seed = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Seeded uniform permutation; validation and test get floor(ratio * count).
SplitIndices split(std::size_t count, const SplitSpec& spec);

/// Per-feature z-scoring with training-split statistics.
class Standardizer {
public:
    static constexpr double kStdFloor = 1e-12;

    Standardizer() = default;
    Standardizer(Eigen::VectorXd mean, Eigen::VectorXd stddev);

    /// Rows of `train` are samples.
    static Standardizer fit(const Eigen::MatrixXd& train);

    [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;
    [[nodiscard]] Eigen::MatrixXd invert(const Eigen::MatrixXd& standardized) const;

    [[nodiscard]] const Eigen::VectorXd& mean() const noexcept { return mean_; }
    [[nodiscard]] const Eigen::VectorXd& stddev() const noexcept { return stddev_; }

private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd stddev_;
};

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows);
Eigen::VectorXd select_rows(const Eigen::VectorXd& v, std::span<const std::size_t> rows);

// Text formats. Relative image paths in index files are kept as written;
// resolve them against the index file's directory.
LambdaLog read_lambda_log(const std::filesystem::path& path);
void write_lambda_log(const std::filesystem::path& path, const LambdaLog& log);
FrameIndex read_frame_index(const std::filesystem::path& path);
void write_frame_index(const std::filesystem::path& path, const FrameIndex& index);
std::vector<SyncedSample> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const SyncedSample> samples);

}  // namespace flamesense
