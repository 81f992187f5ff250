#pragma once

#include "flamesense/dataset.hpp"
#include "flamesense/imaging.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace flamesense {

struct RigConfig {
    int image_size = 128;
    double duration_s = 1000.0;
    double frame_rate = 2.0;
    double lambda_rate = 1.0;
    double lambda_min = 0.8;
    double lambda_max = 3.0;
    double noise = 4.0;  // pixel noise standard deviation
    std::uint64_t seed = 1;

    /// Throws ConfigInvalid.
    void validate() const;
};

/// Smooth seeded random walk for lambda(t): a spline through random-walk
/// knots, clipped to the configured range. Constant when the range is a point.
class LambdaTrajectory {
public:
    explicit LambdaTrajectory(const RigConfig& cfg);

    [[nodiscard]] double operator()(double t) const;

private:
    double lo_;
    double hi_;
    std::vector<double> knot_t_;
    std::vector<double> knot_u_;
    std::optional<CubicSpline> spline_;
};

/// Renders one frame. The flame disk brightens and grows with lambda (the
/// green mean is strictly increasing); dark blotches appear as lambda leaves
/// the ideal band. `noise_seed` only drives the pixel noise.
RgbImage render_frame(const RigConfig& cfg, double lambda, std::uint64_t noise_seed);

struct Session {
    FrameIndex frames;
    LambdaLog log;
    std::vector<double> truth;  // lambda(t) at each frame timestamp
    std::vector<RgbImage> images;
};

Session generate_session(const RigConfig& cfg);

struct ReferenceSet {
    std::vector<RgbImage> frames;
    std::vector<double> lambdas;
};

/// `count` frames at lambdas evenly spaced over the ideal band (midpoint for one).
ReferenceSet ideal_reference_frames(const RigConfig& cfg, int count = 22);

/// Writes frames/, frames.csv, lambda.csv, truth.csv, reference/ and
/// reference.csv under `dir`.
void write_session(const std::filesystem::path& dir, const Session& session, const ReferenceSet& reference);

/// reference.csv: `lambda,image_path` rows, paths relative to the file.
ReferenceSet read_reference_set(const std::filesystem::path& path);

}  // namespace flamesense
