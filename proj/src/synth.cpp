#include "flamesense/synth.hpp"

#include "flamesense/error.hpp"
#include "flamesense/flame_model.hpp"
#include "flamesense/textio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>

namespace flamesense {

namespace {

constexpr double kKnotSpacing = 20.0;  // seconds between random-walk knots
constexpr double kWalkStep = 0.25;     // knot-to-knot std, in units of the range
constexpr int kSpotSlots = 12;

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return mix(mix(seed ^ mix(stream)) + index);
}

double reflect_unit(double u) {
    while (u < 0.0 || u > 1.0) u = u < 0.0 ? -u : 2.0 - u;
    return u;
}

struct Spot {
    double dy;  // offset from centre, in units of the base radius
    double dx;
};

std::array<Spot, kSpotSlots> spot_layout(std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 2, 0));
    std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.141592653589793);
    std::uniform_real_distribution<double> radius(0.0, 0.75);
    std::array<Spot, kSpotSlots> spots{};
    for (auto& s : spots) {
        const double a = angle(rng);
        const double r = radius(rng);
        s = {r * std::sin(a), r * std::cos(a)};
    }
    return spots;
}

}  // namespace

void RigConfig::validate() const {
    if (image_size < 32 || image_size % 16 != 0) {
        fail(ErrorKind::ConfigInvalid, "image size must be at least 32 and divisible by 16");
    }
    if (!(frame_rate > 0.0) || !(lambda_rate > 0.0)) fail(ErrorKind::ConfigInvalid, "rates must be positive");
    if (!(duration_s > 0.0)) fail(ErrorKind::ConfigInvalid, "session length must be positive");
    if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min) || !std::isfinite(lambda_max)) {
        fail(ErrorKind::ConfigInvalid, "lambda range must be a finite positive interval");
    }
    if (!(noise >= 0.0)) fail(ErrorKind::ConfigInvalid, "noise must be non-negative");
}

LambdaTrajectory::LambdaTrajectory(const RigConfig& cfg) : lo_(cfg.lambda_min), hi_(cfg.lambda_max) {
    if (hi_ == lo_) return;
    std::mt19937_64 rng(derive_seed(cfg.seed, 1, 0));
    std::uniform_real_distribution<double> start(0.0, 1.0);
    std::normal_distribution<double> step(0.0, kWalkStep);
    double u = start(rng);
    for (double t = -kKnotSpacing; t <= cfg.duration_s + 2.0 * kKnotSpacing; t += kKnotSpacing) {
        knot_t_.push_back(t);
        knot_u_.push_back(u);
        u = reflect_unit(u + step(rng));
    }
    spline_.emplace(knot_t_, knot_u_);
}

double LambdaTrajectory::operator()(double t) const {
    if (!spline_) return lo_;
    return std::clamp(lo_ + (hi_ - lo_) * (*spline_)(t), lo_, hi_);
}

RgbImage render_frame(const RigConfig& cfg, double lambda, std::uint64_t noise_seed) {
    const int size = cfg.image_size;
    const double u = (lambda - 0.8) / 2.2;  // appearance scale is fixed, not tied to the configured range
    const double core_r = 150.0 + 90.0 * u;
    const double core_g = 60.0 + 140.0 * u;
    const double core_b = 25.0 + 110.0 * u * std::abs(u);
    const double base_radius = 0.22 * size;
    const double radius = size * (0.22 + 0.12 * u);
    const double centre = (size - 1) / 2.0;

    // Blotches fade in one after another as lambda leaves [1.2, 1.5].
    const double distance = lambda < kIdealLambdaMin ? kIdealLambdaMin - lambda
                            : lambda > kIdealLambdaMax ? lambda - kIdealLambdaMax
                                                       : 0.0;
    const double spot_level = 6.0 * distance;
    const auto spots = spot_layout(cfg.seed);
    const double spot_radius = 0.05 * size;

    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    RgbImage img(size, size);
    for (int i = 0; i < size; ++i) {
        for (int j = 0; j < size; ++j) {
            const double dy = i - centre;
            const double dx = j - centre;
            const double d = std::sqrt(dx * dx + dy * dy);
            const double cover = std::clamp((radius - d) / 1.5 + 0.5, 0.0, 1.0);
            const double falloff = 1.0 - 0.35 * std::min(1.0, (d / radius) * (d / radius));
            double shade = 1.0;
            for (int k = 0; k < kSpotSlots; ++k) {
                const double strength = std::clamp(spot_level - k, 0.0, 1.0);
                if (strength <= 0.0) break;
                const double sy = dy - spots[static_cast<std::size_t>(k)].dy * base_radius;
                const double sx = dx - spots[static_cast<std::size_t>(k)].dx * base_radius;
                const double inside = std::clamp((spot_radius - std::sqrt(sx * sx + sy * sy)) / 1.5 + 0.5, 0.0, 1.0);
                shade *= 1.0 - 0.65 * strength * inside;
            }
            const std::array<double, 3> background{18.0, 12.0, 10.0};
            const std::array<double, 3> flame{core_r, core_g, core_b};
            std::array<std::uint8_t, 3> out{};
            for (std::size_t c = 0; c < 3; ++c) {
                double v = background[c] + cover * (flame[c] * falloff * shade - background[c]);
                if (cfg.noise > 0.0) v += cfg.noise * noise(rng);
                out[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
            img.at(i, j) = Pixel{out[0], out[1], out[2]};
        }
    }
    return img;
}

Session generate_session(const RigConfig& cfg) {
    cfg.validate();
    const LambdaTrajectory trajectory(cfg);
    Session s;
    const auto n_frames = static_cast<std::size_t>(std::floor(cfg.duration_s * cfg.frame_rate + 1e-9));
    const auto n_lambda = static_cast<std::size_t>(std::floor(cfg.duration_s * cfg.lambda_rate + 1e-9));
    for (std::size_t k = 0; k < n_lambda; ++k) {
        const double t = static_cast<double>(k) / cfg.lambda_rate;
        s.log.entries.push_back({t, trajectory(t)});
    }
    s.images.reserve(n_frames);
    for (std::size_t k = 0; k < n_frames; ++k) {
        const double t = static_cast<double>(k) / cfg.frame_rate;
        const double lambda = trajectory(t);
        char name[48];
        std::snprintf(name, sizeof name, "frames/frame_%06zu.png", k);
        s.frames.entries.push_back({t, name});
        s.truth.push_back(lambda);
        s.images.push_back(render_frame(cfg, lambda, derive_seed(cfg.seed, 3, k)));
    }
    return s;
}

ReferenceSet ideal_reference_frames(const RigConfig& cfg, int count) {
    cfg.validate();
    if (count < 1) fail(ErrorKind::ConfigInvalid, "reference count must be positive");
    ReferenceSet ref;
    for (int k = 0; k < count; ++k) {
        const double lambda = count == 1 ? 0.5 * (kIdealLambdaMin + kIdealLambdaMax)
                                         : kIdealLambdaMin + (kIdealLambdaMax - kIdealLambdaMin) * k / (count - 1);
        ref.lambdas.push_back(lambda);
        ref.frames.push_back(render_frame(cfg, lambda, derive_seed(cfg.seed, 4, static_cast<std::uint64_t>(k))));
    }
    return ref;
}

void write_session(const std::filesystem::path& dir, const Session& session, const ReferenceSet& reference) {
    std::filesystem::create_directories(dir / "frames");
    std::filesystem::create_directories(dir / "reference");
    for (std::size_t k = 0; k < session.images.size(); ++k) {
        write_png(dir / session.frames.entries[k].image_path, session.images[k]);
    }
    write_frame_index(dir / "frames.csv", session.frames);
    write_lambda_log(dir / "lambda.csv", session.log);

    std::string truth = "timestamp_s,lambda\n";
    for (std::size_t k = 0; k < session.truth.size(); ++k) {
        truth += textio::format_double(session.frames.entries[k].timestamp) + "," +
                 textio::format_double(session.truth[k]) + "\n";
    }
    textio::write_file(dir / "truth.csv", truth);

    std::string refs = "lambda,image_path\n";
    for (std::size_t k = 0; k < reference.frames.size(); ++k) {
        char name[48];
        std::snprintf(name, sizeof name, "reference/ref_%03zu.png", k);
        write_png(dir / name, reference.frames[k]);
        refs += textio::format_double(reference.lambdas[k]) + "," + name + "\n";
    }
    textio::write_file(dir / "reference.csv", refs);
}

ReferenceSet read_reference_set(const std::filesystem::path& path) {
    const auto text = textio::read_file(path);
    const auto base = path.parent_path();
    ReferenceSet ref;
    bool header = true;
    for (auto line : textio::split(text, '\n')) {
        line = textio::trim(line);
        if (line.empty()) continue;
        if (header) {
            if (line != "lambda,image_path") fail(ErrorKind::IoError, path.string() + ": expected header 'lambda,image_path'");
            header = false;
            continue;
        }
        const auto f = textio::split(line, ',');
        if (f.size() != 2) fail(ErrorKind::IoError, path.string() + ": wrong column count");
        double lambda = 0.0;
        try {
            lambda = textio::parse_double(f[0]);
        } catch (const Error&) {
            fail(ErrorKind::IoError, path.string() + ": bad lambda");
        }
        ref.lambdas.push_back(lambda);
        ref.frames.push_back(read_image(base / std::string(f[1])));
    }
    return ref;
}

}  // namespace flamesense
