#include "flamesense/similarity.hpp"

#include "flamesense/error.hpp"
#include "flamesense/textio.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <numbers>

namespace flamesense {

namespace {

constexpr double kMinSigma = 1e-9;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

/// Precomputed univariate density for one channel.
struct UniDensity {
    double mu = 0.0;
    double inv_two_var = 0.0;
    double norm = 0.0;

    UniDensity(double mean, double sigma) : mu(mean) {
        if (!(sigma > kMinSigma)) fail(ErrorKind::DegenerateModel, "channel standard deviation is zero");
        inv_two_var = 1.0 / (2.0 * sigma * sigma);
        norm = kInvSqrt2Pi / sigma;
    }

    [[nodiscard]] double operator()(double x) const noexcept {
        const double d = x - mu;
        return norm * std::exp(-d * d * inv_two_var);
    }
};

UniDensity density_for(const IdealFlameModel& model, Channel ch) {
    const auto& s = model.stats_for(ch);
    return {s.mean, s.stddev};
}

/// Sums `per_pixel(p)` into the window that owns each pixel.
template <typename F>
std::vector<double> accumulate_windows(const RgbImage& img, GridSpec spec, F&& per_pixel) {
    const auto layout = WindowLayout::for_plane(img.rows(), img.cols(), spec);
    std::vector<double> out(static_cast<std::size_t>(spec.window_count()), 0.0);
    for (int i = 0; i < img.rows(); ++i) {
        const int row_base = (i / layout.window_rows) * spec.cols;
        for (int j = 0; j < img.cols(); ++j) {
            out[static_cast<std::size_t>(row_base + j / layout.window_cols)] += per_pixel(img.at(i, j));
        }
    }
    return out;
}

void require_colour_channels(std::span<const Channel> channels, std::size_t min_count, std::size_t max_count) {
    for (auto ch : channels) {
        if (ch == Channel::I) fail(ErrorKind::IllegalChannel, "gray channel I is derived and cannot be combined");
    }
    if (channels.size() < min_count || channels.size() > max_count) {
        fail(ErrorKind::IllegalChannel, "unsupported channel count " + std::to_string(channels.size()));
    }
}

FeatureVector make_vector(FeatureMethod method, std::span<const Channel> channels, GridSpec spec) {
    FeatureVector fv;
    fv.method = method;
    fv.channels.assign(channels.begin(), channels.end());
    fv.grid = spec;
    return fv;
}

}  // namespace

std::string_view method_name(FeatureMethod m) noexcept {
    switch (m) {
        case FeatureMethod::SumSim: return "sumsim";
        case FeatureMethod::NaiveBayes: return "naive_bayes";
        case FeatureMethod::Mvn: return "mvn";
        case FeatureMethod::Gmm: return "gmm";
    }
    return "unknown";
}

FeatureMethod parse_method(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "sumsim" || lower == "sum" || lower == "sum_similarity") return FeatureMethod::SumSim;
    if (lower == "naive_bayes" || lower == "naivebayes" || lower == "nb") return FeatureMethod::NaiveBayes;
    if (lower == "mvn") return FeatureMethod::Mvn;
    if (lower == "gmm") return FeatureMethod::Gmm;
    fail(ErrorKind::ConfigInvalid, "unknown feature method '" + std::string(name) + "'");
}

std::string GmmWeights::label() const {
    std::string s;
    char buf[32];
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (k) s.push_back('-');
        std::snprintf(buf, sizeof buf, "%.6g", weights[k]);
        s += buf;
    }
    return s;
}

GmmWeights parse_weights(std::string_view text, std::span<const Channel> channels) {
    GmmWeights w;
    w.channels.assign(channels.begin(), channels.end());
    const char delim = text.find(',') != std::string_view::npos ? ',' : '-';
    for (auto tok : textio::split(text, delim)) {
        try {
            w.weights.push_back(textio::parse_double(tok));
        } catch (const Error&) {
            fail(ErrorKind::WeightMismatch, "bad weight '" + std::string(tok) + "'");
        }
    }
    if (w.weights.size() != channels.size()) fail(ErrorKind::WeightMismatch, "one weight per channel required");
    double total = 0.0;
    for (double x : w.weights) {
        if (!(x > 0.0 && x < 1.0)) fail(ErrorKind::WeightMismatch, "weights must lie in (0, 1)");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorKind::WeightMismatch, "weights must sum to 1");
    const auto dominant = std::max_element(w.weights.begin(), w.weights.end()) - w.weights.begin();
    w.swept = channels[static_cast<std::size_t>(dominant)];
    w.grid_index = static_cast<int>(std::lround((w.weights[static_cast<std::size_t>(dominant)] - 0.05) / 0.1));
    return w;
}

double pdf_uni(double x, double mu, double sigma) {
    if (!(sigma > kMinSigma)) fail(ErrorKind::DegenerateModel, "sigma must exceed 1e-9");
    const double d = (x - mu) / sigma;
    return kInvSqrt2Pi / sigma * std::exp(-0.5 * d * d);
}

FeatureVector feat_sum_similarity(const RgbImage& img, const IdealFlameModel& model,
                                  std::span<const Channel> channels, GridSpec spec) {
    if (channels.empty()) fail(ErrorKind::IllegalChannel, "no channels requested");
    auto fv = make_vector(FeatureMethod::SumSim, channels, spec);
    for (auto ch : channels) {
        const auto density = density_for(model, ch);
        auto part = accumulate_windows(img, spec, [&](const Pixel& p) { return density(channel_value(p, ch)); });
        fv.values.insert(fv.values.end(), part.begin(), part.end());
    }
    return fv;
}

FeatureVector feat_naive_bayes(const RgbImage& img, const IdealFlameModel& model,
                               std::span<const Channel> channels, GridSpec spec) {
    require_colour_channels(channels, 1, 3);
    std::vector<std::pair<Channel, UniDensity>> densities;
    for (auto ch : channels) densities.emplace_back(ch, density_for(model, ch));
    auto fv = make_vector(FeatureMethod::NaiveBayes, channels, spec);
    fv.values = accumulate_windows(img, spec, [&](const Pixel& p) {
        double prod = 1.0;
        for (const auto& [ch, density] : densities) prod *= density(channel_value(p, ch));
        return prod;
    });
    return fv;
}

FeatureVector feat_mvn(const RgbImage& img, const IdealFlameModel& model, std::span<const Channel> channels,
                       GridSpec spec) {
    require_colour_channels(channels, 2, 3);
    const auto subset = subset_for(channels);
    const auto& cov = model.cov_for(subset);
    const auto d = static_cast<Eigen::Index>(channels.size());

    // Reorder the stored covariance to the requested channel order.
    Eigen::MatrixXd sigma(d, d);
    Eigen::VectorXd mu(d);
    std::vector<Eigen::Index> pos(channels.size());
    for (std::size_t a = 0; a < channels.size(); ++a) {
        pos[a] = std::find(cov.channels.begin(), cov.channels.end(), channels[a]) - cov.channels.begin();
        mu[static_cast<Eigen::Index>(a)] = model.stats_for(channels[a]).mean;
    }
    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) {
            sigma(a, b) = cov.entries(pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)]);
        }
    }

    // Singularity is judged on the correlation matrix so the test is scale-free.
    const Eigen::VectorXd diag = sigma.diagonal();
    if ((diag.array() <= kMinSigma * kMinSigma).any()) {
        fail(ErrorKind::SingularCovariance, "covariance has a zero-variance channel");
    }
    const Eigen::VectorXd inv_sd = diag.array().sqrt().inverse();
    const Eigen::MatrixXd corr = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
    if (!(corr.determinant() > 1e-12)) fail(ErrorKind::SingularCovariance, "covariance matrix is singular");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) fail(ErrorKind::SingularCovariance, "covariance is not positive definite");

    const Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
    const double det = sigma.determinant();
    const double norm = 1.0 / std::sqrt(det * std::pow(2.0 * std::numbers::pi, static_cast<double>(d)));

    auto fv = make_vector(FeatureMethod::Mvn, channels, spec);
    if (d == 2) {
        const double p00 = precision(0, 0), p01 = precision(0, 1), p11 = precision(1, 1);
        const Channel c0 = channels[0], c1 = channels[1];
        fv.values = accumulate_windows(img, spec, [&](const Pixel& p) {
            const double x0 = channel_value(p, c0) - mu[0];
            const double x1 = channel_value(p, c1) - mu[1];
            const double q = p00 * x0 * x0 + 2.0 * p01 * x0 * x1 + p11 * x1 * x1;
            return norm * std::exp(-0.5 * q);
        });
    } else {
        const Eigen::Matrix3d prec3 = precision;
        const Channel c0 = channels[0], c1 = channels[1], c2 = channels[2];
        fv.values = accumulate_windows(img, spec, [&](const Pixel& p) {
            const Eigen::Vector3d x(channel_value(p, c0) - mu[0], channel_value(p, c1) - mu[1],
                                    channel_value(p, c2) - mu[2]);
            return norm * std::exp(-0.5 * x.dot(prec3 * x));
        });
    }
    return fv;
}

FeatureVector feat_gmm(const RgbImage& img, const IdealFlameModel& model, std::span<const Channel> channels,
                       const GmmWeights& weights, GridSpec spec) {
    if (channels.size() < 2 || channels.size() > 3) {
        fail(ErrorKind::WeightMismatch, "weighted similarity needs 2 or 3 channels");
    }
    require_colour_channels(channels, 2, 3);
    if (weights.channels.size() != channels.size() || weights.weights.size() != channels.size() ||
        !std::equal(channels.begin(), channels.end(), weights.channels.begin())) {
        fail(ErrorKind::WeightMismatch, "weight tuple does not match the channel set");
    }
    std::vector<std::pair<Channel, UniDensity>> densities;
    for (auto ch : channels) densities.emplace_back(ch, density_for(model, ch));
    auto fv = make_vector(FeatureMethod::Gmm, channels, spec);
    fv.weights = weights;
    fv.values = accumulate_windows(img, spec, [&](const Pixel& p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < densities.size(); ++k) {
            acc += weights.weights[k] * densities[k].second(channel_value(p, densities[k].first));
        }
        return acc;
    });
    return fv;
}

FeatureVector extract_features(const RgbImage& img, const IdealFlameModel& model, FeatureMethod method,
                               std::span<const Channel> channels, const std::optional<GmmWeights>& weights,
                               GridSpec spec) {
    switch (method) {
        case FeatureMethod::SumSim: return feat_sum_similarity(img, model, channels, spec);
        case FeatureMethod::NaiveBayes: return feat_naive_bayes(img, model, channels, spec);
        case FeatureMethod::Mvn: return feat_mvn(img, model, channels, spec);
        case FeatureMethod::Gmm:
            if (!weights) fail(ErrorKind::WeightMismatch, "weighted similarity needs a weight tuple");
            return feat_gmm(img, model, channels, *weights, spec);
    }
    fail(ErrorKind::ConfigInvalid, "unknown method");
}

std::size_t feature_length(FeatureMethod method, std::size_t channel_count, GridSpec spec) {
    const auto windows = static_cast<std::size_t>(spec.window_count());
    return method == FeatureMethod::SumSim ? windows * channel_count : windows;
}

std::vector<GmmWeights> gmm_weight_grid(std::span<const Channel> channels) {
    if (channels.size() != 2 && channels.size() != 3) {
        fail(ErrorKind::WeightMismatch, "weight grid is defined for 2 or 3 channels");
    }
    std::vector<GmmWeights> grid;
    for (std::size_t swept = 0; swept < channels.size(); ++swept) {
        for (int b = 0; b <= 9; ++b) {
            // Integer numerator keeps w1 at the nearest double to the decimal;
            // deriving the rest from 1 - w1 keeps every tuple summing to exactly 1.
            const double w1 = (5.0 + 10.0 * b) / 100.0;
            const double rest = channels.size() == 2 ? 1.0 - w1 : (1.0 - w1) / 2.0;
            GmmWeights w;
            w.channels.assign(channels.begin(), channels.end());
            w.weights.assign(channels.size(), rest);
            w.weights[swept] = w1;
            w.grid_index = b;
            w.swept = channels[swept];
            const bool duplicate = std::any_of(grid.begin(), grid.end(), [&](const GmmWeights& other) {
                for (std::size_t k = 0; k < channels.size(); ++k) {
                    if (std::abs(other.weights[k] - w.weights[k]) > 1e-9) return false;
                }
                return true;
            });
            if (!duplicate) grid.push_back(std::move(w));
        }
    }
    return grid;
}

GmmWeights select_gmm_weights(std::span<const GmmWeights> candidates,
                              const std::function<ValidationScore(const GmmWeights&)>& fit) {
    if (candidates.empty()) fail(ErrorKind::Empty, "no weight candidates");
    std::size_t best = 0;
    ValidationScore best_score = fit(candidates[0]);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const auto score = fit(candidates[i]);
        bool better = score.r > best_score.r;
        if (score.r == best_score.r) {
            better = score.mse < best_score.mse ||
                     (score.mse == best_score.mse && candidates[i].grid_index < candidates[best].grid_index);
        }
        if (better) {
            best = i;
            best_score = score;
        }
    }
    return candidates[best];
}

}  // namespace flamesense
