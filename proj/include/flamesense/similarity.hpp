#pragma once

#include "flamesense/flame_model.hpp"
#include "flamesense/imaging.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flamesense {

enum class FeatureMethod { SumSim, NaiveBayes, Mvn, Gmm };

std::string_view method_name(FeatureMethod m) noexcept;
/// Accepts "sumsim", "naive_bayes", "mvn", "gmm" (case-insensitive). Throws ConfigInvalid.
FeatureMethod parse_method(std::string_view name);

/// One point of the channel-weight grid used by the GMM similarity.
struct GmmWeights {
    std::vector<Channel> channels;
    std::vector<double> weights;  // aligned with channels
    int grid_index = 0;           // b in [0, 9]
    Channel swept = Channel::R;   // channel that receives 0.05 + 0.1 b

    [[nodiscard]] std::string label() const;  // display form, e.g. "0.025-0.95-0.025"
    friend bool operator==(const GmmWeights&, const GmmWeights&) = default;
};

/// Parses "0.25,0.75" (or '-' separated) against a channel set. Throws WeightMismatch.
GmmWeights parse_weights(std::string_view text, std::span<const Channel> channels);

struct FeatureVector {
    std::vector<double> values;
    FeatureMethod method = FeatureMethod::SumSim;
    std::vector<Channel> channels;
    GridSpec grid;
    std::optional<GmmWeights> weights;
};

/// Univariate normal density. Throws DegenerateModel when sigma <= 1e-9.
double pdf_uni(double x, double mu, double sigma);

/// Per window and channel: sum of pixel densities under the ideal model.
/// Channel-major: all windows of channels[0] first.
FeatureVector feat_sum_similarity(const RgbImage& img, const IdealFlameModel& model,
                                  std::span<const Channel> channels, GridSpec spec = {});

/// Per window: sum over pixels of the product of the per-channel densities.
FeatureVector feat_naive_bayes(const RgbImage& img, const IdealFlameModel& model,
                               std::span<const Channel> channels, GridSpec spec = {});

/// Per window: sum over pixels of the joint normal density of the channel tuple.
FeatureVector feat_mvn(const RgbImage& img, const IdealFlameModel& model, std::span<const Channel> channels,
                       GridSpec spec = {});

/// Per window: sum over pixels of the weighted channel densities.
FeatureVector feat_gmm(const RgbImage& img, const IdealFlameModel& model, std::span<const Channel> channels,
                       const GmmWeights& weights, GridSpec spec = {});

/// Dispatches on method; `weights` is required for Gmm only.
FeatureVector extract_features(const RgbImage& img, const IdealFlameModel& model, FeatureMethod method,
                               std::span<const Channel> channels, const std::optional<GmmWeights>& weights,
                               GridSpec spec = {});

/// Output length of a method for a given channel count and grid.
std::size_t feature_length(FeatureMethod method, std::size_t channel_count, GridSpec spec = {});

/// The incremental weight grid: w1 = 0.05 + 0.1 b, the rest share 1 - w1.
/// The swept role rotates over every channel; duplicate tuples are dropped.
std::vector<GmmWeights> gmm_weight_grid(std::span<const Channel> channels);

struct ValidationScore {
    double r = 0.0;
    double mse = 0.0;
};

/// Picks the candidate with the highest validation R; ties go to lower MSE,
/// then lower grid index. Training failures propagate.
GmmWeights select_gmm_weights(std::span<const GmmWeights> candidates,
                              const std::function<ValidationScore(const GmmWeights&)>& fit);

}  // namespace flamesense
