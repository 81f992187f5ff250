#pragma once

// Glue shared by the command-line front end and the Python module: what a
// feature column set is, how frames become rows, and the persisted artifacts.

#include "flamesense/ann.hpp"
#include "flamesense/baseline.hpp"
#include "flamesense/dataset.hpp"
#include "flamesense/flame_model.hpp"
#include "flamesense/similarity.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace flamesense {

/// A similarity method over a channel set, or one of the baseline descriptors.
struct FeatureSpec {
    bool baseline = false;
    FeatureMethod method = FeatureMethod::SumSim;
    std::vector<Channel> channels;
    std::optional<GmmWeights> weights;
    BaselineId baseline_id = BaselineId::ResMean1;
    GridSpec grid;

    [[nodiscard]] std::size_t length() const;
    /// "sumsim", "gmm[0.025-0.95-0.025]", "baseline:cooc64".
    [[nodiscard]] std::string method_label() const;
    /// Channel letters, or "-" for baselines.
    [[nodiscard]] std::string channel_label() const;
    /// Throws IllegalChannel / WeightMismatch / ConfigInvalid for bad combinations.
    void validate() const;
};

/// "sumsim:RGB", "gmm:RG", "gmm:RGB@0.025,0.95,0.025", "baseline:cooc64".
/// A GMM spec without weights leaves `weights` empty (search the grid).
FeatureSpec parse_feature_spec(std::string_view text, GridSpec grid = {});

/// One frame's feature row. `ideal` is needed by the similarity methods,
/// `pca` by the pca2 baseline.
std::vector<double> featurize(const FeatureSpec& spec, const RgbImage& img, const IdealFlameModel* ideal,
                              const Pca2Basis* pca = nullptr);

struct FeatureRow {
    std::string frame_id;  // image path as written in the manifest
    double timestamp = 0.0;
    std::vector<double> values;
};

struct FeatureTable {
    FeatureSpec spec;
    std::vector<FeatureRow> rows;

    [[nodiscard]] Eigen::MatrixXd matrix() const;
};

/// A `# flamesense-features v1 ...` metadata line, then
/// `frame_id,timestamp_s,method,channels,f0,...` rows.
std::string render_feature_table(const FeatureTable& table);
FeatureTable parse_feature_table(std::string_view text);
void write_feature_table(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable read_feature_table(const std::filesystem::path& path);

/// Everything predict needs to go from an image to a lambda estimate.
struct TrainedModel {
    FeatureSpec spec;
    Standardizer standardizer;
    MlpModel mlp;
    TrainMethod trainer = TrainMethod::SCG;
    std::optional<IdealFlameModel> ideal;  // present for similarity features

    [[nodiscard]] double predict_image(const RgbImage& img) const;
    /// Same arithmetic as predict_image, from an already extracted row.
    [[nodiscard]] double predict_row(std::span<const double> features) const;
};

std::string serialize_trained_model(const TrainedModel& model);
/// Throws VersionMismatch or CorruptModel.
TrainedModel parse_trained_model(std::string_view text);
void save_trained_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_trained_model(const std::filesystem::path& path);

/// Image paths resolved against the directory of the index that named them.
std::filesystem::path resolve_path(const std::filesystem::path& base_dir, const std::string& path);

}  // namespace flamesense
