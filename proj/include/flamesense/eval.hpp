#pragma once

#include "flamesense/ann.hpp"
#include "flamesense/dataset.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace flamesense {

/// 1/C * sum (a_i - b_i)^2. Throws LengthMismatch / Empty.
double mse(std::span<const double> targets, std::span<const double> predictions);

/// Pearson correlation. Throws DegenerateVariance for a constant input.
double pearson_r(std::span<const double> targets, std::span<const double> predictions);

struct SplitMetrics {
    double mse = std::numeric_limits<double>::quiet_NaN();
    double r = std::numeric_limits<double>::quiet_NaN();

    /// NaN compares equal to NaN here so parsed reports can be checked.
    friend bool operator==(const SplitMetrics& a, const SplitMetrics& b);
};

struct RunResult {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    SplitMetrics all, train, validation, test;

    friend bool operator==(const RunResult&, const RunResult&) = default;
};

struct EvalReport {
    std::string method;    // e.g. "sumsim", "gmm[0.25-0.75]", "baseline:cooc64"
    std::string channels;  // e.g. "RGB"; "-" for baselines
    std::size_t feature_length = 0;
    std::string trainer;
    bool available = true;
    std::string note;
    std::vector<RunResult> runs;
    SplitMetrics mean_all, mean_train, mean_validation, mean_test;

    [[nodiscard]] std::size_t failed_runs() const;
    /// Recomputes the means over the runs that succeeded.
    void finalize();

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// One training of the regression network on a seeded split.
struct FittedRun {
    SplitIndices split;
    Standardizer standardizer;
    MlpModel model;
    TrainReport report;
    Eigen::VectorXd predictions;  // for every sample, in dataset order
};

/// Split and initialise with `seed`, standardise with training statistics, train.
FittedRun fit_once(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const TrainConfig& cfg,
                   std::uint64_t seed);

SplitMetrics split_metrics(const Eigen::VectorXd& targets, const Eigen::VectorXd& predictions,
                           std::span<const std::size_t> indices);

struct ExperimentConfig {
    TrainConfig train;
    int runs = 10;
    std::uint64_t base_seed = 0;
};

struct Experiment {
    EvalReport report;
    Eigen::VectorXd first_run_predictions;  // empty when run 0 failed
};

/// Run r uses seed base_seed + r for both split and initialisation. Failed
/// runs are kept in the report and left out of the means.
Experiment run_experiment(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                          const ExperimentConfig& cfg, std::string method, std::string channels);

/// Comma-separated table: one `mean` row per report followed by its `run` rows.
std::string render_machine(std::span<const EvalReport> reports);
std::vector<EvalReport> parse_machine(std::string_view text);

/// Aligned text table in the All / Train / Test layout, sorted by
/// descending all-split R.
std::string render_human(std::span<const EvalReport> reports);

void sort_reports(std::vector<EvalReport>& reports);

}  // namespace flamesense
