#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace flamesense {

inline constexpr Eigen::Index kHiddenUnits = 6;

/// Single hidden layer of tanh units with a linear output unit.
struct MlpModel {
    Eigen::MatrixXd hidden_weights;  // kHiddenUnits x D
    Eigen::VectorXd hidden_bias;     // kHiddenUnits
    Eigen::VectorXd output_weights;  // kHiddenUnits
    double output_bias = 0.0;

    static MlpModel zeros(Eigen::Index input_dim);
    static Eigen::Index parameter_count(Eigen::Index input_dim) noexcept {
        return kHiddenUnits * input_dim + 2 * kHiddenUnits + 1;
    }

    [[nodiscard]] Eigen::Index input_dim() const noexcept { return hidden_weights.cols(); }

    /// Flat layout: hidden weights row by row, hidden bias, output weights, output bias.
    [[nodiscard]] Eigen::VectorXd parameters() const;
    static MlpModel from_parameters(Eigen::Index input_dim, const Eigen::VectorXd& theta);

    friend bool operator==(const MlpModel& a, const MlpModel& b) {
        return a.input_dim() == b.input_dim() && a.parameters() == b.parameters();
    }
};

double forward(const MlpModel& model, std::span<const double> x);

/// Predictions for every row of `X`.
Eigen::VectorXd predict(const MlpModel& model, const Eigen::MatrixXd& X);

/// J = 1/(2C) * sum (h(x_i) - y_i)^2
double cost(const MlpModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y);

/// Analytic gradient of `cost`, laid out like MlpModel::parameters().
Eigen::VectorXd gradient(const MlpModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y);

/// Row i holds d(h(x_i) - y_i)/d(theta). Targets do not enter.
Eigen::MatrixXd residual_jacobian(const MlpModel& model, const Eigen::MatrixXd& X);

/// Weights uniform in [-1/sqrt(D), 1/sqrt(D)], biases zero.
MlpModel init_weights(Eigen::Index input_dim, std::uint64_t seed);

enum class TrainMethod { LM, SCG };
enum class StopReason { MaxEpochs, ValidationPatience, GradientVanished, DampingExhausted };

std::string_view trainer_name(TrainMethod m) noexcept;
TrainMethod parse_trainer(std::string_view name);
std::string_view stop_reason_name(StopReason r) noexcept;

struct TrainConfig {
    TrainMethod method = TrainMethod::SCG;
    int max_epochs = 1000;
    int patience = 6;
    std::uint64_t seed = 0;
    double lm_mu0 = 1e-3;
    double lm_mu_factor = 10.0;
    double lm_mu_max = 1e10;
    double scg_sigma = 5e-5;
    double scg_lambda0 = 5e-7;

    void validate() const;
};

/// Costs are indexed by epoch; entry 0 is the starting point.
struct TrainReport {
    std::vector<double> train_cost;
    std::vector<double> validation_cost;
    int epochs = 0;
    int best_epoch = 0;
    StopReason stop = StopReason::MaxEpochs;

    friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

/// Sum-of-squares training objective seen by the optimisers.
class Objective {
public:
    virtual ~Objective() = default;

    [[nodiscard]] virtual Eigen::Index parameter_count() const = 0;
    [[nodiscard]] virtual Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const = 0;
    [[nodiscard]] virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta) const = 0;
    [[nodiscard]] virtual double validation_cost(const Eigen::VectorXd& theta) const = 0;

    /// Defaults: ||e||^2 / (2C) and J^T e / C.
    [[nodiscard]] virtual double cost(const Eigen::VectorXd& theta) const;
    [[nodiscard]] virtual Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
};

struct OptimizationResult {
    Eigen::VectorXd parameters;  // best-validation point
    TrainReport report;
};

/// Levenberg-Marquardt with multiplicative damping. Each epoch retries with
/// larger damping until the training cost drops; the run ends with
/// DampingExhausted once damping passes lm_mu_max (an error if that happens
/// before any step was accepted).
OptimizationResult minimize_lm(const Objective& objective, Eigen::VectorXd start, const TrainConfig& cfg);

/// Moller's scaled conjugate gradient. An epoch ends at the first successful
/// (cost non-increasing) step.
OptimizationResult minimize_scg(const Objective& objective, Eigen::VectorXd start, const TrainConfig& cfg);

/// Training/validation data bound to the network; holds references.
class MlpObjective final : public Objective {
public:
    MlpObjective(Eigen::Index input_dim, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                 const Eigen::MatrixXd& X_val, const Eigen::VectorXd& Y_val);

    [[nodiscard]] Eigen::Index parameter_count() const override;
    [[nodiscard]] Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const override;
    [[nodiscard]] Eigen::MatrixXd jacobian(const Eigen::VectorXd& theta) const override;
    [[nodiscard]] double validation_cost(const Eigen::VectorXd& theta) const override;
    [[nodiscard]] double cost(const Eigen::VectorXd& theta) const override;
    [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const override;

private:
    Eigen::Index input_dim_;
    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& Y_;
    const Eigen::MatrixXd& X_val_;
    const Eigen::VectorXd& Y_val_;
};

struct TrainedMlp {
    MlpModel model;
    TrainReport report;
};

TrainedMlp train_lm(const MlpModel& start, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                    const Eigen::MatrixXd& X_val, const Eigen::VectorXd& Y_val, const TrainConfig& cfg);
TrainedMlp train_scg(const MlpModel& start, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                     const Eigen::MatrixXd& X_val, const Eigen::VectorXd& Y_val, const TrainConfig& cfg);
/// Dispatches on cfg.method.
TrainedMlp train(const MlpModel& start, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                 const Eigen::MatrixXd& X_val, const Eigen::VectorXd& Y_val, const TrainConfig& cfg);

}  // namespace flamesense
