#include "flamesense/ann.hpp"

#include "flamesense/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <string>

namespace flamesense {

namespace {

constexpr double kGradientFloor = 1e-12;

struct ForwardPass {
    Eigen::MatrixXd hidden;  // kHiddenUnits x C, tanh activations
    Eigen::VectorXd output;  // C
};

// Per-sample dot products keep every prediction independent of batch shape,
// so a frame scores identically alone or inside a batch.
ForwardPass run_forward(const MlpModel& m, const Eigen::MatrixXd& Xt) {
    if (Xt.rows() != m.input_dim()) fail(ErrorKind::DimensionMismatch, "feature width does not match the network");
    const Eigen::MatrixXd w1t = m.hidden_weights.transpose();
    ForwardPass f;
    f.hidden.resize(kHiddenUnits, Xt.cols());
    f.output.resize(Xt.cols());
    for (Eigen::Index i = 0; i < Xt.cols(); ++i) {
        for (Eigen::Index j = 0; j < kHiddenUnits; ++j) {
            f.hidden(j, i) = std::tanh(w1t.col(j).dot(Xt.col(i)) + m.hidden_bias[j]);
        }
        f.output[i] = m.output_weights.dot(f.hidden.col(i)) + m.output_bias;
    }
    return f;
}

void check_targets(const Eigen::MatrixXd& Xt, const Eigen::VectorXd& Y) {
    if (Xt.cols() != Y.size()) fail(ErrorKind::DimensionMismatch, "sample and target counts differ");
    if (Y.size() == 0) fail(ErrorKind::DimensionMismatch, "empty batch");
}

double cost_t(const MlpModel& m, const Eigen::MatrixXd& Xt, const Eigen::VectorXd& Y) {
    check_targets(Xt, Y);
    const auto f = run_forward(m, Xt);
    return (f.output - Y).squaredNorm() / (2.0 * static_cast<double>(Y.size()));
}

Eigen::VectorXd gradient_t(const MlpModel& m, const Eigen::MatrixXd& Xt, const Eigen::VectorXd& Y) {
    check_targets(Xt, Y);
    const auto f = run_forward(m, Xt);
    const double inv_c = 1.0 / static_cast<double>(Y.size());
    const Eigen::VectorXd e = f.output - Y;

    // Back-propagated error at the hidden pre-activations.
    const Eigen::MatrixXd delta =
        ((m.output_weights * e.transpose()).array() * (1.0 - f.hidden.array().square())).matrix();
    const Eigen::MatrixXd g_w1 = delta * Xt.transpose() * inv_c;

    const Eigen::Index d = m.input_dim();
    Eigen::VectorXd g(MlpModel::parameter_count(d));
    for (Eigen::Index j = 0; j < kHiddenUnits; ++j) g.segment(j * d, d) = g_w1.row(j).transpose();
    g.segment(kHiddenUnits * d, kHiddenUnits) = delta.rowwise().sum() * inv_c;
    g.segment(kHiddenUnits * d + kHiddenUnits, kHiddenUnits) = f.hidden * e * inv_c;
    g[g.size() - 1] = e.sum() * inv_c;
    return g;
}

Eigen::MatrixXd jacobian_t(const MlpModel& m, const Eigen::MatrixXd& Xt) {
    const auto f = run_forward(m, Xt);
    const Eigen::Index d = m.input_dim();
    const Eigen::Index c = Xt.cols();
    // Built transposed so each sample's row is a contiguous column.
    Eigen::MatrixXd jt(MlpModel::parameter_count(d), c);
    for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = 0; j < kHiddenUnits; ++j) {
            const double h = f.hidden(j, i);
            const double coeff = m.output_weights[j] * (1.0 - h * h);
            jt.col(i).segment(j * d, d) = coeff * Xt.col(i);
            jt(kHiddenUnits * d + j, i) = coeff;
            jt(kHiddenUnits * d + kHiddenUnits + j, i) = h;
        }
        jt(jt.rows() - 1, i) = 1.0;
    }
    return jt.transpose();
}

bool improved(double candidate, double best) { return candidate < best; }

/// Shared early-stopping bookkeeping for both optimisers.
class EpochTracker {
public:
    EpochTracker(const Objective& objective, const Eigen::VectorXd& start, double start_cost, int patience)
        : objective_(objective), patience_(patience), best_(start) {
        report_.train_cost.push_back(start_cost);
        best_val_ = objective.validation_cost(start);
        report_.validation_cost.push_back(best_val_);
    }

    /// Records an accepted epoch; returns true when patience has run out.
    bool record(const Eigen::VectorXd& theta, double train_cost) {
        ++report_.epochs;
        const double val = objective_.validation_cost(theta);
        report_.train_cost.push_back(train_cost);
        report_.validation_cost.push_back(val);
        if (improved(val, best_val_)) {
            best_val_ = val;
            best_ = theta;
            report_.best_epoch = report_.epochs;
            fails_ = 0;
        } else {
            ++fails_;
        }
        return fails_ >= patience_;
    }

    OptimizationResult finish(StopReason reason) {
        report_.stop = reason;
        return {std::move(best_), std::move(report_)};
    }

    [[nodiscard]] int epochs() const noexcept { return report_.epochs; }

private:
    const Objective& objective_;
    int patience_;
    int fails_ = 0;
    double best_val_ = 0.0;
    Eigen::VectorXd best_;
    TrainReport report_;
};

}  // namespace

MlpModel MlpModel::zeros(Eigen::Index input_dim) {
    MlpModel m;
    m.hidden_weights = Eigen::MatrixXd::Zero(kHiddenUnits, input_dim);
    m.hidden_bias = Eigen::VectorXd::Zero(kHiddenUnits);
    m.output_weights = Eigen::VectorXd::Zero(kHiddenUnits);
    return m;
}

Eigen::VectorXd MlpModel::parameters() const {
    const Eigen::Index d = input_dim();
    Eigen::VectorXd theta(parameter_count(d));
    for (Eigen::Index j = 0; j < kHiddenUnits; ++j) theta.segment(j * d, d) = hidden_weights.row(j).transpose();
    theta.segment(kHiddenUnits * d, kHiddenUnits) = hidden_bias;
    theta.segment(kHiddenUnits * d + kHiddenUnits, kHiddenUnits) = output_weights;
    theta[theta.size() - 1] = output_bias;
    return theta;
}

MlpModel MlpModel::from_parameters(Eigen::Index input_dim, const Eigen::VectorXd& theta) {
    if (theta.size() != parameter_count(input_dim)) fail(ErrorKind::DimensionMismatch, "parameter vector size");
    MlpModel m = zeros(input_dim);
    for (Eigen::Index j = 0; j < kHiddenUnits; ++j) {
        m.hidden_weights.row(j) = theta.segment(j * input_dim, input_dim).transpose();
    }
    m.hidden_bias = theta.segment(kHiddenUnits * input_dim, kHiddenUnits);
    m.output_weights = theta.segment(kHiddenUnits * input_dim + kHiddenUnits, kHiddenUnits);
    m.output_bias = theta[theta.size() - 1];
    return m;
}

double forward(const MlpModel& model, std::span<const double> x) {
    if (static_cast<Eigen::Index>(x.size()) != model.input_dim()) {
        fail(ErrorKind::DimensionMismatch, "input length does not match the network");
    }
    const Eigen::MatrixXd xt = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    return run_forward(model, xt).output[0];
}

Eigen::VectorXd predict(const MlpModel& model, const Eigen::MatrixXd& X) {
    return run_forward(model, X.transpose()).output;
}

double cost(const MlpModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y) {
    return cost_t(model, X.transpose(), Y);
}

Eigen::VectorXd gradient(const MlpModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y) {
    return gradient_t(model, X.transpose(), Y);
}

Eigen::MatrixXd residual_jacobian(const MlpModel& model, const Eigen::MatrixXd& X) {
    return jacobian_t(model, X.transpose());
}

MlpModel init_weights(Eigen::Index input_dim, std::uint64_t seed) {
    if (input_dim < 1) fail(ErrorKind::DimensionMismatch, "input dimension must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    MlpModel m = MlpModel::zeros(input_dim);
    for (Eigen::Index j = 0; j < kHiddenUnits; ++j) {
        for (Eigen::Index k = 0; k < input_dim; ++k) m.hidden_weights(j, k) = dist(rng);
    }
    for (Eigen::Index j = 0; j < kHiddenUnits; ++j) m.output_weights[j] = dist(rng);
    return m;
}

std::string_view trainer_name(TrainMethod m) noexcept { return m == TrainMethod::LM ? "lm" : "scg"; }

TrainMethod parse_trainer(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "lm") return TrainMethod::LM;
    if (lower == "scg") return TrainMethod::SCG;
    fail(ErrorKind::ConfigInvalid, "unknown trainer '" + std::string(name) + "'");
}

std::string_view stop_reason_name(StopReason r) noexcept {
    switch (r) {
        case StopReason::MaxEpochs: return "MaxEpochs";
        case StopReason::ValidationPatience: return "ValidationPatience";
        case StopReason::GradientVanished: return "GradientVanished";
        case StopReason::DampingExhausted: return "DampingExhausted";
    }
    return "Unknown";
}

void TrainConfig::validate() const {
    if (max_epochs < 1 || patience < 1) fail(ErrorKind::ConfigInvalid, "epochs and patience must be at least 1");
    if (!(lm_mu0 > 0 && lm_mu_factor > 1 && lm_mu_max > 0 && scg_sigma > 0 && scg_lambda0 > 0)) {
        fail(ErrorKind::ConfigInvalid, "optimiser constants must be positive");
    }
}

double Objective::cost(const Eigen::VectorXd& theta) const {
    const auto e = residuals(theta);
    return e.squaredNorm() / (2.0 * static_cast<double>(e.size()));
}

Eigen::VectorXd Objective::gradient(const Eigen::VectorXd& theta) const {
    const auto e = residuals(theta);
    return jacobian(theta).transpose() * e / static_cast<double>(e.size());
}

OptimizationResult minimize_lm(const Objective& objective, Eigen::VectorXd start, const TrainConfig& cfg) {
    cfg.validate();
    Eigen::VectorXd theta = std::move(start);
    Eigen::VectorXd e = objective.residuals(theta);
    const double c = static_cast<double>(e.size());
    double current = e.squaredNorm() / (2.0 * c);
    EpochTracker tracker(objective, theta, current, cfg.patience);
    double mu = cfg.lm_mu0;
    const Eigen::Index p = objective.parameter_count();

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const Eigen::MatrixXd jac = objective.jacobian(theta);
        const Eigen::VectorXd g = jac.transpose() * e;
        if (g.norm() / c < kGradientFloor) return tracker.finish(StopReason::GradientVanished);

        // (J^T J + mu I) d = -J^T e, solved in whichever space is smaller.
        const bool sample_space = jac.rows() < p;
        const Eigen::MatrixXd normal = sample_space ? Eigen::MatrixXd(jac * jac.transpose())
                                                    : Eigen::MatrixXd(jac.transpose() * jac);
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd damped = normal;
            damped.diagonal().array() += mu;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
            const Eigen::VectorXd step =
                sample_space ? Eigen::VectorXd(-(jac.transpose() * ldlt.solve(e))) : Eigen::VectorXd(ldlt.solve(-g));
            Eigen::VectorXd candidate = theta + step;
            Eigen::VectorXd e_new = objective.residuals(candidate);
            const double trial = e_new.squaredNorm() / (2.0 * c);
            if (std::isfinite(trial) && trial < current) {
                theta = std::move(candidate);
                e = std::move(e_new);
                current = trial;
                mu = std::max(mu / cfg.lm_mu_factor, 1e-20);
                accepted = true;
            } else {
                mu *= cfg.lm_mu_factor;
                if (mu > cfg.lm_mu_max) {
                    if (tracker.epochs() == 0) {
                        fail(ErrorKind::DampingExhausted, "damping exceeded its limit before any step was accepted");
                    }
                    return tracker.finish(StopReason::DampingExhausted);
                }
            }
        }
        if (tracker.record(theta, current)) return tracker.finish(StopReason::ValidationPatience);
    }
    return tracker.finish(StopReason::MaxEpochs);
}

OptimizationResult minimize_scg(const Objective& objective, Eigen::VectorXd start, const TrainConfig& cfg) {
    cfg.validate();
    Eigen::VectorXd w = std::move(start);
    const Eigen::Index n = objective.parameter_count();
    double f = objective.cost(w);
    Eigen::VectorXd r = -objective.gradient(w);
    if (r.norm() < kGradientFloor) fail(ErrorKind::GradientVanished, "gradient is zero at the starting point");

    EpochTracker tracker(objective, w, f, cfg.patience);
    Eigen::VectorXd p = r;
    double lambda = cfg.scg_lambda0;
    double lambda_bar = 0.0;
    bool success = true;
    double delta = 0.0;
    long iteration = 0;
    int consecutive_failures = 0;
    constexpr int kMaxFailures = 200;

    while (tracker.epochs() < cfg.max_epochs) {
        ++iteration;
        double p2 = p.squaredNorm();
        if (success) {
            const double sigma_k = cfg.scg_sigma / std::sqrt(p2);
            const Eigen::VectorXd s = (objective.gradient(w + sigma_k * p) + r) / sigma_k;
            delta = p.dot(s);
        }
        delta += (lambda - lambda_bar) * p2;
        if (delta <= 0.0) {
            // Force a positive definite curvature estimate.
            lambda_bar = 2.0 * (lambda - delta / p2);
            delta = -delta + lambda * p2;
            lambda = lambda_bar;
        }
        double mu = p.dot(r);
        if (mu <= 0.0) {
            if (r.norm() < kGradientFloor) return tracker.finish(StopReason::GradientVanished);
            // Not a descent direction any more; restart along the gradient.
            p = r;
            p2 = p.squaredNorm();
            mu = p2;
            success = true;
            lambda_bar = 0.0;
            continue;
        }
        const double alpha = mu / delta;
        const Eigen::VectorXd w_new = w + alpha * p;
        const double f_new = objective.cost(w_new);
        const double comparison = 2.0 * delta * (f - f_new) / (mu * mu);

        if (std::isfinite(f_new) && comparison >= 0.0) {
            w = w_new;
            f = f_new;
            const Eigen::VectorXd r_new = -objective.gradient(w);
            lambda_bar = 0.0;
            success = true;
            consecutive_failures = 0;
            Eigen::VectorXd p_new;
            if (iteration % n == 0) {
                p_new = r_new;
            } else {
                const double beta = (r_new.squaredNorm() - r_new.dot(r)) / mu;
                p_new = r_new + beta * p;
            }
            if (comparison >= 0.75) lambda *= 0.25;
            if (comparison < 0.25) lambda += delta * (1.0 - comparison) / p2;
            r = r_new;
            p = std::move(p_new);
            if (tracker.record(w, f)) return tracker.finish(StopReason::ValidationPatience);
            if (r.norm() < kGradientFloor) return tracker.finish(StopReason::GradientVanished);
        } else {
            lambda_bar = lambda;
            success = false;
            lambda += delta * (1.0 - comparison) / p2;
            if (++consecutive_failures > kMaxFailures || !std::isfinite(lambda)) {
                return tracker.finish(StopReason::DampingExhausted);
            }
        }
    }
    return tracker.finish(StopReason::MaxEpochs);
}

MlpObjective::MlpObjective(Eigen::Index input_dim, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                           const Eigen::MatrixXd& X_val, const Eigen::VectorXd& Y_val)
    : input_dim_(input_dim), X_(X), Y_(Y), X_val_(X_val), Y_val_(Y_val) {
    if (X.cols() != input_dim || X_val.cols() != input_dim) fail(ErrorKind::DimensionMismatch, "feature width");
    if (X.rows() != Y.size() || X_val.rows() != Y_val.size()) fail(ErrorKind::DimensionMismatch, "target count");
    if (X.rows() == 0 || X_val.rows() == 0) fail(ErrorKind::Empty, "training and validation splits must be non-empty");
}

Eigen::Index MlpObjective::parameter_count() const { return MlpModel::parameter_count(input_dim_); }

Eigen::VectorXd MlpObjective::residuals(const Eigen::VectorXd& theta) const {
    return predict(MlpModel::from_parameters(input_dim_, theta), X_) - Y_;
}

Eigen::MatrixXd MlpObjective::jacobian(const Eigen::VectorXd& theta) const {
    return residual_jacobian(MlpModel::from_parameters(input_dim_, theta), X_);
}

double MlpObjective::validation_cost(const Eigen::VectorXd& theta) const {
    return flamesense::cost(MlpModel::from_parameters(input_dim_, theta), X_val_, Y_val_);
}

double MlpObjective::cost(const Eigen::VectorXd& theta) const {
    return flamesense::cost(MlpModel::from_parameters(input_dim_, theta), X_, Y_);
}

Eigen::VectorXd MlpObjective::gradient(const Eigen::VectorXd& theta) const {
    return flamesense::gradient(MlpModel::from_parameters(input_dim_, theta), X_, Y_);
}

TrainedMlp train_lm(const MlpModel& start, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                    const Eigen::MatrixXd& X_val, const Eigen::VectorXd& Y_val, const TrainConfig& cfg) {
    const MlpObjective objective(start.input_dim(), X, Y, X_val, Y_val);
    auto result = minimize_lm(objective, start.parameters(), cfg);
    return {MlpModel::from_parameters(start.input_dim(), result.parameters), std::move(result.report)};
}

TrainedMlp train_scg(const MlpModel& start, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                     const Eigen::MatrixXd& X_val, const Eigen::VectorXd& Y_val, const TrainConfig& cfg) {
    const MlpObjective objective(start.input_dim(), X, Y, X_val, Y_val);
    auto result = minimize_scg(objective, start.parameters(), cfg);
    return {MlpModel::from_parameters(start.input_dim(), result.parameters), std::move(result.report)};
}

TrainedMlp train(const MlpModel& start, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                 const Eigen::MatrixXd& X_val, const Eigen::VectorXd& Y_val, const TrainConfig& cfg) {
    return cfg.method == TrainMethod::LM ? train_lm(start, X, Y, X_val, Y_val, cfg)
                                         : train_scg(start, X, Y, X_val, Y_val, cfg);
}

}  // namespace flamesense
