#pragma once

// Reference implementations and small objectives shared by the unit tests
// and the acceptance run.

#include "flamesense/ann.hpp"

#include <Eigen/Core>

#include <cmath>
#include <random>

namespace testing {

using flamesense::kHiddenUnits;
using flamesense::MlpModel;
using flamesense::Objective;

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = d(rng);
    }
    return m;
}

inline MlpModel random_model(Eigen::Index d, std::uint64_t seed, double scale = 0.5) {
    const Eigen::VectorXd theta = random_matrix(MlpModel::parameter_count(d), 1, seed, scale);
    return MlpModel::from_parameters(d, theta);
}

// Independent forward pass in long double, written unit by unit.
inline long double oracle_forward(const MlpModel& m, const Eigen::VectorXd& x) {
    long double out = m.output_bias;
    for (Eigen::Index h = 0; h < kHiddenUnits; ++h) {
        long double z = m.hidden_bias[h];
        for (Eigen::Index j = 0; j < x.size(); ++j) z += static_cast<long double>(m.hidden_weights(h, j)) * x[j];
        out += static_cast<long double>(m.output_weights[h]) * std::tanh(z);
    }
    return out;
}

inline long double oracle_cost(const MlpModel& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y) {
    long double s = 0.0L;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const long double r = oracle_forward(m, X.row(i).transpose()) - Y[i];
        s += r * r;
    }
    return s / (2.0L * X.rows());
}

// Linear least squares e = A theta - b, used as a surrogate for the optimisers.
class LinearObjective final : public Objective {
public:
    LinearObjective(Eigen::MatrixXd A, Eigen::VectorXd b) : A_(std::move(A)), b_(std::move(b)) {}
    [[nodiscard]] Eigen::Index parameter_count() const override { return A_.cols(); }
    [[nodiscard]] Eigen::VectorXd residuals(const Eigen::VectorXd& t) const override { return A_ * t - b_; }
    [[nodiscard]] Eigen::MatrixXd jacobian(const Eigen::VectorXd&) const override { return A_; }
    [[nodiscard]] double validation_cost(const Eigen::VectorXd& t) const override { return cost(t); }

private:
    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
};

// Rosenbrock residuals; the validation cost prefers theta_0 = 0.5, which the
// path to the training optimum (1, 1) passes and then leaves.
class ValleyObjective final : public Objective {
public:
    [[nodiscard]] Eigen::Index parameter_count() const override { return 2; }
    [[nodiscard]] Eigen::VectorXd residuals(const Eigen::VectorXd& t) const override {
        return Eigen::Vector2d(10.0 * (t[1] - t[0] * t[0]), 1.0 - t[0]);
    }
    [[nodiscard]] Eigen::MatrixXd jacobian(const Eigen::VectorXd& t) const override {
        Eigen::MatrixXd j(2, 2);
        j << -20.0 * t[0], 10.0, -1.0, 0.0;
        return j;
    }
    [[nodiscard]] double validation_cost(const Eigen::VectorXd& t) const override {
        return (t[0] - 0.5) * (t[0] - 0.5);
    }
};

}  // namespace testing
