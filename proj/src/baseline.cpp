#include "flamesense/baseline.hpp"

#include "flamesense/error.hpp"
#include "flamesense/flame_model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace flamesense {

std::string_view baseline_name(BaselineId id) noexcept {
    switch (id) {
        case BaselineId::HueHist86: return "hue_hist86";
        case BaselineId::Cooc64: return "cooc64";
        case BaselineId::BlueHist255: return "blue_hist255";
        case BaselineId::Pca2: return "pca2";
        case BaselineId::ResFroInf4: return "res_fro_inf4";
        case BaselineId::ResMean1: return "res_mean1";
        case BaselineId::Moments4: return "moments4";
        case BaselineId::Moments5Grad: return "moments5_grad";
    }
    return "unknown";
}

BaselineId parse_baseline(std::string_view name) {
    for (auto id : {BaselineId::HueHist86, BaselineId::Cooc64, BaselineId::BlueHist255, BaselineId::Pca2,
                    BaselineId::ResFroInf4, BaselineId::ResMean1, BaselineId::Moments4, BaselineId::Moments5Grad}) {
        if (baseline_name(id) == name) return id;
    }
    fail(ErrorKind::ConfigInvalid, "unknown baseline '" + std::string(name) + "'");
}

std::size_t baseline_length(BaselineId id) noexcept {
    switch (id) {
        case BaselineId::HueHist86: return 86;
        case BaselineId::Cooc64: return 64;
        case BaselineId::BlueHist255: return 255;
        case BaselineId::Pca2: return 2;
        case BaselineId::ResFroInf4: return 4;
        case BaselineId::ResMean1: return 1;
        case BaselineId::Moments4: return 4;
        case BaselineId::Moments5Grad: return 5;
    }
    return 0;
}

Moments stat_moments(const ChannelPlane& plane) {
    Moments m;
    m.mean = channel_mean(plane);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : plane.values()) {
        const double d = v - m.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const auto n = static_cast<double>(plane.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.stddev = std::sqrt(m2);
    if (m2 > 0.0) {
        m.skewness = m3 / (m2 * m.stddev);
        m.kurtosis = m4 / (m2 * m2);
    }
    return m;
}

double grad_magnitude_mean(const ChannelPlane& plane) {
    if (plane.rows() < 3 || plane.cols() < 3) fail(ErrorKind::TooSmall, "gradient needs at least 3x3 pixels");
    double acc = 0.0;
    for (int i = 1; i + 1 < plane.rows(); ++i) {
        for (int j = 1; j + 1 < plane.cols(); ++j) {
            const double gx = (plane(i, j + 1) - plane(i, j - 1)) / 2.0;
            const double gy = (plane(i + 1, j) - plane(i - 1, j)) / 2.0;
            acc += std::sqrt(gx * gx + gy * gy);
        }
    }
    return acc / (static_cast<double>(plane.rows() - 2) * static_cast<double>(plane.cols() - 2));
}

int quantized_hue(const Pixel& p) noexcept {
    const int r = p.r, g = p.g, b = p.b;
    const int mx = std::max({r, g, b});
    const int mn = std::min({r, g, b});
    if (mx == mn) return 0;
    const double delta = mx - mn;
    double h = 0.0;
    if (mx == r) {
        h = 60.0 * (g - b) / delta;
    } else if (mx == g) {
        h = 60.0 * (b - r) / delta + 120.0;
    } else {
        h = 60.0 * (r - g) / delta + 240.0;
    }
    if (h < 0.0) h += 360.0;
    return std::clamp(static_cast<int>(std::lround(h * 255.0 / 360.0)), 0, 255);
}

std::vector<double> hue_hist(const RgbImage& img) {
    // Hues 0..84 occupy bins 0..84, hue 230 occupies bin 85.
    std::vector<double> bins(86, 0.0);
    for (const auto& p : img.pixels()) {
        const int h = quantized_hue(p);
        if (h < 85) {
            bins[static_cast<std::size_t>(h)] += 1.0;
        } else if (h == 230) {
            bins[85] += 1.0;
        }
    }
    const auto n = static_cast<double>(img.pixels().size());
    for (auto& v : bins) v /= n;
    return bins;
}

std::vector<double> blue_hist(const RgbImage& img) {
    std::vector<double> bins(255, 0.0);
    for (const auto& p : img.pixels()) {
        if (p.b > 0) bins[static_cast<std::size_t>(p.b - 1)] += 1.0;
    }
    const auto n = static_cast<double>(img.pixels().size());
    for (auto& v : bins) v /= n;
    return bins;
}

std::vector<double> cooccurrence64(const ChannelPlane& gray) {
    if (gray.rows() < 2 || gray.cols() < 2) fail(ErrorKind::TooSmall, "co-occurrence needs at least 2x2 pixels");
    auto level = [](double v) { return std::clamp(static_cast<int>(std::floor(v / 32.0)), 0, 7); };
    std::vector<double> counts(64, 0.0);
    double total = 0.0;
    for (int i = 0; i < gray.rows(); ++i) {
        for (int j = 0; j + 1 < gray.cols(); ++j) {
            counts[static_cast<std::size_t>(level(gray(i, j)) * 8 + level(gray(i, j + 1)))] += 1.0;
            total += 1.0;
        }
    }
    for (auto& c : counts) c /= total;
    return counts;
}

double spectral_norm(const ChannelPlane& plane, double rel_tol) {
    const int rows = plane.rows();
    const int cols = plane.cols();
    std::vector<double> v(static_cast<std::size_t>(cols), 1.0 / std::sqrt(static_cast<double>(cols)));
    std::vector<double> u(static_cast<std::size_t>(rows));
    double sigma = 0.0;
    for (int iter = 0; iter < 10000; ++iter) {
        for (int i = 0; i < rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < cols; ++j) s += plane(i, j) * v[static_cast<std::size_t>(j)];
            u[static_cast<std::size_t>(i)] = s;
        }
        std::fill(v.begin(), v.end(), 0.0);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < cols; ++j) v[static_cast<std::size_t>(j)] += plane(i, j) * u[static_cast<std::size_t>(i)];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (double& x : v) x /= norm;
        const double next = std::sqrt(norm);  // ||A^T A v|| -> sigma^2
        if (std::abs(next - sigma) <= rel_tol * next) return next;
        sigma = next;
    }
    return sigma;
}

ResFeatures res_features(const ChannelPlane& gray) {
    ResFeatures f;
    f.mean = channel_mean(gray);
    double sq = 0.0;
    for (double v : gray.values()) sq += v * v;
    f.frobenius = std::sqrt(sq);
    for (int i = 0; i < gray.rows(); ++i) {
        double row = 0.0;
        for (int j = 0; j < gray.cols(); ++j) row += std::abs(gray(i, j));
        f.infinity = std::max(f.infinity, row);
    }
    f.spectral = spectral_norm(gray);
    return f;
}

double res_mean(const ChannelPlane& gray) { return channel_mean(gray); }

Eigen::VectorXd Pca2Basis::downsample(const ChannelPlane& plane) const { return window_means(plane, grid_); }

Eigen::VectorXd Pca2Basis::window_means(const ChannelPlane& plane, GridSpec grid) {
    const auto layout = WindowLayout::for_plane(plane.rows(), plane.cols(), grid);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.window_count());
    for (int i = 0; i < plane.rows(); ++i) {
        for (int j = 0; j < plane.cols(); ++j) out[layout.slot_of(i, j)] += plane(i, j);
    }
    return out / static_cast<double>(layout.window_rows * layout.window_cols);
}

Pca2Basis Pca2Basis::fit(std::span<const ChannelPlane> planes, GridSpec downsample_grid) {
    if (planes.size() < 3) fail(ErrorKind::InsufficientData, "PCA needs at least 3 training planes");
    Pca2Basis basis;
    basis.grid_ = downsample_grid;
    const auto dims = downsample_grid.window_count();
    Eigen::MatrixXd data(static_cast<Eigen::Index>(planes.size()), dims);
    for (std::size_t i = 0; i < planes.size(); ++i) {
        if (planes[i].rows() != planes[0].rows() || planes[i].cols() != planes[0].cols()) {
            fail(ErrorKind::DimensionMismatch, "PCA training planes differ in size");
        }
        data.row(static_cast<Eigen::Index>(i)) = basis.downsample(planes[i]).transpose();
    }
    basis.mean_ = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - basis.mean_.transpose();
    const Eigen::MatrixXd scatter = centered.transpose() * centered / static_cast<double>(planes.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scatter);
    const auto& values = solver.eigenvalues();  // ascending
    const double top = values[dims - 1];
    const double second = values[dims - 2];
    if (!(top > 1e-12) || !(second > 1e-12 * top)) {
        fail(ErrorKind::InsufficientData, "training planes span fewer than two directions");
    }
    basis.basis_.resize(dims, 2);
    for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd dir = solver.eigenvectors().col(dims - 1 - k);
        Eigen::Index arg = 0;
        dir.cwiseAbs().maxCoeff(&arg);
        if (dir[arg] < 0.0) dir = -dir;
        basis.basis_.col(k) = dir;
    }
    return basis;
}

std::array<double, 2> Pca2Basis::apply(const ChannelPlane& plane) const {
    const Eigen::VectorXd c = basis_.transpose() * (downsample(plane) - mean_);
    return {c[0], c[1]};
}

Eigen::VectorXd Pca2Basis::reconstruct(const std::array<double, 2>& coords) const {
    return mean_ + basis_.col(0) * coords[0] + basis_.col(1) * coords[1];
}

std::vector<double> baseline_features(BaselineId id, const RgbImage& img, const Pca2Basis* pca) {
    switch (id) {
        case BaselineId::HueHist86: return hue_hist(img);
        case BaselineId::BlueHist255: return blue_hist(img);
        case BaselineId::Cooc64: return cooccurrence64(extract_channel(img, Channel::I));
        case BaselineId::Pca2: {
            if (pca == nullptr) fail(ErrorKind::InsufficientData, "PCA baseline needs a fitted basis");
            const auto c = pca->apply(extract_channel(img, Channel::I));
            return {c[0], c[1]};
        }
        case BaselineId::ResFroInf4: {
            const auto f = res_features(extract_channel(img, Channel::I));
            return {f.mean, f.frobenius, f.infinity, f.spectral};
        }
        case BaselineId::ResMean1: return {res_mean(extract_channel(img, Channel::I))};
        case BaselineId::Moments4: {
            const auto m = stat_moments(extract_channel(img, Channel::I));
            return {m.mean, m.stddev, m.kurtosis, m.skewness};
        }
        case BaselineId::Moments5Grad: {
            const auto gray = extract_channel(img, Channel::I);
            const auto m = stat_moments(gray);
            return {m.mean, m.stddev, m.kurtosis, m.skewness, grad_magnitude_mean(gray)};
        }
    }
    fail(ErrorKind::ConfigInvalid, "unknown baseline");
}

}  // namespace flamesense
