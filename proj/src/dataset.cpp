#include "flamesense/dataset.hpp"

#include "flamesense/error.hpp"
#include "flamesense/textio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace flamesense {

void LambdaLog::validate() const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!(entries[i].lambda > 0.0) || !std::isfinite(entries[i].lambda)) {
            fail(ErrorKind::ConfigInvalid, "lambda values must be positive and finite");
        }
        if (i > 0 && !(entries[i].timestamp > entries[i - 1].timestamp)) {
            fail(ErrorKind::ConfigInvalid, "lambda log timestamps must be strictly increasing");
        }
    }
}

void FrameIndex::validate() const {
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (!(entries[i].timestamp > entries[i - 1].timestamp)) {
            fail(ErrorKind::ConfigInvalid, "frame index timestamps must be strictly increasing");
        }
    }
}

CubicSpline::CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n != y_.size()) fail(ErrorKind::DimensionMismatch, "spline x and y differ in length");
    if (n < 4) fail(ErrorKind::TooFewPoints, "not-a-knot spline needs at least 4 points");
    for (std::size_t i = 1; i < n; ++i) {
        if (!(x_[i] > x_[i - 1])) fail(ErrorKind::ConfigInvalid, "spline knots must be strictly increasing");
    }

    std::vector<double> h(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) h[i] = x_[i + 1] - x_[i];

    // Unknowns M_1..M_{n-2}; M_0 and M_{n-1} are eliminated through the
    // not-a-knot conditions (continuous third derivative at x_1 and x_{n-2}).
    const std::size_t k = n - 2;
    std::vector<double> sub(k, 0.0), diag(k, 0.0), sup(k, 0.0), rhs(k, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t i = r + 1;
        sub[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        sup[r] = h[i];
        rhs[r] = 6.0 * ((y_[i + 1] - y_[i]) / h[i] - (y_[i] - y_[i - 1]) / h[i - 1]);
    }
    // M_0 = ((h0 + h1) M_1 - h0 M_2) / h1
    diag[0] += h[0] * (h[0] + h[1]) / h[1];
    sup[0] -= h[0] * h[0] / h[1];
    // M_{n-1} = ((h_{n-3} + h_{n-2}) M_{n-2} - h_{n-2} M_{n-3}) / h_{n-3}
    const double ha = h[n - 3];
    const double hb = h[n - 2];
    diag[k - 1] += hb * (ha + hb) / ha;
    sub[k - 1] -= hb * hb / ha;

    // Thomas algorithm; the modified end rows stay diagonally dominant.
    std::vector<double> inner(k);
    for (std::size_t r = 1; r < k; ++r) {
        const double w = sub[r] / diag[r - 1];
        diag[r] -= w * sup[r - 1];
        rhs[r] -= w * rhs[r - 1];
    }
    inner[k - 1] = rhs[k - 1] / diag[k - 1];
    for (std::size_t r = k - 1; r-- > 0;) inner[r] = (rhs[r] - sup[r] * inner[r + 1]) / diag[r];

    m_.assign(n, 0.0);
    std::copy(inner.begin(), inner.end(), m_.begin() + 1);
    m_[0] = ((h[0] + h[1]) * m_[1] - h[0] * m_[2]) / h[1];
    m_[n - 1] = ((ha + hb) * m_[n - 2] - hb * m_[n - 3]) / ha;
}

double CubicSpline::operator()(double t) const {
    if (!(t >= x_.front() && t <= x_.back())) {
        fail(ErrorKind::OutOfRange, "query " + textio::format_double(t) + " outside spline span");
    }
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - x_.begin());
    if (i > 0 && x_[i - 1] == t) return y_[i - 1];
    if (i == x_.size()) return y_.back();
    --i;
    const double h = x_[i + 1] - x_[i];
    const double a = x_[i + 1] - t;
    const double b = t - x_[i];
    return m_[i] * a * a * a / (6.0 * h) + m_[i + 1] * b * b * b / (6.0 * h) + (y_[i] / h - m_[i] * h / 6.0) * a +
           (y_[i + 1] / h - m_[i + 1] * h / 6.0) * b;
}

CubicSpline make_lambda_spline(const LambdaLog& log) {
    log.validate();
    std::vector<double> x, y;
    x.reserve(log.entries.size());
    y.reserve(log.entries.size());
    for (const auto& e : log.entries) {
        x.push_back(e.timestamp);
        y.push_back(e.lambda);
    }
    return {std::move(x), std::move(y)};
}

double cubic_interp(const LambdaLog& log, double t) { return make_lambda_spline(log)(t); }

SyncedDataset sync(const FrameIndex& frames, const LambdaLog& log) {
    if (frames.entries.empty()) fail(ErrorKind::TooFewPoints, "frame index is empty");
    frames.validate();
    const auto spline = make_lambda_spline(log);
    SyncedDataset out;
    for (const auto& f : frames.entries) {
        if (f.timestamp < spline.lower() || f.timestamp > spline.upper()) {
            ++out.dropped;
            continue;
        }
        out.samples.push_back({f.timestamp, f.image_path, spline(f.timestamp)});
    }
    return out;
}

SplitIndices split(std::size_t count, const SplitSpec& spec) {
    if (std::abs(spec.train + spec.validation + spec.test - 1.0) > 1e-12) {
        fail(ErrorKind::ConfigInvalid, "split ratios must sum to 1");
    }
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_val = static_cast<std::size_t>(std::floor(spec.validation * static_cast<double>(count)));
    const auto n_test = static_cast<std::size_t>(std::floor(spec.test * static_cast<double>(count)));
    const std::size_t n_train = count - n_val - n_test;
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return out;
}

Standardizer::Standardizer(Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
    if (mean_.size() != stddev_.size()) fail(ErrorKind::DimensionMismatch, "standardizer vectors differ in size");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& train) {
    if (train.rows() == 0) fail(ErrorKind::Empty, "cannot standardize an empty training split");
    Eigen::VectorXd mean = train.colwise().mean().transpose();
    const Eigen::MatrixXd centered = train.rowwise() - mean.transpose();
    Eigen::VectorXd sd =
        (centered.array().square().colwise().sum() / static_cast<double>(train.rows())).sqrt().transpose();
    sd = sd.cwiseMax(kStdFloor);
    return {std::move(mean), std::move(sd)};
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& features) const {
    if (features.cols() != mean_.size()) fail(ErrorKind::DimensionMismatch, "feature width differs from standardizer");
    return ((features.rowwise() - mean_.transpose()).array().rowwise() / stddev_.transpose().array()).matrix();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& standardized) const {
    if (standardized.cols() != mean_.size()) {
        fail(ErrorKind::DimensionMismatch, "feature width differs from standardizer");
    }
    return ((standardized.array().rowwise() * stddev_.transpose().array()).rowwise() + mean_.transpose().array())
        .matrix();
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& v, std::span<const std::size_t> rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
    return out;
}

namespace {

std::vector<std::vector<std::string_view>> csv_rows(std::string_view text, std::string_view expected_header,
                                                    std::size_t columns, const std::filesystem::path& path) {
    std::vector<std::vector<std::string_view>> rows;
    bool header = true;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = textio::trim(text.substr(pos, end - pos));
        pos = end + 1;
        if (line.empty()) continue;
        if (header) {
            if (line != expected_header) {
                fail(ErrorKind::IoError, path.string() + ": expected header '" + std::string(expected_header) + "'");
            }
            header = false;
            continue;
        }
        auto fields = textio::split(line, ',');
        if (fields.size() != columns) fail(ErrorKind::IoError, path.string() + ": wrong column count");
        rows.push_back(std::move(fields));
    }
    if (header) fail(ErrorKind::IoError, path.string() + ": missing header");
    return rows;
}

double field_double(std::string_view tok, const std::filesystem::path& path) {
    try {
        return textio::parse_double(tok);
    } catch (const Error&) {
        fail(ErrorKind::IoError, path.string() + ": bad number '" + std::string(tok) + "'");
    }
}

constexpr std::string_view kLambdaHeader = "timestamp_s,lambda";
constexpr std::string_view kFrameHeader = "timestamp_s,image_path";
constexpr std::string_view kManifestHeader = "timestamp_s,image_path,lambda";

}  // namespace

LambdaLog read_lambda_log(const std::filesystem::path& path) {
    const auto text = textio::read_file(path);
    LambdaLog log;
    for (const auto& row : csv_rows(text, kLambdaHeader, 2, path)) {
        log.entries.push_back({field_double(row[0], path), field_double(row[1], path)});
    }
    log.validate();
    return log;
}

void write_lambda_log(const std::filesystem::path& path, const LambdaLog& log) {
    std::string out(kLambdaHeader);
    out += '\n';
    for (const auto& e : log.entries) {
        out += textio::format_double(e.timestamp) + "," + textio::format_double(e.lambda) + "\n";
    }
    textio::write_file(path, out);
}

FrameIndex read_frame_index(const std::filesystem::path& path) {
    const auto text = textio::read_file(path);
    FrameIndex index;
    for (const auto& row : csv_rows(text, kFrameHeader, 2, path)) {
        index.entries.push_back({field_double(row[0], path), std::string(row[1])});
    }
    index.validate();
    return index;
}

void write_frame_index(const std::filesystem::path& path, const FrameIndex& index) {
    std::string out(kFrameHeader);
    out += '\n';
    for (const auto& e : index.entries) out += textio::format_double(e.timestamp) + "," + e.image_path + "\n";
    textio::write_file(path, out);
}

std::vector<SyncedSample> read_manifest(const std::filesystem::path& path) {
    const auto text = textio::read_file(path);
    std::vector<SyncedSample> samples;
    for (const auto& row : csv_rows(text, kManifestHeader, 3, path)) {
        samples.push_back({field_double(row[0], path), std::string(row[1]), field_double(row[2], path)});
    }
    return samples;
}

void write_manifest(const std::filesystem::path& path, std::span<const SyncedSample> samples) {
    std::string out(kManifestHeader);
    out += '\n';
    for (const auto& s : samples) {
        out += textio::format_double(s.timestamp) + "," + s.image_path + "," + textio::format_double(s.lambda) + "\n";
    }
    textio::write_file(path, out);
}

}  // namespace flamesense
