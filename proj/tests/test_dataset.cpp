#include "helpers.hpp"

#include "flamesense/dataset.hpp"
#include "flamesense/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

using namespace flamesense;

namespace {

double cubic(double t) { return t * t * t - 2.0 * t + 1.0; }

LambdaLog log_of(const std::function<double(double)>& f, int first, int last, double step = 1.0) {
    LambdaLog log;
    for (int k = first; k <= last; ++k) log.entries.push_back({k * step, f(k * step)});
    return log;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::Empty;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("not-a-knot spline reproduces a cubic") {
    // The cubic dips to zero and below, so it goes straight to the interpolator
    // rather than through a lambda log.
    std::vector<double> x, y;
    for (int k = 0; k <= 9; ++k) {
        x.push_back(k);
        y.push_back(cubic(k));
    }
    const CubicSpline spline(x, y);
    for (int k = 0; k <= 9; ++k) CHECK(spline(k) == cubic(k));
    CHECK(std::abs(spline(2.5) - 11.625) <= 1e-9);  // 15.625 - 5 + 1
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> t(0.0, 9.0);
    for (int k = 0; k < 100; ++k) {
        const double q = t(rng);
        CHECK(std::abs(spline(q) - cubic(q)) <= 1e-9);
    }
    CHECK(kind_of([&] { (void)spline(-0.001); }) == ErrorKind::OutOfRange);
    CHECK(kind_of([&] { (void)spline(9.5); }) == ErrorKind::OutOfRange);
    CHECK(kind_of([] { make_lambda_spline(log_of([](double t) { return t + 1.0; }, 0, 2)); }) == ErrorKind::TooFewPoints);
}

TEST_CASE("spline reproduces lower-degree polynomials; four knots") {
    const auto quad = log_of([](double t) { return 0.5 * t * t + 3.0; }, 0, 3);
    for (double q = 0.0; q <= 3.0; q += 0.125) CHECK(std::abs(cubic_interp(quad, q) - (0.5 * q * q + 3.0)) <= 1e-9);
    const auto line = log_of([](double t) { return 2.0 * t + 1.0; }, 0, 20, 0.5);
    for (double q = 0.0; q <= 10.0; q += 0.3) CHECK(std::abs(cubic_interp(line, q) - (2.0 * q + 1.0)) <= 1e-9);
}

TEST_CASE("sync pairs frames with interpolated lambda and drops the edges") {
    auto f = [](double t) { return 1.5 + 0.3 * std::sin(0.05 * t); };
    const auto log = log_of(f, 0, 100);
    FrameIndex frames;
    for (int k = -2; k <= 203; ++k) frames.entries.push_back({0.5 * k, "f" + std::to_string(k) + ".png"});
    const auto synced = sync(frames, log);
    CHECK(synced.samples.size() == 201);  // t in [0, 100]
    CHECK(synced.dropped == 5);
    CHECK(synced.samples.size() <= frames.entries.size());
    for (const auto& s : synced.samples) {
        CHECK(s.timestamp >= 0.0);
        CHECK(s.timestamp <= 100.0);
        CHECK(std::abs(s.lambda - f(s.timestamp)) <= 1e-5);  // spline error on a smooth curve
    }

    FrameIndex inside;
    for (int k = 0; k <= 20; ++k) inside.entries.push_back({0.5 * k, "x.png"});
    auto lifted = [](double t) { return cubic(t) + 1.0; };
    const auto all = sync(inside, log_of(lifted, 0, 10));
    CHECK(all.dropped == 0);
    for (const auto& s : all.samples) CHECK(std::abs(s.lambda - lifted(s.timestamp)) <= 1e-9);
}

TEST_CASE("split sizes follow the floor rule") {
    const auto table = split(9956, SplitSpec{0.70, 0.15, 0.15, 1});
    CHECK(table.train.size() == 6970);
    CHECK(table.validation.size() == 1493);
    CHECK(table.test.size() == 1493);
    const auto ten = split(10, SplitSpec{});
    CHECK(ten.train.size() == 8);
    CHECK(ten.validation.size() == 1);
    CHECK(ten.test.size() == 1);

    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> count(1, 5000);
    for (int k = 0; k < 100; ++k) {
        const auto c = count(rng);
        const auto s = split(c, SplitSpec{0.70, 0.15, 0.15, static_cast<std::uint64_t>(k)});
        CHECK(s.validation.size() == static_cast<std::size_t>(std::floor(0.15 * static_cast<double>(c))));
        CHECK(s.test.size() == s.validation.size());
        std::set<std::size_t> seen;
        for (const auto* part : {&s.train, &s.validation, &s.test}) seen.insert(part->begin(), part->end());
        CHECK(seen.size() == c);
        CHECK(*seen.rbegin() == c - 1);
    }
    const auto a = split(500, SplitSpec{0.70, 0.15, 0.15, 42});
    const auto b = split(500, SplitSpec{0.70, 0.15, 0.15, 42});
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    const auto other = split(500, SplitSpec{0.70, 0.15, 0.15, 43});
    CHECK(other.train != a.train);
}

TEST_CASE("standardizer") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d(5.0, 3.0);
    Eigen::MatrixXd x(200, 4);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = d(rng) * static_cast<double>(j + 1) * 100.0;
        x(i, 3) = 7.0;  // constant column
    }
    const auto st = Standardizer::fit(x);
    const Eigen::MatrixXd z = st.apply(x);
    for (Eigen::Index j = 0; j < 3; ++j) {
        const double mean = z.col(j).mean();
        const double var = (z.col(j).array() - mean).square().mean();
        CHECK(std::abs(mean) <= 1e-10);
        CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-10);
    }
    CHECK(z.col(3).cwiseAbs().maxCoeff() == 0.0);
    CHECK((st.invert(z) - x).cwiseAbs().maxCoeff() <= 1e-10 * x.cwiseAbs().maxCoeff());
    CHECK(kind_of([&] { (void)st.apply(Eigen::MatrixXd::Zero(2, 3)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("text formats round trip") {
    const auto dir = testing::scratch_dir("dataset");
    LambdaLog log = log_of([](double t) { return 1.0 + t / 3.0; }, 0, 5);
    write_lambda_log(dir / "lambda.csv", log);
    const auto back = read_lambda_log(dir / "lambda.csv");
    REQUIRE(back.entries.size() == log.entries.size());
    for (std::size_t k = 0; k < log.entries.size(); ++k) {
        CHECK(back.entries[k].timestamp == log.entries[k].timestamp);
        CHECK(back.entries[k].lambda == log.entries[k].lambda);
    }
    FrameIndex idx;
    idx.entries = {{0.0, "frames/a.png"}, {0.5, "frames/b.png"}};
    write_frame_index(dir / "frames.csv", idx);
    const auto idx2 = read_frame_index(dir / "frames.csv");
    CHECK(idx2.entries[1].image_path == "frames/b.png");
    CHECK(idx2.entries[1].timestamp == 0.5);

    const std::vector<SyncedSample> rows{{0.0, "a.png", 1.25}, {0.5, "b.png", 1.0 / 3.0}};
    write_manifest(dir / "manifest.csv", rows);
    const auto rows2 = read_manifest(dir / "manifest.csv");
    CHECK(rows2[1].lambda == 1.0 / 3.0);

    {
        std::ofstream(dir / "bad.csv") << "timestamp_s,lambda\n1,1.2\n0,1.3\n";
        CHECK_THROWS_AS(read_lambda_log(dir / "bad.csv"), Error);
    }
    std::filesystem::remove_all(dir);
}

}
