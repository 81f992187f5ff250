#include "helpers.hpp"

#include "flamesense/error.hpp"
#include "flamesense/similarity.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace flamesense;
using testing::rel_err;

namespace {

double oracle_pdf(double x, double mu, double sigma) {
    return std::exp(-(x - mu) * (x - mu) / (2.0 * sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

IdealFlameModel model_with(double mr, double sr, double mg, double sg, double mb, double sb) {
    IdealFlameModel m;
    m.stats[0] = {mr, sr};
    m.stats[1] = {mg, sg};
    m.stats[2] = {mb, sb};
    m.stats[3] = {0.299 * mr + 0.587 * mg + 0.114 * mb, 30.0};
    const Channel subsets[4][3] = {{Channel::R, Channel::G}, {Channel::R, Channel::B}, {Channel::G, Channel::B},
                                   {Channel::R, Channel::G, Channel::B}};
    const double sd[3] = {sr, sg, sb};
    for (std::size_t s = 0; s < 4; ++s) {
        const std::size_t d = s == 3 ? 3 : 2;
        m.covs[s].channels.assign(subsets[s], subsets[s] + d);
        m.covs[s].entries = Eigen::MatrixXd::Zero(Eigen::Index(d), Eigen::Index(d));
        for (std::size_t a = 0; a < d; ++a) {
            const auto k = static_cast<std::size_t>(m.covs[s].channels[a]);
            m.covs[s].entries(Eigen::Index(a), Eigen::Index(a)) = sd[k] * sd[k];
        }
    }
    m.frame_count = 2;
    m.lambda_min = 1.2;
    m.lambda_max = 1.5;
    return m;
}

// A fitted model with realistic correlations, from mildly varied frames.
IdealFlameModel fitted_model() {
    std::vector<RgbImage> frames{testing::random_image(32, 32, 101, 40, 220), testing::random_image(32, 32, 102, 40, 220)};
    for (auto& f : frames) {
        for (auto& p : f.pixels()) p.g = static_cast<std::uint8_t>((p.r + p.g) / 2);  // correlate R and G
    }
    const std::vector<double> lambdas{1.3, 1.4};
    return fit_ideal_model(frames, lambdas);
}

double window_sum(const RgbImage& img, GridSpec spec, int t, const std::function<double(const Pixel&)>& f) {
    const int m = img.rows() / spec.rows;
    const int n = img.cols() / spec.cols;
    const int top = (t / spec.cols) * m;
    const int left = (t % spec.cols) * n;
    double s = 0.0;
    for (int i = top; i < top + m; ++i) {
        for (int j = left; j < left + n; ++j) s += f(img.at(i, j));
    }
    return s;
}

double value_of(const Pixel& p, Channel ch) {
    switch (ch) {
        case Channel::R: return p.r;
        case Channel::G: return p.g;
        case Channel::B: return p.b;
        case Channel::I: return 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
    }
    return 0.0;
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

TEST_SUITE("similarity") {

TEST_CASE("univariate density identities") {
    CHECK(pdf_uni(3.0, 3.0, 1.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
    for (double sigma : {0.5, 1.0, 7.0, 40.0}) {
        const double peak = pdf_uni(10.0, 10.0, sigma);
        CHECK(rel_err(peak, 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi))) <= 1e-14);
        CHECK(rel_err(pdf_uni(10.0 + sigma, 10.0, sigma) / peak, std::exp(-0.5)) <= 1e-14);
        CHECK(rel_err(pdf_uni(10.0 - sigma, 10.0, sigma) / peak, std::exp(-0.5)) <= 1e-14);
    }
    CHECK(rel_err(pdf_uni(130.0, 127.5, 10.0), oracle_pdf(130.0, 127.5, 10.0)) <= 1e-14);
    CHECK(kind_of([] { pdf_uni(1.0, 1.0, 1e-9); }) == ErrorKind::DegenerateModel);
    CHECK(kind_of([] { pdf_uni(1.0, 1.0, 0.0); }) == ErrorKind::DegenerateModel);
}

TEST_CASE("sum similarity: length, peak windows, pixel oracle") {
    const auto model = fitted_model();
    const auto rgb = parse_channels("RGB");
    const auto img = testing::random_image(64, 64, 7);
    const auto fv = feat_sum_similarity(img, model, rgb);
    CHECK(fv.values.size() == 768);
    CHECK(feature_length(FeatureMethod::SumSim, 3) == 768);

    for (std::size_t c = 0; c < 3; ++c) {
        const auto ch = rgb[c];
        const auto st = model.stats_for(ch);
        for (int t : {0, 17, 255}) {
            const double oracle = window_sum(img, GridSpec{}, t, [&](const Pixel& p) { return oracle_pdf(value_of(p, ch), st.mean, st.stddev); });
            CHECK(rel_err(fv.values[c * 256 + static_cast<std::size_t>(t)], oracle) <= 1e-10);
        }
    }

    const auto flat = model_with(100, 10, 50, 5, 20, 4);
    const RgbImage at_mean(32, 32, Pixel{100, 50, 20});
    const auto peak = feat_sum_similarity(at_mean, flat, rgb);
    for (std::size_t t = 0; t < 256; ++t) {
        CHECK(rel_err(peak.values[t], 4.0 / (10.0 * std::sqrt(2.0 * std::numbers::pi))) <= 1e-14);
        CHECK(rel_err(peak.values[512 + t], 4.0 / (4.0 * std::sqrt(2.0 * std::numbers::pi))) <= 1e-14);
    }

    const auto single_window = feat_sum_similarity(testing::random_image(68, 68, 3), model, rgb, GridSpec{1, 1});
    const auto big = testing::random_image(68, 68, 3);
    const auto st = model.stats_for(Channel::G);
    double oracle = 0.0;
    for (const auto& p : big.pixels()) oracle += oracle_pdf(p.g, st.mean, st.stddev);
    CHECK(rel_err(single_window.values[1], oracle) <= 1e-10);

    CHECK(kind_of([&] { feat_sum_similarity(testing::random_image(40, 40, 1), model, rgb); }) == ErrorKind::GridMismatch);
    const auto degenerate = model_with(100, 0, 50, 5, 20, 4);
    CHECK(kind_of([&] { feat_sum_similarity(img, degenerate, rgb); }) == ErrorKind::DegenerateModel);
}

TEST_CASE("sum similarity is additive over pixel partitions and non-negative") {
    const auto model = fitted_model();
    const auto img = testing::random_image(32, 32, 21);
    const auto g = parse_channels("G");
    const auto coarse = feat_sum_similarity(img, model, g, GridSpec{1, 1});
    const auto fine = feat_sum_similarity(img, model, g, GridSpec{4, 4});
    double total = 0.0;
    for (double v : fine.values) {
        CHECK(v >= 0.0);
        CHECK(std::isfinite(v));
        total += v;
    }
    CHECK(rel_err(coarse.values[0], total) <= 1e-12);
}

TEST_CASE("naive bayes: one channel, peak product, pixel oracle, illegal channel") {
    const auto model = fitted_model();
    const auto img = testing::random_image(32, 32, 31);
    const auto g = parse_channels("G");
    CHECK(feat_naive_bayes(img, model, g).values == feat_sum_similarity(img, model, g).values);

    const auto flat = model_with(100, 10, 50, 5, 20, 4);
    const auto rg = parse_channels("RG");
    const auto peak = feat_naive_bayes(RgbImage(32, 32, Pixel{100, 50, 20}), flat, rg);
    const double expected = 4.0 * (1.0 / (10.0 * std::sqrt(2.0 * std::numbers::pi))) * (1.0 / (5.0 * std::sqrt(2.0 * std::numbers::pi)));
    CHECK(rel_err(peak.values[0], expected) <= 1e-14);

    const auto fv = feat_naive_bayes(img, model, rg);
    CHECK(fv.values.size() == 256);
    const auto sr = model.stats_for(Channel::R);
    const auto sg = model.stats_for(Channel::G);
    for (int t : {0, 100, 255}) {
        const double oracle = window_sum(img, GridSpec{}, t, [&](const Pixel& p) {
            return oracle_pdf(p.r, sr.mean, sr.stddev) * oracle_pdf(p.g, sg.mean, sg.stddev);
        });
        CHECK(rel_err(fv.values[static_cast<std::size_t>(t)], oracle) <= 1e-10);
    }
    CHECK(kind_of([&] { feat_naive_bayes(img, model, parse_channels("RI")); }) == ErrorKind::IllegalChannel);
}

TEST_CASE("mvn: diagonal covariance factorizes, explicit inverse oracle") {
    const auto rgb = parse_channels("RGB");
    const auto diag = model_with(120, 30, 80, 20, 60, 15);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto img = testing::random_image(32, 32, 40 + s);
        for (const auto& chans : {parse_channels("RG"), parse_channels("GB"), rgb}) {
            const auto a = feat_mvn(img, diag, chans);
            const auto b = feat_naive_bayes(img, diag, chans);
            for (std::size_t t = 0; t < 256; ++t) CHECK(rel_err(a.values[t], b.values[t]) <= 1e-10);
        }
    }

    const auto model = fitted_model();
    const auto& cov = model.cov_for(ChannelSubset::RGB).entries;
    // cofactor inverse and determinant of the 3 x 3 covariance
    const double a = cov(0, 0), b = cov(0, 1), c = cov(0, 2), d = cov(1, 0), e = cov(1, 1), f = cov(1, 2),
                 g = cov(2, 0), h = cov(2, 1), k = cov(2, 2);
    const double det = a * (e * k - f * h) - b * (d * k - f * g) + c * (d * h - e * g);
    const double inv[3][3] = {{(e * k - f * h) / det, (c * h - b * k) / det, (b * f - c * e) / det},
                              {(f * g - d * k) / det, (a * k - c * g) / det, (c * d - a * f) / det},
                              {(d * h - e * g) / det, (b * g - a * h) / det, (a * e - b * d) / det}};
    const double mu[3] = {model.stats[0].mean, model.stats[1].mean, model.stats[2].mean};
    const double norm = 1.0 / std::sqrt(det * std::pow(2.0 * std::numbers::pi, 3));
    const auto img = testing::random_image(32, 32, 77, 40, 220);
    const auto fv = feat_mvn(img, model, rgb);
    for (int t : {0, 5, 128, 255}) {
        const double oracle = window_sum(img, GridSpec{}, t, [&](const Pixel& p) {
            const double x[3] = {p.r - mu[0], p.g - mu[1], p.b - mu[2]};
            double q = 0.0;
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) q += x[i] * inv[i][j] * x[j];
            }
            return norm * std::exp(-0.5 * q);
        });
        CHECK(rel_err(fv.values[static_cast<std::size_t>(t)], oracle) <= 1e-9);
    }

    // pixel tuple exactly at the mean: zero Mahalanobis distance
    auto centred = model_with(100, 10, 50, 5, 20, 4);
    centred.covs[0].entries(0, 1) = centred.covs[0].entries(1, 0) = 20.0;
    const auto at_mean = feat_mvn(RgbImage(16, 16, Pixel{100, 50, 20}), centred, parse_channels("RG"));
    const double det2 = 100.0 * 25.0 - 400.0;
    CHECK(rel_err(at_mean.values[0], 1.0 / std::sqrt(det2 * std::pow(2.0 * std::numbers::pi, 2))) <= 1e-12);
}

TEST_CASE("mvn rejects singular covariance and illegal channel sets") {
    auto singular = model_with(100, 10, 50, 5, 20, 4);
    singular.covs[0].entries(0, 1) = singular.covs[0].entries(1, 0) = 50.0;  // |rho| = 1
    const auto img = testing::random_image(16, 16, 1);
    CHECK(kind_of([&] { feat_mvn(img, singular, parse_channels("RG")); }) == ErrorKind::SingularCovariance);
    CHECK(kind_of([&] { feat_mvn(img, singular, parse_channels("R")); }) == ErrorKind::IllegalChannel);
    CHECK(kind_of([&] { feat_mvn(img, singular, parse_channels("RI")); }) == ErrorKind::IllegalChannel);
}

TEST_CASE("gmm is the weighted combination of per-channel sums") {
    const auto model = fitted_model();
    const auto img = testing::random_image(32, 32, 55);
    const auto gb = parse_channels("GB");
    const auto w = parse_weights("0.95-0.05", gb);
    CHECK(w.weights == std::vector<double>{0.95, 0.05});
    const auto fv = feat_gmm(img, model, gb, w);
    const auto g = feat_sum_similarity(img, model, parse_channels("G"));
    const auto b = feat_sum_similarity(img, model, parse_channels("B"));
    for (std::size_t t = 0; t < 256; ++t) {
        CHECK(rel_err(fv.values[t], 0.95 * g.values[t] + 0.05 * b.values[t]) <= 1e-12);
    }
    const auto rgb = parse_channels("RGB");
    const auto w3 = parse_weights("0.025,0.95,0.025", rgb);
    const auto fv3 = feat_gmm(img, model, rgb, w3);
    const auto r = feat_sum_similarity(img, model, parse_channels("R"));
    for (std::size_t t = 0; t < 256; ++t) {
        CHECK(rel_err(fv3.values[t], 0.025 * r.values[t] + 0.95 * g.values[t] + 0.025 * b.values[t]) <= 1e-12);
    }

    const auto one = parse_channels("G");
    CHECK(kind_of([&] { parse_weights("1.0", one); }) == ErrorKind::WeightMismatch);
    GmmWeights lone;
    lone.channels = one;
    lone.weights = {1.0};
    CHECK(kind_of([&] { feat_gmm(img, model, one, lone); }) == ErrorKind::WeightMismatch);
    CHECK(kind_of([&] { feat_gmm(img, model, rgb, w); }) == ErrorKind::WeightMismatch);
    CHECK(kind_of([&] { parse_weights("0.5,0.6", gb); }) == ErrorKind::WeightMismatch);
}

TEST_CASE("incremental weight grid") {
    const auto rg = parse_channels("RG");
    const auto grid2 = gmm_weight_grid(rg);
    REQUIRE(grid2.size() == 10);
    for (int b = 0; b <= 9; ++b) {
        const double w1 = 0.05 + 0.1 * b;
        const bool found = std::any_of(grid2.begin(), grid2.end(), [&](const GmmWeights& w) {
            return std::abs(w.weights[0] - w1) < 1e-12 && std::abs(w.weights[1] - (0.95 - 0.1 * b)) < 1e-12;
        });
        CHECK(found);
    }
    const auto rgb = parse_channels("RGB");
    const auto grid3 = gmm_weight_grid(rgb);
    CHECK(grid3.size() == 30);
    for (const auto* g : {&grid2, &grid3}) {
        for (const auto& w : *g) {
            double s = 0.0;
            for (double x : w.weights) {
                CHECK(x > 0.0);
                s += x;
            }
            CHECK(s == 1.0);
        }
    }
    for (std::size_t dom = 0; dom < 3; ++dom) {
        const bool found = std::any_of(grid3.begin(), grid3.end(), [&](const GmmWeights& w) {
            for (std::size_t k = 0; k < 3; ++k) {
                if (std::abs(w.weights[k] - (k == dom ? 0.95 : 0.025)) > 1e-15) return false;
            }
            return true;
        });
        CHECK(found);
    }
    const auto g_sweep = std::find_if(grid3.begin(), grid3.end(),
                                      [](const GmmWeights& w) { return w.swept == Channel::G && w.grid_index == 9; });
    REQUIRE(g_sweep != grid3.end());
    CHECK(g_sweep->label() == "0.025-0.95-0.025");
    CHECK_THROWS_AS(gmm_weight_grid(parse_channels("R")), Error);
}

TEST_CASE("weight selection by validation R") {
    const auto rg = parse_channels("RG");
    const auto grid = gmm_weight_grid(rg);
    const std::vector<GmmWeights> one{grid[3]};
    CHECK(select_gmm_weights(one, [](const GmmWeights&) { return ValidationScore{0.1, 1.0}; }) == grid[3]);

    const std::vector<GmmWeights> two{grid[0], grid[1]};
    CHECK(select_gmm_weights(two, [&](const GmmWeights& w) {
              return ValidationScore{w == grid[1] ? 0.9 : 0.8, 1.0};
          }) == grid[1]);
    CHECK(select_gmm_weights(two, [&](const GmmWeights& w) {
              return ValidationScore{0.9, w == grid[1] ? 0.5 : 0.7};
          }) == grid[1]);
    CHECK(select_gmm_weights(two, [&](const GmmWeights&) { return ValidationScore{0.9, 0.5}; }) ==
          (grid[0].grid_index <= grid[1].grid_index ? grid[0] : grid[1]));
    CHECK_THROWS_AS(select_gmm_weights(std::vector<GmmWeights>{}, [](const GmmWeights&) { return ValidationScore{}; }),
                    Error);
}

TEST_CASE("features are bit-identical across calls") {
    const auto model = fitted_model();
    const auto img = testing::random_image(32, 32, 9);
    const auto rgb = parse_channels("RGB");
    for (auto m : {FeatureMethod::SumSim, FeatureMethod::NaiveBayes, FeatureMethod::Mvn}) {
        CHECK(extract_features(img, model, m, rgb, std::nullopt).values ==
              extract_features(img, model, m, rgb, std::nullopt).values);
    }
}

}
