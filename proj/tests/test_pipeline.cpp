#include "helpers.hpp"

#include "flamesense/error.hpp"
#include "flamesense/eval.hpp"
#include "flamesense/pipeline.hpp"
#include "flamesense/synth.hpp"
#include "flamesense/textio.hpp"

#include <doctest.h>

using namespace flamesense;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::Empty;
}

IdealFlameModel small_ideal() {
    RigConfig rig;
    rig.image_size = 32;
    return fit_ideal_model(ideal_reference_frames(rig, 5).frames, ideal_reference_frames(rig, 5).lambdas);
}

TrainedModel small_trained(const std::string& spec_text) {
    TrainedModel m;
    m.spec = parse_feature_spec(spec_text, GridSpec{4, 4});
    const auto d = static_cast<Eigen::Index>(m.spec.length());
    m.mlp = init_weights(d, 3);
    m.mlp.output_bias = 1.7;
    m.standardizer = Standardizer(Eigen::VectorXd::Constant(d, 0.5), Eigen::VectorXd::Constant(d, 2.0));
    m.trainer = TrainMethod::LM;
    if (!m.spec.baseline) m.ideal = small_ideal();
    return m;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("feature spec parsing") {
    const auto s = parse_feature_spec("sumsim:RGB");
    CHECK(s.length() == 768);
    CHECK(s.method_label() == "sumsim");
    CHECK(s.channel_label() == "RGB");

    const auto g = parse_feature_spec("gmm:RGB@0.025,0.95,0.025");
    REQUIRE(g.weights);
    CHECK(g.length() == 256);
    CHECK(g.method_label() == "gmm[0.025-0.95-0.025]");

    const auto open = parse_feature_spec("gmm:RG");
    CHECK_FALSE(open.weights);

    const auto b = parse_feature_spec("baseline:cooc64");
    CHECK(b.baseline);
    CHECK(b.length() == 64);
    CHECK(b.channel_label() == "-");

    CHECK(kind_of([] { parse_feature_spec("naive_bayes:RI"); }) == ErrorKind::IllegalChannel);
    CHECK(kind_of([] { parse_feature_spec("mvn:RGBI"); }) == ErrorKind::IllegalChannel);
    CHECK(kind_of([] { parse_feature_spec("gmm:RG@0.5,0.25"); }) == ErrorKind::WeightMismatch);
    CHECK(kind_of([] { parse_feature_spec("gmm:RGB@0.5,0.5"); }) == ErrorKind::WeightMismatch);
    CHECK(kind_of([] { parse_feature_spec("nonsense:RG"); }) == ErrorKind::ConfigInvalid);
    CHECK(kind_of([] { parse_feature_spec("baseline:nonsense"); }) == ErrorKind::ConfigInvalid);
}

TEST_CASE("featurize agrees with the module functions") {
    const auto ideal = small_ideal();
    const auto img = testing::random_image(32, 32, 4);
    const auto spec = parse_feature_spec("sumsim:RG", GridSpec{4, 4});
    const auto direct = feat_sum_similarity(img, ideal, spec.channels, GridSpec{4, 4});
    CHECK(featurize(spec, img, &ideal) == direct.values);
    const auto base = parse_feature_spec("baseline:moments4");
    CHECK(featurize(base, img, nullptr) == baseline_features(BaselineId::Moments4, img));
}

TEST_CASE("feature table round trip") {
    FeatureTable t;
    t.spec = parse_feature_spec("gmm:RGB@0.025,0.95,0.025", GridSpec{2, 2});
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(0.0, 1e-3);
    for (int i = 0; i < 5; ++i) {
        FeatureRow row{"frames/f" + std::to_string(i) + ".png", 0.5 * i, {}};
        for (std::size_t k = 0; k < t.spec.length(); ++k) row.values.push_back(d(rng));
        t.rows.push_back(row);
    }
    const auto text = render_feature_table(t);
    const auto back = parse_feature_table(text);
    CHECK(render_feature_table(back) == text);
    CHECK(back.matrix() == t.matrix());
    CHECK(back.spec.method_label() == t.spec.method_label());
    REQUIRE(back.rows.size() == 5);
    CHECK(back.rows[3].frame_id == "frames/f3.png");

    // A row of the wrong width is refused.
    auto bad = text;
    bad.insert(bad.size() - 1, ",1");
    CHECK_THROWS_AS(parse_feature_table(bad), Error);
}

TEST_CASE("trained model round trip and file checks") {
    for (const auto* spec : {"sumsim:RGB", "mvn:RG", "gmm:RB@0.35,0.65", "baseline:hue_hist86"}) {
        CAPTURE(spec);
        const auto m = small_trained(spec);
        const auto text = serialize_trained_model(m);
        const auto back = parse_trained_model(text);
        CHECK(serialize_trained_model(back) == text);
        CHECK(back.mlp == m.mlp);
        CHECK(back.ideal == m.ideal);
        CHECK(back.trainer == m.trainer);
        const auto img = testing::random_image(32, 32, 8);
        CHECK(back.predict_image(img) == m.predict_image(img));
    }

    const auto text = serialize_trained_model(small_trained("sumsim:RGB"));
    auto versioned = text;
    versioned.replace(versioned.find("v1"), 2, "v9");
    CHECK(kind_of([&] { parse_trained_model(versioned); }) == ErrorKind::VersionMismatch);

    auto flipped = text;
    const auto pos = flipped.find("output_bias");
    flipped[pos + 12] = flipped[pos + 12] == '1' ? '2' : '1';
    CHECK(kind_of([&] { parse_trained_model(flipped); }) == ErrorKind::CorruptModel);

    CHECK(kind_of([&] { parse_trained_model(text.substr(0, text.size() / 2)); }) == ErrorKind::CorruptModel);

    auto pca = small_trained("baseline:pca2");
    CHECK(kind_of([&] { serialize_trained_model(pca); }) == ErrorKind::ConfigInvalid);
}

TEST_CASE("prediction from an image and from its row agree exactly") {
    const auto m = small_trained("naive_bayes:GB");
    const auto img = testing::random_image(32, 32, 6);
    const auto row = featurize(m.spec, img, &*m.ideal);
    CHECK(m.predict_row(row) == m.predict_image(img));

    const auto wrong = testing::random_image(30, 32, 6);
    CHECK(kind_of([&] { (void)m.predict_image(wrong); }) == ErrorKind::GridMismatch);
}

TEST_CASE("relative paths resolve against the index directory") {
    CHECK(resolve_path("/data/run", "frames/a.png") == std::filesystem::path("/data/run/frames/a.png"));
    CHECK(resolve_path("/data/run", "/abs/a.png") == std::filesystem::path("/abs/a.png"));
}

}
