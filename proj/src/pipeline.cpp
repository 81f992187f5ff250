#include "flamesense/pipeline.hpp"

#include "flamesense/error.hpp"
#include "flamesense/textio.hpp"

#include <algorithm>

namespace flamesense {

namespace {

constexpr std::string_view kTableMagic = "# flamesense-features";
constexpr std::string_view kModelFormat = "flamesense-trained-model";
constexpr int kModelVersion = 1;

std::string weights_text(const GmmWeights& w) {
    std::string s;
    for (std::size_t k = 0; k < w.weights.size(); ++k) {
        if (k) s.push_back(',');
        s += textio::format_double(w.weights[k]);
    }
    return s;
}

std::string spec_string(const FeatureSpec& spec) {
    if (spec.baseline) return "baseline:" + std::string(baseline_name(spec.baseline_id));
    std::string s = std::string(method_name(spec.method)) + ":" + channel_string(spec.channels);
    if (spec.weights) s += "@" + weights_text(*spec.weights);
    return s;
}

std::string vector_line(std::string_view key, const Eigen::VectorXd& v) {
    std::string s(key);
    for (Eigen::Index k = 0; k < v.size(); ++k) s += " " + textio::format_double(v[k]);
    return s + "\n";
}

Eigen::VectorXd parse_vector(const std::vector<std::string_view>& tok, Eigen::Index expected) {
    if (static_cast<Eigen::Index>(tok.size()) != expected + 1) {
        fail(ErrorKind::CorruptModel, "wrong value count on '" + std::string(tok.front()) + "' line");
    }
    Eigen::VectorXd v(expected);
    for (Eigen::Index k = 0; k < expected; ++k) v[k] = textio::parse_double(tok[static_cast<std::size_t>(k + 1)]);
    return v;
}

GridSpec parse_grid(std::string_view text) {
    const auto parts = textio::split(text, 'x');
    if (parts.size() != 2) fail(ErrorKind::CorruptModel, "bad grid '" + std::string(text) + "'");
    return GridSpec{static_cast<int>(textio::parse_int(parts[0])), static_cast<int>(textio::parse_int(parts[1]))};
}

std::string grid_text(GridSpec g) { return std::to_string(g.rows) + "x" + std::to_string(g.cols); }

}  // namespace

std::size_t FeatureSpec::length() const {
    if (baseline) return baseline_length(baseline_id);
    return feature_length(method, channels.size(), grid);
}

std::string FeatureSpec::method_label() const {
    if (baseline) return "baseline:" + std::string(baseline_name(baseline_id));
    std::string s(method_name(method));
    if (weights) s += "[" + weights->label() + "]";
    return s;
}

std::string FeatureSpec::channel_label() const { return baseline ? "-" : channel_string(channels); }

void FeatureSpec::validate() const {
    if (grid.rows < 1 || grid.cols < 1) fail(ErrorKind::ConfigInvalid, "grid must have at least one row and column");
    if (baseline) return;
    if (channels.empty()) fail(ErrorKind::IllegalChannel, "no channels given");
    switch (method) {
        case FeatureMethod::SumSim: break;
        case FeatureMethod::NaiveBayes:
            if (std::find(channels.begin(), channels.end(), Channel::I) != channels.end() || channels.size() > 3) {
                fail(ErrorKind::IllegalChannel, "naive_bayes takes one to three of R, G, B");
            }
            break;
        case FeatureMethod::Mvn:
        case FeatureMethod::Gmm:
            subset_for(channels);  // throws IllegalChannel
            if (method == FeatureMethod::Gmm && weights && weights->weights.size() != channels.size()) {
                fail(ErrorKind::WeightMismatch, "one weight per channel required");
            }
            break;
    }
}

FeatureSpec parse_feature_spec(std::string_view text, GridSpec grid) {
    FeatureSpec spec;
    spec.grid = grid;
    const auto colon = text.find(':');
    const auto head = textio::trim(text.substr(0, colon));
    if (head == "baseline") {
        if (colon == std::string_view::npos) fail(ErrorKind::ConfigInvalid, "baseline spec needs a name");
        spec.baseline = true;
        spec.baseline_id = parse_baseline(textio::trim(text.substr(colon + 1)));
        return spec;
    }
    spec.method = parse_method(head);
    if (colon == std::string_view::npos) fail(ErrorKind::ConfigInvalid, "feature spec needs channels: '" + std::string(text) + "'");
    auto rest = text.substr(colon + 1);
    const auto at = rest.find('@');
    spec.channels = parse_channels(textio::trim(rest.substr(0, at)));
    if (at != std::string_view::npos) {
        if (spec.method != FeatureMethod::Gmm) fail(ErrorKind::WeightMismatch, "only gmm takes weights");
        spec.weights = parse_weights(textio::trim(rest.substr(at + 1)), spec.channels);
    }
    spec.validate();
    return spec;
}

std::vector<double> featurize(const FeatureSpec& spec, const RgbImage& img, const IdealFlameModel* ideal,
                              const Pca2Basis* pca) {
    if (spec.baseline) return baseline_features(spec.baseline_id, img, pca);
    if (ideal == nullptr) fail(ErrorKind::ConfigInvalid, "similarity features need an ideal flame model");
    if (spec.method == FeatureMethod::Gmm && !spec.weights) {
        fail(ErrorKind::WeightMismatch, "gmm extraction needs a weight tuple");
    }
    return extract_features(img, *ideal, spec.method, spec.channels, spec.weights, spec.grid).values;
}

Eigen::MatrixXd FeatureTable::matrix() const {
    const auto width = static_cast<Eigen::Index>(spec.length());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Eigen::Index>(rows[i].values.size()) != width) {
            fail(ErrorKind::DimensionMismatch, "feature row " + rows[i].frame_id + " has the wrong length");
        }
        for (Eigen::Index j = 0; j < width; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i].values[static_cast<std::size_t>(j)];
    }
    return m;
}

std::string render_feature_table(const FeatureTable& table) {
    const auto n = table.spec.length();
    std::string out = std::string(kTableMagic) + " v1 spec=" + spec_string(table.spec) +
                      " grid=" + grid_text(table.spec.grid) + " length=" + std::to_string(n) + "\n";
    out += "frame_id,timestamp_s,method,channels";
    for (std::size_t k = 0; k < n; ++k) out += ",f" + std::to_string(k);
    out += "\n";
    const auto method = table.spec.method_label();
    const auto channels = table.spec.channel_label();
    for (const auto& row : table.rows) {
        if (row.frame_id.find_first_of(",\n") != std::string::npos) {
            fail(ErrorKind::IoError, "frame id contains a delimiter: " + row.frame_id);
        }
        out += row.frame_id + "," + textio::format_double(row.timestamp) + "," + method + "," + channels;
        for (double v : row.values) out += "," + textio::format_double(v);
        out += "\n";
    }
    return out;
}

FeatureTable parse_feature_table(std::string_view text) {
    FeatureTable table;
    std::size_t line_no = 0;
    std::size_t width = 0;
    std::string method;
    std::string channels;
    for (auto line : textio::split(text, '\n')) {
        line = textio::trim(line);
        if (line.empty()) continue;
        ++line_no;
        if (line_no == 1) {
            const auto tok = textio::split_whitespace(line);
            if (tok.size() != 6 || std::string_view(tok[0]) != "#" || tok[1] != kTableMagic.substr(2)) {
                fail(ErrorKind::IoError, "not a feature table");
            }
            if (tok[2] != "v1") fail(ErrorKind::VersionMismatch, "unsupported feature table " + std::string(tok[2]));
            std::string_view spec_text;
            std::string_view grid;
            for (std::size_t k = 3; k < tok.size(); ++k) {
                const auto eq = tok[k].find('=');
                const auto key = tok[k].substr(0, eq);
                const auto value = eq == std::string_view::npos ? std::string_view{} : tok[k].substr(eq + 1);
                if (key == "spec") spec_text = value;
                if (key == "grid") grid = value;
            }
            try {
                table.spec = parse_feature_spec(spec_text, parse_grid(grid));
            } catch (const Error& e) {
                fail(ErrorKind::IoError, std::string("bad feature table metadata: ") + e.what());
            }
            width = table.spec.length();
            method = table.spec.method_label();
            channels = table.spec.channel_label();
            continue;
        }
        if (line_no == 2) {
            if (!line.starts_with("frame_id,timestamp_s,method,channels")) fail(ErrorKind::IoError, "bad feature table header");
            continue;
        }
        const auto f = textio::split(line, ',');
        if (f.size() != 4 + width) {
            fail(ErrorKind::DimensionMismatch, "feature row " + std::to_string(line_no) + " has " +
                                                   std::to_string(f.size() - 4) + " values, expected " + std::to_string(width));
        }
        if (f[2] != method || f[3] != channels) fail(ErrorKind::IoError, "feature row method does not match the table");
        FeatureRow row;
        row.frame_id = std::string(f[0]);
        try {
            row.timestamp = textio::parse_double(f[1]);
            row.values.reserve(width);
            for (std::size_t k = 0; k < width; ++k) row.values.push_back(textio::parse_double(f[4 + k]));
        } catch (const Error&) {
            fail(ErrorKind::IoError, "bad number in feature row " + std::to_string(line_no));
        }
        table.rows.push_back(std::move(row));
    }
    if (line_no < 2) fail(ErrorKind::IoError, "truncated feature table");
    return table;
}

void write_feature_table(const std::filesystem::path& path, const FeatureTable& table) {
    textio::write_file(path, render_feature_table(table));
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
    return parse_feature_table(textio::read_file(path));
}

double TrainedModel::predict_row(std::span<const double> features) const {
    const Eigen::MatrixXd row =
        Eigen::Map<const Eigen::RowVectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
    return predict(mlp, standardizer.apply(row))[0];
}

double TrainedModel::predict_image(const RgbImage& img) const {
    if (!spec.baseline) WindowLayout::for_plane(img.rows(), img.cols(), spec.grid);  // GridMismatch before any work
    const auto values = featurize(spec, img, ideal ? &*ideal : nullptr);
    return predict_row(values);
}

std::string serialize_trained_model(const TrainedModel& model) {
    if (model.spec.baseline && model.spec.baseline_id == BaselineId::Pca2) {
        fail(ErrorKind::ConfigInvalid, "the pca2 baseline has no stored basis and cannot be saved for prediction");
    }
    const auto d = model.mlp.input_dim();
    std::string out = std::string(kModelFormat) + " v" + std::to_string(kModelVersion) + "\n";
    out += "features " + spec_string(model.spec) + "\n";
    out += "grid " + grid_text(model.spec.grid) + "\n";
    out += "trainer " + std::string(trainer_name(model.trainer)) + "\n";
    out += "input_dim " + std::to_string(d) + "\n";
    out += vector_line("standardizer_mean", model.standardizer.mean());
    out += vector_line("standardizer_std", model.standardizer.stddev());
    for (Eigen::Index h = 0; h < model.mlp.hidden_weights.rows(); ++h) {
        out += vector_line("hidden_weights", model.mlp.hidden_weights.row(h).transpose());
    }
    out += vector_line("hidden_bias", model.mlp.hidden_bias);
    out += vector_line("output_weights", model.mlp.output_weights);
    out += "output_bias " + textio::format_double(model.mlp.output_bias) + "\n";
    if (model.ideal) {
        const auto ideal_text = serialize_model(*model.ideal);
        for (auto line : textio::split(ideal_text, '\n')) {
            if (!line.empty()) out += "ideal " + std::string(line) + "\n";
        }
    }
    return textio::seal(std::move(out));
}

TrainedModel parse_trained_model(std::string_view text) {
    const auto header = textio::split_whitespace(text.substr(0, text.find('\n')));
    if (header.size() != 2 || header[0] != kModelFormat) fail(ErrorKind::CorruptModel, "not a trained model file");
    if (header[1] != "v" + std::to_string(kModelVersion)) {
        fail(ErrorKind::VersionMismatch, "unsupported trained model version " + std::string(header[1]));
    }
    const auto body = textio::unseal(text);
    std::string main_part;
    std::string ideal_part;
    for (auto line : textio::split(body, '\n')) {
        if (textio::trim(line).empty()) continue;
        if (line.starts_with("ideal ")) {
            ideal_part += std::string(line.substr(6)) + "\n";
        } else {
            main_part += std::string(line) + "\n";
        }
    }

    TrainedModel model;
    textio::LineReader reader(main_part);
    reader.next();
    auto tok = reader.expect("features");
    if (tok.size() != 2) fail(ErrorKind::CorruptModel, "bad features line");
    const auto spec_text = std::string(tok[1]);
    tok = reader.expect("grid");
    if (tok.size() != 2) fail(ErrorKind::CorruptModel, "bad grid line");
    try {
        model.spec = parse_feature_spec(spec_text, parse_grid(tok[1]));
    } catch (const Error& e) {
        fail(ErrorKind::CorruptModel, std::string("bad feature spec: ") + e.what());
    }
    tok = reader.expect("trainer");
    if (tok.size() != 2) fail(ErrorKind::CorruptModel, "bad trainer line");
    try {
        model.trainer = parse_trainer(tok[1]);
    } catch (const Error&) {
        fail(ErrorKind::CorruptModel, "unknown trainer " + std::string(tok[1]));
    }
    tok = reader.expect("input_dim");
    if (tok.size() != 2) fail(ErrorKind::CorruptModel, "bad input_dim line");
    const auto d = static_cast<Eigen::Index>(textio::parse_int(tok[1]));
    if (d < 1 || static_cast<std::size_t>(d) != model.spec.length()) {
        fail(ErrorKind::CorruptModel, "input_dim does not match the feature spec");
    }
    Eigen::VectorXd mean = parse_vector(reader.expect("standardizer_mean"), d);
    Eigen::VectorXd stddev = parse_vector(reader.expect("standardizer_std"), d);
    model.standardizer = Standardizer(std::move(mean), std::move(stddev));
    model.mlp = MlpModel::zeros(d);
    for (Eigen::Index h = 0; h < kHiddenUnits; ++h) {
        model.mlp.hidden_weights.row(h) = parse_vector(reader.expect("hidden_weights"), d).transpose();
    }
    model.mlp.hidden_bias = parse_vector(reader.expect("hidden_bias"), kHiddenUnits);
    model.mlp.output_weights = parse_vector(reader.expect("output_weights"), kHiddenUnits);
    model.mlp.output_bias = parse_vector(reader.expect("output_bias"), 1)[0];
    if (!reader.done()) fail(ErrorKind::CorruptModel, "unexpected trailing lines");
    if (!ideal_part.empty()) model.ideal = parse_model(ideal_part);
    if (!model.spec.baseline && !model.ideal) fail(ErrorKind::CorruptModel, "similarity model without an ideal flame model");
    return model;
}

void save_trained_model(const TrainedModel& model, const std::filesystem::path& path) {
    textio::write_file(path, serialize_trained_model(model));
}

TrainedModel load_trained_model(const std::filesystem::path& path) {
    return parse_trained_model(textio::read_file(path));
}

std::filesystem::path resolve_path(const std::filesystem::path& base_dir, const std::string& path) {
    const std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir / p;
}

}  // namespace flamesense
