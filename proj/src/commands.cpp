#include "flamesense/commands.hpp"

#include "flamesense/eval.hpp"
#include "flamesense/pipeline.hpp"
#include "flamesense/synth.hpp"
#include "flamesense/textio.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <map>
#include <ostream>
#include <set>

namespace flamesense::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ConfigInvalid:
        case ErrorKind::IllegalChannel:
        case ErrorKind::WeightMismatch: return 2;
        case ErrorKind::DegenerateModel:
        case ErrorKind::SingularCovariance:
        case ErrorKind::DampingExhausted:
        case ErrorKind::GradientVanished:
        case ErrorKind::DegenerateVariance: return 4;
        default: return 3;
    }
}

namespace {

enum class KeyType { Integer, Number, String, Path, StringList, PathList };

const std::map<std::string, KeyType>& known_keys() {
    static const std::map<std::string, KeyType> keys{
        {"seed", KeyType::Integer},          {"out", KeyType::Path},
        {"image_size", KeyType::Integer},    {"duration_s", KeyType::Number},
        {"frame_rate", KeyType::Number},     {"lambda_rate", KeyType::Number},
        {"lambda_min", KeyType::Number},     {"lambda_max", KeyType::Number},
        {"noise", KeyType::Number},          {"reference_count", KeyType::Integer},
        {"reference", KeyType::Path},        {"frame_index", KeyType::Path},
        {"lambda_log", KeyType::Path},       {"manifest", KeyType::Path},
        {"model", KeyType::Path},            {"features", KeyType::Path},
        {"trained_model", KeyType::Path},    {"frames", KeyType::Path},
        {"method", KeyType::String},         {"channels", KeyType::String},
        {"weights", KeyType::String},        {"grid_rows", KeyType::Integer},
        {"grid_cols", KeyType::Integer},     {"trainer", KeyType::String},
        {"runs", KeyType::Integer},          {"max_epochs", KeyType::Integer},
        {"patience", KeyType::Integer},      {"methods", KeyType::StringList},
        {"trainers", KeyType::StringList},   {"reports", KeyType::PathList},
    };
    return keys;
}

// Flat key/value configuration. Values from a config file resolve relative
// paths against that file's directory; values from flags against the cwd.
class RunConfig {
public:
    void load_file(const fs::path& path) {
        json doc;
        try {
            doc = json::parse(textio::read_file(path));
        } catch (const json::parse_error& e) {
            fail(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
        }
        if (!doc.is_object()) fail(ErrorKind::ConfigInvalid, path.string() + ": top level must be an object");
        for (auto it = doc.begin(); it != doc.end(); ++it) set(it.key(), it.value(), path.parent_path(), false);
    }

    void set(const std::string& key, json value, const fs::path& base, bool from_flag) {
        const auto found = known_keys().find(key);
        if (found == known_keys().end()) fail(ErrorKind::ConfigInvalid, "unknown configuration key '" + key + "'");
        check_type(key, found->second, value);
        entries_[key] = Entry{std::move(value), base};
        if (from_flag) flagged_.insert(key);
    }

    /// `--set key=value`: the value is JSON when it parses as JSON, else a plain string.
    void set_text(const std::string& key, const std::string& text) {
        json value;
        try {
            value = json::parse(text);
        } catch (const json::parse_error&) {
            value = text;
        }
        const auto found = known_keys().find(key);
        if (found != known_keys().end() && value.is_number() &&
            (found->second == KeyType::String || found->second == KeyType::Path)) {
            value = text;  // e.g. --channels 1 should not turn into a number silently
        }
        if (found != known_keys().end() && value.is_string() &&
            (found->second == KeyType::StringList || found->second == KeyType::PathList)) {
            value = json::array({text});
        }
        set(key, std::move(value), fs::current_path(), true);
    }

    [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) != 0; }
    [[nodiscard]] bool flagged(const std::string& key) const { return flagged_.count(key) != 0; }

    [[nodiscard]] long long integer(const std::string& key, long long fallback) const {
        return has(key) ? entries_.at(key).value.get<long long>() : fallback;
    }
    [[nodiscard]] double number(const std::string& key, double fallback) const {
        return has(key) ? entries_.at(key).value.get<double>() : fallback;
    }
    [[nodiscard]] std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? entries_.at(key).value.get<std::string>() : fallback;
    }
    [[nodiscard]] std::string required_text(const std::string& key) const {
        require(key);
        return text(key, "");
    }
    [[nodiscard]] fs::path path(const std::string& key) const {
        require(key);
        const auto& e = entries_.at(key);
        return resolve(e.base, e.value.get<std::string>());
    }
    [[nodiscard]] std::vector<std::string> list(const std::string& key) const {
        if (!has(key)) return {};
        return entries_.at(key).value.get<std::vector<std::string>>();
    }
    [[nodiscard]] std::vector<fs::path> paths(const std::string& key) const {
        require(key);
        std::vector<fs::path> out;
        for (const auto& p : list(key)) out.push_back(resolve(entries_.at(key).base, p));
        return out;
    }
    [[nodiscard]] std::uint64_t seed() const {
        const auto s = integer("seed", 0);
        if (s < 0) fail(ErrorKind::ConfigInvalid, "seed must be non-negative");
        return static_cast<std::uint64_t>(s);
    }
    void require(const std::string& key) const {
        if (!has(key)) fail(ErrorKind::ConfigInvalid, "missing required setting '" + key + "'");
    }

private:
    struct Entry {
        json value;
        fs::path base;
    };

    static fs::path resolve(const fs::path& base, const std::string& p) {
        const fs::path path(p);
        return path.is_absolute() || base.empty() ? path : base / path;
    }

    static void check_type(const std::string& key, KeyType type, const json& v) {
        bool ok = false;
        switch (type) {
            case KeyType::Integer: ok = v.is_number_integer(); break;
            case KeyType::Number: ok = v.is_number(); break;
            case KeyType::String:
            case KeyType::Path: ok = v.is_string(); break;
            case KeyType::StringList:
            case KeyType::PathList:
                ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); });
                break;
        }
        if (!ok) fail(ErrorKind::ConfigInvalid, "setting '" + key + "' has the wrong type");
    }

    std::map<std::string, Entry> entries_;
    std::set<std::string> flagged_;
};

GridSpec grid_of(const RunConfig& cfg) {
    return GridSpec{static_cast<int>(cfg.integer("grid_rows", 16)), static_cast<int>(cfg.integer("grid_cols", 16))};
}

// `method` may be a full spec ("gmm:RG@0.25,0.75", "baseline:cooc64") or a
// bare method name combined with `channels` and `weights`.
std::string spec_text(const RunConfig& cfg) {
    const auto method = cfg.text("method", "sumsim");
    if (method.find(':') != std::string::npos) return method;
    std::string s = method + ":" + cfg.text("channels", "RGB");
    if (cfg.has("weights")) s += "@" + cfg.text("weights", "");
    return s;
}

TrainConfig train_config(const RunConfig& cfg) {
    TrainConfig tc;
    tc.method = parse_trainer(cfg.text("trainer", "scg"));
    tc.max_epochs = static_cast<int>(cfg.integer("max_epochs", 1000));
    tc.patience = static_cast<int>(cfg.integer("patience", 6));
    tc.seed = cfg.seed();
    tc.validate();
    return tc;
}

// Frames with their lambda targets, from a manifest or from a frame index
// plus lambda log synchronised on the fly.
struct Sample {
    std::string frame_id;
    fs::path image;
    double timestamp = 0.0;
    double lambda = 0.0;
};

std::vector<Sample> load_samples(const RunConfig& cfg) {
    std::vector<Sample> out;
    if (cfg.has("manifest")) {
        const auto path = cfg.path("manifest");
        for (const auto& s : read_manifest(path)) {
            out.push_back({s.image_path, resolve_path(path.parent_path(), s.image_path), s.timestamp, s.lambda});
        }
        return out;
    }
    if (!cfg.has("frame_index") || !cfg.has("lambda_log")) {
        fail(ErrorKind::ConfigInvalid, "need 'manifest', or 'frame_index' with 'lambda_log'");
    }
    const auto index_path = cfg.path("frame_index");
    const auto synced = sync(read_frame_index(index_path), read_lambda_log(cfg.path("lambda_log")));
    for (const auto& s : synced.samples) {
        out.push_back({s.image_path, resolve_path(index_path.parent_path(), s.image_path), s.timestamp, s.lambda});
    }
    return out;
}

IdealFlameModel ideal_model(const RunConfig& cfg) {
    if (cfg.has("model")) return load_model(cfg.path("model"));
    if (cfg.has("reference")) {
        const auto ref = read_reference_set(cfg.path("reference"));
        return fit_ideal_model(ref.frames, ref.lambdas);
    }
    fail(ErrorKind::ConfigInvalid, "need an ideal flame model: set 'model' or 'reference'");
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// A requested feature set for evaluate: a parsed spec, a GMM grid search, or
// a baseline we cannot compute.
struct MethodRequest {
    std::string text;
    FeatureSpec spec;
    bool unavailable = false;
    std::size_t unavailable_length = 0;
    std::vector<GmmWeights> grid;  // non-empty when searching GMM weights
};

MethodRequest parse_request(const std::string& text, GridSpec grid) {
    MethodRequest req;
    req.text = text;
    if (text.starts_with("baseline:flicker")) {
        // Temporal flicker descriptors have no computable definition here.
        req.unavailable = true;
        const auto suffix = text.substr(std::string_view("baseline:flicker").size());
        req.unavailable_length = suffix.empty() ? 0 : static_cast<std::size_t>(textio::parse_int(suffix));
        return req;
    }
    req.spec = parse_feature_spec(text, grid);
    if (!req.spec.baseline && req.spec.method == FeatureMethod::Gmm && !req.spec.weights) {
        req.grid = gmm_weight_grid(req.spec.channels);
    }
    return req;
}

fs::path sibling_with_suffix(const fs::path& path, const std::string& suffix) {
    return path.parent_path() / (path.stem().string() + suffix + path.extension().string());
}

std::string safe_name(std::string s) {
    for (auto& c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')) c = '_';
    }
    return s;
}

// ---------------------------------------------------------------- commands

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
    RigConfig rig;
    rig.image_size = static_cast<int>(cfg.integer("image_size", rig.image_size));
    rig.duration_s = cfg.number("duration_s", rig.duration_s);
    rig.frame_rate = cfg.number("frame_rate", rig.frame_rate);
    rig.lambda_rate = cfg.number("lambda_rate", rig.lambda_rate);
    rig.lambda_min = cfg.number("lambda_min", rig.lambda_min);
    rig.lambda_max = cfg.number("lambda_max", rig.lambda_max);
    rig.noise = cfg.number("noise", rig.noise);
    rig.seed = cfg.has("seed") ? cfg.seed() : rig.seed;
    rig.validate();
    const auto dir = cfg.path("out");
    const auto session = generate_session(rig);
    const auto reference = ideal_reference_frames(rig, static_cast<int>(cfg.integer("reference_count", 22)));
    write_session(dir, session, reference);
    out << "synth: " << session.images.size() << " frames, " << session.log.entries.size() << " lambda samples, "
        << reference.frames.size() << " reference frames -> " << dir.string() << "\n";
    return 0;
}

int cmd_sync(const RunConfig& cfg, std::ostream& out) {
    const auto index_path = cfg.path("frame_index");
    const auto target = cfg.path("out");
    const auto synced = sync(read_frame_index(index_path), read_lambda_log(cfg.path("lambda_log")));
    const auto from = fs::absolute(target).parent_path().lexically_normal();
    std::vector<SyncedSample> rows = synced.samples;
    for (auto& s : rows) {
        const auto abs = fs::absolute(resolve_path(index_path.parent_path(), s.image_path)).lexically_normal();
        s.image_path = abs.lexically_relative(from).generic_string();
    }
    write_manifest(target, rows);
    out << "sync: " << rows.size() << " samples, " << synced.dropped << " frames outside the lambda log -> "
        << target.string() << "\n";
    return 0;
}

int cmd_fit_model(const RunConfig& cfg, std::ostream& out) {
    const auto target = cfg.path("out");
    const auto ref = read_reference_set(cfg.path("reference"));
    const auto model = fit_ideal_model(ref.frames, ref.lambdas);
    save_model(model, target);
    out << "fit-model: " << model.frame_count << " frames, lambda " << textio::format_double(model.lambda_min)
        << ".." << textio::format_double(model.lambda_max) << "\n";
    for (std::size_t k = 0; k < kChannelCount; ++k) {
        out << "  " << channel_letter(static_cast<Channel>(k)) << "  mean " << fixed(model.stats[k].mean)
            << "  std " << fixed(model.stats[k].stddev) << "\n";
    }
    if (model.degenerate()) out << "  warning: a channel has near-zero spread; similarity features will fail\n";
    out << "-> " << target.string() << "\n";
    return 0;
}

int cmd_extract(const RunConfig& cfg, std::ostream& out) {
    const auto target = cfg.path("out");
    const auto request = parse_request(spec_text(cfg), grid_of(cfg));
    if (request.unavailable) fail(ErrorKind::ConfigInvalid, "flicker features are not available");
    const auto samples = load_samples(cfg);

    std::optional<IdealFlameModel> ideal;
    if (!request.spec.baseline) ideal = ideal_model(cfg);

    std::vector<FeatureSpec> specs;
    if (request.grid.empty()) {
        specs.push_back(request.spec);
    } else {
        for (const auto& w : request.grid) {
            auto s = request.spec;
            s.weights = w;
            specs.push_back(std::move(s));
        }
    }

    std::optional<Pca2Basis> pca;
    if (request.spec.baseline && request.spec.baseline_id == BaselineId::Pca2) {
        std::vector<ChannelPlane> means;
        const auto grid = request.spec.grid;
        for (const auto& s : samples) {
            const auto v = Pca2Basis::window_means(extract_channel(read_image(s.image), Channel::I), grid);
            means.emplace_back(Channel::I, grid.rows, grid.cols, std::vector<double>(v.data(), v.data() + v.size()));
        }
        pca = Pca2Basis::fit(means, grid);
    }

    std::vector<FeatureTable> tables(specs.size());
    for (std::size_t k = 0; k < specs.size(); ++k) tables[k].spec = specs[k];
    for (const auto& s : samples) {
        const auto img = read_image(s.image);
        for (std::size_t k = 0; k < specs.size(); ++k) {
            tables[k].rows.push_back({s.frame_id, s.timestamp, featurize(specs[k], img, ideal ? &*ideal : nullptr,
                                                                          pca ? &*pca : nullptr)});
        }
    }
    for (const auto& table : tables) {
        const auto path = request.grid.empty() ? target : sibling_with_suffix(target, "_w" + table.spec.weights->label());
        write_feature_table(path, table);
        out << "extract: " << table.rows.size() << " rows x " << table.spec.length() << " "
            << table.spec.method_label() << " " << table.spec.channel_label() << " -> " << path.string() << "\n";
    }
    return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    const auto target = cfg.path("out");
    const auto table = read_feature_table(cfg.path("features"));
    if (table.spec.baseline && table.spec.baseline_id == BaselineId::Pca2) {
        fail(ErrorKind::ConfigInvalid, "the pca2 baseline cannot be packaged for prediction; use evaluate");
    }
    const auto tc = train_config(cfg);

    std::map<std::string, double> targets;
    for (const auto& s : load_samples(cfg)) targets[s.frame_id] = s.lambda;
    Eigen::VectorXd y(static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto it = targets.find(table.rows[i].frame_id);
        if (it == targets.end()) fail(ErrorKind::IoError, "no lambda target for frame " + table.rows[i].frame_id);
        y[static_cast<Eigen::Index>(i)] = it->second;
    }

    TrainedModel model;
    model.spec = table.spec;
    model.trainer = tc.method;
    if (!table.spec.baseline) model.ideal = ideal_model(cfg);

    const auto fitted = fit_once(table.matrix(), y, tc, tc.seed);
    model.standardizer = fitted.standardizer;
    model.mlp = fitted.model;
    save_trained_model(model, target);

    const auto& rep = fitted.report;
    std::string report = "# stop=" + std::string(stop_reason_name(rep.stop)) + " epochs=" + std::to_string(rep.epochs) +
                         " best_epoch=" + std::to_string(rep.best_epoch) + "\nepoch,train_cost,validation_cost\n";
    for (std::size_t e = 0; e < rep.train_cost.size(); ++e) {
        report += std::to_string(e) + "," + textio::format_double(rep.train_cost[e]) + "," +
                  textio::format_double(rep.validation_cost[e]) + "\n";
    }
    textio::write_file(target.string() + ".report.csv", report);

    std::vector<std::string> split_of(table.rows.size(), "train");
    for (auto i : fitted.split.validation) split_of[i] = "validation";
    for (auto i : fitted.split.test) split_of[i] = "test";
    std::string preds = "frame_id,timestamp_s,lambda,lambda_hat,split\n";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        preds += table.rows[i].frame_id + "," + textio::format_double(table.rows[i].timestamp) + "," +
                 textio::format_double(y[idx]) + "," + textio::format_double(fitted.predictions[idx]) + "," +
                 split_of[i] + "\n";
    }
    textio::write_file(target.string() + ".predictions.csv", preds);

    out << "train: " << trainer_name(tc.method) << " on " << table.rows.size() << " x " << table.spec.length() << " "
        << table.spec.method_label() << " " << table.spec.channel_label() << ", stop "
        << stop_reason_name(rep.stop) << " after " << rep.epochs << " epochs (best " << rep.best_epoch << ")\n";
    const std::pair<const char*, const std::vector<std::size_t>*> parts[] = {
        {"train", &fitted.split.train}, {"validation", &fitted.split.validation}, {"test", &fitted.split.test}};
    for (const auto& [name, idx] : parts) {
        if (idx->size() < 2) continue;
        const auto m = split_metrics(y, fitted.predictions, *idx);
        out << "  " << name << "  MSE " << fixed(m.mse) << "  R " << fixed(m.r) << "\n";
    }
    out << "-> " << target.string() << "\n";
    return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
    const auto target = cfg.path("out");
    const auto model = load_trained_model(cfg.path("trained_model"));
    const auto index_path = cfg.path("frames");
    const auto index = read_frame_index(index_path);

    std::string text = "timestamp_s,lambda_hat\n";
    double total = 0.0;
    double worst = 0.0;
    for (const auto& f : index.entries) {
        const auto start = std::chrono::steady_clock::now();
        const double lambda = model.predict_image(read_image(resolve_path(index_path.parent_path(), f.image_path)));
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        total += seconds;
        worst = std::max(worst, seconds);
        text += textio::format_double(f.timestamp) + "," + textio::format_double(lambda) + "\n";
    }
    textio::write_file(target, text);
    out << "predict: " << index.entries.size() << " frames -> " << target.string() << "\n";
    if (!index.entries.empty()) {
        out << "  latency per frame: mean " << fixed(1000.0 * total / static_cast<double>(index.entries.size()), 2)
            << " ms, max " << fixed(1000.0 * worst, 2) << " ms\n";
    }
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto dir = cfg.path("out");
    const auto grid = grid_of(cfg);
    std::vector<std::string> method_texts = cfg.list("methods");
    if (method_texts.empty() || cfg.flagged("method")) method_texts = {spec_text(cfg)};
    std::vector<std::string> trainer_texts = cfg.list("trainers");
    if (trainer_texts.empty() || cfg.flagged("trainer")) trainer_texts = {cfg.text("trainer", "scg")};
    const auto runs = cfg.integer("runs", 10);
    if (runs < 1) fail(ErrorKind::ConfigInvalid, "runs must be at least 1");

    std::vector<MethodRequest> requests;
    for (const auto& m : method_texts) requests.push_back(parse_request(m, grid));
    std::vector<TrainConfig> trainers;
    for (const auto& t : trainer_texts) {
        auto tc = train_config(cfg);
        tc.method = parse_trainer(t);
        trainers.push_back(tc);
    }

    const auto samples = load_samples(cfg);
    Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) y[static_cast<Eigen::Index>(i)] = samples[i].lambda;

    const bool need_ideal = std::any_of(requests.begin(), requests.end(),
                                        [](const MethodRequest& r) { return !r.unavailable && !r.spec.baseline; });
    std::optional<IdealFlameModel> ideal;
    if (need_ideal) ideal = ideal_model(cfg);

    // The PCA basis is fitted on every frame: it never sees the targets.
    std::optional<Pca2Basis> pca;
    std::string pca_error;
    const bool need_pca = std::any_of(requests.begin(), requests.end(), [](const MethodRequest& r) {
        return !r.unavailable && r.spec.baseline && r.spec.baseline_id == BaselineId::Pca2;
    });
    if (need_pca) {
        std::vector<ChannelPlane> means;
        for (const auto& s : samples) {
            const auto v = Pca2Basis::window_means(extract_channel(read_image(s.image), Channel::I), grid);
            means.emplace_back(Channel::I, grid.rows, grid.cols, std::vector<double>(v.data(), v.data() + v.size()));
        }
        try {
            pca = Pca2Basis::fit(means, grid);
        } catch (const Error& e) {
            pca_error = e.what();
        }
    }

    // Every column set that has to be computed, one matrix each.
    struct Column {
        std::size_t request = 0;
        FeatureSpec spec;
        Eigen::MatrixXd x;
        std::string error;
    };
    std::vector<Column> columns;
    for (std::size_t r = 0; r < requests.size(); ++r) {
        const auto& req = requests[r];
        if (req.unavailable) continue;
        if (req.grid.empty()) {
            columns.push_back({r, req.spec, {}, {}});
        } else {
            for (const auto& w : req.grid) {
                auto s = req.spec;
                s.weights = w;
                columns.push_back({r, std::move(s), {}, {}});
            }
        }
    }
    for (auto& c : columns) {
        c.x.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(c.spec.length()));
        if (c.spec.baseline && c.spec.baseline_id == BaselineId::Pca2 && !pca) c.error = pca_error;
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto img = read_image(samples[i].image);
        for (auto& c : columns) {
            if (!c.error.empty()) continue;
            try {
                const auto v = featurize(c.spec, img, ideal ? &*ideal : nullptr, pca ? &*pca : nullptr);
                for (std::size_t j = 0; j < v.size(); ++j) c.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
            } catch (const Error& e) {
                c.error = e.what();
            }
        }
    }

    std::vector<EvalReport> reports;
    std::map<std::string, std::string> overlays;
    std::size_t succeeded = 0;
    std::optional<ErrorKind> first_failure;
    fs::create_directories(dir / "overlays");

    for (std::size_t r = 0; r < requests.size(); ++r) {
        const auto& req = requests[r];
        for (const auto& tc : trainers) {
            if (req.unavailable) {
                EvalReport rep;
                rep.method = req.text;
                rep.channels = "-";
                rep.feature_length = req.unavailable_length;
                rep.trainer = std::string(trainer_name(tc.method));
                rep.available = false;
                rep.note = "temporal flicker features are not computable from single frames";
                reports.push_back(std::move(rep));
                continue;
            }
            std::vector<const Column*> mine;
            for (const auto& c : columns) {
                if (c.request == r) mine.push_back(&c);
            }
            ExperimentConfig ec;
            ec.train = tc;
            ec.runs = static_cast<int>(runs);
            ec.base_seed = cfg.seed();
            const Column* chosen = mine.front();
            std::string note;
            try {
                if (mine.size() > 1) {
                    // Grid search: each tuple is scored on the validation split of the first run.
                    std::vector<GmmWeights> candidates;
                    for (const auto* c : mine) {
                        if (!c->error.empty()) fail(ErrorKind::DegenerateModel, c->error);
                        candidates.push_back(*c->spec.weights);
                    }
                    const auto best = select_gmm_weights(candidates, [&](const GmmWeights& w) {
                        const auto it = std::find_if(mine.begin(), mine.end(),
                                                     [&](const Column* c) { return *c->spec.weights == w; });
                        const auto fitted = fit_once((*it)->x, y, tc, ec.base_seed);
                        const auto m = split_metrics(y, fitted.predictions, fitted.split.validation);
                        return ValidationScore{m.r, m.mse};
                    });
                    chosen = *std::find_if(mine.begin(), mine.end(),
                                           [&](const Column* c) { return *c->spec.weights == best; });
                    note = "weights chosen from " + std::to_string(candidates.size()) + " grid tuples by validation R";
                }
                if (!chosen->error.empty()) fail(ErrorKind::DegenerateModel, chosen->error);
                auto exp = run_experiment(chosen->x, y, ec, chosen->spec.method_label(), chosen->spec.channel_label());
                exp.report.note = note;
                if (exp.report.failed_runs() < exp.report.runs.size()) ++succeeded;
                if (exp.report.failed_runs() > 0) {
                    err << "warning: " << exp.report.method << " " << exp.report.trainer << ": "
                        << exp.report.failed_runs() << " of " << exp.report.runs.size() << " runs failed\n";
                }
                if (exp.first_run_predictions.size() > 0) {
                    std::string overlay = "frame_id,timestamp_s,lambda,lambda_hat\n";
                    for (std::size_t i = 0; i < samples.size(); ++i) {
                        const auto idx = static_cast<Eigen::Index>(i);
                        overlay += samples[i].frame_id + "," + textio::format_double(samples[i].timestamp) + "," +
                                   textio::format_double(y[idx]) + "," +
                                   textio::format_double(exp.first_run_predictions[idx]) + "\n";
                    }
                    overlays[safe_name(exp.report.method + "_" + exp.report.channels + "_" + exp.report.trainer) +
                             ".csv"] = std::move(overlay);
                }
                reports.push_back(std::move(exp.report));
            } catch (const Error& e) {
                if (!first_failure) first_failure = e.kind();
                err << "warning: " << req.text << " " << trainer_name(tc.method) << " failed: " << e.what() << "\n";
                EvalReport rep;
                rep.method = req.spec.method_label();
                rep.channels = req.spec.channel_label();
                rep.feature_length = req.spec.length();
                rep.trainer = std::string(trainer_name(tc.method));
                rep.available = false;
                rep.note = std::string("failed: ") + e.what();
                reports.push_back(std::move(rep));
            }
        }
    }

    sort_reports(reports);
    textio::write_file(dir / "report.csv", render_machine(reports));
    const auto table = render_human(reports);
    textio::write_file(dir / "table.txt", table);
    for (const auto& [name, text] : overlays) textio::write_file(dir / "overlays" / name, text);
    out << table;
    out << "evaluate: " << reports.size() << " rows -> " << dir.string() << "\n";
    if (succeeded == 0 && first_failure) return exit_code(*first_failure);
    return 0;
}

int cmd_report(const RunConfig& cfg, std::ostream& out) {
    std::vector<EvalReport> reports;
    for (const auto& p : cfg.paths("reports")) {
        auto part = parse_machine(textio::read_file(p));
        reports.insert(reports.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    sort_reports(reports);
    const auto table = render_human(reports);
    if (cfg.has("out")) textio::write_file(cfg.path("out"), table);
    out << table;
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Flame-image soft sensor for the excess air coefficient"};
    app.name("flamesense");
    app.require_subcommand(1);

    struct Flags {
        std::string config, seed, method, channels, trainer, runs, out;
        std::vector<std::string> sets;
    };
    std::map<std::string, Flags> flags;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"synth", "Generate a synthetic flame session"},
        {"sync", "Align frames with the lambda log"},
        {"fit-model", "Fit the ideal flame model from reference frames"},
        {"extract", "Extract a feature table"},
        {"train", "Train the regression network"},
        {"predict", "Estimate lambda for a frame index"},
        {"evaluate", "Repeated-training comparison of feature methods"},
        {"report", "Render machine reports as a table"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        auto& f = flags[name];
        sub->add_option("--config", f.config, "JSON configuration file");
        sub->add_option("--seed", f.seed, "Random seed");
        sub->add_option("--method", f.method, "Feature method or full spec such as gmm:RG@0.25,0.75");
        sub->add_option("--channels", f.channels, "Channel letters, e.g. RGB");
        sub->add_option("--trainer", f.trainer, "scg or lm");
        sub->add_option("--runs", f.runs, "Repeated trainings");
        sub->add_option("--out", f.out, "Output path");
        sub->add_option("--set", f.sets, "Override any configuration key: key=value");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    const auto* sub = app.get_subcommands().front();
    const auto name = sub->get_name();
    const auto& f = flags.at(name);
    try {
        RunConfig cfg;
        if (!f.config.empty()) cfg.load_file(f.config);
        for (const auto& kv : f.sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) fail(ErrorKind::ConfigInvalid, "--set expects key=value, got '" + kv + "'");
            cfg.set_text(kv.substr(0, eq), kv.substr(eq + 1));
        }
        const std::pair<const char*, const std::string*> named[] = {
            {"seed", &f.seed},       {"method", &f.method}, {"channels", &f.channels},
            {"trainer", &f.trainer}, {"runs", &f.runs},     {"out", &f.out}};
        for (const auto& [key, value] : named) {
            if (!value->empty()) cfg.set_text(key, *value);
        }

        if (name == "synth") return cmd_synth(cfg, out);
        if (name == "sync") return cmd_sync(cfg, out);
        if (name == "fit-model") return cmd_fit_model(cfg, out);
        if (name == "extract") return cmd_extract(cfg, out);
        if (name == "train") return cmd_train(cfg, out);
        if (name == "predict") return cmd_predict(cfg, out);
        if (name == "evaluate") return cmd_evaluate(cfg, out, err);
        return cmd_report(cfg, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        err << "error: configuration: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace flamesense::cli
