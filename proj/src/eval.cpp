#include "flamesense/eval.hpp"

#include "flamesense/error.hpp"
#include "flamesense/textio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace flamesense {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, std::size_t min_len) {
    if (a.size() != b.size()) fail(ErrorKind::LengthMismatch, "sequences differ in length");
    if (a.size() < min_len) fail(ErrorKind::Empty, "too few values");
}

bool same_number(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

constexpr std::string_view kMachineHeader =
    "kind,method,channels,feature_length,trainer,index,seed,status,all_mse,all_r,train_mse,train_r,"
    "validation_mse,validation_r,test_mse,test_r,note";

std::string clean_note(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

void append_metrics(std::string& out, const SplitMetrics& all, const SplitMetrics& train, const SplitMetrics& val,
                    const SplitMetrics& test) {
    for (const auto* m : {&all, &train, &val, &test}) {
        out += "," + textio::format_double(m->mse) + "," + textio::format_double(m->r);
    }
}

SplitMetrics mean_of(const std::vector<const SplitMetrics*>& items) {
    if (items.empty()) return {};
    SplitMetrics m{0.0, 0.0};
    for (const auto* s : items) {
        m.mse += s->mse;
        m.r += s->r;
    }
    m.mse /= static_cast<double>(items.size());
    m.r /= static_cast<double>(items.size());
    return m;
}

}  // namespace

bool operator==(const SplitMetrics& a, const SplitMetrics& b) {
    return same_number(a.mse, b.mse) && same_number(a.r, b.r);
}

double mse(std::span<const double> targets, std::span<const double> predictions) {
    check_lengths(targets, predictions, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double d = targets[i] - predictions[i];
        acc += d * d;
    }
    return acc / static_cast<double>(targets.size());
}

double pearson_r(std::span<const double> targets, std::span<const double> predictions) {
    check_lengths(targets, predictions, 2);
    const auto n = static_cast<double>(targets.size());
    double mean_t = 0.0, mean_p = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        mean_t += targets[i];
        mean_p += predictions[i];
    }
    mean_t /= n;
    mean_p /= n;
    double cross = 0.0, var_t = 0.0, var_p = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double dt = targets[i] - mean_t;
        const double dp = predictions[i] - mean_p;
        cross += dt * dp;
        var_t += dt * dt;
        var_p += dp * dp;
    }
    if (!(var_t > 0.0) || !(var_p > 0.0)) fail(ErrorKind::DegenerateVariance, "constant sequence has no correlation");
    return std::clamp(cross / (std::sqrt(var_t) * std::sqrt(var_p)), -1.0, 1.0);
}

std::size_t EvalReport::failed_runs() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunResult& r) { return r.failed; }));
}

void EvalReport::finalize() {
    std::vector<const SplitMetrics*> all, train, val, test;
    for (const auto& r : runs) {
        if (r.failed) continue;
        all.push_back(&r.all);
        train.push_back(&r.train);
        val.push_back(&r.validation);
        test.push_back(&r.test);
    }
    mean_all = mean_of(all);
    mean_train = mean_of(train);
    mean_validation = mean_of(val);
    mean_test = mean_of(test);
}

SplitMetrics split_metrics(const Eigen::VectorXd& targets, const Eigen::VectorXd& predictions,
                           std::span<const std::size_t> indices) {
    std::vector<double> t, p;
    t.reserve(indices.size());
    p.reserve(indices.size());
    for (auto i : indices) {
        t.push_back(targets[static_cast<Eigen::Index>(i)]);
        p.push_back(predictions[static_cast<Eigen::Index>(i)]);
    }
    return {mse(t, p), pearson_r(t, p)};
}

FittedRun fit_once(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const TrainConfig& cfg,
                   std::uint64_t seed) {
    if (features.rows() != targets.size()) fail(ErrorKind::DimensionMismatch, "one target per feature row required");
    if (features.rows() == 0) fail(ErrorKind::Empty, "empty dataset");
    FittedRun run;
    run.split = split(static_cast<std::size_t>(features.rows()), SplitSpec{0.70, 0.15, 0.15, seed});
    const Eigen::MatrixXd x_train = select_rows(features, run.split.train);
    run.standardizer = Standardizer::fit(x_train);
    const Eigen::MatrixXd z_train = run.standardizer.apply(x_train);
    const Eigen::MatrixXd z_val = run.standardizer.apply(select_rows(features, run.split.validation));
    auto start = init_weights(features.cols(), seed);
    auto trained = train(start, z_train, select_rows(targets, run.split.train), z_val,
                         select_rows(targets, run.split.validation), cfg);
    run.model = std::move(trained.model);
    run.report = std::move(trained.report);
    run.predictions = predict(run.model, run.standardizer.apply(features));
    return run;
}

Experiment run_experiment(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                          const ExperimentConfig& cfg, std::string method, std::string channels) {
    if (cfg.runs < 1) fail(ErrorKind::ConfigInvalid, "runs must be at least 1");
    Experiment exp;
    exp.report.method = std::move(method);
    exp.report.channels = std::move(channels);
    exp.report.feature_length = static_cast<std::size_t>(features.cols());
    exp.report.trainer = std::string(trainer_name(cfg.train.method));

    for (int r = 0; r < cfg.runs; ++r) {
        RunResult result;
        result.seed = cfg.base_seed + static_cast<std::uint64_t>(r);
        try {
            auto run = fit_once(features, targets, cfg.train, result.seed);
            std::vector<std::size_t> everything(static_cast<std::size_t>(features.rows()));
            for (std::size_t i = 0; i < everything.size(); ++i) everything[i] = i;
            result.all = split_metrics(targets, run.predictions, everything);
            result.train = split_metrics(targets, run.predictions, run.split.train);
            result.validation = split_metrics(targets, run.predictions, run.split.validation);
            result.test = split_metrics(targets, run.predictions, run.split.test);
            if (r == 0) exp.first_run_predictions = run.predictions;
        } catch (const Error& e) {
            result = RunResult{};
            result.seed = cfg.base_seed + static_cast<std::uint64_t>(r);
            result.failed = true;
            result.error = e.what();
        }
        exp.report.runs.push_back(std::move(result));
    }
    exp.report.finalize();
    return exp;
}

void sort_reports(std::vector<EvalReport>& reports) {
    std::stable_sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
        const double ra = a.mean_all.r;
        const double rb = b.mean_all.r;
        if (std::isnan(ra)) return false;
        if (std::isnan(rb)) return true;
        return ra > rb;
    });
}

std::string render_machine(std::span<const EvalReport> reports) {
    std::string out(kMachineHeader);
    out += '\n';
    for (const auto& rep : reports) {
        const std::string prefix = rep.method + "," + rep.channels + "," + std::to_string(rep.feature_length) + "," +
                                   rep.trainer + ",";
        out += (rep.available ? "mean," : "unavailable,") + prefix + std::to_string(rep.runs.size()) + ",," +
               std::to_string(rep.failed_runs());
        append_metrics(out, rep.mean_all, rep.mean_train, rep.mean_validation, rep.mean_test);
        out += "," + clean_note(rep.note) + "\n";
        for (std::size_t i = 0; i < rep.runs.size(); ++i) {
            const auto& run = rep.runs[i];
            out += "run," + prefix + std::to_string(i) + "," + std::to_string(run.seed) + "," +
                   (run.failed ? "failed" : "ok");
            append_metrics(out, run.all, run.train, run.validation, run.test);
            out += "," + clean_note(run.error) + "\n";
        }
    }
    return out;
}

std::vector<EvalReport> parse_machine(std::string_view text) {
    std::vector<EvalReport> reports;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || textio::trim(line) != kMachineHeader) {
        fail(ErrorKind::IoError, "report file has an unexpected header");
    }
    auto metrics = [](const std::vector<std::string_view>& f, std::size_t at) {
        return SplitMetrics{textio::parse_double(f[at]), textio::parse_double(f[at + 1])};
    };
    while (std::getline(in, line)) {
        if (textio::trim(line).empty()) continue;
        const auto f = textio::split(textio::trim(line), ',');
        if (f.size() != 17) fail(ErrorKind::IoError, "report row has the wrong column count");
        if (f[0] == "mean" || f[0] == "unavailable") {
            EvalReport rep;
            rep.available = f[0] == "mean";
            rep.method = std::string(f[1]);
            rep.channels = std::string(f[2]);
            rep.feature_length = static_cast<std::size_t>(textio::parse_int(f[3]));
            rep.trainer = std::string(f[4]);
            rep.mean_all = metrics(f, 8);
            rep.mean_train = metrics(f, 10);
            rep.mean_validation = metrics(f, 12);
            rep.mean_test = metrics(f, 14);
            rep.note = std::string(f[16]);
            reports.push_back(std::move(rep));
        } else if (f[0] == "run") {
            if (reports.empty()) fail(ErrorKind::IoError, "run row before its summary row");
            RunResult run;
            run.seed = static_cast<std::uint64_t>(textio::parse_int(f[6]));
            run.failed = f[7] == "failed";
            run.all = metrics(f, 8);
            run.train = metrics(f, 10);
            run.validation = metrics(f, 12);
            run.test = metrics(f, 14);
            run.error = std::string(f[16]);
            reports.back().runs.push_back(std::move(run));
        } else {
            fail(ErrorKind::IoError, "unknown report row kind '" + std::string(f[0]) + "'");
        }
    }
    return reports;
}

std::string render_human(std::span<const EvalReport> reports) {
    std::vector<EvalReport> sorted(reports.begin(), reports.end());
    sort_reports(sorted);
    auto num = [](double v, const char* fmt) {
        if (std::isnan(v)) return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof buf, fmt, v);
        return std::string(buf);
    };
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %-8s %6s %-7s %5s | %9s %7s | %9s %7s | %9s %7s\n", "Method", "Channels",
                  "FVL", "Trainer", "Runs", "All MSE", "All R", "Train MSE", "Train R", "Test MSE", "Test R");
    out += line;
    out += std::string(std::string_view(line).size() - 1, '-') + "\n";
    for (const auto& r : sorted) {
        if (!r.available) {
            std::snprintf(line, sizeof line, "%-28s %-8s %6zu %-7s %5s | unavailable: %s\n", r.method.c_str(),
                          r.channels.c_str(), r.feature_length, r.trainer.c_str(), "-", r.note.c_str());
            out += line;
            continue;
        }
        const auto ok = r.runs.size() - r.failed_runs();
        const std::string runs = std::to_string(ok) + "/" + std::to_string(r.runs.size());
        std::snprintf(line, sizeof line, "%-28s %-8s %6zu %-7s %5s | %9s %7s | %9s %7s | %9s %7s\n", r.method.c_str(),
                      r.channels.c_str(), r.feature_length, r.trainer.c_str(), runs.c_str(),
                      num(r.mean_all.mse, "%.4f").c_str(), num(r.mean_all.r, "%.4f").c_str(),
                      num(r.mean_train.mse, "%.4f").c_str(), num(r.mean_train.r, "%.4f").c_str(),
                      num(r.mean_test.mse, "%.4f").c_str(), num(r.mean_test.r, "%.4f").c_str());
        out += line;
    }
    return out;
}

}  // namespace flamesense
