#include "helpers.hpp"

#include "flamesense/commands.hpp"
#include "flamesense/eval.hpp"
#include "flamesense/pipeline.hpp"
#include "flamesense/textio.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

using namespace flamesense;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// A tiny session shared by the command tests: 32x32 frames, 60 s at 2 Hz.
struct Workspace {
    fs::path dir = testing::scratch_dir("cli");

    Workspace() {
        const auto r = invoke({"synth", "--seed", "3", "--out", (dir / "s").string(), "--set", "image_size=32", "--set",
                            "duration_s=60", "--set", "reference_count=5"});
        REQUIRE(r.code == 0);
        REQUIRE(invoke({"fit-model", "--set", "reference=" + (dir / "s/reference.csv").string(), "--out",
                     (dir / "ideal.model").string()})
                    .code == 0);
        REQUIRE(invoke({"sync", "--set", "frame_index=" + (dir / "s/frames.csv").string(), "--set",
                     "lambda_log=" + (dir / "s/lambda.csv").string(), "--out", (dir / "manifest.csv").string()})
                    .code == 0);
    }
    ~Workspace() { fs::remove_all(dir); }

    [[nodiscard]] std::vector<std::string> extract(const std::string& method, const std::string& channels,
                                                   const fs::path& out) const {
        return {"extract", "--method", method, "--channels", channels, "--set",
                "model=" + (dir / "ideal.model").string(), "--set", "manifest=" + (dir / "manifest.csv").string(),
                "--set", "grid_rows=4", "--set", "grid_cols=4", "--out", out.string()};
    }
};

std::size_t line_count(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit codes") {
    const auto dir = testing::scratch_dir("cli_codes");
    CHECK(invoke({"synth", "--set", "image_size=40", "--out", (dir / "x").string()}).code == 2);
    CHECK(invoke({"synth", "--set", "bogus_key=1", "--out", (dir / "x").string()}).code == 2);
    CHECK(invoke({"synth", "--set", "image_size=\"big\"", "--out", (dir / "x").string()}).code == 2);
    CHECK(invoke({"no-such-command"}).code == 2);

    textio::write_file(dir / "empty.csv", "lambda,image_path\n");
    auto r = invoke({"fit-model", "--set", "reference=" + (dir / "empty.csv").string(), "--out", (dir / "m").string()});
    CHECK(r.code == 3);

    REQUIRE(invoke({"synth", "--seed", "1", "--out", (dir / "s").string(), "--set", "image_size=32", "--set",
                 "duration_s=4", "--set", "reference_count=2"})
                .code == 0);
    auto ref = textio::read_file(dir / "s/reference.csv");
    ref.replace(ref.find("\n1.5,") + 1, 3, "1.6");
    textio::write_file(dir / "s/bad_reference.csv", ref);
    r = invoke({"fit-model", "--set", "reference=" + (dir / "s/bad_reference.csv").string(), "--out",
             (dir / "m").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("LambdaOutOfBand") != std::string::npos);

    r = invoke({"extract", "--method", "naive_bayes", "--channels", "RI", "--set",
             "reference=" + (dir / "s/reference.csv").string(), "--set",
             "frame_index=" + (dir / "s/frames.csv").string(), "--set",
             "lambda_log=" + (dir / "s/lambda.csv").string(), "--out", (dir / "f.csv").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("IllegalChannel") != std::string::npos);

    fs::remove(dir / "s/frames/frame_000001.png");
    r = invoke({"extract", "--set", "reference=" + (dir / "s/reference.csv").string(), "--set",
             "frame_index=" + (dir / "s/frames.csv").string(), "--set",
             "lambda_log=" + (dir / "s/lambda.csv").string(), "--out", (dir / "f.csv").string()});
    CHECK(r.code == 3);
    fs::remove_all(dir);
}

TEST_CASE("config file paths resolve next to the file; flags override") {
    const auto dir = testing::scratch_dir("cli_config");
    fs::create_directories(dir / "conf");
    textio::write_file(dir / "conf/run.json",
                       R"({"out": "../session", "image_size": 32, "duration_s": 4, "reference_count": 2, "seed": 5})");
    REQUIRE(invoke({"synth", "--config", (dir / "conf/run.json").string()}).code == 0);
    CHECK(fs::exists(dir / "session/frames.csv"));
    REQUIRE(invoke({"synth", "--config", (dir / "conf/run.json").string(), "--seed", "6", "--out",
                 (dir / "other").string()})
                .code == 0);
    CHECK(textio::read_file(dir / "session/truth.csv") != textio::read_file(dir / "other/truth.csv"));
    fs::remove_all(dir);
}

TEST_CASE("extract, train, predict") {
    const Workspace ws;
    const auto& dir = ws.dir;

    auto r = invoke(ws.extract("sumsim", "RGB", dir / "sum.csv"));
    REQUIRE(r.code == 0);
    const auto table = read_feature_table(dir / "sum.csv");
    CHECK(table.rows.size() == read_manifest(dir / "manifest.csv").size());
    for (const auto& row : table.rows) CHECK(row.values.size() == 48);

    // Full-size grid: 16x16 windows over three channels.
    auto full = ws.extract("sumsim", "RGB", dir / "full.csv");
    full.erase(full.end() - 6, full.end() - 2);
    REQUIRE(invoke(full).code == 0);
    CHECK(read_feature_table(dir / "full.csv").rows.front().values.size() == 768);

    // GMM without weights: one table per grid tuple.
    REQUIRE(invoke(ws.extract("gmm", "RG", dir / "gmm.csv")).code == 0);
    std::size_t tables = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().filename().string().starts_with("gmm_w")) ++tables;
    }
    CHECK(tables == 10);
    CHECK(fs::exists(dir / "gmm_w0.05-0.95.csv"));

    const std::vector<std::string> train{"train", "--trainer", "scg", "--seed", "2", "--set",
                                         "features=" + (dir / "sum.csv").string(), "--set",
                                         "manifest=" + (dir / "manifest.csv").string(), "--set",
                                         "model=" + (dir / "ideal.model").string(), "--out",
                                         (dir / "net.model").string()};
    r = invoke(train);
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "net.model.report.csv"));

    // Predicting the training frames reproduces the in-training predictions bit for bit.
    r = invoke({"predict", "--set", "trained_model=" + (dir / "net.model").string(), "--set",
             "frames=" + (dir / "s/frames.csv").string(), "--out", (dir / "pred.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("latency") != std::string::npos);
    std::map<double, std::string> predicted;
    const auto pred_text = textio::read_file(dir / "pred.csv");
    const auto pred_lines = textio::split(pred_text, '\n');
    for (std::size_t i = 1; i < pred_lines.size(); ++i) {
        if (pred_lines[i].empty()) continue;
        const auto cols = textio::split(pred_lines[i], ',');
        predicted[textio::parse_double(cols[0])] = std::string(cols[1]);
    }
    const auto train_text = textio::read_file(dir / "net.model.predictions.csv");
    const auto train_lines = textio::split(train_text, '\n');
    std::size_t compared = 0;
    for (std::size_t i = 1; i < train_lines.size(); ++i) {
        if (train_lines[i].empty()) continue;
        const auto cols = textio::split(train_lines[i], ',');
        CHECK(predicted.at(textio::parse_double(cols[1])) == std::string(cols[3]));
        ++compared;
    }
    CHECK(compared == table.rows.size());

    // Empty frame list: header only.
    textio::write_file(dir / "none.csv", "timestamp_s,image_path\n");
    r = invoke({"predict", "--set", "trained_model=" + (dir / "net.model").string(), "--set",
             "frames=" + (dir / "none.csv").string(), "--out", (dir / "none_pred.csv").string()});
    CHECK(r.code == 0);
    CHECK(textio::read_file(dir / "none_pred.csv") == "timestamp_s,lambda_hat\n");

    // Frames the stored grid does not divide are refused.
    write_png(dir / "odd.png", testing::random_image(30, 32, 1));
    textio::write_file(dir / "odd.csv", "timestamp_s,image_path\n0,odd.png\n");
    r = invoke({"predict", "--set", "trained_model=" + (dir / "net.model").string(), "--set",
             "frames=" + (dir / "odd.csv").string(), "--out", (dir / "odd_pred.csv").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("GridMismatch") != std::string::npos);
}

TEST_CASE("evaluate and report") {
    const Workspace ws;
    const auto& dir = ws.dir;
    auto r = invoke({"evaluate", "--set", "model=" + (dir / "ideal.model").string(), "--set",
                  "manifest=" + (dir / "manifest.csv").string(), "--set", "grid_rows=4", "--set", "grid_cols=4",
                  "--set", R"(methods=["sumsim:RGB", "baseline:res_mean1", "baseline:flicker3"])", "--set",
                  R"(trainers=["scg", "lm"])", "--runs", "2", "--set", "max_epochs=40", "--out",
                  (dir / "ev").string()});
    REQUIRE(r.code == 0);
    const auto reports = parse_machine(textio::read_file(dir / "ev/report.csv"));
    CHECK(reports.size() == 6);
    std::size_t unavailable = 0;
    for (const auto& rep : reports) {
        if (!rep.available) {
            ++unavailable;
            CHECK(rep.feature_length == 3);
            continue;
        }
        CHECK(rep.runs.size() == 2);
        CHECK(rep.feature_length == (rep.method == "sumsim" ? 48u : 1u));
    }
    CHECK(unavailable == 2);
    CHECK(fs::exists(dir / "ev/table.txt"));

    r = invoke({"evaluate", "--set", "model=" + (dir / "ideal.model").string(), "--set",
             "manifest=" + (dir / "manifest.csv").string(), "--set", "grid_rows=4", "--set", "grid_cols=4",
             "--set", R"(methods=["sumsim:RGB"])", "--set", R"(trainers=["scg", "lm"])", "--runs", "1", "--set",
             "max_epochs=20", "--out", (dir / "ev2").string()});
    REQUIRE(r.code == 0);
    const auto table = textio::read_file(dir / "ev2/table.txt");
    CHECK(line_count(table) == 4);  // header, rule, two rows

    r = invoke({"report", "--set", "reports=" + (dir / "ev2/report.csv").string(), "--out",
             (dir / "t.txt").string()});
    CHECK(r.code == 0);
    CHECK(textio::read_file(dir / "t.txt") == table);
}

TEST_CASE("repeated commands give identical bytes") {
    const Workspace a;
    const Workspace b;
    auto run_all = [](const Workspace& ws) {
        REQUIRE(invoke(ws.extract("mvn", "RGB", ws.dir / "f.csv")).code == 0);
        REQUIRE(invoke({"train", "--trainer", "lm", "--seed", "4", "--set", "max_epochs=30", "--set",
                     "features=" + (ws.dir / "f.csv").string(), "--set",
                     "manifest=" + (ws.dir / "manifest.csv").string(), "--set",
                     "model=" + (ws.dir / "ideal.model").string(), "--out", (ws.dir / "n.model").string()})
                    .code == 0);
    };
    run_all(a);
    run_all(b);
    for (const auto* name : {"ideal.model", "manifest.csv", "f.csv", "n.model", "n.model.report.csv",
                             "n.model.predictions.csv", "s/frames.csv", "s/truth.csv", "s/frames/frame_000007.png"}) {
        CAPTURE(name);
        CHECK(textio::read_file(a.dir / name) == textio::read_file(b.dir / name));
    }
}

}
