#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>

#include "fatmon/moments.hpp"

#include "test_support.hpp"

using testsupport::CliResult;
using testsupport::TempDir;
using testsupport::read_file;
using testsupport::run_cli;
using testsupport::write_file;

namespace {

const std::string kSmallSpec =
    "segments = 8\n"
    "runs = 3\n"
    "seed = 5\n"
    "duration_s = 120\n"
    "mass_kg = 70\n"
    "subinterval_distance_m = 60\n"
    "accel_noise_std_g = 0.02\n"
    "slope_10 = 0.06\nintercept_10 = 0.5\n"
    "slope_11 = 0.08\nintercept_11 = 0.5\n"
    "slope_12 = 0.07\nintercept_12 = 0.5\n";

struct CliWorkspace {
    TempDir dir;
    std::string model;

    CliWorkspace() {
        const std::string spec = dir.file("runner.spec");
        write_file(spec, kSmallSpec);
        REQUIRE(run_cli("simulate --spec " + spec + " --out-dir " + dir.file("sim"))
                    .exit_code == 0);
        model = dir.file("model.json");
        const CliResult train = run_cli(
            "train " + dir.file("sim/run1_knee.csv") + " " + dir.file("sim/run1_ankle.csv") +
            " " + dir.file("sim/run2_knee.csv") + " " + dir.file("sim/run2_ankle.csv") +
            " --mass 70 --distance 60 --segments 8 --timestamp 0 --model " + model);
        REQUIRE(train.exit_code == 0);
    }
};

}  // namespace

TEST_CASE("usage errors exit with the validation code", "[cli]") {
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("train --mass 70").exit_code == 2);
    CHECK(run_cli("classify a.csv b.csv --model missing.json --metric fancy").exit_code == 2);
}

TEST_CASE("simulate writes loadable deterministic files", "[cli]") {
    TempDir dir;
    const std::string spec = dir.file("runner.spec");
    write_file(spec, kSmallSpec);
    const CliResult first =
        run_cli("simulate --spec " + spec + " --out-dir " + dir.file("a"));
    REQUIRE(first.exit_code == 0);
    CHECK(std::filesystem::exists(dir.file("a/run1_knee.csv")));
    CHECK(std::filesystem::exists(dir.file("a/run3_ankle.csv")));
    const CliResult second =
        run_cli("simulate --spec " + spec + " --out-dir " + dir.file("b"));
    REQUIRE(second.exit_code == 0);
    CHECK(read_file(dir.file("a/run2_knee.csv")) == read_file(dir.file("b/run2_knee.csv")));
}

TEST_CASE("simulate rejects bad spec files", "[cli]") {
    TempDir dir;
    const std::string spec = dir.file("bad.spec");
    write_file(spec, "frequency = 12\n");
    CHECK(run_cli("simulate --spec " + spec + " --out-dir " + dir.file("x")).exit_code == 2);
    CHECK(run_cli("simulate --spec " + dir.file("none.spec") + " --out-dir " +
                  dir.file("y")).exit_code == 3);
}

TEST_CASE("the full train/classify/evaluate flow succeeds", "[cli]") {
    CliWorkspace ws;
    CHECK(std::filesystem::exists(ws.model));

    const std::string results = ws.dir.file("results.csv");
    const CliResult classify = run_cli(
        "classify " + ws.dir.file("sim/run3_knee.csv") + " " +
        ws.dir.file("sim/run3_ankle.csv") + " --model " + ws.model +
        " --lag 4 --truth --lag-sweep --out " + results);
    REQUIRE(classify.exit_code == 0);
    const std::string csv = read_file(results);
    CHECK(csv.find("step,k_true,k_hat,distance_m,energy_J,fatigue_pct") != std::string::npos);
    CHECK(csv.find("# rms_percent\n") != std::string::npos);
    CHECK(csv.find("# rms_percent_by_lag\nlag0,lag1,lag2,lag3,lag4\n") != std::string::npos);

    const std::string report = ws.dir.file("report.csv");
    const CliResult evaluate = run_cli(
        "evaluate " + ws.dir.file("sim/run3_knee.csv") + " " +
        ws.dir.file("sim/run3_ankle.csv") + " --model " + ws.model + " --out " + report);
    REQUIRE(evaluate.exit_code == 0);
    const std::string report_text = read_file(report);
    CHECK(report_text.find("run,lag0,lag1,lag2,lag3,lag4") != std::string::npos);
    CHECK(report_text.find("mean,") != std::string::npos);
    CHECK(report_text.find("feature,symbol,d,d_bar,rank,selected") != std::string::npos);

    const CliResult select = run_cli("select --model " + ws.model);
    REQUIRE(select.exit_code == 0);
    CHECK(select.out.find("var_s2_a2") != std::string::npos);
}

TEST_CASE("classification validates the lag range", "[cli]") {
    CliWorkspace ws;
    const std::string args = "classify " + ws.dir.file("sim/run3_knee.csv") + " " +
                             ws.dir.file("sim/run3_ankle.csv") + " --model " + ws.model;
    CHECK(run_cli(args + " --lag 8").exit_code == 2);
    CHECK(run_cli(args + " --lag -1").exit_code == 2);
    CHECK(run_cli(args + " --lag 7 --truth").exit_code == 0);
}

TEST_CASE("feature dumps carry the documented header", "[cli]") {
    CliWorkspace ws;
    const std::string dump = ws.dir.file("features.csv");
    const CliResult classify = run_cli(
        "classify " + ws.dir.file("sim/run3_knee.csv") + " " +
        ws.dir.file("sim/run3_ankle.csv") + " --model " + ws.model +
        " --truth --dump-features " + dump + " --out " + ws.dir.file("r.csv"));
    REQUIRE(classify.exit_code == 0);
    const std::string text = read_file(dump);
    std::string expected = "k";
    for (const std::string& symbol : fatmon::feature_symbols()) expected += "," + symbol;
    CHECK(text.substr(0, expected.size()) == expected);
}

TEST_CASE("classification without labels omits the truth column", "[cli]") {
    CliWorkspace ws;
    const std::string results = ws.dir.file("plain.csv");
    const CliResult classify = run_cli(
        "classify " + ws.dir.file("sim/run3_knee.csv") + " " +
        ws.dir.file("sim/run3_ankle.csv") + " --model " + ws.model + " --out " + results);
    REQUIRE(classify.exit_code == 0);
    const std::string csv = read_file(results);
    CHECK(csv.find("step,k_hat,distance_m,energy_J,fatigue_pct") != std::string::npos);
    CHECK(csv.find("k_true") == std::string::npos);
    CHECK(csv.find("# rms_percent") == std::string::npos);
}

TEST_CASE("alternate selection mode and metric flags are accepted", "[cli]") {
    CliWorkspace ws;
    const std::string model = ws.dir.file("argmax.json");
    const CliResult train = run_cli(
        "train " + ws.dir.file("sim/run1_knee.csv") + " " + ws.dir.file("sim/run1_ankle.csv") +
        " " + ws.dir.file("sim/run2_knee.csv") + " " + ws.dir.file("sim/run2_ankle.csv") +
        " --mass 70 --distance 60 --segments 8 --timestamp 0 --select argmax "
        "--metric mahalanobis-diag --model " + model);
    REQUIRE(train.exit_code == 0);
    const std::string text = read_file(model);
    CHECK(text.find("\"selection_mode\": \"argmax\"") != std::string::npos);
    CHECK(text.find("\"metric\": \"mahalanobis-diag\"") != std::string::npos);
    const CliResult classify = run_cli(
        "classify " + ws.dir.file("sim/run3_knee.csv") + " " +
        ws.dir.file("sim/run3_ankle.csv") + " --model " + model +
        " --truth --metric euclidean --out " + ws.dir.file("o.csv"));
    CHECK(classify.exit_code == 0);
}

TEST_CASE("corrupt models are version or validation errors", "[cli]") {
    CliWorkspace ws;
    const std::string broken = ws.dir.file("broken.json");
    write_file(broken, "{\"schema_version\": 99}");
    const CliResult result = run_cli("classify " + ws.dir.file("sim/run3_knee.csv") + " " +
                                     ws.dir.file("sim/run3_ankle.csv") + " --model " + broken);
    CHECK(result.exit_code == 2);
}

TEST_CASE("degenerate signals exit with the numeric code", "[cli]") {
    TempDir dir;
    // Constant streams: every axis has zero variance.
    std::string rows;
    for (int i = 0; i < 2000; ++i)
        rows += fatmon::format_double(i / 100.0) + ",1,1,1\n";
    const std::string contents = "# rate_hz=100\nt,ax,ay,az\n" + rows;
    write_file(dir.file("k1.csv"), contents);
    write_file(dir.file("a1.csv"), contents);
    write_file(dir.file("k2.csv"), contents);
    write_file(dir.file("a2.csv"), contents);
    const CliResult result = run_cli(
        "train " + dir.file("k1.csv") + " " + dir.file("a1.csv") + " " + dir.file("k2.csv") +
        " " + dir.file("a2.csv") +
        " --mass 70 --distance 60 --segments 2 --model " + dir.file("m.json"));
    CHECK(result.exit_code == 4);
    CHECK(result.err.find("degenerate") != std::string::npos);
}

TEST_CASE("training is byte-deterministic with a pinned timestamp", "[cli]") {
    CliWorkspace ws;
    const std::string second_model = ws.dir.file("model2.json");
    const CliResult train = run_cli(
        "train " + ws.dir.file("sim/run1_knee.csv") + " " + ws.dir.file("sim/run1_ankle.csv") +
        " " + ws.dir.file("sim/run2_knee.csv") + " " + ws.dir.file("sim/run2_ankle.csv") +
        " --mass 70 --distance 60 --segments 8 --timestamp 0 --model " + second_model);
    REQUIRE(train.exit_code == 0);
    CHECK(read_file(ws.model) == read_file(second_model));
}

TEST_CASE("input digest verification", "[cli]") {
    CliWorkspace ws;
    const std::string args = "classify " + ws.dir.file("sim/run3_knee.csv") + " " +
                             ws.dir.file("sim/run3_ankle.csv") + " --model " + ws.model +
                             " --truth --verify-inputs --out " + ws.dir.file("v.csv");
    CHECK(run_cli(args).exit_code == 0);
    // Tamper with a recorded training input.
    std::string contents = read_file(ws.dir.file("sim/run1_knee.csv"));
    contents += "\n";
    write_file(ws.dir.file("sim/run1_knee.csv"), contents);
    CHECK(run_cli(args).exit_code == 2);
}

TEST_CASE("marker files flow through training on the command line", "[cli]") {
    TempDir dir;
    const std::string spec = dir.file("pace.spec");
    write_file(spec, kSmallSpec + "speeds = 3,3,3,3,5,5,5,5\n");
    REQUIRE(run_cli("simulate --spec " + spec + " --out-dir " + dir.file("sim")).exit_code ==
            0);
    const std::string markers = dir.file("sim/markers.csv");
    REQUIRE(std::filesystem::exists(markers));
    const CliResult train = run_cli(
        "train " + dir.file("sim/run1_knee.csv") + " " + dir.file("sim/run1_ankle.csv") + " " +
        dir.file("sim/run2_knee.csv") + " " + dir.file("sim/run2_ankle.csv") +
        " --markers " + markers + "," + markers +
        " --mass 70 --distance 60 --segments 8 --timestamp 0 --model " + dir.file("m.json"));
    REQUIRE(train.exit_code == 0);
    const std::string text = read_file(dir.file("m.json"));
    CHECK(text.find("\"speeds_mps\": [3,") != std::string::npos);
}

TEST_CASE("selection report file from training", "[cli]") {
    CliWorkspace ws;
    const std::string report = ws.dir.file("selection.csv");
    const CliResult train = run_cli(
        "train " + ws.dir.file("sim/run1_knee.csv") + " " + ws.dir.file("sim/run1_ankle.csv") +
        " " + ws.dir.file("sim/run2_knee.csv") + " " + ws.dir.file("sim/run2_ankle.csv") +
        " --mass 70 --distance 60 --segments 8 --timestamp 0 --selection-report " + report +
        " --model " + ws.dir.file("m3.json"));
    REQUIRE(train.exit_code == 0);
    const std::string text = read_file(report);
    CHECK(text.find("# trace") != std::string::npos);
    CHECK(text.find("mode,procedure1") != std::string::npos);
    CHECK(text.find("metric,euclidean") != std::string::npos);
}
