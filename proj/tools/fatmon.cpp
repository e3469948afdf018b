// fatmon: wearable running-fatigue toolkit.
// Subcommands: simulate, train, classify, evaluate, select.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fatmon/model_io.hpp"
#include "fatmon/pipeline.hpp"

namespace {

using namespace fatmon;

std::vector<RunPaths> pair_up_runs(const std::vector<std::string>& files,
                                   const std::vector<std::string>& markers) {
    if (files.size() < 2 || files.size() % 2 != 0)
        throw_validation("expected knee/ankle CSV paths in pairs");
    std::vector<RunPaths> runs;
    for (std::size_t i = 0; i + 1 < files.size(); i += 2)
        runs.push_back(RunPaths{files[i], files[i + 1], std::nullopt});
    if (!markers.empty()) {
        if (markers.size() != runs.size())
            throw_validation("need one marker file per run, got " +
                             std::to_string(markers.size()) + " for " +
                             std::to_string(runs.size()) + " runs");
        for (std::size_t i = 0; i < runs.size(); ++i) runs[i].marker = markers[i];
    }
    return runs;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io("cannot write " + path);
    return out;
}

void dump_features(const std::string& path, const FeatureSeries& series) {
    std::ofstream out = open_output(path);
    write_feature_csv(out, series);
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Wearable running-fatigue toolkit: statistical-moment features from "
                 "knee/ankle accelerometer streams, entropy-rate feature selection and "
                 "subinterval classification"};
    app.require_subcommand(1);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Generate synthetic sensor runs");
    std::string spec_path, out_dir;
    simulate->add_option("--spec", spec_path, "Synthesis spec file")->required();
    simulate->add_option("--out-dir", out_dir, "Output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Fit a model from two or more recorded runs");
    std::vector<std::string> train_files, train_markers;
    double mass_kg = 0.0, distance_m = 0.0;
    int segments = 44;
    std::string metric_name_opt = "euclidean", select_mode = "procedure1";
    std::string model_out, selection_report, features_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> timestamp;
    train->add_option("csv", train_files,
                      "Sensor CSVs as knee/ankle pairs, one pair per run")
        ->required();
    train->add_option("--mass", mass_kg, "Runner mass [kg]")->required();
    train->add_option("--distance", distance_m, "Subinterval distance [m]")->required();
    train->add_option("--segments", segments, "Subinterval count N")->capture_default_str();
    train->add_option("--metric", metric_name_opt, "euclidean | mahalanobis-diag")->capture_default_str();
    train->add_option("--select", select_mode, "procedure1 | argmax")->capture_default_str();
    train->add_option("--seed", seed, "Generator seed recorded in provenance");
    train->add_option("--timestamp", timestamp,
                      "Creation time as UNIX epoch seconds (default: now)");
    train->add_option("--markers", train_markers, "Segment marker CSV, one per run")
        ->delimiter(',');
    train->add_option("--model", model_out, "Output model JSON path")->required();
    train->add_option("--selection-report", selection_report, "Selection report CSV path");
    train->add_option("--dump-features", features_dir,
                      "Directory for per-run raw feature CSV dumps");

    // classify
    auto* classify = app.add_subcommand("classify", "Estimate subintervals for a new run");
    std::string model_path, out_path, marker_path, metric_override, classify_features;
    std::vector<std::string> classify_files;
    int lag = 4;
    bool truth = false, lag_sweep = false, verify_inputs = false;
    classify->add_option("csv", classify_files, "Knee and ankle CSV for the run")
        ->expected(2)
        ->required();
    classify->add_option("--model", model_path, "Trained model JSON")->required();
    classify->add_option("--lag", lag, "Measurement lag")->capture_default_str();
    classify->add_flag("--truth", truth, "Treat step s as having true subinterval s");
    classify->add_flag("--lag-sweep", lag_sweep, "Also report RMS for lags 0..4");
    classify->add_option("--marker", marker_path, "Segment marker CSV for this run");
    classify->add_option("--metric", metric_override,
                         "Override the model's distance metric for classification");
    classify->add_flag("--verify-inputs", verify_inputs,
                       "Recompute and check training input digests");
    classify->add_option("--out", out_path, "Result CSV path (default: stdout)");
    classify->add_option("--dump-features", classify_features,
                         "Raw feature CSV dump for this run");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Score labeled runs at lags 0..4");
    std::vector<std::string> eval_files, eval_markers;
    std::string eval_model, eval_out;
    bool eval_verify = false;
    evaluate->add_option("csv", eval_files, "Labeled runs as knee/ankle pairs")->required();
    evaluate->add_option("--model", eval_model, "Trained model JSON")->required();
    evaluate->add_option("--markers", eval_markers, "Segment marker CSV, one per run")
        ->delimiter(',');
    evaluate->add_flag("--verify-inputs", eval_verify,
                       "Recompute and check training input digests");
    evaluate->add_option("--out", eval_out, "Report CSV path (default: stdout)");

    // select
    auto* select = app.add_subcommand("select", "Re-emit the selection report of a model");
    std::string select_model, select_out;
    select->add_option("--model", select_model, "Trained model JSON")->required();
    select->add_option("--out", select_out, "Report CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Validation);
    }

    if (simulate->parsed()) {
        const SynthSpec spec = parse_synth_spec(spec_path);
        const std::vector<std::string> written = simulate_pipeline(spec, out_dir);
        for (const std::string& path : written) std::cout << path << '\n';
        return 0;
    }

    if (train->parsed()) {
        TrainOptions options;
        options.segments = segments;
        options.metric = parse_metric(metric_name_opt);
        options.selection_mode = parse_selection_mode(select_mode);
        options.seed = seed;
        options.timestamp_epoch = timestamp;
        const std::vector<RunPaths> runs = pair_up_runs(train_files, train_markers);
        TrainResult result = train_pipeline(runs, mass_kg, distance_m, options);
        print_warnings(result.warnings);
        save_model_file(model_out, result.model_file);
        if (!selection_report.empty()) {
            std::ofstream out = open_output(selection_report);
            write_selection_report(out, result.model_file.model.relevance, options.metric,
                                   selection_mode_name(options.selection_mode));
        }
        if (!features_dir.empty()) {
            std::filesystem::create_directories(features_dir);
            for (std::size_t i = 0; i < result.raw_features.size(); ++i)
                dump_features(features_dir + "/run" + std::to_string(i + 1) + "_features.csv",
                              result.raw_features[i]);
        }
        const TrainedModel& model = result.model_file.model;
        std::cerr << "model written to " << model_out << ": " << model.segment_count
                  << " subintervals, " << model.relevance.selected_count
                  << " selected features\n";
        return 0;
    }

    if (classify->parsed()) {
        const std::optional<DistanceMetric> metric =
            metric_override.empty() ? std::nullopt
                                    : std::optional<DistanceMetric>(parse_metric(metric_override));
        ModelFile file = load_model_file(model_path);
        if (verify_inputs) verify_model_inputs(file);
        if (metric) file.model.metric = *metric;
        RunPaths paths{classify_files[0], classify_files[1], std::nullopt};
        if (!marker_path.empty()) paths.marker = marker_path;
        const ObservationSet observations = prepare_observations(file.model, paths);
        if (!classify_features.empty()) dump_features(classify_features, observations.raw);
        ClassifyOptions options;
        options.lag = lag;
        options.truth = truth;
        options.lag_sweep = lag_sweep;
        const ClassificationResult result =
            classify_pipeline(file.model, observations, options);
        if (out_path.empty()) {
            write_classification_csv(std::cout, result, truth);
        } else {
            std::ofstream out = open_output(out_path);
            write_classification_csv(out, result, truth);
        }
        return 0;
    }

    if (evaluate->parsed()) {
        ModelFile file = load_model_file(eval_model);
        if (eval_verify) verify_model_inputs(file);
        const std::vector<RunPaths> runs = pair_up_runs(eval_files, eval_markers);
        const EvaluateResult result = evaluate_pipeline(file.model, runs);
        if (eval_out.empty()) {
            write_evaluate_report(std::cout, result, file.model);
        } else {
            std::ofstream out = open_output(eval_out);
            write_evaluate_report(out, result, file.model);
        }
        return 0;
    }

    if (select->parsed()) {
        const ModelFile file = load_model_file(select_model);
        if (select_out.empty()) {
            write_selection_report(std::cout, file.model.relevance, file.model.metric,
                                   selection_mode_name(file.model.selection_mode));
        } else {
            std::ofstream out = open_output(select_out);
            write_selection_report(out, file.model.relevance, file.model.metric,
                                   selection_mode_name(file.model.selection_mode));
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const fatmon::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}
