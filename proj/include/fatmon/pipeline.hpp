#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fatmon/classify.hpp"
#include "fatmon/errors.hpp"
#include "fatmon/filter.hpp"
#include "fatmon/ingest.hpp"
#include "fatmon/model_io.hpp"
#include "fatmon/moments.hpp"
#include "fatmon/select.hpp"
#include "fatmon/synth.hpp"
#include "fatmon/trend.hpp"

namespace fatmon {

struct RunPaths {
    std::string knee;
    std::string ankle;
    std::optional<std::string> marker;
};

struct TrainOptions {
    int segments = 44;
    DistanceMetric metric = DistanceMetric::Euclidean;
    SelectionMode selection_mode = SelectionMode::Procedure;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> timestamp_epoch;
};

struct TrainResult {
    ModelFile model_file;
    std::vector<std::string> warnings;
    std::vector<FeatureSeries> raw_features;  // per training run, unnormalized
};

namespace detail {

struct LoadedRun {
    SampleStream knee;
    SampleStream ankle;
    std::vector<Segment> segments;
    FeatureSeries features;  // raw
};

inline LoadedRun load_run(const RunPaths& paths, int n_segments, double default_distance_m) {
    LoadedRun run;
    run.knee = parse_stream(paths.knee, SensorId::Knee);
    run.ankle = parse_stream(paths.ankle, SensorId::Ankle);
    if (paths.marker) {
        const std::vector<MarkerRow> markers = parse_marker_file(*paths.marker);
        if (static_cast<int>(markers.size()) != n_segments)
            throw_validation("marker file " + *paths.marker + " has " +
                             std::to_string(markers.size()) + " rows, expected " +
                             std::to_string(n_segments));
        run.segments = segment_by_markers(run.knee, run.ankle, markers, default_distance_m);
    } else {
        run.segments = segment_equal_count(run.knee, run.ankle, n_segments,
                                           default_distance_m);
    }
    run.features = feature_series(run.segments, run.knee, run.ankle);
    return run;
}

// The unit-gain record used when no noise can or should be removed.
inline constexpr FilterParams kPassthroughFilter{1.0, 0.0, 0.0, 0.0, 1.0};

// Filter parameters for one selected feature. Three graceful degenerations:
// an exact-fit feature (zero residual variance) passes measurements through;
// a feature whose fitted transition coefficient has no stable stationary
// solution (the clamped-to-zero process variance case) also passes through,
// because the degenerate zero-gain filter would discard every measurement;
// a noise-dominated feature holds its first observation, which is harmless
// because its fitted line is flat.
inline FilterParams selected_filter_params(std::span<const double> training_series,
                                           double residual_variance, int feature,
                                           std::vector<std::string>& warnings) {
    const std::string& symbol = feature_symbols()[static_cast<std::size_t>(feature)];
    if (residual_variance == 0.0) {
        warnings.push_back("feature " + symbol +
                           ": zero residual variance; filter passes measurements through");
        return kPassthroughFilter;
    }
    bool clamped = false;
    try {
        FilterParams params = estimate_params(training_series, residual_variance, &clamped);
        if (clamped) {
            warnings.push_back("feature " + symbol +
                               ": no stable autoregressive fit; filter passes measurements "
                               "through");
            return kPassthroughFilter;
        }
        return params;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric) throw;
        warnings.push_back("feature " + symbol +
                           ": noise-dominated at its training residual variance; filter holds "
                           "the first observation");
        return FilterParams{1.0, residual_variance, 0.0, 0.0, 0.0};
    }
}

}  // namespace detail

// Training: ingest every run, compute per-segment features, normalize to the
// pooled unit variance, rank features by cross-run consistency of the first
// two runs, select the relevant head, fit per-feature lines to the per-k mean
// series, and estimate filter parameters for the selected features.
inline TrainResult train_pipeline(const std::vector<RunPaths>& runs, double mass_kg,
                                  double subinterval_distance_m, const TrainOptions& options) {
    if (runs.size() < 2)
        throw_validation("training-arity error: need at least two training runs");
    RunnerProfile profile{mass_kg, subinterval_distance_m, options.segments};
    profile.validate();

    TrainResult result;
    std::vector<detail::LoadedRun> loaded;
    loaded.reserve(runs.size());
    for (const RunPaths& paths : runs)
        loaded.push_back(detail::load_run(paths, options.segments, subinterval_distance_m));

    const std::size_t n_rows = static_cast<std::size_t>(options.segments);
    std::vector<double> speeds(n_rows, 0.0);
    for (const detail::LoadedRun& run : loaded) {
        const std::vector<double> run_speeds = segment_speeds(run.segments);
        for (std::size_t k = 0; k < n_rows; ++k) speeds[k] += run_speeds[k];
    }
    for (double& v : speeds) v /= static_cast<double>(loaded.size());

    std::vector<FeatureSeries> raw_series;
    raw_series.reserve(loaded.size());
    for (const detail::LoadedRun& run : loaded) raw_series.push_back(run.features);

    const std::vector<double> scales = fit_normalization(raw_series);
    std::vector<FeatureSeries> normalized;
    normalized.reserve(raw_series.size());
    for (const FeatureSeries& series : raw_series)
        normalized.push_back(apply_normalization(series, scales));

    TrendModel trend = fit_trend_model(normalized, scales);

    MetricSpec metric_spec;
    metric_spec.kind = options.metric;
    if (options.metric == DistanceMetric::MahalanobisDiag)
        for (const FeatureTrend& t : trend.features)
            metric_spec.diagonal_variances.push_back(t.residual_variance);

    const DiscrepancyResult disc = discrepancy(normalized[0], normalized[1], metric_spec);
    if (disc.identical_runs)
        result.warnings.push_back(
            "training runs are identical under the chosen metric; falling back to a uniform "
            "discrepancy distribution");
    const std::vector<double> d_bar = nearness(disc.d);

    RelevanceDistribution relevance = options.selection_mode == SelectionMode::Procedure
                                          ? select_features(d_bar)
                                          : select_features_argmax(d_bar);
    relevance.d = disc.d;

    // Per-k mean of the normalized runs; the same series the lines were fit to.
    std::vector<std::vector<double>> mean_columns(kFeatureCount,
                                                  std::vector<double>(n_rows, 0.0));
    for (const FeatureSeries& series : normalized)
        for (std::size_t k = 0; k < n_rows; ++k)
            for (std::size_t j = 0; j < kFeatureCount; ++j)
                mean_columns[j][k] += series.rows[k].values[j];
    for (auto& column : mean_columns)
        for (double& v : column) v /= static_cast<double>(normalized.size());

    TrainedModel model;
    model.profile = profile;
    model.trend = std::move(trend);
    model.relevance = std::move(relevance);
    model.segment_count = options.segments;
    model.speeds_mps = std::move(speeds);
    model.metric = options.metric;
    model.selection_mode = options.selection_mode;
    for (int feature : model.relevance.selected_features()) {
        const std::size_t j = static_cast<std::size_t>(feature);
        model.filter_params.push_back(detail::selected_filter_params(
            mean_columns[j], model.trend.features[j].residual_variance, feature,
            result.warnings));
    }
    model.validate();

    ModelFile file;
    file.model = std::move(model);
    file.provenance.created_utc = utc_timestamp(options.timestamp_epoch);
    file.provenance.seed = options.seed;
    for (const RunPaths& paths : runs) {
        file.provenance.inputs.push_back({paths.knee, sha256_file(paths.knee)});
        file.provenance.inputs.push_back({paths.ankle, sha256_file(paths.ankle)});
        if (paths.marker)
            file.provenance.inputs.push_back({*paths.marker, sha256_file(*paths.marker)});
    }
    result.model_file = std::move(file);
    result.raw_features = std::move(raw_series);
    return result;
}

struct ObservationSet {
    FeatureSeries raw;                             // unnormalized candidate features
    std::vector<std::vector<double>> filtered;     // steps x selected features
};

// On-line preparation: features per segment, training normalization, then the
// per-feature one-step filter over the selected components.
inline ObservationSet prepare_observations(const TrainedModel& model, const RunPaths& paths) {
    detail::LoadedRun run = detail::load_run(paths, model.segment_count,
                                             model.profile.subinterval_distance_m);
    ObservationSet out;
    out.raw = std::move(run.features);

    const std::vector<int> selected = model.relevance.selected_features();
    std::vector<std::vector<double>> filtered_columns(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const std::size_t j = static_cast<std::size_t>(selected[i]);
        std::vector<double> column = out.raw.column(selected[i]);
        for (double& v : column) v *= model.trend.features[j].scale;
        filtered_columns[i] = filter_series(column, model.filter_params[i]);
    }

    const std::size_t n_steps = out.raw.size();
    out.filtered.resize(n_steps, std::vector<double>(selected.size(), 0.0));
    for (std::size_t s = 0; s < n_steps; ++s)
        for (std::size_t i = 0; i < selected.size(); ++i)
            out.filtered[s][i] = filtered_columns[i][s];
    return out;
}

// Streaming estimates: step s uses the lag window that is already available,
// min(lag, s-1) observations back.
inline std::vector<int> classify_steps(const TrainedModel& model,
                                       const std::vector<std::vector<double>>& observations,
                                       int lag) {
    if (lag < 0 || lag >= model.segment_count)
        throw_validation("lag error: lag must lie in [0, " +
                         std::to_string(model.segment_count - 1) + "]");
    std::vector<int> estimates;
    estimates.reserve(observations.size());
    for (std::size_t s = 0; s < observations.size(); ++s) {
        const int effective_lag = std::min<int>(lag, static_cast<int>(s));
        const std::span<const std::vector<double>> window(
            observations.data() + (s - static_cast<std::size_t>(effective_lag)),
            static_cast<std::size_t>(effective_lag) + 1);
        estimates.push_back(classify_lagged(window, model, effective_lag));
    }
    return estimates;
}

inline constexpr int kLagSweepMax = 4;

struct ClassifyOptions {
    int lag = 4;
    bool truth = false;      // the run is labeled: step s has true subinterval s
    bool lag_sweep = false;  // also report RMS for lags 0..4
};

inline ClassificationResult classify_pipeline(const TrainedModel& model,
                                              const ObservationSet& observations,
                                              const ClassifyOptions& options) {
    if (options.lag < 0 || options.lag >= model.segment_count)
        throw_validation("lag error: lag must lie in [0, " +
                         std::to_string(model.segment_count - 1) + "]");
    if (options.lag_sweep && !options.truth)
        throw_validation("lag sweep requires ground truth labels");

    ClassificationResult result;
    const std::vector<int> estimates = classify_steps(model, observations.filtered, options.lag);
    result.steps.reserve(estimates.size());
    std::vector<int> truth_indices;
    for (std::size_t s = 0; s < estimates.size(); ++s) {
        StepResult step;
        step.step = static_cast<int>(s) + 1;
        step.k_hat = estimates[s];
        if (options.truth) {
            step.k_true = static_cast<int>(s) + 1;
            truth_indices.push_back(static_cast<int>(s) + 1);
        }
        step.distance_m = step.k_hat * model.profile.subinterval_distance_m;
        step.energy_j = kinetic_energy(model.profile, model.speeds_mps, step.k_hat);
        step.fatigue_pct = fatigue_index(model.profile, model.speeds_mps, step.k_hat);
        result.steps.push_back(step);
    }
    if (options.truth)
        result.rms_error_pct = rms_index_error(estimates, truth_indices, model.segment_count);
    if (options.lag_sweep) {
        const int max_lag = std::min(kLagSweepMax, model.segment_count - 1);
        for (int lag = 0; lag <= max_lag; ++lag) {
            const std::vector<int> sweep = classify_steps(model, observations.filtered, lag);
            result.rms_by_lag.push_back(
                rms_index_error(sweep, truth_indices, model.segment_count));
        }
    }
    return result;
}

// Result rows, then the summary blocks when ground truth was available.
inline void write_classification_csv(std::ostream& out, const ClassificationResult& result,
                                     bool truth) {
    out << "step," << (truth ? "k_true," : "") << "k_hat,distance_m,energy_J,fatigue_pct\n";
    for (const StepResult& step : result.steps) {
        out << step.step << ',';
        if (truth) out << *step.k_true << ',';
        out << step.k_hat << ',' << format_double(step.distance_m) << ','
            << format_double(step.energy_j) << ',' << format_double(step.fatigue_pct) << '\n';
    }
    if (result.rms_error_pct) {
        out << "\n# rms_percent\n" << format_double(*result.rms_error_pct) << '\n';
    }
    if (!result.rms_by_lag.empty()) {
        out << "\n# rms_percent_by_lag\n";
        for (std::size_t lag = 0; lag < result.rms_by_lag.size(); ++lag)
            out << (lag ? "," : "") << "lag" << lag;
        out << '\n';
        for (std::size_t lag = 0; lag < result.rms_by_lag.size(); ++lag)
            out << (lag ? "," : "") << format_double(result.rms_by_lag[lag]);
        out << '\n';
    }
}

struct EvaluateResult {
    std::vector<std::vector<double>> rms_by_run;  // run x lag (0..4)
    std::vector<double> rms_mean;                 // per lag, averaged over runs
};

// Labeled evaluation across runs: RMS per lag 0..4 for each run plus the mean.
inline EvaluateResult evaluate_pipeline(const TrainedModel& model,
                                        const std::vector<RunPaths>& runs) {
    if (runs.empty()) throw_validation("evaluate: need at least one labeled run");
    EvaluateResult result;
    const int max_lag = std::min(kLagSweepMax, model.segment_count - 1);
    result.rms_mean.assign(static_cast<std::size_t>(max_lag) + 1, 0.0);
    for (const RunPaths& paths : runs) {
        const ObservationSet observations = prepare_observations(model, paths);
        std::vector<int> truth_indices(observations.filtered.size());
        for (std::size_t s = 0; s < truth_indices.size(); ++s)
            truth_indices[s] = static_cast<int>(s) + 1;
        std::vector<double> per_lag;
        for (int lag = 0; lag <= max_lag; ++lag) {
            const std::vector<int> estimates =
                classify_steps(model, observations.filtered, lag);
            per_lag.push_back(rms_index_error(estimates, truth_indices, model.segment_count));
        }
        for (std::size_t lag = 0; lag < per_lag.size(); ++lag)
            result.rms_mean[lag] += per_lag[lag];
        result.rms_by_run.push_back(std::move(per_lag));
    }
    for (double& v : result.rms_mean) v /= static_cast<double>(runs.size());
    return result;
}

inline void write_evaluate_report(std::ostream& out, const EvaluateResult& result,
                                  const TrainedModel& model) {
    out << "run";
    for (std::size_t lag = 0; lag < result.rms_mean.size(); ++lag) out << ",lag" << lag;
    out << '\n';
    for (std::size_t run = 0; run < result.rms_by_run.size(); ++run) {
        out << (run + 1);
        for (double v : result.rms_by_run[run]) out << ',' << format_double(v);
        out << '\n';
    }
    out << "mean";
    for (double v : result.rms_mean) out << ',' << format_double(v);
    out << '\n';
    out << '\n';
    write_selection_report(out, model.relevance, model.metric,
                           selection_mode_name(model.selection_mode));
}

// Writes run<i>_knee.csv / run<i>_ankle.csv for every simulated run; run i
// draws from seed + i - 1. A spec with an explicit speeds profile also gets a
// markers.csv whose per-segment distances realize that profile under the
// equal-time boundaries.
inline std::vector<std::string> simulate_pipeline(const SynthSpec& spec,
                                                  const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    for (int run = 1; run <= spec.runs; ++run) {
        const auto [knee, ankle] =
            generate_raw_run(spec, spec.seed + static_cast<std::uint64_t>(run - 1));
        for (const SampleStream* stream : {&knee, &ankle}) {
            const std::string path = out_dir + "/run" + std::to_string(run) + "_" +
                                     sensor_name(stream->sensor_id) + ".csv";
            std::ofstream out(path, std::ios::binary);
            if (!out) throw_io("cannot write " + path);
            write_stream_csv(out, *stream);
            written.push_back(path);
        }
    }
    if (!spec.speeds.empty()) {
        const std::string path = out_dir + "/markers.csv";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw_io("cannot write " + path);
        const double span = spec.duration_s / spec.segments;
        out << "k,t_start,t_end,distance_m\n";
        for (int k = 1; k <= spec.segments; ++k) {
            out << k << ',' << format_double((k - 1) * span) << ',' << format_double(k * span)
                << ',' << format_double(spec.speeds[static_cast<std::size_t>(k - 1)] * span)
                << '\n';
        }
        written.push_back(path);
    }
    return written;
}

}  // namespace fatmon
