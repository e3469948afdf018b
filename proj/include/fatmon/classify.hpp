#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fatmon/errors.hpp"
#include "fatmon/filter.hpp"
#include "fatmon/ingest.hpp"
#include "fatmon/select.hpp"
#include "fatmon/trend.hpp"

namespace fatmon {

enum class SelectionMode { Procedure, ArgmaxEntropyRate };

inline const char* selection_mode_name(SelectionMode m) {
    return m == SelectionMode::Procedure ? "procedure1" : "argmax";
}

inline SelectionMode parse_selection_mode(const std::string& name) {
    if (name == "procedure1") return SelectionMode::Procedure;
    if (name == "argmax") return SelectionMode::ArgmaxEntropyRate;
    throw_validation("unknown selection mode: " + name);
}

// Persisted training artifact: everything the on-line classifier needs.
struct TrainedModel {
    RunnerProfile profile;
    TrendModel trend;                          // all candidate features
    RelevanceDistribution relevance;
    std::vector<FilterParams> filter_params;   // one per selected feature, in rank order
    int segment_count = 0;                     // N
    std::vector<double> speeds_mps;            // per-subinterval training speeds
    DistanceMetric metric = DistanceMetric::Euclidean;
    SelectionMode selection_mode = SelectionMode::Procedure;

    std::vector<int> selected_features() const { return relevance.selected_features(); }

    // Fitted reference row at subinterval k, restricted to the selected features.
    std::vector<double> fitted_row(int k) const {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(relevance.selected_count));
        for (int feature : relevance.selected_features())
            out.push_back(predict_feature(trend.features[static_cast<std::size_t>(feature)], k));
        return out;
    }

    // Diagonal variances restricted to the selected features (mahalanobis-diag).
    std::vector<double> selected_residual_variances() const {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(relevance.selected_count));
        for (int feature : relevance.selected_features())
            out.push_back(trend.features[static_cast<std::size_t>(feature)].residual_variance);
        return out;
    }

    void validate() const {
        profile.validate();
        if (segment_count < 2) throw_validation("model: segment count must be at least 2");
        if (static_cast<int>(speeds_mps.size()) != segment_count)
            throw_validation("model: speeds must have one entry per subinterval");
        for (double v : speeds_mps)
            if (!(v > 0.0)) throw_validation("model: speeds must be positive");
        const int n = static_cast<int>(relevance.d_bar.size());
        if (n < 2 || n > kFeatureCount) throw_validation("model: bad candidate feature count");
        if (relevance.selected_count < 2 || relevance.selected_count > n)
            throw_validation("model: selected feature count out of range");
        if (static_cast<int>(relevance.perm.size()) != n)
            throw_validation("model: permutation size mismatch");
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        for (int idx : relevance.perm) {
            if (idx < 0 || idx >= n || seen[static_cast<std::size_t>(idx)])
                throw_validation("model: permutation is not a bijection");
            seen[static_cast<std::size_t>(idx)] = true;
        }
        if (filter_params.size() != static_cast<std::size_t>(relevance.selected_count))
            throw_validation("model: one filter parameter set per selected feature required");
        for (const FilterParams& params : filter_params) validate_filter_params(params);
        if (static_cast<int>(trend.features.size()) != kFeatureCount)
            throw_validation("model: trend must cover every candidate feature");
        if (trend.segment_count != segment_count)
            throw_validation("model: trend abscissa range disagrees with segment count");
    }
};

namespace detail {

// Squared weighted distance between an observation and a fitted row. Weights
// are the selection probabilities; mahalanobis-diag additionally divides each
// squared difference by the feature's training residual variance.
inline double weighted_squared_distance(std::span<const double> observation,
                                        std::span<const double> reference,
                                        std::span<const double> weights,
                                        const std::vector<double>* diag_variances) {
    double total = 0.0;
    for (std::size_t i = 0; i < observation.size(); ++i) {
        const double diff = weights[i] * (observation[i] - reference[i]);
        double term = diff * diff;
        if (diag_variances) {
            const double v = (*diag_variances)[i];
            if (!(v > 0.0))
                throw_numeric("mahalanobis-diag: nonpositive residual variance for a selected "
                              "feature");
            term /= v;
        }
        total += term;
    }
    return total;
}

}  // namespace detail

// Nearest fitted row under the weighted distance; smallest index wins ties.
inline int classify_single(std::span<const double> observation, const TrainedModel& model) {
    const std::size_t n_selected = static_cast<std::size_t>(model.relevance.selected_count);
    if (observation.size() != n_selected)
        throw_validation("classify_single: shape error, expected " +
                         std::to_string(n_selected) + " selected features, got " +
                         std::to_string(observation.size()));
    const std::vector<double> variances = model.selected_residual_variances();
    const std::vector<double>* diag =
        model.metric == DistanceMetric::MahalanobisDiag ? &variances : nullptr;

    int best_k = 1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= model.segment_count; ++k) {
        const std::vector<double> reference = model.fitted_row(k);
        const double dist = detail::weighted_squared_distance(observation, reference,
                                                              model.relevance.p_selected, diag);
        if (dist < best) {
            best = dist;
            best_k = k;
        }
    }
    return best_k;
}

// Windowed variant: the distance pools lag+1 consecutive observations against
// the corresponding stretch of fitted rows, and only indices with a full
// history (k > lag) are candidates.
inline int classify_lagged(std::span<const std::vector<double>> window, const TrainedModel& model,
                           int lag) {
    if (lag < 0) throw_validation("classify_lagged: lag must be nonnegative");
    if (lag >= model.segment_count)
        throw_validation("lag error: lag " + std::to_string(lag) +
                         " must be below the segment count " +
                         std::to_string(model.segment_count));
    if (window.size() != static_cast<std::size_t>(lag) + 1)
        throw_validation("classify_lagged: window must hold lag+1 observations");
    const std::size_t n_selected = static_cast<std::size_t>(model.relevance.selected_count);
    for (const std::vector<double>& observation : window)
        if (observation.size() != n_selected)
            throw_validation("classify_lagged: shape error in window");
    const std::vector<double> variances = model.selected_residual_variances();
    const std::vector<double>* diag =
        model.metric == DistanceMetric::MahalanobisDiag ? &variances : nullptr;

    int best_k = lag + 1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = lag + 1; k <= model.segment_count; ++k) {
        double dist = 0.0;
        for (int offset = 0; offset <= lag; ++offset) {
            const std::vector<double> reference = model.fitted_row(k - lag + offset);
            dist += detail::weighted_squared_distance(window[static_cast<std::size_t>(offset)],
                                                      reference, model.relevance.p_selected,
                                                      diag);
        }
        if (dist < best) {
            best = dist;
            best_k = k;
        }
    }
    return best_k;
}

// Root-mean-square index error as a percentage of the segment count.
// Reporting convention: perfect estimation gives 0 and the scale is
// comparable across different N.
inline double rms_index_error(std::span<const int> estimated, std::span<const int> truth,
                              int n_segments) {
    if (estimated.empty()) throw_validation("rms_index_error: arity error, empty series");
    if (estimated.size() != truth.size())
        throw_validation("rms_index_error: series lengths differ");
    if (n_segments < 1) throw_validation("rms_index_error: segment count must be positive");
    double sum = 0.0;
    for (std::size_t i = 0; i < estimated.size(); ++i) {
        const double diff = static_cast<double>(estimated[i] - truth[i]);
        sum += diff * diff;
    }
    return 100.0 * std::sqrt(sum / static_cast<double>(estimated.size())) /
           static_cast<double>(n_segments);
}

// Accumulated kinetic energy after subinterval k.
inline double kinetic_energy(const RunnerProfile& profile, std::span<const double> speeds,
                             int k) {
    if (k < 1 || k > static_cast<int>(speeds.size()))
        throw_validation("kinetic_energy: subinterval " + std::to_string(k) + " out of range");
    double total = 0.0;
    for (int i = 0; i < k; ++i)
        total += 0.5 * profile.mass_kg * speeds[static_cast<std::size_t>(i)] *
                 speeds[static_cast<std::size_t>(i)];
    return total;
}

// Fraction of the run's total kinetic energy spent by subinterval k, in
// percent. Mass cancels between numerator and denominator, so the ratio is
// computed from the speed squares alone and the result is mass-invariant to
// the last bit.
inline double fatigue_index(const RunnerProfile& profile, std::span<const double> speeds,
                            int k) {
    if (!(profile.mass_kg > 0.0)) throw_validation("fatigue_index: mass must be positive");
    if (k < 1 || k > static_cast<int>(speeds.size()))
        throw_validation("fatigue_index: subinterval " + std::to_string(k) + " out of range");
    double partial = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < speeds.size(); ++i) {
        const double term = speeds[i] * speeds[i];
        total += term;
        if (static_cast<int>(i) < k) partial += term;
    }
    if (!(total > 0.0)) throw_numeric("fatigue_index: degenerate zero total energy");
    // The ratio is taken first: equal prefix and total sums give exactly 1.
    return 100.0 * (partial / total);
}

struct StepResult {
    int step = 0;                 // observation index, 1-based
    std::optional<int> k_true;
    int k_hat = 0;
    double distance_m = 0.0;
    double energy_j = 0.0;
    double fatigue_pct = 0.0;
};

struct ClassificationResult {
    std::vector<StepResult> steps;
    std::optional<double> rms_error_pct;              // when ground truth is known
    std::vector<double> rms_by_lag;                   // optional lag sweep summary
};

}  // namespace fatmon
