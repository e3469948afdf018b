#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fatmon/csv.hpp"
#include "fatmon/errors.hpp"
#include "fatmon/moments.hpp"

namespace fatmon {

enum class DistanceMetric { Euclidean, MahalanobisDiag };

inline const char* metric_name(DistanceMetric m) {
    return m == DistanceMetric::Euclidean ? "euclidean" : "mahalanobis-diag";
}

inline DistanceMetric parse_metric(const std::string& name) {
    if (name == "euclidean") return DistanceMetric::Euclidean;
    if (name == "mahalanobis-diag") return DistanceMetric::MahalanobisDiag;
    throw_validation("unknown distance metric: " + name);
}

// Per-feature diagonal variances back the mahalanobis-diag variant; the
// euclidean default ignores them.
struct MetricSpec {
    DistanceMetric kind = DistanceMetric::Euclidean;
    std::vector<double> diagonal_variances;

    double feature_weight(std::size_t feature) const {
        if (kind == DistanceMetric::Euclidean) return 1.0;
        if (feature >= diagonal_variances.size())
            throw_validation("metric: missing diagonal variance for feature " +
                             std::to_string(feature + 1));
        const double v = diagonal_variances[feature];
        if (!(v > 0.0))
            throw_numeric("metric: nonpositive diagonal variance for feature " +
                          std::to_string(feature + 1));
        return 1.0 / v;
    }
};

struct DiscrepancyResult {
    std::vector<double> d;
    bool identical_runs = false;  // all distances were zero; d fell back to uniform
};

// Normalized per-feature distance between two runs' feature trajectories.
// Each feature's trajectory across all subintervals is compared as one vector.
inline DiscrepancyResult discrepancy(const FeatureSeries& u, const FeatureSeries& v,
                                     const MetricSpec& metric = {}) {
    if (u.size() != v.size() || u.size() == 0)
        throw_validation("discrepancy: series must have the same nonzero shape");
    const std::size_t n_features = kFeatureCount;
    std::vector<double> distances(n_features, 0.0);
    for (std::size_t j = 0; j < n_features; ++j) {
        double ss = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double diff = u.rows[k].values[j] - v.rows[k].values[j];
            ss += diff * diff;
        }
        distances[j] = std::sqrt(ss * metric.feature_weight(j));
    }
    const double total = std::accumulate(distances.begin(), distances.end(), 0.0);
    DiscrepancyResult result;
    if (total == 0.0) {
        result.identical_runs = true;
        result.d.assign(n_features, 1.0 / static_cast<double>(n_features));
        return result;
    }
    result.d = std::move(distances);
    for (double& value : result.d) value /= total;
    return result;
}

// Complement-normalized probabilities: high values mark features that stay
// consistent between the two runs.
inline std::vector<double> nearness(std::span<const double> d) {
    if (d.size() < 2) throw_validation("nearness: arity error, need at least 2 features");
    double denom = 0.0;
    for (double value : d) {
        if (value < 0.0 || value > 1.0)
            throw_validation("nearness: discrepancies must lie in [0, 1]");
        denom += 1.0 - value;
    }
    if (!(denom > 0.0)) throw_validation("nearness: zero denominator");
    std::vector<double> out;
    out.reserve(d.size());
    for (double value : d) out.push_back((1.0 - value) / denom);
    return out;
}

struct SortedProbabilities {
    std::vector<double> p;      // non-increasing
    std::vector<int> perm;      // sorted position -> original feature index (0-based)
};

// Stable descending sort; ties keep ascending original index.
inline SortedProbabilities sort_probabilities(std::span<const double> d_bar) {
    SortedProbabilities out;
    out.perm.resize(d_bar.size());
    std::iota(out.perm.begin(), out.perm.end(), 0);
    std::stable_sort(out.perm.begin(), out.perm.end(), [&](int lhs, int rhs) {
        return d_bar[static_cast<std::size_t>(lhs)] > d_bar[static_cast<std::size_t>(rhs)];
    });
    out.p.reserve(d_bar.size());
    for (int idx : out.perm) out.p.push_back(d_bar[static_cast<std::size_t>(idx)]);
    return out;
}

// Average per-feature Shannon entropy of the first `length` probabilities,
// natural logarithm. An empty prefix carries zero entropy.
inline double entropy_rate(std::span<const double> p, int length) {
    if (length < 0 || static_cast<std::size_t>(length) > p.size())
        throw_validation("entropy_rate: prefix length out of range");
    if (length == 0) return 0.0;
    double sum = 0.0;
    for (int i = 0; i < length; ++i) {
        const double value = p[static_cast<std::size_t>(i)];
        if (!(value > 0.0))
            throw_numeric("entropy_rate: probabilities must be positive");
        sum += value * std::log(value);
    }
    return -sum / static_cast<double>(length);
}

struct SelectionStep {
    int length = 0;            // L under test
    double entropy = 0.0;      // entropy rate of the current renormalized head
    double head_mean = 0.0;    // mean weighted log-probability of the first L-1 entries
    double tail_term = 0.0;    // weighted log-probability of entry L
    bool stopped = false;
};

struct RelevanceDistribution {
    std::vector<double> d;           // filled by the caller that computed it
    std::vector<double> d_bar;
    std::vector<int> perm;           // sorted position -> original feature (0-based)
    std::vector<double> p;           // d_bar sorted non-increasing
    int selected_count = 0;          // L
    std::vector<double> p_selected;  // renormalized head of length selected_count
    std::vector<SelectionStep> trace;

    std::vector<int> selected_features() const {
        return std::vector<int>(perm.begin(), perm.begin() + selected_count);
    }
};

namespace detail {

inline double plogp(double value) { return value == 0.0 ? 0.0 : value * std::log(value); }

// Head of the sorted nearness vector, renormalized to length `length`.
inline std::vector<double> renormalized_head(std::span<const double> sorted, int length) {
    double total = 0.0;
    for (int i = 0; i < length; ++i) total += sorted[static_cast<std::size_t>(i)];
    if (!(total > 0.0)) throw_numeric("feature selection: zero probability mass in head");
    std::vector<double> head(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i)
        head[static_cast<std::size_t>(i)] = sorted[static_cast<std::size_t>(i)] / total;
    return head;
}

}  // namespace detail

// Iterative trimming of the sorted nearness distribution. Starting from the
// full length, the last retained component is dropped and the head
// renormalized while the mean weighted log-probability of the head stays at or
// above the tail component's contribution; a strict drop below it, or reaching
// length two, stops the iterations. An exactly uniform head counts as a tie
// and keeps trimming.
inline RelevanceDistribution select_features(std::span<const double> d_bar) {
    const int n = static_cast<int>(d_bar.size());
    if (n < 2) throw_validation("select_features: need at least 2 features");

    RelevanceDistribution result;
    result.d_bar.assign(d_bar.begin(), d_bar.end());
    SortedProbabilities sorted = sort_probabilities(d_bar);
    result.perm = std::move(sorted.perm);
    result.p = std::move(sorted.p);

    int length = n;
    std::vector<double> head = detail::renormalized_head(result.p, length);
    while (true) {
        SelectionStep step;
        step.length = length;
        double head_sum = 0.0;
        for (int i = 0; i + 1 < length; ++i)
            head_sum += detail::plogp(head[static_cast<std::size_t>(i)]);
        const double tail = detail::plogp(head[static_cast<std::size_t>(length - 1)]);
        step.head_mean = head_sum / static_cast<double>(length - 1);
        step.tail_term = tail;
        step.entropy = -(head_sum + tail) / static_cast<double>(length);

        const bool uniform_head = head.front() == head.back();
        step.stopped = length == 2 || (!uniform_head && step.head_mean < tail);
        result.trace.push_back(step);
        if (step.stopped) break;
        --length;
        head = detail::renormalized_head(result.p, length);
    }
    result.selected_count = length;
    result.p_selected = std::move(head);
    return result;
}

// Diagnostic companion to select_features: evaluates the entropy rate of every
// renormalized head length and returns the maximizer (smallest on ties).
inline int argmax_entropy_rate(std::span<const double> d_bar) {
    const int n = static_cast<int>(d_bar.size());
    if (n < 2) throw_validation("argmax_entropy_rate: need at least 2 features");
    SortedProbabilities sorted = sort_probabilities(d_bar);
    int best_length = 2;
    double best_entropy = -1.0;
    for (int length = 2; length <= n; ++length) {
        const std::vector<double> head = detail::renormalized_head(sorted.p, length);
        double sum = 0.0;
        for (double value : head) sum += detail::plogp(value);
        const double entropy = -sum / static_cast<double>(length);
        if (entropy > best_entropy) {
            best_entropy = entropy;
            best_length = length;
        }
    }
    return best_length;
}

// Builds the full relevance record in the argmax diagnostic mode: same sorted
// distribution, but the head length maximizes the entropy rate instead of
// following the iterative trimming rule.
inline RelevanceDistribution select_features_argmax(std::span<const double> d_bar) {
    const int n = static_cast<int>(d_bar.size());
    if (n < 2) throw_validation("select_features: need at least 2 features");

    RelevanceDistribution result;
    result.d_bar.assign(d_bar.begin(), d_bar.end());
    SortedProbabilities sorted = sort_probabilities(d_bar);
    result.perm = std::move(sorted.perm);
    result.p = std::move(sorted.p);

    int best_length = 2;
    double best_entropy = -1.0;
    for (int length = 2; length <= n; ++length) {
        const std::vector<double> head = detail::renormalized_head(result.p, length);
        double sum = 0.0;
        for (double value : head) sum += detail::plogp(value);
        const double entropy = -sum / static_cast<double>(length);
        SelectionStep step;
        step.length = length;
        step.entropy = entropy;
        result.trace.push_back(step);
        if (entropy > best_entropy) {
            best_entropy = entropy;
            best_length = length;
        }
    }
    result.selected_count = best_length;
    result.p_selected = detail::renormalized_head(result.p, best_length);
    for (SelectionStep& step : result.trace) step.stopped = step.length == best_length;
    return result;
}

// Selection report: one row per feature, then the iteration trace.
inline void write_selection_report(std::ostream& out, const RelevanceDistribution& relevance,
                                   DistanceMetric metric, const std::string& mode) {
    const std::size_t n = relevance.d_bar.size();
    std::vector<int> rank(n, 0);
    for (std::size_t pos = 0; pos < relevance.perm.size(); ++pos)
        rank[static_cast<std::size_t>(relevance.perm[pos])] = static_cast<int>(pos) + 1;

    out << "feature,symbol,d,d_bar,rank,selected\n";
    for (std::size_t j = 0; j < n; ++j) {
        const bool selected = rank[j] <= relevance.selected_count;
        out << (j + 1) << ',' << feature_symbols()[j] << ','
            << (j < relevance.d.size() ? format_double(relevance.d[j]) : std::string())
            << ',' << format_double(relevance.d_bar[j]) << ',' << rank[j] << ','
            << (selected ? 1 : 0) << '\n';
    }
    out << "\n# selection\n";
    out << "mode," << mode << '\n';
    out << "metric," << metric_name(metric) << '\n';
    out << "selected_count," << relevance.selected_count << '\n';
    out << "\n# trace\n";
    out << "L,entropy_rate,head_mean,tail_term,stopped\n";
    for (const SelectionStep& step : relevance.trace) {
        out << step.length << ',' << format_double(step.entropy) << ','
            << format_double(step.head_mean) << ',' << format_double(step.tail_term) << ','
            << (step.stopped ? 1 : 0) << '\n';
    }
}

}  // namespace fatmon
