#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fatmon/errors.hpp"
#include "fatmon/moments.hpp"

namespace fatmon {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_variance = 0.0;  // population variance of the fit residuals
};

struct FeatureTrend {
    double scale = 1.0;  // reciprocal training standard deviation
    double slope = 0.0;
    double intercept = 0.0;
    double residual_variance = 0.0;
};

struct TrendModel {
    int segment_count = 0;  // abscissa range k in [1, segment_count]
    std::vector<FeatureTrend> features;  // one entry per candidate feature
};

// Reciprocal standard deviation per feature column, pooled over every provided
// training run, so each scaled column has unit variance over the training set.
inline std::vector<double> fit_normalization(std::span<const FeatureSeries> runs) {
    if (runs.empty()) throw_validation("fit_normalization: no training series");
    const std::size_t n_features = kFeatureCount;
    std::size_t total_rows = 0;
    for (const FeatureSeries& run : runs) total_rows += run.size();
    if (total_rows < 2) throw_validation("fit_normalization: need at least 2 rows");

    std::vector<double> scales(n_features, 1.0);
    for (std::size_t j = 0; j < n_features; ++j) {
        double sum = 0.0;
        for (const FeatureSeries& run : runs)
            for (const FeatureVector& row : run.rows) sum += row.values[j];
        const double mean = sum / static_cast<double>(total_rows);
        double ss = 0.0;
        for (const FeatureSeries& run : runs)
            for (const FeatureVector& row : run.rows) {
                const double d = row.values[j] - mean;
                ss += d * d;
            }
        const double variance = ss / static_cast<double>(total_rows);
        if (variance == 0.0)
            throw_numeric("degenerate-feature error: " + feature_symbols()[j] +
                          " has zero variance over the training set");
        scales[j] = 1.0 / std::sqrt(variance);
    }
    return scales;
}

inline FeatureSeries apply_normalization(const FeatureSeries& series,
                                         std::span<const double> scales) {
    if (scales.size() != kFeatureCount)
        throw_validation("apply_normalization: expected one scale per feature");
    FeatureSeries out = series;
    for (FeatureVector& row : out.rows)
        for (std::size_t j = 0; j < kFeatureCount; ++j) row.values[j] *= scales[j];
    return out;
}

// Ordinary least squares over abscissa k = 1..N.
inline LineFit fit_line(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw_validation("fit_line: need at least 2 values");
    const double count = static_cast<double>(n);
    const double mean_k = 0.5 * (count + 1.0);
    double mean_y = 0.0;
    for (double v : values) mean_y += v;
    mean_y /= count;

    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dk = static_cast<double>(i + 1) - mean_k;
        sxx += dk * dk;
        sxy += dk * (values[i] - mean_y);
    }
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_k;

    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = values[i] - (fit.slope * static_cast<double>(i + 1) + fit.intercept);
        ss += r * r;
    }
    fit.residual_variance = ss / count;
    return fit;
}

inline double predict_feature(const FeatureTrend& trend, int k) {
    return trend.slope * static_cast<double>(k) + trend.intercept;
}

// Fitted feature values at subinterval k, for every feature.
inline std::vector<double> predict_line(const TrendModel& model, int k) {
    if (k < 1 || k > model.segment_count)
        throw_validation("predict_line: subinterval " + std::to_string(k) +
                         " outside [1, " + std::to_string(model.segment_count) + "]");
    std::vector<double> out;
    out.reserve(model.features.size());
    for (const FeatureTrend& trend : model.features) out.push_back(predict_feature(trend, k));
    return out;
}

// Lines are fitted to the per-k mean of the normalized training runs; the
// residual variance pools every run's deviations about that common line.
inline TrendModel fit_trend_model(std::span<const FeatureSeries> normalized_runs,
                                  std::span<const double> scales) {
    if (normalized_runs.empty()) throw_validation("fit_trend_model: no training series");
    const std::size_t n_rows = normalized_runs.front().size();
    for (const FeatureSeries& run : normalized_runs)
        if (run.size() != n_rows)
            throw_validation("fit_trend_model: training runs have different segment counts");
    if (n_rows < 2) throw_validation("fit_trend_model: need at least 2 subintervals");

    TrendModel model;
    model.segment_count = static_cast<int>(n_rows);
    model.features.resize(kFeatureCount);
    const double run_count = static_cast<double>(normalized_runs.size());

    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        std::vector<double> mean_column(n_rows, 0.0);
        for (const FeatureSeries& run : normalized_runs)
            for (std::size_t k = 0; k < n_rows; ++k) mean_column[k] += run.rows[k].values[j];
        for (double& v : mean_column) v /= run_count;

        const LineFit fit = fit_line(mean_column);
        FeatureTrend& trend = model.features[j];
        trend.scale = scales[j];
        trend.slope = fit.slope;
        trend.intercept = fit.intercept;

        double ss = 0.0;
        for (const FeatureSeries& run : normalized_runs)
            for (std::size_t k = 0; k < n_rows; ++k) {
                const double fitted =
                    fit.slope * static_cast<double>(k + 1) + fit.intercept;
                const double r = run.rows[k].values[j] - fitted;
                ss += r * r;
            }
        trend.residual_variance = ss / (run_count * static_cast<double>(n_rows));
    }
    return model;
}

}  // namespace fatmon
