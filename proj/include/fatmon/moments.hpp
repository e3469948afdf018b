#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fatmon/csv.hpp"
#include "fatmon/errors.hpp"
#include "fatmon/ingest.hpp"

namespace fatmon {

inline constexpr int kFeatureCount = 18;

struct Moments {
    double variance = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
};

// Population central moments (divide by n). Two passes: mean first, then the
// second/third/fourth powers of deviations accumulated together. Single-pass
// update formulas lose too many digits at fourth order.
inline Moments sample_moments(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < kMinFramesPerSegment)
        throw_validation("sample_moments: need at least " +
                         std::to_string(kMinFramesPerSegment) + " samples, got " +
                         std::to_string(n));
    double sum = 0.0;
    for (double v : samples) {
        if (!std::isfinite(v)) throw_validation("sample_moments: non-finite sample");
        sum += v;
    }
    const double mean = sum / static_cast<double>(n);

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : samples) {
        const double d = v - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const double count = static_cast<double>(n);
    Moments out;
    out.variance = m2 / count;
    if (out.variance == 0.0)
        throw_numeric("degenerate-signal error: constant input has zero variance");
    const double sd = std::sqrt(out.variance);
    out.skewness = m3 / (count * sd * sd * sd);
    out.kurtosis = m4 / (count * out.variance * out.variance);
    return out;
}

// Candidate feature layout, fixed across the whole toolkit:
// per sensor (knee then ankle): variances of axes 1-3, skewnesses 1-3, kurtoses 1-3.
enum class MomentKind { Variance = 0, Skewness = 1, Kurtosis = 2 };

inline int feature_index(SensorId sensor, MomentKind kind, int axis) {
    const int sensor_block = sensor == SensorId::Knee ? 0 : 9;
    return sensor_block + static_cast<int>(kind) * 3 + axis;
}

inline const std::array<std::string, kFeatureCount>& feature_symbols() {
    static const std::array<std::string, kFeatureCount> symbols = [] {
        std::array<std::string, kFeatureCount> out;
        const char* moments[] = {"var", "skew", "kurt"};
        int idx = 0;
        for (int sensor = 1; sensor <= 2; ++sensor)
            for (const char* moment : moments)
                for (int axis = 1; axis <= 3; ++axis)
                    out[idx++] = std::string(moment) + "_s" + std::to_string(sensor) + "_a" +
                                 std::to_string(axis);
        return out;
    }();
    return symbols;
}

struct FeatureVector {
    std::array<double, kFeatureCount> values{};
    int subinterval = 0;  // k, 1-based
};

struct FeatureSeries {
    std::vector<FeatureVector> rows;

    std::size_t size() const { return rows.size(); }

    std::vector<double> column(int feature) const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const FeatureVector& row : rows)
            out.push_back(row.values[static_cast<std::size_t>(feature)]);
        return out;
    }
};

using AxisSamples = std::array<std::vector<double>, 3>;

inline FeatureVector feature_vector(const AxisSamples& knee_axes, const AxisSamples& ankle_axes,
                                    int subinterval) {
    FeatureVector out;
    out.subinterval = subinterval;
    for (int sensor = 0; sensor < 2; ++sensor) {
        const AxisSamples& axes = sensor == 0 ? knee_axes : ankle_axes;
        const SensorId id = sensor == 0 ? SensorId::Knee : SensorId::Ankle;
        for (int axis = 0; axis < 3; ++axis) {
            Moments m;
            try {
                m = sample_moments(axes[static_cast<std::size_t>(axis)]);
            } catch (const Error& e) {
                throw Error(e.kind(), std::string(e.what()) + " (sensor " +
                                          std::to_string(static_cast<int>(id)) + " " +
                                          sensor_name(id) + ", axis " +
                                          std::to_string(axis + 1) + ")");
            }
            out.values[static_cast<std::size_t>(feature_index(id, MomentKind::Variance, axis))] =
                m.variance;
            out.values[static_cast<std::size_t>(feature_index(id, MomentKind::Skewness, axis))] =
                m.skewness;
            out.values[static_cast<std::size_t>(feature_index(id, MomentKind::Kurtosis, axis))] =
                m.kurtosis;
        }
    }
    return out;
}

inline FeatureSeries feature_series(const std::vector<Segment>& segments,
                                    const SampleStream& knee, const SampleStream& ankle) {
    FeatureSeries series;
    series.rows.reserve(segments.size());
    for (const Segment& seg : segments) {
        AxisSamples knee_axes, ankle_axes;
        for (int axis = 0; axis < 3; ++axis) {
            knee_axes[static_cast<std::size_t>(axis)] = axis_samples(knee, seg.knee, axis);
            ankle_axes[static_cast<std::size_t>(axis)] = axis_samples(ankle, seg.ankle, axis);
        }
        try {
            series.rows.push_back(feature_vector(knee_axes, ankle_axes, seg.index));
        } catch (const Error& e) {
            throw Error(e.kind(),
                        std::string(e.what()) + " in subinterval " + std::to_string(seg.index));
        }
    }
    return series;
}

// Feature dump: `k,var_s1_a1,...,kurt_s2_a3`.
inline void write_feature_csv(std::ostream& out, const FeatureSeries& series) {
    out << 'k';
    for (const std::string& symbol : feature_symbols()) out << ',' << symbol;
    out << '\n';
    for (const FeatureVector& row : series.rows) {
        out << row.subinterval;
        for (double v : row.values) out << ',' << format_double(v);
        out << '\n';
    }
}

}  // namespace fatmon
