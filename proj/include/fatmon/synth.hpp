#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fatmon/csv.hpp"
#include "fatmon/errors.hpp"
#include "fatmon/ingest.hpp"
#include "fatmon/moments.hpp"

namespace fatmon {

// Affine-plus-noise recipe for one candidate feature, in normalized-ish units
// for the direct feature generator and in raw units (g^2 for variances) for
// the raw-run generator.
struct FeatureShape {
    double slope = 0.0;
    double intercept = 0.0;
    double noise_std = 0.05;
};

struct SynthSpec {
    int segments = 44;
    int runs = 3;
    std::uint64_t seed = 1;
    double mass_kg = 75.0;
    double subinterval_distance_m = 113.6;
    double duration_s = 1500.0;
    double rate_hz = 100.0;
    double stride_hz = 2.7;
    double accel_noise_std_g = 0.05;
    double impact_amplitude = 0.4;
    double speed_mps = 3.33;
    std::vector<double> speeds;  // optional per-subinterval override
    std::array<FeatureShape, kFeatureCount> features = [] {
        std::array<FeatureShape, kFeatureCount> shapes{};
        for (int j = 0; j < kFeatureCount; ++j) {
            // Resting levels: oscillation variance ~0.5 g^2, symmetric skewness,
            // sub-Gaussian kurtosis typical of periodic signals.
            const int kind = (j % 9) / 3;
            shapes[static_cast<std::size_t>(j)].intercept =
                kind == 0 ? 0.5 : (kind == 1 ? 0.0 : 2.0);
        }
        return shapes;
    }();

    std::vector<double> speed_profile() const {
        if (!speeds.empty()) return speeds;
        return std::vector<double>(static_cast<std::size_t>(segments), speed_mps);
    }

    void validate() const {
        if (segments < 2) throw_validation("synth spec: segments must be at least 2");
        if (runs < 1) throw_validation("synth spec: runs must be at least 1");
        if (!(mass_kg > 0.0)) throw_validation("synth spec: mass must be positive");
        if (!(subinterval_distance_m > 0.0))
            throw_validation("synth spec: subinterval distance must be positive");
        if (!(duration_s > 0.0)) throw_validation("synth spec: duration must be positive");
        if (!(rate_hz > 0.0)) throw_validation("synth spec: rate must be positive");
        if (!(stride_hz > 0.0)) throw_validation("synth spec: stride rate must be positive");
        if (accel_noise_std_g < 0.0) throw_validation("synth spec: negative sensor noise");
        if (impact_amplitude < 0.0) throw_validation("synth spec: negative impact amplitude");
        if (!speeds.empty() && static_cast<int>(speeds.size()) != segments)
            throw_validation("synth spec: speeds must list one value per segment");
        for (double v : speed_profile())
            if (!(v > 0.0)) throw_validation("synth spec: speeds must be positive");
        for (const FeatureShape& shape : features)
            if (shape.noise_std < 0.0) throw_validation("synth spec: negative feature noise");
    }
};

namespace detail {

inline bool parse_feature_key(std::string_view key, std::string_view prefix, int& feature) {
    if (key.substr(0, prefix.size()) != prefix) return false;
    int j = 0;
    if (!parse_int(key.substr(prefix.size()), j) || j < 1 || j > kFeatureCount) return false;
    feature = j - 1;
    return true;
}

}  // namespace detail

// Key-value spec document: `key = value` lines, '#' comments. Unknown keys are
// configuration errors. Per-feature overrides use 1-based indices, e.g.
// `slope_11 = 0.02`.
inline SynthSpec parse_synth_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("spec file not readable: " + path);

    SynthSpec spec;
    std::string raw;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw_validation(path + ":" + std::to_string(line_no) + ": config error: " + what);
    };

    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = trim(strip_cr(raw));
        if (line.empty() || line.front() == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) fail("expected 'key = value'");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));

        auto as_double = [&](double& out) {
            if (!parse_double(value, out)) fail("bad number for '" + std::string(key) + "'");
        };
        auto as_int = [&](int& out) {
            if (!parse_int(value, out)) fail("bad integer for '" + std::string(key) + "'");
        };

        int feature = 0;
        if (key == "segments") as_int(spec.segments);
        else if (key == "features") {
            int n = 0;
            as_int(n);
            if (n != kFeatureCount) fail("only 18 candidate features are supported");
        } else if (key == "runs") as_int(spec.runs);
        else if (key == "seed") {
            std::uint64_t s = 0;
            auto res = std::from_chars(value.data(), value.data() + value.size(), s);
            if (res.ec != std::errc() || res.ptr != value.data() + value.size())
                fail("bad seed");
            spec.seed = s;
        } else if (key == "mass_kg") as_double(spec.mass_kg);
        else if (key == "subinterval_distance_m") as_double(spec.subinterval_distance_m);
        else if (key == "duration_s") as_double(spec.duration_s);
        else if (key == "rate_hz") as_double(spec.rate_hz);
        else if (key == "stride_hz") as_double(spec.stride_hz);
        else if (key == "accel_noise_std_g") as_double(spec.accel_noise_std_g);
        else if (key == "impact_amplitude") as_double(spec.impact_amplitude);
        else if (key == "speed_mps") as_double(spec.speed_mps);
        else if (key == "speeds") {
            spec.speeds.clear();
            for (std::string_view field : split_fields(value)) {
                double v = 0.0;
                if (!parse_double(trim(field), v)) fail("bad speeds list");
                spec.speeds.push_back(v);
            }
        } else if (key == "slope_default") {
            double v = 0.0;
            as_double(v);
            for (FeatureShape& shape : spec.features) shape.slope = v;
        } else if (key == "intercept_default") {
            double v = 0.0;
            as_double(v);
            for (FeatureShape& shape : spec.features) shape.intercept = v;
        } else if (key == "noise_std_default") {
            double v = 0.0;
            as_double(v);
            for (FeatureShape& shape : spec.features) shape.noise_std = v;
        } else if (detail::parse_feature_key(key, "slope_", feature)) {
            as_double(spec.features[static_cast<std::size_t>(feature)].slope);
        } else if (detail::parse_feature_key(key, "intercept_", feature)) {
            as_double(spec.features[static_cast<std::size_t>(feature)].intercept);
        } else if (detail::parse_feature_key(key, "noise_std_", feature)) {
            as_double(spec.features[static_cast<std::size_t>(feature)].noise_std);
        } else {
            fail("unknown key '" + std::string(key) + "'");
        }
    }
    spec.validate();
    return spec;
}

// Direct feature generator: value_{j,k} = slope_j k + intercept_j + noise.
// Draw order is fixed (subinterval-major, then feature) so output is a pure
// function of (spec, seed).
inline FeatureSeries generate_feature_series(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    FeatureSeries series;
    series.rows.reserve(static_cast<std::size_t>(spec.segments));
    for (int k = 1; k <= spec.segments; ++k) {
        FeatureVector row;
        row.subinterval = k;
        for (int j = 0; j < kFeatureCount; ++j) {
            const FeatureShape& shape = spec.features[static_cast<std::size_t>(j)];
            row.values[static_cast<std::size_t>(j)] =
                shape.slope * static_cast<double>(k) + shape.intercept +
                shape.noise_std * normal(rng);
        }
        series.rows.push_back(row);
    }
    return series;
}

// Raw two-sensor generator. Each channel is an amplitude-modulated stride
// oscillation plus an impact transient pinned to a fixed point of the stride
// cycle and white sensor noise. Amplitudes are held piecewise-constant per
// segment and sized so the per-segment variance tracks the spec's
// variance-feature line; skewness and kurtosis rows of the spec are not
// realized by this generator and emerge from the waveform instead.
inline std::pair<SampleStream, SampleStream> generate_raw_run(const SynthSpec& spec,
                                                              std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);

    const std::size_t n_samples =
        static_cast<std::size_t>(std::llround(spec.duration_s * spec.rate_hz));
    if (n_samples < static_cast<std::size_t>(spec.segments) * kMinFramesPerSegment)
        throw_validation("synth spec: duration too short for the segment count");
    const double dt = 1.0 / spec.rate_hz;
    const double segment_span = spec.duration_s / spec.segments;
    constexpr double impact_decay_s = 0.04;
    constexpr double min_variance = 1e-4;

    SampleStream knee, ankle;
    knee.sensor_id = SensorId::Knee;
    ankle.sensor_id = SensorId::Ankle;
    knee.rate_hz = ankle.rate_hz = spec.rate_hz;
    knee.frames.resize(n_samples);
    ankle.frames.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double t = static_cast<double>(i) * dt;
        knee.frames[i].t = t;
        ankle.frames[i].t = t;
    }

    for (SampleStream* stream : {&knee, &ankle}) {
        for (int axis = 0; axis < 3; ++axis) {
            const int var_feature =
                feature_index(stream->sensor_id, MomentKind::Variance, axis);
            const FeatureShape& shape = spec.features[static_cast<std::size_t>(var_feature)];
            const double phase_cycles = phase_dist(rng) / (2.0 * std::numbers::pi);
            const double bias = axis == 1 ? 1.0 : 0.0;  // gravity on the vertical axis
            for (std::size_t i = 0; i < n_samples; ++i) {
                const double t = stream->frames[i].t;
                int k = static_cast<int>(t / segment_span) + 1;
                if (k > spec.segments) k = spec.segments;
                const double target =
                    shape.slope * static_cast<double>(k) + shape.intercept;
                const double amp = std::sqrt(2.0 * std::max(target, min_variance));
                // Position within the stride cycle; the impact rides at a fixed
                // point of the cycle so per-segment moments do not depend on the
                // random phase.
                const double cycle_pos = std::fmod(spec.stride_hz * t + phase_cycles, 1.0);
                const double impact =
                    spec.impact_amplitude * amp *
                    std::exp(-(cycle_pos / spec.stride_hz) / impact_decay_s);
                stream->frames[i].a[static_cast<std::size_t>(axis)] =
                    bias + amp * std::sin(2.0 * std::numbers::pi * cycle_pos) + impact +
                    spec.accel_noise_std_g * normal(rng);
            }
        }
    }
    return {std::move(knee), std::move(ankle)};
}

}  // namespace fatmon
