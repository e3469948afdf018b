#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fatmon/csv.hpp"
#include "fatmon/errors.hpp"

namespace fatmon {

enum class SensorId { Knee = 1, Ankle = 2 };

inline const char* sensor_name(SensorId id) {
    return id == SensorId::Knee ? "knee" : "ankle";
}

// Axis convention: 0 = mediolateral, 1 = superior-inferior, 2 = anterior-posterior.
struct Frame {
    double t;                   // seconds
    std::array<double, 3> a;    // acceleration in g
};

struct SampleStream {
    SensorId sensor_id = SensorId::Knee;
    double rate_hz = 0.0;       // nominal rate declared in the file header
    std::vector<Frame> frames;

    double duration() const {
        return frames.size() < 2 ? 0.0 : frames.back().t - frames.front().t;
    }
};

struct RunnerProfile {
    double mass_kg = 0.0;
    double subinterval_distance_m = 0.0;
    int segment_count = 0;      // N

    void validate() const {
        if (!(mass_kg > 0.0)) throw_validation("runner profile: mass must be positive");
        if (!(subinterval_distance_m > 0.0))
            throw_validation("runner profile: subinterval distance must be positive");
        if (segment_count < 2) throw_validation("runner profile: segment count must be at least 2");
    }
};

// Half-open frame index range [begin, end) into one stream.
struct FrameRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

struct Segment {
    int index = 0;              // k, 1-based
    FrameRange knee;
    FrameRange ankle;
    double t_start = 0.0;
    double t_end = 0.0;
    double distance_m = 0.0;
    double duration_s = 0.0;
};

// A segment needs a handful of samples before fourth-order moments are usable.
inline constexpr std::size_t kMinFramesPerSegment = 8;
// Gaps beyond this many nominal periods indicate a recording restart, not packet loss.
inline constexpr double kMaxGapPeriods = 5.0;
// Maximum allowed mismatch between the two sensors' recording spans.
inline constexpr double kSpanToleranceSeconds = 1.0;

// Reads one sensor recording. Expected layout:
//   # rate_hz=100
//   t,ax,ay,az
//   0.00,0.012,0.981,-0.034
inline SampleStream parse_stream(const std::string& path, SensorId sensor_id) {
    std::ifstream in(path);
    if (!in) throw_io(std::string(sensor_name(sensor_id)) + " file not readable: " + path);

    SampleStream stream;
    stream.sensor_id = sensor_id;

    std::string raw;
    std::size_t line_no = 0;

    auto fail = [&](const std::string& what) {
        throw_validation(path + ":" + std::to_string(line_no) + ": " + what);
    };

    // Rate comment, then column header.
    if (!std::getline(in, raw)) fail("empty file");
    ++line_no;
    {
        std::string_view line = trim(strip_cr(raw));
        constexpr std::string_view prefix = "# rate_hz=";
        if (line.substr(0, prefix.size()) != prefix)
            fail("missing '# rate_hz=' header line");
        if (!parse_double(trim(line.substr(prefix.size())), stream.rate_hz) ||
            !(stream.rate_hz > 0.0))
            fail("invalid sample rate");
    }
    if (!std::getline(in, raw)) fail("missing column header");
    ++line_no;
    if (trim(strip_cr(raw)) != "t,ax,ay,az") fail("column header must be 't,ax,ay,az'");

    const double max_gap = kMaxGapPeriods / stream.rate_hz;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = strip_cr(raw);
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 4) fail("parse error: expected 4 fields, got " +
                                     std::to_string(fields.size()));
        Frame frame{};
        if (!parse_double(trim(fields[0]), frame.t)) fail("parse error: bad timestamp");
        for (int axis = 0; axis < 3; ++axis) {
            if (!parse_double(trim(fields[axis + 1]), frame.a[axis]))
                fail("parse error: bad acceleration value in column " + std::to_string(axis + 2));
        }
        if (!std::isfinite(frame.t) || !std::isfinite(frame.a[0]) ||
            !std::isfinite(frame.a[1]) || !std::isfinite(frame.a[2]))
            fail("non-finite value");
        if (!stream.frames.empty()) {
            double dt = frame.t - stream.frames.back().t;
            if (dt <= 0.0) fail("ordering error: timestamps must be strictly increasing");
            if (dt > max_gap)
                fail("gap error: " + format_double(dt) + " s exceeds " +
                     format_double(max_gap) + " s");
        }
        stream.frames.push_back(frame);
    }
    if (stream.frames.empty()) throw_validation(path + ": no data rows");
    return stream;
}

inline void write_stream_csv(std::ostream& out, const SampleStream& stream) {
    out << "# rate_hz=" << format_double(stream.rate_hz) << "\n";
    out << "t,ax,ay,az\n";
    for (const Frame& f : stream.frames) {
        out << format_double(f.t) << ',' << format_double(f.a[0]) << ','
            << format_double(f.a[1]) << ',' << format_double(f.a[2]) << '\n';
    }
}

struct MarkerRow {
    int index = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    std::optional<double> distance_m;
};

// Marker file: `k,t_start,t_end,distance_m`, one row per segment, k consecutive
// from 1. An empty distance cell falls back to the profile's subinterval distance.
inline std::vector<MarkerRow> parse_marker_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io("marker file not readable: " + path);

    std::string raw;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw_validation(path + ":" + std::to_string(line_no) + ": " + what);
    };

    if (!std::getline(in, raw)) fail("empty file");
    ++line_no;
    if (trim(strip_cr(raw)) != "k,t_start,t_end,distance_m")
        fail("marker header must be 'k,t_start,t_end,distance_m'");

    std::vector<MarkerRow> rows;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = strip_cr(raw);
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 4) fail("expected 4 fields");
        MarkerRow row;
        if (!parse_int(trim(fields[0]), row.index)) fail("bad segment index");
        if (!parse_double(trim(fields[1]), row.t_start)) fail("bad t_start");
        if (!parse_double(trim(fields[2]), row.t_end)) fail("bad t_end");
        std::string_view dist = trim(fields[3]);
        if (!dist.empty()) {
            double d;
            if (!parse_double(dist, d)) fail("bad distance");
            if (!(d > 0.0)) fail("distance must be positive");
            row.distance_m = d;
        }
        if (row.index != static_cast<int>(rows.size()) + 1)
            fail("segment indices must be consecutive from 1");
        if (!(row.t_end > row.t_start)) fail("t_end must exceed t_start");
        if (!rows.empty() && row.t_start < rows.back().t_end)
            fail("marker windows overlap");
        rows.push_back(row);
    }
    if (rows.empty()) throw_validation(path + ": no marker rows");
    return rows;
}

namespace detail {

inline std::size_t frame_lower_bound(const std::vector<Frame>& frames, double t) {
    auto it = std::lower_bound(frames.begin(), frames.end(), t,
                               [](const Frame& f, double v) { return f.t < v; });
    return static_cast<std::size_t>(it - frames.begin());
}

inline void check_alignment(const SampleStream& knee, const SampleStream& ankle) {
    if (knee.frames.empty() || ankle.frames.empty())
        throw_validation("cannot segment an empty stream");
    double start_diff = std::abs(knee.frames.front().t - ankle.frames.front().t);
    double end_diff = std::abs(knee.frames.back().t - ankle.frames.back().t);
    if (start_diff > kSpanToleranceSeconds || end_diff > kSpanToleranceSeconds)
        throw_validation("alignment error: sensor spans differ by more than " +
                         format_double(kSpanToleranceSeconds) + " s");
}

inline void check_density(const Segment& seg) {
    if (seg.knee.size() < kMinFramesPerSegment || seg.ankle.size() < kMinFramesPerSegment)
        throw_validation("sparsity error: segment " + std::to_string(seg.index) +
                         " has fewer than " + std::to_string(kMinFramesPerSegment) +
                         " frames for a sensor");
}

}  // namespace detail

// Equal-duration partition of the union of both sensors' spans into n segments.
// Every frame of either stream lands in exactly one segment.
inline std::vector<Segment> segment_equal_count(const SampleStream& knee,
                                                const SampleStream& ankle,
                                                int n_segments,
                                                double default_distance_m) {
    if (n_segments < 2) throw_validation("segment count must be at least 2");
    if (!(default_distance_m > 0.0)) throw_validation("segment distance must be positive");
    detail::check_alignment(knee, ankle);

    const double t0 = std::min(knee.frames.front().t, ankle.frames.front().t);
    const double t1 = std::max(knee.frames.back().t, ankle.frames.back().t);
    const double span = t1 - t0;
    if (!(span > 0.0)) throw_validation("stream span must be positive");
    const double step = span / n_segments;

    std::vector<Segment> segments;
    segments.reserve(static_cast<std::size_t>(n_segments));
    std::size_t knee_begin = 0;
    std::size_t ankle_begin = 0;
    for (int k = 1; k <= n_segments; ++k) {
        Segment seg;
        seg.index = k;
        seg.t_start = t0 + (k - 1) * step;
        seg.t_end = t0 + k * step;
        seg.duration_s = step;
        seg.distance_m = default_distance_m;
        std::size_t knee_end = (k == n_segments)
                                   ? knee.frames.size()
                                   : detail::frame_lower_bound(knee.frames, seg.t_end);
        std::size_t ankle_end = (k == n_segments)
                                    ? ankle.frames.size()
                                    : detail::frame_lower_bound(ankle.frames, seg.t_end);
        seg.knee = {knee_begin, knee_end};
        seg.ankle = {ankle_begin, ankle_end};
        detail::check_density(seg);
        knee_begin = knee_end;
        ankle_begin = ankle_end;
        segments.push_back(seg);
    }
    return segments;
}

// Marker-driven segmentation. Frames outside every marker window are dropped;
// windows must not overlap.
inline std::vector<Segment> segment_by_markers(const SampleStream& knee,
                                               const SampleStream& ankle,
                                               const std::vector<MarkerRow>& markers,
                                               double default_distance_m) {
    if (markers.size() < 2) throw_validation("need at least 2 marker rows");
    detail::check_alignment(knee, ankle);

    std::vector<Segment> segments;
    segments.reserve(markers.size());
    for (std::size_t i = 0; i < markers.size(); ++i) {
        const MarkerRow& m = markers[i];
        const bool last = i + 1 == markers.size();
        Segment seg;
        seg.index = m.index;
        seg.t_start = m.t_start;
        seg.t_end = m.t_end;
        seg.duration_s = m.t_end - m.t_start;
        seg.distance_m = m.distance_m.value_or(default_distance_m);
        auto range_of = [&](const std::vector<Frame>& frames) {
            std::size_t begin = detail::frame_lower_bound(frames, m.t_start);
            std::size_t end = detail::frame_lower_bound(frames, m.t_end);
            if (last) {
                // Keep a frame that sits exactly on the final boundary.
                while (end < frames.size() && frames[end].t <= m.t_end) ++end;
            }
            return FrameRange{begin, end};
        };
        seg.knee = range_of(knee.frames);
        seg.ankle = range_of(ankle.frames);
        detail::check_density(seg);
        segments.push_back(seg);
    }
    return segments;
}

inline double average_speed(const Segment& seg) {
    if (!(seg.duration_s > 0.0))
        throw_numeric("division error: segment " + std::to_string(seg.index) +
                      " has zero duration");
    return seg.distance_m / seg.duration_s;
}

inline std::vector<double> segment_speeds(const std::vector<Segment>& segments) {
    std::vector<double> speeds;
    speeds.reserve(segments.size());
    for (const Segment& seg : segments) speeds.push_back(average_speed(seg));
    return speeds;
}

// Samples of one sensor axis within a segment range.
inline std::vector<double> axis_samples(const SampleStream& stream, const FrameRange& range,
                                        int axis) {
    std::vector<double> out;
    out.reserve(range.size());
    for (std::size_t i = range.begin; i < range.end; ++i)
        out.push_back(stream.frames[i].a[static_cast<std::size_t>(axis)]);
    return out;
}

}  // namespace fatmon
