#pragma once

#include <cstdint>
#include <ctime>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "fatmon/classify.hpp"
#include "fatmon/csv.hpp"
#include "fatmon/errors.hpp"

namespace fatmon {

inline constexpr int kModelSchemaVersion = 1;

struct InputDigest {
    std::string path;
    std::string sha256;
};

struct Provenance {
    std::string created_utc;
    std::optional<std::uint64_t> seed;
    std::vector<InputDigest> inputs;
};

struct ModelFile {
    int schema_version = kModelSchemaVersion;
    TrainedModel model;
    Provenance provenance;
};

inline std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot read file for digest: " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw_io("digest initialization failed");
    }
    char buffer[1 << 16];
    while (in) {
        in.read(buffer, sizeof(buffer));
        const std::streamsize got = in.gcount();
        if (got > 0) EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(got));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    EVP_DigestFinal_ex(ctx, digest, &digest_len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(digest_len * 2);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0f]);
    }
    return out;
}

inline std::string utc_timestamp(std::optional<std::int64_t> epoch_override = std::nullopt) {
    const std::time_t now =
        epoch_override ? static_cast<std::time_t>(*epoch_override) : std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace detail {

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(c);
                }
        }
    }
    return out;
}

inline void write_double_array(std::ostream& out, const std::vector<double>& values) {
    out << '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ", ";
        out << format_double_full(values[i]);
    }
    out << ']';
}

inline void write_int_array_1based(std::ostream& out, const std::vector<int>& values) {
    out << '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ", ";
        out << (values[i] + 1);
    }
    out << ']';
}

}  // namespace detail

// Hand-ordered writer: key order and number formatting are fixed so that
// save -> load -> save reproduces the file byte for byte. Reals carry 17
// significant digits, which round-trips the exact double value.
inline void save_model(std::ostream& out, const ModelFile& file) {
    const TrainedModel& m = file.model;
    const std::string indent = "  ";
    out << "{\n";
    out << indent << "\"schema_version\": " << file.schema_version << ",\n";
    out << indent << "\"profile\": {\"mass_kg\": " << format_double_full(m.profile.mass_kg)
        << ", \"subinterval_distance_m\": "
        << format_double_full(m.profile.subinterval_distance_m)
        << ", \"segment_count\": " << m.profile.segment_count << "},\n";
    out << indent << "\"segment_count\": " << m.segment_count << ",\n";
    out << indent << "\"speeds_mps\": ";
    detail::write_double_array(out, m.speeds_mps);
    out << ",\n";
    out << indent << "\"metric\": \"" << metric_name(m.metric) << "\",\n";
    out << indent << "\"selection_mode\": \"" << selection_mode_name(m.selection_mode)
        << "\",\n";

    out << indent << "\"trend\": [\n";
    for (std::size_t j = 0; j < m.trend.features.size(); ++j) {
        const FeatureTrend& t = m.trend.features[j];
        out << indent << indent << "{\"scale\": " << format_double_full(t.scale)
            << ", \"slope\": " << format_double_full(t.slope)
            << ", \"intercept\": " << format_double_full(t.intercept)
            << ", \"residual_variance\": " << format_double_full(t.residual_variance) << '}'
            << (j + 1 < m.trend.features.size() ? "," : "") << '\n';
    }
    out << indent << "],\n";

    const RelevanceDistribution& r = m.relevance;
    out << indent << "\"relevance\": {\n";
    out << indent << indent << "\"d\": ";
    detail::write_double_array(out, r.d);
    out << ",\n";
    out << indent << indent << "\"d_bar\": ";
    detail::write_double_array(out, r.d_bar);
    out << ",\n";
    out << indent << indent << "\"perm\": ";
    detail::write_int_array_1based(out, r.perm);
    out << ",\n";
    out << indent << indent << "\"p_sorted\": ";
    detail::write_double_array(out, r.p);
    out << ",\n";
    out << indent << indent << "\"selected_count\": " << r.selected_count << ",\n";
    out << indent << indent << "\"p_selected\": ";
    detail::write_double_array(out, r.p_selected);
    out << ",\n";
    out << indent << indent << "\"selected_features\": ";
    detail::write_int_array_1based(out, r.selected_features());
    out << '\n' << indent << "},\n";

    out << indent << "\"filter_params\": [\n";
    const std::vector<int> selected = r.selected_features();
    for (std::size_t i = 0; i < m.filter_params.size(); ++i) {
        const FilterParams& p = m.filter_params[i];
        out << indent << indent << "{\"feature\": " << (selected[i] + 1)
            << ", \"A\": " << format_double_full(p.prediction_coeff)
            << ", \"R\": " << format_double_full(p.measurement_variance)
            << ", \"Q\": " << format_double_full(p.input_variance)
            << ", \"P\": " << format_double_full(p.error_variance)
            << ", \"L\": " << format_double_full(p.gain) << '}'
            << (i + 1 < m.filter_params.size() ? "," : "") << '\n';
    }
    out << indent << "],\n";

    out << indent << "\"provenance\": {\n";
    out << indent << indent << "\"created_utc\": \""
        << detail::json_escape(file.provenance.created_utc) << "\",\n";
    out << indent << indent << "\"seed\": ";
    if (file.provenance.seed) out << *file.provenance.seed;
    else out << "null";
    out << ",\n";
    out << indent << indent << "\"inputs\": [";
    for (std::size_t i = 0; i < file.provenance.inputs.size(); ++i) {
        const InputDigest& input = file.provenance.inputs[i];
        if (i) out << ',';
        out << "\n" << indent << indent << indent << "{\"path\": \""
            << detail::json_escape(input.path) << "\", \"sha256\": \""
            << detail::json_escape(input.sha256) << "\"}";
    }
    if (!file.provenance.inputs.empty()) out << '\n' << indent << indent;
    out << "]\n";
    out << indent << "}\n";
    out << "}\n";
}

inline void save_model_file(const std::string& path, const ModelFile& file) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io("cannot write model file: " + path);
    save_model(out, file);
    if (!out) throw_io("failed while writing model file: " + path);
}

inline ModelFile load_model(std::istream& in) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw_validation(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        ModelFile file;
        file.schema_version = j.at("schema_version").get<int>();
        if (file.schema_version != kModelSchemaVersion)
            throw_validation("version error: unsupported model schema version " +
                             std::to_string(file.schema_version));
        TrainedModel& m = file.model;
        const auto& profile = j.at("profile");
        m.profile.mass_kg = profile.at("mass_kg").get<double>();
        m.profile.subinterval_distance_m = profile.at("subinterval_distance_m").get<double>();
        m.profile.segment_count = profile.at("segment_count").get<int>();
        m.segment_count = j.at("segment_count").get<int>();
        m.speeds_mps = j.at("speeds_mps").get<std::vector<double>>();
        m.metric = parse_metric(j.at("metric").get<std::string>());
        m.selection_mode = parse_selection_mode(j.at("selection_mode").get<std::string>());

        m.trend.segment_count = m.segment_count;
        for (const auto& entry : j.at("trend")) {
            FeatureTrend t;
            t.scale = entry.at("scale").get<double>();
            t.slope = entry.at("slope").get<double>();
            t.intercept = entry.at("intercept").get<double>();
            t.residual_variance = entry.at("residual_variance").get<double>();
            m.trend.features.push_back(t);
        }

        const auto& r = j.at("relevance");
        m.relevance.d = r.at("d").get<std::vector<double>>();
        m.relevance.d_bar = r.at("d_bar").get<std::vector<double>>();
        for (int idx : r.at("perm").get<std::vector<int>>()) m.relevance.perm.push_back(idx - 1);
        m.relevance.p = r.at("p_sorted").get<std::vector<double>>();
        m.relevance.selected_count = r.at("selected_count").get<int>();
        m.relevance.p_selected = r.at("p_selected").get<std::vector<double>>();
        const auto selected = r.at("selected_features").get<std::vector<int>>();
        if (static_cast<int>(selected.size()) != m.relevance.selected_count)
            throw_validation("model: selected_features length disagrees with selected_count");
        for (std::size_t i = 0; i < selected.size(); ++i)
            if (selected[i] - 1 != m.relevance.perm[i])
                throw_validation("model: selected_features disagrees with permutation head");

        for (const auto& entry : j.at("filter_params")) {
            FilterParams p;
            p.prediction_coeff = entry.at("A").get<double>();
            p.measurement_variance = entry.at("R").get<double>();
            p.input_variance = entry.at("Q").get<double>();
            p.error_variance = entry.at("P").get<double>();
            p.gain = entry.at("L").get<double>();
            m.filter_params.push_back(p);
        }

        const auto& prov = j.at("provenance");
        file.provenance.created_utc = prov.at("created_utc").get<std::string>();
        if (!prov.at("seed").is_null())
            file.provenance.seed = prov.at("seed").get<std::uint64_t>();
        for (const auto& entry : prov.at("inputs")) {
            InputDigest input;
            input.path = entry.at("path").get<std::string>();
            input.sha256 = entry.at("sha256").get<std::string>();
            file.provenance.inputs.push_back(input);
        }

        m.validate();
        double p_sum = 0.0;
        for (double v : m.relevance.p_selected) p_sum += v;
        if (std::abs(p_sum - 1.0) > 1e-12)
            throw_validation("model: selected probabilities do not sum to 1");
        return file;
    } catch (const Error&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw_validation(std::string("model file is missing or mistypes a field: ") + e.what());
    }
}

inline ModelFile load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot read model file: " + path);
    return load_model(in);
}

// Recomputes the digests of the recorded training inputs.
inline void verify_model_inputs(const ModelFile& file) {
    for (const InputDigest& input : file.provenance.inputs) {
        const std::string digest = sha256_file(input.path);
        if (digest != input.sha256)
            throw_validation("digest mismatch for training input: " + input.path);
    }
}

}  // namespace fatmon
