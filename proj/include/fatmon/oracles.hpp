#pragma once

// Literal reference transcriptions used by the test and acceptance suites.
// These deliberately share no helpers with the primary implementations: each
// evaluates its defining relation step by step so the fast paths can be
// checked against them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "fatmon/errors.hpp"

namespace fatmon::oracle {

struct OracleMoments {
    double variance = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
};

// Direct expectation-style evaluation: one pass per moment, each standardized
// deviation raised to its power individually.
inline OracleMoments moments(const std::vector<double>& samples) {
    if (samples.empty()) throw_validation("oracle moments: empty input");
    const double n = static_cast<double>(samples.size());

    double mean = 0.0;
    for (double x : samples) mean += x / n;

    double variance = 0.0;
    for (double x : samples) variance += (x - mean) * (x - mean) / n;
    if (variance == 0.0) throw_numeric("oracle moments: zero variance");
    const double sigma = std::sqrt(variance);

    double skewness = 0.0;
    for (double x : samples) {
        const double z = (x - mean) / sigma;
        skewness += z * z * z / n;
    }
    double kurtosis = 0.0;
    for (double x : samples) {
        const double z = (x - mean) / sigma;
        kurtosis += z * z * z * z / n;
    }
    return {variance, skewness, kurtosis};
}

// Fixed-point iteration P <- A^2 P R / (P + R) + Q started from P = Q.
inline double riccati_fixed_point(double prediction_coeff, double input_variance,
                                  double measurement_variance) {
    if (!(measurement_variance > 0.0))
        throw_validation("oracle riccati: measurement variance must be positive");
    if (input_variance < 0.0)
        throw_validation("oracle riccati: input variance must be nonnegative");
    double p = input_variance;
    for (int iteration = 0; iteration < 1000000; ++iteration) {
        const double next = prediction_coeff * prediction_coeff * p * measurement_variance /
                                (p + measurement_variance) +
                            input_variance;
        if (std::abs(next - p) < 1e-12) return next;
        p = next;
    }
    throw_numeric("oracle failure: fixed-point iteration did not converge");
}

struct ProcedureResult {
    int selected_count = 0;
    std::vector<double> p_selected;
    std::vector<double> entropies;  // entropy rate recorded at every visited length
};

// Step-by-step trace of the trimming procedure on a nearness distribution:
// sort non-increasing, then repeatedly test the stop conditions and
// renormalize the retained head. Exact ties (an all-equal head) fail the
// strict inequality and keep trimming.
inline ProcedureResult procedure_trace(const std::vector<double>& d_bar) {
    const int n = static_cast<int>(d_bar.size());
    if (n < 2) throw_validation("oracle procedure: need at least 2 features");

    std::vector<double> sorted = d_bar;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());

    auto xlogx = [](double v) { return v == 0.0 ? 0.0 : v * std::log(v); };
    auto head_of = [&](int length) {
        std::vector<double> head(sorted.begin(), sorted.begin() + length);
        const double total = std::accumulate(head.begin(), head.end(), 0.0);
        for (double& v : head) v /= total;
        return head;
    };

    ProcedureResult result;
    int length = n;
    std::vector<double> p = head_of(length);
    while (true) {
        double weighted_log_sum = 0.0;
        for (double v : p) weighted_log_sum += xlogx(v);
        result.entropies.push_back(-weighted_log_sum / length);

        if (length == 2) break;
        double lhs = 0.0;
        for (int i = 0; i < length - 1; ++i) lhs += xlogx(p[static_cast<std::size_t>(i)]);
        lhs /= static_cast<double>(length - 1);
        const double rhs = xlogx(p[static_cast<std::size_t>(length - 1)]);
        const bool all_equal = p.front() == p.back();
        if (!all_equal && lhs < rhs) break;
        --length;
        p = head_of(length);
    }
    result.selected_count = length;
    result.p_selected = std::move(p);
    return result;
}

}  // namespace fatmon::oracle
