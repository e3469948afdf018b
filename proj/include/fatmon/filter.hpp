#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fatmon/errors.hpp"

namespace fatmon {

// Scalar stationary filter quantities for one feature.
struct FilterParams {
    double prediction_coeff = 0.0;     // state transition estimate
    double measurement_variance = 0.0; // observation noise variance
    double input_variance = 0.0;       // process noise variance
    double error_variance = 0.0;       // stationary solution of the quadratic below
    double gain = 0.0;                 // error_variance / (error_variance + measurement_variance)
};

inline void validate_filter_params(const FilterParams& p) {
    if (!std::isfinite(p.prediction_coeff) || !std::isfinite(p.measurement_variance) ||
        !std::isfinite(p.input_variance) || !std::isfinite(p.error_variance) ||
        !std::isfinite(p.gain))
        throw_validation("filter params: non-finite value");
    if (p.measurement_variance < 0.0) throw_validation("filter params: negative noise variance");
    if (p.input_variance < 0.0) throw_validation("filter params: negative input variance");
    if (p.error_variance < 0.0) throw_validation("filter params: negative error variance");
    // gain == 1 is the zero-measurement-noise passthrough limit.
    if (p.gain < 0.0 || p.gain > 1.0) throw_validation("filter params: gain outside [0, 1]");
}

// |P - A(P - LP)A - Q| with L = P/(P+R); zero at the stationary solution.
inline double stationarity_residual(const FilterParams& p) {
    const double predicted = p.prediction_coeff *
                             (p.error_variance - p.gain * p.error_variance) *
                             p.prediction_coeff;
    return std::abs(p.error_variance - predicted - p.input_variance);
}

// Stationary error variance and gain for the scalar model
//   state_{k+1} = A state_k + w,  Var w = Q;  obs_k = state_k + v,  Var v = R.
// The stationary equation reduces to the quadratic
//   P^2 + P (R (1 - A^2) - Q) - Q R = 0,
// whose unique nonnegative root is taken in the cancellation-safe form.
// |A| >= 1 with Q = 0 degenerates to the noiseless constant state (P = 0, gain 0).
inline std::pair<double, double> solve_riccati(double prediction_coeff, double input_variance,
                                               double measurement_variance) {
    if (!(measurement_variance > 0.0))
        throw_validation("solve_riccati: measurement noise variance must be positive");
    if (input_variance < 0.0)
        throw_validation("solve_riccati: input variance must be nonnegative");
    if (std::abs(prediction_coeff) >= 1.0) {
        if (input_variance > 0.0)
            throw_numeric("instability error: |prediction coefficient| >= 1 with positive "
                          "input variance has no stationary solution");
        return {0.0, 0.0};
    }
    const double a2 = prediction_coeff * prediction_coeff;
    const double b = measurement_variance * (1.0 - a2) - input_variance;
    const double disc = std::sqrt(b * b + 4.0 * input_variance * measurement_variance);
    double error_variance;
    if (b >= 0.0) {
        error_variance = (disc + b) == 0.0
                             ? 0.0
                             : 2.0 * input_variance * measurement_variance / (disc + b);
    } else {
        error_variance = 0.5 * (disc - b);
    }
    const double gain = error_variance / (error_variance + measurement_variance);
    return {error_variance, gain};
}

// Fits the stationary model to one feature series given its observation noise
// variance. The transition estimate divides the one-step cross moment by the
// noise-corrected second moment; the process variance estimate
//   Q = (m2 - R) (1 - A^2)
// can come out negative in finite samples and is clamped to zero.
inline FilterParams estimate_params(std::span<const double> series, double measurement_variance,
                                    bool* input_variance_clamped = nullptr) {
    if (input_variance_clamped) *input_variance_clamped = false;
    const std::size_t n = series.size();
    if (n < 3) throw_validation("estimate_params: need at least 3 observations");
    if (!(measurement_variance > 0.0))
        throw_validation("estimate_params: measurement noise variance must be positive");

    double second_moment = 0.0;
    for (double v : series) {
        if (!std::isfinite(v)) throw_validation("estimate_params: non-finite observation");
        second_moment += v * v;
    }
    second_moment /= static_cast<double>(n);

    double cross_moment = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) cross_moment += series[k + 1] * series[k];
    cross_moment /= static_cast<double>(n - 1);

    const double denom = second_moment - measurement_variance;
    if (!(denom > 0.0))
        throw_numeric("noise-dominates error: second moment does not exceed the noise variance");

    FilterParams params;
    params.measurement_variance = measurement_variance;
    params.prediction_coeff = cross_moment / denom;
    double input_variance =
        denom * (1.0 - params.prediction_coeff * params.prediction_coeff);
    if (input_variance < 0.0) {
        input_variance = 0.0;
        if (input_variance_clamped) *input_variance_clamped = true;
    }
    params.input_variance = input_variance;
    auto [error_variance, gain] =
        solve_riccati(params.prediction_coeff, params.input_variance, params.measurement_variance);
    params.error_variance = error_variance;
    params.gain = gain;
    return params;
}

// One-step recursion x_k = (1 - L) A x_{k-1} + L z_k holding its own state.
class OnlineFilter {
public:
    OnlineFilter(const FilterParams& params, std::optional<double> initial_state = std::nullopt)
        : params_(params), state_(initial_state.value_or(0.0)),
          primed_(initial_state.has_value()) {
        validate_filter_params(params_);
    }

    // The state defaults to the first observation when not provided up front.
    double step(double observation) {
        if (!primed_) {
            state_ = observation;
            primed_ = true;
        }
        state_ = (1.0 - params_.gain) * params_.prediction_coeff * state_ +
                 params_.gain * observation;
        return state_;
    }

    double state() const { return state_; }

private:
    FilterParams params_;
    double state_;
    bool primed_;
};

inline std::vector<double> filter_series(std::span<const double> series,
                                         const FilterParams& params,
                                         std::optional<double> initial_state = std::nullopt) {
    std::vector<double> out;
    out.reserve(series.size());
    if (series.empty()) return out;
    OnlineFilter filter(params, initial_state);
    for (double z : series) out.push_back(filter.step(z));
    return out;
}

}  // namespace fatmon
