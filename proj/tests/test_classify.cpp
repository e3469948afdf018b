#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "fatmon/classify.hpp"
#include "fatmon/errors.hpp"

#include "test_support.hpp"

using namespace fatmon;
using testsupport::make_test_model;

namespace {

double weighted_gap(const TrainedModel& model) {
    // Smallest weighted distance between adjacent fitted rows.
    double best = std::numeric_limits<double>::infinity();
    for (int k = 1; k < model.segment_count; ++k) {
        const std::vector<double> a = model.fitted_row(k);
        const std::vector<double> b = model.fitted_row(k + 1);
        double ss = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double diff = model.relevance.p_selected[i] * (a[i] - b[i]);
            ss += diff * diff;
        }
        best = std::min(best, std::sqrt(ss));
    }
    return best;
}

}  // namespace

TEST_CASE("an exact fitted row classifies to its own index", "[classify]") {
    const TrainedModel model = make_test_model();
    const std::vector<double> observation = model.fitted_row(5);
    CHECK(classify_single(observation, model) == 5);
}

TEST_CASE("scaling the weight vector does not change decisions", "[classify]") {
    const TrainedModel model = make_test_model();
    TrainedModel scaled = model;
    for (double& v : scaled.relevance.p_selected) v *= 2.5;
    std::mt19937_64 rng(21);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int round = 0; round < 50; ++round) {
        std::vector<double> observation = model.fitted_row(1 + round % model.segment_count);
        for (double& v : observation) v += 0.5 * normal(rng);
        CHECK(classify_single(observation, model) == classify_single(observation, scaled));
    }
}

TEST_CASE("bounded noise keeps the nearest-row decision", "[classify]") {
    const TrainedModel model = make_test_model();
    const double gap = weighted_gap(model);
    REQUIRE(gap > 0.0);
    std::mt19937_64 rng(33);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int round = 0; round < 25; ++round) {
        // Perturbation with weighted norm at 45% of the smallest row gap.
        std::vector<double> direction(model.relevance.p_selected.size());
        double norm = 0.0;
        for (std::size_t i = 0; i < direction.size(); ++i) {
            direction[i] = normal(rng);
            const double w = model.relevance.p_selected[i] * direction[i];
            norm += w * w;
        }
        norm = std::sqrt(norm);
        std::vector<double> observation = model.fitted_row(12);
        for (std::size_t i = 0; i < direction.size(); ++i)
            observation[i] += direction[i] * (0.45 * gap / norm);
        CHECK(classify_single(observation, model) == 12);
    }
}

TEST_CASE("ties resolve to the smallest index", "[classify]") {
    const TrainedModel model = make_test_model();
    const std::vector<double> a = model.fitted_row(4);
    const std::vector<double> b = model.fitted_row(5);
    std::vector<double> midpoint(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) midpoint[i] = a[i] + 0.5 * (b[i] - a[i]);
    CHECK(classify_single(midpoint, model) == 4);
}

TEST_CASE("diagonal-variance metric still recovers exact rows", "[classify]") {
    TrainedModel model = make_test_model();
    model.metric = DistanceMetric::MahalanobisDiag;
    for (int k : {1, 7, 20, 44})
        CHECK(classify_single(model.fitted_row(k), model) == k);
    // Down-weighting a noisy feature changes distances but exact rows still win.
    model.trend.features[static_cast<std::size_t>(model.relevance.perm[0])]
        .residual_variance = 9.0;
    CHECK(classify_single(model.fitted_row(12), model) == 12);
    // A zero residual variance cannot back a diagonal metric.
    model.trend.features[static_cast<std::size_t>(model.relevance.perm[0])]
        .residual_variance = 0.0;
    CHECK_THROWS_AS(classify_single(model.fitted_row(3), model), Error);
}

TEST_CASE("shape mismatches are rejected", "[classify]") {
    const TrainedModel model = make_test_model();
    CHECK_THROWS_AS(classify_single(std::vector<double>{1.0}, model), Error);
    const std::vector<std::vector<double>> window{{1.0, 2.0, 3.0}};
    CHECK_THROWS_AS(classify_lagged(window, model, 1), Error);
}

TEST_CASE("an exact window classifies to its last index", "[classify]") {
    const TrainedModel model = make_test_model();
    const std::vector<std::vector<double>> window{model.fitted_row(3), model.fitted_row(4),
                                                  model.fitted_row(5)};
    CHECK(classify_lagged(window, model, 2) == 5);
}

TEST_CASE("zero lag reduces to the single-observation classifier", "[classify]") {
    const TrainedModel model = make_test_model();
    std::mt19937_64 rng(55);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 1; k <= model.segment_count; ++k) {
        const std::vector<double> observation = model.fitted_row(k);
        const std::vector<std::vector<double>> window{observation};
        CHECK(classify_lagged(window, model, 0) == classify_single(observation, model));
    }
    for (int round = 0; round < 20; ++round) {
        std::vector<double> observation = model.fitted_row(1 + round % model.segment_count);
        for (double& v : observation) v += 2.0 * normal(rng);
        const std::vector<std::vector<double>> window{observation};
        CHECK(classify_lagged(window, model, 0) == classify_single(observation, model));
    }
}

TEST_CASE("lag must stay below the segment count", "[classify]") {
    const TrainedModel model = make_test_model(10);
    std::vector<std::vector<double>> window(11, model.fitted_row(1));
    CHECK_THROWS_AS(classify_lagged(window, model, 10), Error);
    const std::vector<std::vector<double>> empty;
    CHECK_THROWS_AS(classify_lagged(empty, model, -1), Error);
}

TEST_CASE("lagged windows restrict the candidate range", "[classify]") {
    const TrainedModel model = make_test_model();
    // A window claiming history can never map to an index below lag+1.
    const std::vector<std::vector<double>> window{model.fitted_row(1), model.fitted_row(1),
                                                  model.fitted_row(1)};
    CHECK(classify_lagged(window, model, 2) >= 3);
}

TEST_CASE("lagged classification beats single observations under noise", "[classify]") {
    const TrainedModel model = make_test_model();
    std::mt19937_64 rng(20250810);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double noise = 0.12;
    double rms0_total = 0.0, rms4_total = 0.0;
    const int runs = 100;
    for (int run = 0; run < runs; ++run) {
        std::vector<std::vector<double>> observations;
        for (int k = 1; k <= model.segment_count; ++k) {
            std::vector<double> row = model.fitted_row(k);
            for (double& v : row) v += noise * normal(rng);
            observations.push_back(std::move(row));
        }
        std::vector<int> k0, k4, truth;
        for (int s = 0; s < model.segment_count; ++s) {
            truth.push_back(s + 1);
            const int lag0 = 0;
            k0.push_back(classify_lagged({&observations[static_cast<std::size_t>(s)], 1},
                                         model, lag0));
            const int lag = std::min(4, s);
            const std::span<const std::vector<double>> window(
                observations.data() + (s - lag), static_cast<std::size_t>(lag) + 1);
            k4.push_back(classify_lagged(window, model, lag));
        }
        rms0_total += rms_index_error(k0, truth, model.segment_count);
        rms4_total += rms_index_error(k4, truth, model.segment_count);
    }
    CHECK(rms4_total / runs <= rms0_total / runs);
}

TEST_CASE("rms index error conventions", "[classify]") {
    SECTION("perfect estimates give zero") {
        const std::vector<int> truth{1, 2, 3, 4};
        CHECK(rms_index_error(truth, truth, 44) == 0.0);
    }
    SECTION("a constant offset of one") {
        std::vector<int> estimated, truth;
        for (int k = 1; k <= 44; ++k) {
            truth.push_back(k);
            estimated.push_back(k + 1);
        }
        CHECK(rms_index_error(estimated, truth, 44) ==
              Catch::Approx(100.0 / 44.0).margin(1e-12));
    }
    SECTION("empty series is an arity error") {
        CHECK_THROWS_AS(rms_index_error({}, {}, 44), Error);
    }
    SECTION("independent uniform guesses land near the analytic value") {
        std::mt19937_64 rng(606);
        std::uniform_int_distribution<int> pick(1, 44);
        std::vector<int> estimated, truth;
        for (int i = 0; i < 20000; ++i) {
            estimated.push_back(pick(rng));
            truth.push_back(pick(rng));
        }
        // E[(a-b)^2] = (N^2-1)/6 for independent uniforms on [1, N].
        const double expected = 100.0 * std::sqrt((44.0 * 44.0 - 1.0) / 6.0) / 44.0;
        CHECK(rms_index_error(estimated, truth, 44) ==
              Catch::Approx(expected).margin(1.5));
    }
}

TEST_CASE("kinetic energy accumulates over subintervals", "[classify]") {
    const RunnerProfile profile{90.0, 113.6, 44};
    const std::vector<double> speeds(44, 3.0);
    CHECK(kinetic_energy(profile, speeds, 1) == 405.0);
    CHECK(kinetic_energy(profile, speeds, 44) == 44.0 * 405.0);
    const RunnerProfile lighter{52.0, 113.6, 44};
    CHECK(kinetic_energy(lighter, speeds, 22) * 2.0 == kinetic_energy(lighter, speeds, 44));
    CHECK_THROWS_AS(kinetic_energy(profile, speeds, 0), Error);
    CHECK_THROWS_AS(kinetic_energy(profile, speeds, 45), Error);
}

TEST_CASE("fatigue index properties", "[classify]") {
    const RunnerProfile profile{90.0, 113.6, 44};
    SECTION("the full run always reads 100 percent") {
        const std::vector<double> speeds(44, 3.3);
        CHECK(fatigue_index(profile, speeds, 44) == 100.0);
        CHECK(fatigue_index(profile, speeds, 22) == Catch::Approx(50.0).margin(1e-12));
    }
    SECTION("direct arithmetic and mass invariance") {
        const std::vector<double> speeds{2.0, 2.0, 4.0};
        const RunnerProfile p1{90.0, 100.0, 3};
        const RunnerProfile p2{52.0, 100.0, 3};
        CHECK(fatigue_index(p1, speeds, 2) == Catch::Approx(100.0 * 8.0 / 24.0).margin(1e-12));
        CHECK(fatigue_index(p1, speeds, 2) == fatigue_index(p2, speeds, 2));
    }
    SECTION("monotone non-decreasing in the subinterval") {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> speed(0.5, 6.0);
        std::vector<double> speeds(30);
        for (double& v : speeds) v = speed(rng);
        double last = 0.0;
        for (int k = 1; k <= 30; ++k) {
            const double value = fatigue_index(profile, speeds, k);
            CHECK(value >= last);
            last = value;
        }
    }
}

TEST_CASE("noiseless labeled observations score zero error at every lag", "[classify]") {
    const TrainedModel model = make_test_model(20);
    std::vector<std::vector<double>> observations;
    std::vector<int> truth;
    for (int k = 1; k <= model.segment_count; ++k) {
        observations.push_back(model.fitted_row(k));
        truth.push_back(k);
    }
    for (int lag = 0; lag <= 4; ++lag) {
        std::vector<int> estimates;
        for (int s = 0; s < model.segment_count; ++s) {
            const int effective = std::min(lag, s);
            const std::span<const std::vector<double>> window(
                observations.data() + (s - effective), static_cast<std::size_t>(effective) + 1);
            estimates.push_back(classify_lagged(window, model, effective));
        }
        CHECK(rms_index_error(estimates, truth, model.segment_count) == 0.0);
    }
}
