#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "qcal/estimators.hpp"
#include "qcal/rng.hpp"

using namespace qcal;

namespace {

SearchConfig qubit_search() {
    SearchConfig s;
    s.lo = 0.0;
    s.hi = kPi;
    return s;
}

SearchConfig twin_fock_search() {
    SearchConfig s;
    s.lo = 0.0;
    s.hi = kPi / 2.0;
    return s;
}

}  // namespace

TEST_CASE("log likelihood values and the -inf sentinel") {
    auto model = LikelihoodModel::qubit();
    CHECK(log_likelihood(model, {1.0, 0.0}, 0.0) == 0.0);
    CHECK(log_likelihood(model, {1.0, 0.0}, kPi) == kNegInf);
    CHECK(log_likelihood(model, {0.5, 0.5}, kPi / 2.0) ==
          Catch::Approx(std::log(0.5)).margin(1e-12));
    CHECK_THROWS_AS(log_likelihood(model, {0.5, 0.25, 0.25}, 0.1), std::invalid_argument);
}

TEST_CASE("analytic qubit MLE") {
    CHECK(qubit_mle_analytic(1.0) == Catch::Approx(0.0).margin(1e-15));
    CHECK(qubit_mle_analytic(0.0) == Catch::Approx(kPi).margin(1e-12));
    CHECK(qubit_mle_analytic(0.5) == Catch::Approx(kPi / 2.0).margin(1e-12));
    CHECK_THROWS_AS(qubit_mle_analytic(-0.01), std::invalid_argument);
    CHECK_THROWS_AS(qubit_mle_analytic(1.01), std::invalid_argument);

    double prev = qubit_mle_analytic(0.01);
    for (int k = 2; k < 100; ++k) {
        double next = qubit_mle_analytic(k * 0.01);
        CHECK(next < prev);  // strictly decreasing in f_up
        prev = next;
    }
}

TEST_CASE("grid-search MLE equals the analytic qubit MLE") {
    auto model = LikelihoodModel::qubit();
    auto search = qubit_search();
    Rng rng = make_rng(314);
    std::uniform_int_distribution<std::int64_t> up(0, 1000);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        double f = static_cast<double>(up(rng)) / 1000.0;
        double diff = std::abs(mle(model, {f, 1.0 - f}, search) - qubit_mle_analytic(f));
        worst = std::max(worst, diff);
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("twin-Fock MLE against a dense scan of the log-likelihood") {
    auto model = LikelihoodModel::twin_fock(4);
    auto search = twin_fock_search();
    const double theta_true = 0.2 * kPi;
    Rng rng = make_rng(55);
    auto fv = sample_frequencies(model, theta_true, 100000, rng);
    auto freqs = fv.freqs();

    double estimate = mle(model, freqs, search);
    // CRB-width consistency: 3 / sqrt(m F) with F = 12
    CHECK(std::abs(estimate - theta_true) < 3.0 / std::sqrt(100000.0 * 12.0));

    double best_theta = 0.0, best_value = kNegInf;
    const int n = 1000000;
    for (int i = 0; i <= n; ++i) {
        double theta = (kPi / 2.0) * i / n;
        double value = log_likelihood(model, freqs, theta);
        if (value > best_value) {
            best_value = value;
            best_theta = theta;
        }
    }
    CHECK(std::abs(estimate - best_theta) < 1e-6 + kPi / 2.0 / n);
}

TEST_CASE("MLE feasibility error") {
    auto model = LikelihoodModel::qubit();
    SearchConfig s;
    s.lo = kPi;
    s.hi = kPi + 1e-9;  // squeeze the domain onto the impossible point
    CHECK_THROWS_AS(mle(model, {1.0, 0.0}, s), NoFeasibleEstimateError);
}

TEST_CASE("MAP with a flat prior equals the MLE") {
    auto model = LikelihoodModel::qubit();
    auto search = qubit_search();
    PhaseGrid grid(kPi, 10);
    Prior flat = make_prior(PriorSpec::flat(), grid);
    Rng rng = make_rng(2718);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        double f = uni(rng);
        CHECK(std::abs(map_estimate(model, {f, 1.0 - f}, 10, flat, grid, search) -
                       mle(model, {f, 1.0 - f}, search)) < 1e-6);
    }
}

TEST_CASE("MAP converges to the MLE as m grows") {
    auto model = LikelihoodModel::qubit();
    auto search = qubit_search();
    PhaseGrid grid(kPi, 50);
    Prior prior = make_prior(PriorSpec::gaussian(kPi / 2.0, 0.5), grid);
    std::vector<double> freqs{0.7, 0.3};
    double reference = mle(model, freqs, search);

    double prev = std::numeric_limits<double>::infinity();
    for (std::int64_t m : {10, 100, 1000, 10000}) {
        double diff = std::abs(map_estimate(model, freqs, m, prior, grid, search) - reference);
        CHECK(diff < prev);
        prev = diff;
    }
    CHECK(prev < 1e-5);  // 10 x search accuracy at m = 10^4... well below
}

TEST_CASE("MAP is pulled toward the prior mean") {
    auto model = LikelihoodModel::qubit();
    auto search = qubit_search();
    PhaseGrid grid(kPi, 50);
    Prior prior = make_prior(PriorSpec::gaussian(kPi / 2.0, 0.5), grid);
    // f_up = 1 has MLE 0; the penalty gradient at 0+ is positive
    double estimate = map_estimate(model, {1.0, 0.0}, 10, prior, grid, search);
    CHECK(estimate > 1e-3);

    // dense-scan oracle of the penalised objective
    const auto log_weights = [&] {
        std::vector<double> lw(prior.weights.size());
        for (std::size_t j = 0; j < lw.size(); ++j) lw[j] = std::log(prior.weights[j]);
        return lw;
    }();
    double best_theta = 0.0, best_value = kNegInf;
    const int n = 2000000;
    for (int i = 0; i <= n; ++i) {
        double theta = kPi * i / n;
        double pos = theta / grid.spacing();
        int j = std::min(static_cast<int>(pos), grid.count - 2);
        double t = pos - j;
        double lp = (1.0 - t) * log_weights[j] + t * log_weights[j + 1];
        double value = log_likelihood(model, {1.0, 0.0}, theta) + lp / 10.0;
        if (value > best_value) {
            best_value = value;
            best_theta = theta;
        }
    }
    CHECK(std::abs(estimate - best_theta) < 1e-5);
}

TEST_CASE("MAP with an all-zero prior on the domain") {
    auto model = LikelihoodModel::qubit();
    PhaseGrid grid(kPi, 10);
    Prior step = make_prior(PriorSpec::step(kPi / 2.0), grid);
    SearchConfig s;
    s.lo = 0.75 * kPi;  // entirely beyond the support
    s.hi = kPi;
    CHECK_THROWS_AS(map_estimate(model, {0.5, 0.5}, 10, step, grid, s), NoFeasibleEstimateError);
}

TEST_CASE("posterior with no evidence equals the prior") {
    auto model = LikelihoodModel::qubit();
    PhaseGrid grid(kPi, 30);
    Prior prior = make_prior(PriorSpec::gaussian(1.0, 0.3), grid);
    auto post = posterior_on_grid(model, {0.5, 0.5}, 0, prior, grid);
    for (int j = 0; j < grid.count; ++j)
        CHECK(post.probs[j] == Catch::Approx(prior.weights[j]).margin(1e-14));
}

TEST_CASE("posterior concentrates at the asymptotic rate") {
    auto model = LikelihoodModel::qubit();
    PhaseGrid grid(kPi, 2000);
    Prior flat = make_prior(PriorSpec::flat(), grid);
    const std::int64_t m = 10000;
    auto post = posterior_on_grid(model, {0.5, 0.5}, m, flat, grid);

    double total = 0.0, mass_near = 0.0;
    const double width = 3.0 / std::sqrt(static_cast<double>(m));  // F = 1
    for (int j = 0; j < grid.count; ++j) {
        total += post.probs[j];
        if (std::abs(grid.point(j) - kPi / 2.0) < width) mass_near += post.probs[j];
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
    CHECK(mass_near > 0.99);
}

TEST_CASE("posterior respects prior support and degenerates cleanly") {
    auto model = LikelihoodModel::qubit();
    PhaseGrid grid(kPi, 20);
    Prior step = make_prior(PriorSpec::step(kPi / 2.0), grid);
    auto post = posterior_on_grid(model, {0.3, 0.7}, 50, step, grid);
    for (int j = 0; j < grid.count; ++j)
        if (grid.point(j) > kPi / 2.0) CHECK(post.probs[j] == 0.0);

    // prior mass only where the observation is impossible
    std::vector<double> delta_end(grid.count, 0.0);
    delta_end.back() = 1.0;  // theta = pi, where P(up) = 0
    Prior degenerate = make_prior(PriorSpec::custom(delta_end), grid);
    CHECK_THROWS_AS(posterior_on_grid(model, {1.0, 0.0}, 10, degenerate, grid),
                    DegeneratePosteriorError);
}

TEST_CASE("gaussian posterior check") {
    auto model = LikelihoodModel::qubit();
    PhaseGrid grid(kPi, 2000);
    Prior flat = make_prior(PriorSpec::flat(), grid);
    const std::int64_t m = 10000;
    auto post = posterior_on_grid(model, {0.5, 0.5}, m, flat, grid);

    double deviation = gaussian_posterior_check(post, kPi / 2.0, m, 1.0);
    double peak_density = std::sqrt(m * 1.0 / (2.0 * kPi));
    CHECK(deviation < 0.05 * peak_density);

    // non-asymptotic m: the check still returns a (large) deviation
    auto post_small = posterior_on_grid(model, {0.5, 0.5}, 10, flat, grid);
    CHECK(std::isfinite(gaussian_posterior_check(post_small, kPi / 2.0, 10, 1.0)));

    PhaseGrid coarse(kPi, 50);
    Prior flat_coarse = make_prior(PriorSpec::flat(), coarse);
    auto post_coarse = posterior_on_grid(model, {0.5, 0.5}, m, flat_coarse, coarse);
    CHECK_THROWS_AS(gaussian_posterior_check(post_coarse, kPi / 2.0, m, 1.0),
                    GridResolutionError);
}
