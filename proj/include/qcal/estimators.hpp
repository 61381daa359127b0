#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "qcal/grid.hpp"
#include "qcal/likelihood.hpp"

namespace qcal {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-shot log-likelihood sum_mu f_mu log P(mu|theta). Returns -inf when an
// observed outcome has zero probability (a value, not an error: the argmax
// searches simply exclude it).
inline double log_likelihood(const LikelihoodModel& model, const std::vector<double>& freqs,
                             double theta) {
    require(static_cast<int>(freqs.size()) == model.outcome_count(),
            "log_likelihood: frequency vector has wrong dimension");
    auto dist = outcome_distribution(model, theta);
    double acc = 0.0;
    for (std::size_t mu = 0; mu < freqs.size(); ++mu) {
        if (freqs[mu] <= 0.0) continue;
        if (dist.probs[mu] <= 0.0) return kNegInf;
        acc += freqs[mu] * std::log(dist.probs[mu]);
    }
    return acc;
}

// Argmax search: coarse scan over the domain, then repeated refinement around
// the incumbent with the bracket shrunk by `shrink` per level.
struct SearchConfig {
    int levels = 3;
    int points_per_level = 1001;
    double lo = 0.0;
    double hi = kPi;
    double shrink = 100.0;
};

namespace detail {

template <class Objective>
double argmax_refine(Objective&& objective, const SearchConfig& search) {
    require(search.hi > search.lo, "argmax_refine: empty search domain");
    require(search.levels >= 1 && search.points_per_level >= 2, "argmax_refine: bad search config");

    double lo = search.lo, hi = search.hi;
    double best_theta = 0.0;
    double best_value = kNegInf;
    bool found = false;
    for (int level = 0; level < search.levels; ++level) {
        const int n = search.points_per_level;
        const double step = (hi - lo) / (n - 1);
        for (int i = 0; i < n; ++i) {
            double theta = lo + i * step;
            double value = objective(theta);
            // strict improvement keeps the first (smallest theta) maximiser
            if (!found || value > best_value) {
                if (value == kNegInf) continue;
                best_value = value;
                best_theta = theta;
                found = true;
            }
        }
        if (!found) throw NoFeasibleEstimateError("argmax_refine: objective is -inf everywhere");
        double width = (hi - lo) / search.shrink;
        lo = std::max(search.lo, best_theta - width / 2.0);
        hi = std::min(search.hi, best_theta + width / 2.0);
    }
    return best_theta;
}

}  // namespace detail

// Grid-search MLE, Eq.-style argmax of the log-likelihood.
inline double mle(const LikelihoodModel& model, const std::vector<double>& freqs,
                  const SearchConfig& search) {
    return detail::argmax_refine(
        [&](double theta) { return log_likelihood(model, freqs, theta); }, search);
}

// Closed-form qubit MLE, monotonic on [0, pi].
inline double qubit_mle_analytic(double f_up) {
    require(f_up >= 0.0 && f_up <= 1.0, "qubit_mle_analytic: f_up must be in [0, 1]");
    return 2.0 * std::acos(std::sqrt(f_up));
}

namespace detail {

// log P(theta) interpolated linearly in log-weight between grid points;
// zero weight (or theta outside the grid span) is -inf.
inline double log_prior_interp(const std::vector<double>& log_weights, const PhaseGrid& grid,
                               double theta) {
    if (theta < 0.0 || theta > grid.length) return kNegInf;
    const double pos = theta / grid.spacing();
    int j = static_cast<int>(pos);
    if (j >= grid.count - 1) return log_weights[grid.count - 1];
    double t = pos - j;
    if (t == 0.0) return log_weights[j];
    if (log_weights[j] == kNegInf || log_weights[j + 1] == kNegInf) return kNegInf;
    return (1.0 - t) * log_weights[j] + t * log_weights[j + 1];
}

inline std::vector<double> log_weights_of(const Prior& prior) {
    std::vector<double> lw(prior.weights.size());
    for (std::size_t j = 0; j < prior.weights.size(); ++j)
        lw[j] = prior.weights[j] > 0.0 ? std::log(prior.weights[j]) : kNegInf;
    return lw;
}

}  // namespace detail

// MAP estimate: argmax of sum_mu f_mu log P(mu|theta) + log P(theta)/m.
// m must be supplied explicitly; the frequencies alone do not carry it.
inline double map_estimate(const LikelihoodModel& model, const std::vector<double>& freqs,
                           std::int64_t shots_m, const Prior& prior, const PhaseGrid& grid,
                           const SearchConfig& search) {
    require(shots_m >= 1, "map_estimate: m must be >= 1");
    const auto log_weights = detail::log_weights_of(prior);
    return detail::argmax_refine(
        [&](double theta) {
            double lp = detail::log_prior_interp(log_weights, grid, theta);
            if (lp == kNegInf) return kNegInf;
            double ll = log_likelihood(model, freqs, theta);
            if (ll == kNegInf) return kNegInf;
            return ll + lp / static_cast<double>(shots_m);
        },
        search);
}

struct PosteriorOnGrid {
    PhaseGrid grid;
    std::vector<double> probs;
};

// Bayesian posterior over the grid labels, computed in log space with
// max-subtraction before exponentiating.
inline PosteriorOnGrid posterior_on_grid(const LikelihoodModel& model,
                                         const std::vector<double>& freqs, std::int64_t shots_m,
                                         const Prior& prior, const PhaseGrid& grid) {
    require(shots_m >= 0, "posterior_on_grid: m must be >= 0");
    require(static_cast<int>(prior.weights.size()) == grid.count,
            "posterior_on_grid: prior/grid size mismatch");
    std::vector<double> log_post(grid.count, kNegInf);
    double max_log = kNegInf;
    for (int j = 0; j < grid.count; ++j) {
        if (prior.weights[j] <= 0.0) continue;
        double ll = log_likelihood(model, freqs, grid.point(j));
        if (ll == kNegInf) continue;
        log_post[j] = static_cast<double>(shots_m) * ll + std::log(prior.weights[j]);
        max_log = std::max(max_log, log_post[j]);
    }
    if (max_log == kNegInf)
        throw DegeneratePosteriorError("posterior_on_grid: all grid weights vanish");
    std::vector<double> probs(grid.count, 0.0);
    double total = 0.0;
    for (int j = 0; j < grid.count; ++j) {
        if (log_post[j] == kNegInf) continue;
        probs[j] = std::exp(log_post[j] - max_log);
        total += probs[j];
    }
    if (total <= 0.0) throw DegeneratePosteriorError("posterior_on_grid: posterior underflowed");
    for (double& p : probs) p /= total;
    return PosteriorOnGrid{grid, std::move(probs)};
}

// Max absolute deviation of the grid posterior density from the asymptotic
// Gaussian sqrt(mF/2pi) exp(-mF (theta - theta_hat)^2 / 2). Requires the grid
// to resolve the Gaussian width 1/sqrt(mF).
inline double gaussian_posterior_check(const PosteriorOnGrid& post, double theta_hat,
                                       std::int64_t shots_m, double fisher) {
    require(shots_m >= 1 && fisher > 0.0, "gaussian_posterior_check: need m >= 1 and F > 0");
    const double dtheta = post.grid.spacing();
    const double width = 1.0 / std::sqrt(static_cast<double>(shots_m) * fisher);
    if (dtheta >= 0.2 * width)
        throw GridResolutionError("gaussian_posterior_check: grid spacing " +
                                  std::to_string(dtheta) + " does not resolve width " +
                                  std::to_string(width));
    const double mf = static_cast<double>(shots_m) * fisher;
    const double norm = std::sqrt(mf / (2.0 * kPi));
    double max_dev = 0.0;
    for (int j = 0; j < post.grid.count; ++j) {
        double diff = post.grid.point(j) - theta_hat;
        double gauss = norm * std::exp(-mf * diff * diff / 2.0);
        max_dev = std::max(max_dev, std::abs(post.probs[j] / dtheta - gauss));
    }
    return max_dev;
}

}  // namespace qcal
