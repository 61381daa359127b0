#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qcal/common.hpp"

namespace qcal {

// d uniformly spaced labels theta_j = j * L/(d-1) on [0, L].
struct PhaseGrid {
    double length = kPi;
    int count = 2;

    PhaseGrid() = default;
    PhaseGrid(double grid_length, int point_count) : length(grid_length), count(point_count) {
        require(count >= 2, "PhaseGrid: d must be >= 2");
        require(length > 0.0 && std::isfinite(length), "PhaseGrid: L must be positive and finite");
    }

    double spacing() const { return length / (count - 1); }
    double point(int j) const { return j * spacing(); }

    std::vector<double> points() const {
        std::vector<double> p(count);
        for (int j = 0; j < count; ++j) p[j] = point(j);
        return p;
    }
};

enum class PriorKind { Flat, Gaussian, Step, Custom };

struct PriorSpec {
    PriorKind kind = PriorKind::Flat;
    double theta0 = 0.0;    // Gaussian centre
    double sigma_sq = 0.0;  // Gaussian variance
    double cutoff = 0.0;    // Step support [0, cutoff]
    std::vector<double> weights;  // Custom, aligned to the grid

    static PriorSpec flat() { return PriorSpec{}; }
    static PriorSpec gaussian(double theta0, double sigma_sq) {
        return PriorSpec{PriorKind::Gaussian, theta0, sigma_sq, 0.0, {}};
    }
    static PriorSpec step(double cutoff) {
        return PriorSpec{PriorKind::Step, 0.0, 0.0, cutoff, {}};
    }
    static PriorSpec custom(std::vector<double> weights) {
        return PriorSpec{PriorKind::Custom, 0.0, 0.0, 0.0, std::move(weights)};
    }
};

// Probability weights P(theta_j) over the grid labels, normalised to sum 1.
struct Prior {
    PriorSpec spec;
    std::vector<double> weights;
};

inline Prior make_prior(const PriorSpec& spec, const PhaseGrid& grid) {
    std::vector<double> w(grid.count, 0.0);
    switch (spec.kind) {
        case PriorKind::Flat:
            for (double& x : w) x = 1.0;
            break;
        case PriorKind::Gaussian: {
            require(spec.sigma_sq > 0.0, "make_prior: Gaussian sigma^2 must be > 0");
            require_finite(spec.theta0, "theta0");
            for (int j = 0; j < grid.count; ++j) {
                double d = grid.point(j) - spec.theta0;
                w[j] = std::exp(-d * d / (2.0 * spec.sigma_sq));
            }
            break;
        }
        case PriorKind::Step:
            require(spec.cutoff > 0.0 && spec.cutoff <= grid.length,
                    "make_prior: Step cutoff must be in (0, L]");
            for (int j = 0; j < grid.count; ++j) w[j] = grid.point(j) <= spec.cutoff ? 1.0 : 0.0;
            break;
        case PriorKind::Custom:
            require(static_cast<int>(spec.weights.size()) == grid.count,
                    "make_prior: Custom weights must match the grid size");
            for (int j = 0; j < grid.count; ++j) {
                require(spec.weights[j] >= 0.0 && std::isfinite(spec.weights[j]),
                        "make_prior: Custom weights must be non-negative and finite");
                w[j] = spec.weights[j];
            }
            break;
    }
    double total = 0.0;
    for (double x : w) total += x;
    if (total <= 0.0) throw DegeneratePriorError("make_prior: all weights are zero on the grid");
    for (double& x : w) x /= total;
    return Prior{spec, std::move(w)};
}

// Fisher information of the prior, Eq.-style integral of [p'(theta)]^2/p(theta)
// approximated with central differences of the continuum-normalised density
// p_j = w_j/dtheta over the interior grid points. Exactly zero for a flat
// prior (the differences vanish identically).
inline double prior_fisher_information(const Prior& prior, const PhaseGrid& grid) {
    if (prior.spec.kind == PriorKind::Step)
        throw NonDifferentiablePriorError("prior_fisher_information: step prior is not differentiable");
    require(static_cast<int>(prior.weights.size()) == grid.count,
            "prior_fisher_information: prior/grid size mismatch");
    const double dtheta = grid.spacing();
    double acc = 0.0;
    for (int j = 1; j + 1 < grid.count; ++j) {
        double density = prior.weights[j] / dtheta;
        double slope = (prior.weights[j + 1] - prior.weights[j - 1]) / (2.0 * dtheta * dtheta);
        if (density == 0.0) {
            if (slope != 0.0)
                throw NonDifferentiablePriorError(
                    "prior_fisher_information: zero interior weight with non-zero slope at j=" +
                    std::to_string(j));
            continue;
        }
        acc += slope * slope / density * dtheta;
    }
    return acc;
}

}  // namespace qcal
