#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "qcal/common.hpp"
#include "qcal/rng.hpp"

namespace qcal {

// Default central-difference step for finite-difference Fisher information.
inline constexpr double kFisherFdStep = 1e-5;

// Distribution over the D discrete measurement outcomes at one phase.
struct OutcomeDistribution {
    std::vector<double> probs;
};

enum class ModelKind { Qubit, TwinFock };

// A parameter-conditioned measurement model P(mu|theta). Qubit: two outcomes
// (up/down after a sigma_y rotation). TwinFock: N+1 J_z outcomes of a rotated
// N-qubit twin-Fock state; outcome mu maps to the eigenvalue m = mu - N/2.
struct LikelihoodModel {
    ModelKind kind = ModelKind::Qubit;
    int n_qubits = 1;

    static LikelihoodModel qubit() { return LikelihoodModel{ModelKind::Qubit, 1}; }

    static LikelihoodModel twin_fock(int n) {
        require(n >= 2 && n % 2 == 0, "twin_fock: N must be even and >= 2");
        return LikelihoodModel{ModelKind::TwinFock, n};
    }

    int outcome_count() const { return kind == ModelKind::Qubit ? 2 : n_qubits + 1; }

    std::string name() const {
        return kind == ModelKind::Qubit ? "qubit" : "twinfock " + std::to_string(n_qubits);
    }
};

inline OutcomeDistribution qubit_likelihood(double theta) {
    require_finite(theta, "theta");
    double c = std::cos(theta / 2.0);
    double p_up = c * c;
    return OutcomeDistribution{{p_up, 1.0 - p_up}};
}

namespace detail {

// Spectral data of J_y for spin j = N/2. The similarity transform
// |m> -> i^m |m> turns J_y into a real symmetric tridiagonal matrix T with
// off-diagonal sqrt(j(j+1) - m(m+1))/2, so exp(-i theta J_y) acting on the
// m=0 Dicke state reduces to real trigonometric sums over the eigenpairs of
// T: the transform's phases drop out of |amplitude|^2.
struct TwinFockTable {
    std::vector<double> eigenvalues;
    // weight[l * dim + k] = V(k,l) * V(k0,l) with k0 the m=0 row
    std::vector<double> weights;
    int dim = 0;
};

inline const TwinFockTable& twin_fock_table(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<TwinFockTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;

    const int dim = n + 1;
    const double j = n / 2.0;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k + 1 < dim; ++k) {
        double m = k - j;
        double off = 0.5 * std::sqrt(j * (j + 1.0) - m * (m + 1.0));
        t(k, k + 1) = off;
        t(k + 1, k) = off;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t);
    require(solver.info() == Eigen::Success, "twin_fock: eigendecomposition failed");

    auto table = std::make_unique<TwinFockTable>();
    table->dim = dim;
    table->eigenvalues.resize(dim);
    table->weights.resize(static_cast<std::size_t>(dim) * dim);
    const int k0 = n / 2;  // row of the m = 0 Dicke state
    for (int l = 0; l < dim; ++l) {
        table->eigenvalues[l] = solver.eigenvalues()(l);
        for (int k = 0; k < dim; ++k)
            table->weights[static_cast<std::size_t>(l) * dim + k] =
                solver.eigenvectors()(k, l) * solver.eigenvectors()(k0, l);
    }
    const TwinFockTable& ref = *table;
    cache.emplace(n, std::move(table));
    return ref;
}

}  // namespace detail

inline OutcomeDistribution twin_fock_likelihood(int n, double theta) {
    require(n >= 2 && n % 2 == 0, "twin_fock_likelihood: N must be even and >= 2");
    require_finite(theta, "theta");
    const auto& table = detail::twin_fock_table(n);
    const int dim = table.dim;
    std::vector<double> re(dim, 0.0), im(dim, 0.0);
    for (int l = 0; l < dim; ++l) {
        double c = std::cos(theta * table.eigenvalues[l]);
        double s = std::sin(theta * table.eigenvalues[l]);
        const double* w = table.weights.data() + static_cast<std::size_t>(l) * dim;
        for (int k = 0; k < dim; ++k) {
            re[k] += w[k] * c;
            im[k] += w[k] * s;
        }
    }
    std::vector<double> probs(dim);
    for (int k = 0; k < dim; ++k) probs[k] = re[k] * re[k] + im[k] * im[k];
    return OutcomeDistribution{std::move(probs)};
}

inline OutcomeDistribution outcome_distribution(const LikelihoodModel& model, double theta) {
    return model.kind == ModelKind::Qubit ? qubit_likelihood(theta)
                                          : twin_fock_likelihood(model.n_qubits, theta);
}

// Classical Fisher information F(theta) = sum_mu [dP(mu|theta)/dtheta]^2 / P(mu|theta).
//
// Qubit: the derivative is analytic and the quotients simplify before any
// division, [P_up']^2/P_up = sin^2(theta/2) and [P_down']^2/P_down =
// cos^2(theta/2), so F = 1 on the whole interval including the removable
// points theta = 0, pi.
//
// TwinFock: central finite differences with step fd_step. Outcomes with
// P < kProbEpsilon are skipped when the squared derivative is below
// kProbEpsilon^2 (removable limit) and reported as singular otherwise.
inline double fisher_information(const LikelihoodModel& model, double theta,
                                 double fd_step = kFisherFdStep) {
    require_finite(theta, "theta");
    if (model.kind == ModelKind::Qubit) return 1.0;

    require(fd_step > 0.0, "fisher_information: fd_step must be > 0");
    const auto plus = twin_fock_likelihood(model.n_qubits, theta + fd_step);
    const auto minus = twin_fock_likelihood(model.n_qubits, theta - fd_step);
    const auto center = twin_fock_likelihood(model.n_qubits, theta);
    double fisher = 0.0;
    for (std::size_t mu = 0; mu < center.probs.size(); ++mu) {
        double dp = (plus.probs[mu] - minus.probs[mu]) / (2.0 * fd_step);
        double numerator = dp * dp;
        if (center.probs[mu] < kProbEpsilon) {
            if (numerator < kProbEpsilon * kProbEpsilon) continue;
            throw SingularFisherError(theta, static_cast<int>(mu));
        }
        fisher += numerator / center.probs[mu];
    }
    return fisher;
}

// Cramer-Rao bound on the estimate variance after nu shots.
inline double crb_variance(const LikelihoodModel& model, double theta, std::int64_t nu,
                           double fd_step = kFisherFdStep) {
    require(nu >= 1, "crb_variance: nu must be >= 1");
    double fisher = fisher_information(model, theta, fd_step);
    if (fisher <= 0.0) throw SingularFisherError(theta, -1);
    return 1.0 / (static_cast<double>(nu) * fisher);
}

// Standard quantum limit 1/(nu N) for N uncorrelated qubits per shot.
inline double sql_variance(int n_qubits, std::int64_t nu) {
    require(n_qubits >= 1, "sql_variance: N must be >= 1");
    require(nu >= 1, "sql_variance: nu must be >= 1");
    return 1.0 / (static_cast<double>(nu) * static_cast<double>(n_qubits));
}

inline FrequencyVector sample_frequencies(const LikelihoodModel& model, double theta,
                                          std::int64_t shots, Rng& rng) {
    require(shots >= 1, "sample_frequencies: shots must be >= 1");
    auto dist = outcome_distribution(model, theta);
    return FrequencyVector{multinomial_sample(rng, dist.probs, shots), shots};
}

}  // namespace qcal
