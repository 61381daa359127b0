#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcal {

inline constexpr double kPi = 3.14159265358979323846;

// Probability floor distinguishing true zeros from round-off in Fisher
// information and posterior computations.
inline constexpr double kProbEpsilon = 1e-12;

class SingularFisherError : public std::runtime_error {
public:
    SingularFisherError(double theta, int outcome)
        : std::runtime_error("singular Fisher information at theta=" + std::to_string(theta) +
                             (outcome >= 0 ? " (outcome " + std::to_string(outcome) + ")" : "")),
          theta(theta),
          outcome(outcome) {}
    double theta;
    int outcome;  // -1 when no single outcome is responsible
};

class DegeneratePriorError : public std::runtime_error {
public:
    explicit DegeneratePriorError(const std::string& what) : std::runtime_error(what) {}
};

class NonDifferentiablePriorError : public std::runtime_error {
public:
    explicit NonDifferentiablePriorError(const std::string& what) : std::runtime_error(what) {}
};

class NoFeasibleEstimateError : public std::runtime_error {
public:
    explicit NoFeasibleEstimateError(const std::string& what) : std::runtime_error(what) {}
};

class DegeneratePosteriorError : public std::runtime_error {
public:
    explicit DegeneratePosteriorError(const std::string& what) : std::runtime_error(what) {}
};

class GridResolutionError : public std::runtime_error {
public:
    explicit GridResolutionError(const std::string& what) : std::runtime_error(what) {}
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int epoch, double cost)
        : std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                             " (cost " + std::to_string(cost) + ")"),
          epoch(epoch),
          cost(cost) {}
    int epoch;
    double cost;
};

// Relative outcome frequencies f_mu = counts[mu]/shots from one measurement
// sequence. Counts are kept as integers so frequencies and the shot number
// are recoverable exactly.
struct FrequencyVector {
    std::vector<std::int64_t> counts;
    std::int64_t shots = 0;

    std::vector<double> freqs() const {
        std::vector<double> f(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i)
            f[i] = static_cast<double>(counts[i]) / static_cast<double>(shots);
        return f;
    }

    std::int64_t count_sum() const {
        return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    }
};

// Estimator input: frequencies plus the sequence length that produced them.
// Estimators that do not need the shot count (MLE, trained networks) ignore it.
struct Features {
    std::vector<double> freqs;
    std::int64_t shots = 0;
};

inline Features to_features(const FrequencyVector& fv) {
    return Features{fv.freqs(), fv.shots};
}

inline void require(bool condition, const std::string& what) {
    if (!condition) throw std::invalid_argument(what);
}

inline void require_finite(double x, const std::string& name) {
    if (!std::isfinite(x)) throw std::invalid_argument(name + " must be finite");
}

}  // namespace qcal
