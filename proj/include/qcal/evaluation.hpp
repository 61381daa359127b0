#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qcal/estimators.hpp"
#include "qcal/grid.hpp"
#include "qcal/likelihood.hpp"
#include "qcal/parallel.hpp"
#include "qcal/rng.hpp"
#include "qcal/training_set.hpp"

namespace qcal {

using EstimatorFn = std::function<double(const Features&)>;

// Monte-Carlo statistics of one estimator at one (theta, nu) cell.
// variance and mse use the 1/n normalisation so mse = variance + bias^2
// holds as an identity.
struct CellStats {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double bias = std::numeric_limits<double>::quiet_NaN();
    double variance = std::numeric_limits<double>::quiet_NaN();
    double mse = std::numeric_limits<double>::quiet_NaN();
    std::int64_t trials = 0;    // successful trials entering the statistics
    std::int64_t failures = 0;  // draws where the estimator had no feasible estimate
};

namespace detail {

struct CountsHash {
    std::size_t operator()(const std::vector<std::int64_t>& counts) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ull;
        for (std::int64_t c : counts) h = splitmix64(h ^ static_cast<std::uint64_t>(c));
        return static_cast<std::size_t>(h);
    }
};

}  // namespace detail

inline CellStats estimator_statistics(const EstimatorFn& estimator, const LikelihoodModel& model,
                                      double theta_true, std::int64_t nu, std::int64_t trials,
                                      Rng& rng) {
    require(trials >= 2, "estimator_statistics: trials must be >= 2");
    std::vector<double> estimates;
    estimates.reserve(trials);
    CellStats cell;
    // estimators are deterministic, so repeated draws of the same tally
    // vector are served from a cell-local memo
    std::unordered_map<std::vector<std::int64_t>, std::optional<double>, detail::CountsHash> memo;
    for (std::int64_t t = 0; t < trials; ++t) {
        FrequencyVector fv = sample_frequencies(model, theta_true, nu, rng);
        auto it = memo.find(fv.counts);
        if (it == memo.end()) {
            std::optional<double> value;
            try {
                value = estimator(to_features(fv));
            } catch (const NoFeasibleEstimateError&) {
            }
            it = memo.emplace(fv.counts, value).first;
        }
        if (it->second) {
            estimates.push_back(*it->second);
        } else {
            cell.failures++;
        }
    }
    cell.trials = static_cast<std::int64_t>(estimates.size());
    if (cell.trials < 2) return cell;

    double sum = 0.0;
    for (double e : estimates) sum += e;
    const double mean = sum / cell.trials;
    double var = 0.0, mse = 0.0;
    for (double e : estimates) {
        var += (e - mean) * (e - mean);
        mse += (e - theta_true) * (e - theta_true);
    }
    cell.mean = mean;
    cell.bias = mean - theta_true;
    cell.variance = var / cell.trials;
    cell.mse = mse / cell.trials;
    return cell;
}

// Prior-weighted average of the CRB over the grid labels.
inline double phase_averaged_crb(const LikelihoodModel& model, const Prior& prior,
                                 const PhaseGrid& grid, std::int64_t m) {
    require(m >= 1, "phase_averaged_crb: m must be >= 1");
    require(static_cast<int>(prior.weights.size()) == grid.count,
            "phase_averaged_crb: prior/grid size mismatch");
    double acc = 0.0;
    for (int j = 0; j < grid.count; ++j) {
        if (prior.weights[j] <= 0.0) continue;
        double fisher = fisher_information(model, grid.point(j));
        if (fisher <= 0.0) throw SingularFisherError(grid.point(j), -1);
        acc += prior.weights[j] / (static_cast<double>(m) * fisher);
    }
    return acc;
}

// Root-mean-square difference between two estimators over a fixed input set.
inline double estimator_distance(const EstimatorFn& estimator, const EstimatorFn& reference,
                                 const std::vector<Features>& inputs) {
    require(!inputs.empty(), "estimator_distance: empty input set");
    double acc = 0.0;
    for (const auto& in : inputs) {
        double diff = estimator(in) - reference(in);
        acc += diff * diff;
    }
    return std::sqrt(acc / inputs.size());
}

// The uniform grid of frequency vectors achievable with `shots` measurements
// of a two-outcome model: f_up in {0, 1/shots, ..., 1}.
inline std::vector<Features> qubit_feature_grid(std::int64_t shots) {
    require(shots >= 1, "qubit_feature_grid: shots must be >= 1");
    std::vector<Features> grid;
    grid.reserve(shots + 1);
    for (std::int64_t k = 0; k <= shots; ++k) {
        double f = static_cast<double>(k) / static_cast<double>(shots);
        grid.push_back(Features{{f, 1.0 - f}, shots});
    }
    return grid;
}

// nu_max (largest nu for which the grid can replicate the MLE), m_min
// (smallest useful number of training shots) and nu_prior (prior-information
// threshold). nu_max and m_min are the same formula by construction.
struct ThresholdReport {
    double nu_max = 0.0;
    double m_min = 0.0;
    double nu_prior = 0.0;
};

inline ThresholdReport resolution_thresholds(const LikelihoodModel& model, const PhaseGrid& grid,
                                             double theta, const Prior& prior) {
    double fisher = fisher_information(model, theta);
    if (fisher <= 0.0) throw SingularFisherError(theta, -1);
    const double dtheta = grid.spacing();
    ThresholdReport report;
    report.nu_max = 1.0 / (fisher * dtheta * dtheta);
    report.m_min = report.nu_max;
    report.nu_prior = prior_fisher_information(prior, grid) / fisher;
    return report;
}

// ---- sweeps ---------------------------------------------------------------

// One estimator id with one function per replicate (trained networks differ
// per replicate; closed-form estimators may supply a single entry).
struct EstimatorSet {
    std::string id;
    std::vector<EstimatorFn> replicates;
};

struct SweepCell {
    std::string estimator_id;
    int replicate = 0;
    double theta = 0.0;
    std::int64_t nu = 0;
    CellStats stats;
    double crb = std::numeric_limits<double>::quiet_NaN();
    double sql = std::numeric_limits<double>::quiet_NaN();
};

struct ThetaThresholds {
    double theta = 0.0;
    std::optional<ThresholdReport> report;  // absent when Fisher/prior is singular there
};

struct EvaluationReport {
    std::vector<SweepCell> cells;
    std::vector<ThetaThresholds> thresholds;
};

// Full cross product (estimator set, replicate, theta, nu). Cell c uses the
// rng seed derive_seed(master, "sweep-cell", c) with c the row-major index in
// that iteration order, so any cell can be recomputed in isolation and
// parallel runs match serial ones bitwise.
inline EvaluationReport sweep(const std::vector<EstimatorSet>& estimators,
                              const LikelihoodModel& model, const std::vector<double>& thetas,
                              const std::vector<std::int64_t>& nus, std::int64_t trials,
                              std::uint64_t master_seed, const Prior& prior, const PhaseGrid& grid,
                              int jobs = 1) {
    require(!estimators.empty() && !thetas.empty() && !nus.empty(), "sweep: empty inputs");

    EvaluationReport report;
    for (double theta : thetas) {
        ThetaThresholds t{theta, std::nullopt};
        try {
            t.report = resolution_thresholds(model, grid, theta, prior);
        } catch (const std::runtime_error&) {
        }
        report.thresholds.push_back(t);
    }

    for (const auto& set : estimators) {
        for (int rep = 0; rep < static_cast<int>(set.replicates.size()); ++rep)
            for (double theta : thetas)
                for (std::int64_t nu : nus) {
                    SweepCell cell;
                    cell.estimator_id = set.id;
                    cell.replicate = rep;
                    cell.theta = theta;
                    cell.nu = nu;
                    cell.sql = sql_variance(model.n_qubits, nu);
                    report.cells.push_back(cell);
                }
    }

    std::vector<const EstimatorFn*> fns;
    fns.reserve(report.cells.size());
    for (const auto& set : estimators)
        for (const auto& fn : set.replicates)
            for (std::size_t k = 0; k < thetas.size() * nus.size(); ++k) fns.push_back(&fn);

    parallel_for(static_cast<std::int64_t>(report.cells.size()), jobs, [&](std::int64_t c) {
        SweepCell& cell = report.cells[c];
        Rng rng = make_rng(derive_seed(master_seed, "sweep-cell", static_cast<std::uint64_t>(c)));
        cell.stats = estimator_statistics(*fns[c], model, cell.theta, cell.nu, trials, rng);
        try {
            cell.crb = crb_variance(model, cell.theta, cell.nu);
        } catch (const SingularFisherError&) {
        }
    });
    return report;
}

namespace detail {

inline std::string csv_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace detail

inline constexpr const char* kReportCsvHeader =
    "estimator,replicate,theta,nu,mean,bias,variance,mse,crb,sql,trials,failures";

inline void write_report_csv(const EvaluationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "write_report_csv: cannot open " + path.string());
    out << kReportCsvHeader << "\n";
    for (const auto& cell : report.cells) {
        out << cell.estimator_id << ',' << cell.replicate << ',' << detail::csv_double(cell.theta)
            << ',' << cell.nu << ',' << detail::csv_double(cell.stats.mean) << ','
            << detail::csv_double(cell.stats.bias) << ',' << detail::csv_double(cell.stats.variance)
            << ',' << detail::csv_double(cell.stats.mse) << ',' << detail::csv_double(cell.crb)
            << ',' << detail::csv_double(cell.sql) << ',' << cell.stats.trials << ','
            << cell.stats.failures << "\n";
    }
    require(out.good(), "write_report_csv: write failed");
}

inline void write_thresholds_csv(const EvaluationReport& report,
                                 const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "write_thresholds_csv: cannot open " + path.string());
    out << "theta,nu_max,m_min,nu_prior\n";
    for (const auto& t : report.thresholds) {
        out << detail::csv_double(t.theta) << ',';
        if (t.report) {
            out << detail::csv_double(t.report->nu_max) << ',' << detail::csv_double(t.report->m_min)
                << ',' << detail::csv_double(t.report->nu_prior);
        } else {
            out << "nan,nan,nan";
        }
        out << "\n";
    }
}

}  // namespace qcal
