#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "qcal/config.hpp"
#include "qcal/evaluation.hpp"
#include "qcal/mlp.hpp"
#include "qcal/parallel.hpp"

namespace qcal {

namespace fs = std::filesystem;

// Output files are written to a temp path and renamed into place.
inline void write_text_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        require(out.good(), "write_text_atomic: cannot open " + tmp.string());
        out << content;
        require(out.good(), "write_text_atomic: write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

template <class Saver>
inline void write_file_atomic(const fs::path& path, Saver&& saver) {
    fs::path tmp = path;
    tmp += ".tmp";
    saver(tmp);
    fs::rename(tmp, path);
}

// MLE search domains: the qubit likelihood is identifiable on [0, pi]; the
// twin-Fock likelihood only on [0, pi/2].
inline SearchConfig default_search(const LikelihoodModel& model) {
    SearchConfig search;
    search.lo = 0.0;
    search.hi = model.kind == ModelKind::Qubit ? kPi : kPi / 2.0;
    return search;
}

// ---- estimator builders ----------------------------------------------------

inline EstimatorFn ann_estimator(std::shared_ptr<const MlpParams> params) {
    return [params](const Features& in) { return forward(*params, in.freqs); };
}

inline EstimatorFn mle_estimator(const LikelihoodModel& model, const SearchConfig& search) {
    return [model, search](const Features& in) { return mle(model, in.freqs, search); };
}

inline EstimatorFn analytic_qubit_estimator() {
    return [](const Features& in) { return qubit_mle_analytic(in.freqs.at(0)); };
}

inline EstimatorFn map_estimator(const LikelihoodModel& model, Prior prior, const PhaseGrid& grid,
                                 const SearchConfig& search) {
    return [model, prior = std::move(prior), grid, search](const Features& in) {
        return map_estimate(model, in.freqs, in.shots, prior, grid, search);
    };
}

// ---- command drivers -------------------------------------------------------

struct RunContext {
    int jobs = 1;
    bool quiet = false;
    std::ostream* log = &std::cout;

    void say(const std::string& line) const {
        if (!quiet) (*log) << line << "\n";
    }
};

inline fs::path training_set_path(const ExperimentConfig& cfg) {
    return fs::path(cfg.out_dir) / "training_set.txt";
}

inline fs::path cmd_generate(const ExperimentConfig& cfg, const RunContext& ctx = {}) {
    fs::create_directories(cfg.out_dir);
    Prior prior = make_prior(cfg.prior, cfg.grid);
    GenerateOptions opts;
    opts.fixed_quota = cfg.fixed_quota;
    TrainingSet set = generate_training_set(cfg.model, cfg.grid, prior, cfg.m_total, cfg.shots_m,
                                            derive_seed(cfg.seed, "generate", 0), opts);
    fs::path path = training_set_path(cfg);
    write_file_atomic(path, [&](const fs::path& tmp) { save_training_set(set, tmp); });
    ctx.say("wrote " + path.string() + " (" + std::to_string(set.records.size()) + " records)");
    ctx.say("label histogram (j, theta_j, M_j):");
    for (int j = 0; j < cfg.grid.count; ++j)
        ctx.say("  " + std::to_string(j) + "  " + detail::csv_double(cfg.grid.point(j)) + "  " +
                std::to_string(set.per_label_counts[j]));
    return path;
}

inline fs::path model_path(const ExperimentConfig& cfg, int replicate) {
    char name[32];
    std::snprintf(name, sizeof(name), "model_%03d.txt", replicate);
    return fs::path(cfg.out_dir) / name;
}

struct TrainOutcome {
    std::vector<fs::path> model_files;
    fs::path cost_history;
    std::vector<TrainResult> results;
    double crb_target = 0.0;
};

// Trains cfg.replicates models with derived seeds and writes the per-epoch
// cost CSV with the phase-averaged CRB as a constant column.
inline TrainOutcome cmd_train(const ExperimentConfig& cfg, const fs::path& data_path,
                              const RunContext& ctx = {}) {
    fs::create_directories(cfg.out_dir);
    TrainingSet set = load_training_set(data_path);
    const std::string header = training_set_header(set);
    const double crb_target =
        phase_averaged_crb(set.model, set.prior, set.grid, set.shots_per_record);

    TrainOutcome outcome;
    outcome.crb_target = crb_target;
    outcome.results.resize(cfg.replicates);
    outcome.model_files.resize(cfg.replicates);

    parallel_for(cfg.replicates, ctx.jobs, [&](std::int64_t r) {
        MlpParams init = init_network(set.model.outcome_count(), cfg.hidden,
                                      derive_seed(cfg.seed, "train-init", r));
        TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, "train-shuffle", r);
        outcome.results[r] = cfg.train_until_crb
                                 ? train_until_crb(set, std::move(init), tc, crb_target, cfg.crb_slack)
                                 : train(set, std::move(init), tc);
    });

    for (int r = 0; r < cfg.replicates; ++r) {
        PersistedModel pm{outcome.results[r].params, derive_seed(cfg.seed, "train-shuffle", r),
                          header};
        outcome.model_files[r] = model_path(cfg, r);
        write_file_atomic(outcome.model_files[r],
                          [&](const fs::path& tmp) { save_model(pm, tmp); });
    }

    std::string csv = "replicate,epoch,cost,crb_phase_av\n";
    for (int r = 0; r < cfg.replicates; ++r) {
        const auto& history = outcome.results[r].history;
        for (std::size_t e = 0; e < history.size(); ++e)
            csv += std::to_string(r) + "," + std::to_string(e) + "," +
                   detail::csv_double(history[e]) + "," + detail::csv_double(crb_target) + "\n";
    }
    outcome.cost_history = fs::path(cfg.out_dir) / "cost_history.csv";
    write_text_atomic(outcome.cost_history, csv);

    for (int r = 0; r < cfg.replicates; ++r) {
        const auto& res = outcome.results[r];
        ctx.say("replicate " + std::to_string(r) + ": " + std::to_string(res.history.size()) +
                " epochs, final cost " +
                (res.history.empty() ? std::string("(none)") : detail::csv_double(res.history.back())) +
                (cfg.train_until_crb ? (res.saturated ? " [saturated]" : " [cap reached]") : ""));
    }
    return outcome;
}

inline std::vector<EstimatorSet> build_estimator_sets(const ExperimentConfig& cfg,
                                                      const std::vector<fs::path>& model_files) {
    SearchConfig search = default_search(cfg.model);
    Prior prior = make_prior(cfg.prior, cfg.grid);
    std::vector<EstimatorSet> sets;
    for (const auto& id : cfg.estimators) {
        EstimatorSet set;
        set.id = id;
        if (id == "ann") {
            for (const auto& file : model_files) {
                auto params = std::make_shared<MlpParams>(load_model(file).params);
                require(params->input_width() == cfg.model.outcome_count(),
                        "evaluate: model input width does not match the likelihood model");
                set.replicates.push_back(ann_estimator(std::move(params)));
            }
        } else if (id == "mle") {
            set.replicates.push_back(mle_estimator(cfg.model, search));
        } else if (id == "mle_analytic") {
            require(cfg.model.kind == ModelKind::Qubit,
                    "evaluate: mle_analytic applies to the qubit model only");
            set.replicates.push_back(analytic_qubit_estimator());
        } else if (id == "map") {
            set.replicates.push_back(map_estimator(cfg.model, prior, cfg.grid, search));
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

struct EvaluateOutcome {
    fs::path report_csv;
    fs::path thresholds_csv;
    EvaluationReport report;
};

inline EvaluateOutcome cmd_evaluate(const ExperimentConfig& cfg,
                                    const std::vector<fs::path>& model_files,
                                    const RunContext& ctx = {}) {
    require(!cfg.eval_thetas.empty() && !cfg.eval_nus.empty(),
            "evaluate: evaluation.thetas and evaluation.nus must be non-empty");
    fs::create_directories(cfg.out_dir);
    Prior prior = make_prior(cfg.prior, cfg.grid);
    auto sets = build_estimator_sets(cfg, model_files);
    EvaluateOutcome outcome;
    outcome.report = sweep(sets, cfg.model, cfg.eval_thetas, cfg.eval_nus, cfg.eval_trials,
                           derive_seed(cfg.seed, "evaluate", 0), prior, cfg.grid, ctx.jobs);
    outcome.report_csv = fs::path(cfg.out_dir) / "evaluation.csv";
    outcome.thresholds_csv = fs::path(cfg.out_dir) / "thresholds.csv";
    write_file_atomic(outcome.report_csv,
                      [&](const fs::path& tmp) { write_report_csv(outcome.report, tmp); });
    write_file_atomic(outcome.thresholds_csv,
                      [&](const fs::path& tmp) { write_thresholds_csv(outcome.report, tmp); });
    ctx.say("wrote " + outcome.report_csv.string() + " (" +
            std::to_string(outcome.report.cells.size()) + " cells)");
    return outcome;
}

}  // namespace qcal
