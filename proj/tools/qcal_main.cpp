// Experiment harness: generate synthetic calibration data, train replicate
// regression networks, evaluate estimators against CRB/SQL bounds, and emit
// the bundled per-figure datasets.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qcal/config.hpp"
#include "qcal/experiment.hpp"
#include "qcal/figures.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    int jobs = 1;
    bool quiet = false;
};

qcal::ExperimentConfig resolve_config(const GlobalArgs& args) {
    qcal::ExperimentConfig cfg = qcal::load_config(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    if (args.out_dir) {
        cfg.out_dir = *args.out_dir;
    } else if (const char* env = std::getenv("QCAL_OUT_DIR"); env && cfg.out_dir == "out") {
        cfg.out_dir = env;
    }
    return cfg;
}

std::vector<qcal::fs::path> find_model_files(const std::string& dir) {
    std::vector<qcal::fs::path> files;
    for (const auto& entry : qcal::fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("model_", 0) == 0 && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qcal: calibration of simulated quantum sensors by regression networks"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs args;
    app.add_option("--config", args.config_path, "experiment config (JSON)");
    app.add_option("--seed", args.seed, "master seed override");
    app.add_option("--out", args.out_dir, "output directory override (default: $QCAL_OUT_DIR)");
    app.add_option("--jobs", args.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", args.quiet, "suppress progress output");

    auto* generate = app.add_subcommand("generate", "sample a training set from the config");
    auto* train = app.add_subcommand("train", "train replicate models on a training set");
    std::string data_path;
    train->add_option("--data", data_path, "training-set file (default: <out>/training_set.txt)");
    auto* evaluate = app.add_subcommand("evaluate", "run the estimator sweep");
    std::string models_dir;
    evaluate->add_option("--models", models_dir, "directory of model_*.txt files (default: <out>)");
    auto* figure = app.add_subcommand("figure", "reproduce the dataset behind one figure");
    int figure_id = 0;
    figure->add_option("id", figure_id, "figure id (3..10)")->required();

    CLI11_PARSE(app, argc, argv);

    qcal::RunContext ctx;
    ctx.jobs = args.jobs;
    ctx.quiet = args.quiet;

    try {
        if (figure->parsed()) {
            std::uint64_t seed = args.seed.value_or(20220901ull);
            std::string out = args.out_dir.value_or("");
            if (out.empty()) {
                const char* env = std::getenv("QCAL_OUT_DIR");
                out = env ? env : "out";
            }
            qcal::run_figure(figure_id, seed, out, ctx);
            return 0;
        }

        if (args.config_path.empty()) {
            std::cerr << "error: --config is required\n";
            return 2;
        }
        qcal::ExperimentConfig cfg = resolve_config(args);

        if (generate->parsed()) {
            qcal::cmd_generate(cfg, ctx);
        } else if (train->parsed()) {
            qcal::fs::path data =
                data_path.empty() ? qcal::training_set_path(cfg) : qcal::fs::path(data_path);
            qcal::cmd_train(cfg, data, ctx);
        } else if (evaluate->parsed()) {
            std::string dir = models_dir.empty() ? cfg.out_dir : models_dir;
            auto files = find_model_files(dir);
            bool needs_models = false;
            for (const auto& e : cfg.estimators) needs_models |= (e == "ann");
            if (needs_models && files.empty()) {
                std::cerr << "error: no model_*.txt files in " << dir << "\n";
                return 1;
            }
            qcal::cmd_evaluate(cfg, files, ctx);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
