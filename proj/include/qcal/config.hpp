#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcal/grid.hpp"
#include "qcal/likelihood.hpp"
#include "qcal/mlp.hpp"

namespace qcal {

// One experiment = one config document. Loading is strict: unknown keys are
// rejected, and every referenced module invariant is checked by constructing
// the corresponding objects.
struct ExperimentConfig {
    LikelihoodModel model;
    PhaseGrid grid;
    PriorSpec prior;
    std::int64_t shots_m = 1;       // m, shots per training feature vector
    std::int64_t m_total = 1;       // total number of training records
    bool fixed_quota = false;
    std::vector<int> hidden = {1024};
    TrainConfig train;
    bool train_until_crb = false;
    double crb_slack = 1.2;
    std::vector<double> eval_thetas;
    std::vector<std::int64_t> eval_nus;
    std::int64_t eval_trials = 10000;
    int replicates = 1;
    std::vector<std::string> estimators = {"ann"};
    std::uint64_t seed = 0;
    std::string out_dir = "out";
};

namespace detail {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key \"" + key + "\" in " + where);
}

inline PriorSpec parse_prior_json(const json& p) {
    reject_unknown_keys(p, {"kind", "theta0", "sigma_sq", "cutoff", "weights"}, "prior");
    std::string kind = p.at("kind").get<std::string>();
    if (kind == "flat") return PriorSpec::flat();
    if (kind == "gaussian")
        return PriorSpec::gaussian(p.at("theta0").get<double>(), p.at("sigma_sq").get<double>());
    if (kind == "step") return PriorSpec::step(p.at("cutoff").get<double>());
    if (kind == "custom") return PriorSpec::custom(p.at("weights").get<std::vector<double>>());
    throw std::invalid_argument("config: unknown prior kind \"" + kind + "\"");
}

inline ordered_json prior_to_json(const PriorSpec& spec) {
    ordered_json p;
    switch (spec.kind) {
        case PriorKind::Flat:
            p["kind"] = "flat";
            break;
        case PriorKind::Gaussian:
            p["kind"] = "gaussian";
            p["theta0"] = spec.theta0;
            p["sigma_sq"] = spec.sigma_sq;
            break;
        case PriorKind::Step:
            p["kind"] = "step";
            p["cutoff"] = spec.cutoff;
            break;
        case PriorKind::Custom:
            p["kind"] = "custom";
            p["weights"] = spec.weights;
            break;
    }
    return p;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    using detail::json;
    json root = json::parse(text);
    detail::reject_unknown_keys(root,
                                {"model", "grid", "prior", "m", "m_total", "fixed_quota", "ann",
                                 "train", "evaluation", "seed", "out_dir"},
                                "top level");

    ExperimentConfig cfg;

    const json& model = root.at("model");
    detail::reject_unknown_keys(model, {"kind", "n"}, "model");
    std::string kind = model.at("kind").get<std::string>();
    if (kind == "qubit") {
        cfg.model = LikelihoodModel::qubit();
    } else if (kind == "twin_fock") {
        cfg.model = LikelihoodModel::twin_fock(model.at("n").get<int>());
    } else {
        throw std::invalid_argument("config: unknown model kind \"" + kind + "\"");
    }

    const json& grid = root.at("grid");
    detail::reject_unknown_keys(grid, {"d", "L"}, "grid");
    cfg.grid = PhaseGrid(grid.at("L").get<double>(), grid.at("d").get<int>());

    cfg.prior = detail::parse_prior_json(root.at("prior"));
    make_prior(cfg.prior, cfg.grid);  // validates at load time

    cfg.shots_m = root.at("m").get<std::int64_t>();
    require(cfg.shots_m >= 1, "config: m must be >= 1");
    cfg.m_total = root.at("m_total").get<std::int64_t>();
    require(cfg.m_total >= 1, "config: m_total must be >= 1");
    if (root.contains("fixed_quota")) cfg.fixed_quota = root.at("fixed_quota").get<bool>();

    if (root.contains("ann")) {
        const json& ann = root.at("ann");
        detail::reject_unknown_keys(ann, {"hidden"}, "ann");
        cfg.hidden = ann.at("hidden").get<std::vector<int>>();
        for (int w : cfg.hidden) require(w >= 1, "config: hidden widths must be >= 1");
    }

    if (root.contains("train")) {
        const json& train = root.at("train");
        detail::reject_unknown_keys(train,
                                    {"epochs", "batch", "learning_rate", "beta1", "beta2",
                                     "epsilon", "shuffle", "until_crb", "crb_slack"},
                                    "train");
        if (train.contains("epochs")) cfg.train.epochs = train.at("epochs").get<int>();
        if (train.contains("batch")) cfg.train.batch_size = train.at("batch").get<int>();
        if (train.contains("learning_rate"))
            cfg.train.learning_rate = train.at("learning_rate").get<double>();
        if (train.contains("beta1")) cfg.train.beta1 = train.at("beta1").get<double>();
        if (train.contains("beta2")) cfg.train.beta2 = train.at("beta2").get<double>();
        if (train.contains("epsilon")) cfg.train.epsilon = train.at("epsilon").get<double>();
        if (train.contains("shuffle")) cfg.train.shuffle = train.at("shuffle").get<bool>();
        if (train.contains("until_crb")) cfg.train_until_crb = train.at("until_crb").get<bool>();
        if (train.contains("crb_slack")) cfg.crb_slack = train.at("crb_slack").get<double>();
        require(cfg.train.epochs >= 1, "config: epochs must be >= 1");
        require(cfg.train.batch_size >= 1, "config: batch must be >= 1");
        require(cfg.train.beta1 > 0.0 && cfg.train.beta1 < 1.0 && cfg.train.beta2 > 0.0 &&
                    cfg.train.beta2 < 1.0,
                "config: ADAM decay rates must be in (0, 1)");
    }

    if (root.contains("evaluation")) {
        const json& ev = root.at("evaluation");
        detail::reject_unknown_keys(ev, {"thetas", "nus", "trials", "replicates", "estimators"},
                                    "evaluation");
        if (ev.contains("thetas")) cfg.eval_thetas = ev.at("thetas").get<std::vector<double>>();
        if (ev.contains("nus")) cfg.eval_nus = ev.at("nus").get<std::vector<std::int64_t>>();
        if (ev.contains("trials")) cfg.eval_trials = ev.at("trials").get<std::int64_t>();
        if (ev.contains("replicates")) cfg.replicates = ev.at("replicates").get<int>();
        if (ev.contains("estimators"))
            cfg.estimators = ev.at("estimators").get<std::vector<std::string>>();
        require(cfg.eval_trials >= 2, "config: trials must be >= 2");
        require(cfg.replicates >= 1, "config: replicates must be >= 1");
        for (const auto& e : cfg.estimators)
            require(e == "ann" || e == "mle" || e == "mle_analytic" || e == "map",
                    "config: unknown estimator \"" + e + "\"");
    }

    cfg.seed = root.at("seed").get<std::uint64_t>();
    if (root.contains("out_dir")) cfg.out_dir = root.at("out_dir").get<std::string>();
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "load_config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

inline std::string config_to_string(const ExperimentConfig& cfg) {
    using detail::ordered_json;
    ordered_json root;
    ordered_json model;
    if (cfg.model.kind == ModelKind::Qubit) {
        model["kind"] = "qubit";
    } else {
        model["kind"] = "twin_fock";
        model["n"] = cfg.model.n_qubits;
    }
    root["model"] = model;
    root["grid"] = ordered_json{{"d", cfg.grid.count}, {"L", cfg.grid.length}};
    root["prior"] = detail::prior_to_json(cfg.prior);
    root["m"] = cfg.shots_m;
    root["m_total"] = cfg.m_total;
    root["fixed_quota"] = cfg.fixed_quota;
    root["ann"] = ordered_json{{"hidden", cfg.hidden}};
    root["train"] = ordered_json{{"epochs", cfg.train.epochs},
                                 {"batch", cfg.train.batch_size},
                                 {"learning_rate", cfg.train.learning_rate},
                                 {"beta1", cfg.train.beta1},
                                 {"beta2", cfg.train.beta2},
                                 {"epsilon", cfg.train.epsilon},
                                 {"shuffle", cfg.train.shuffle},
                                 {"until_crb", cfg.train_until_crb},
                                 {"crb_slack", cfg.crb_slack}};
    root["evaluation"] = ordered_json{{"thetas", cfg.eval_thetas},
                                      {"nus", cfg.eval_nus},
                                      {"trials", cfg.eval_trials},
                                      {"replicates", cfg.replicates},
                                      {"estimators", cfg.estimators}};
    root["seed"] = cfg.seed;
    root["out_dir"] = cfg.out_dir;
    return root.dump(2) + "\n";
}

inline void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_config: cannot open " + path.string());
    out << config_to_string(cfg);
}

}  // namespace qcal
