#include <catch_amalgamated.hpp>

#include "qcal/config.hpp"

using namespace qcal;

namespace {

const char* kFullConfig = R"({
  "model": {"kind": "twin_fock", "n": 4},
  "grid": {"d": 50, "L": 1.5707963267948966},
  "prior": {"kind": "gaussian", "theta0": 0.6, "sigma_sq": 0.25},
  "m": 1000,
  "m_total": 48000,
  "fixed_quota": false,
  "ann": {"hidden": [128, 128]},
  "train": {"epochs": 120, "batch": 128, "learning_rate": 0.001, "beta1": 0.9,
            "beta2": 0.999, "epsilon": 1e-08, "shuffle": true,
            "until_crb": true, "crb_slack": 1.2},
  "evaluation": {"thetas": [0.6283185307179586], "nus": [50, 200, 1000],
                 "trials": 10000, "replicates": 10,
                 "estimators": ["ann", "mle"]},
  "seed": 20220901,
  "out_dir": "out/fig10"
})";

}  // namespace

TEST_CASE("full config parses with every field") {
    ExperimentConfig cfg = parse_config(kFullConfig);
    CHECK(cfg.model.kind == ModelKind::TwinFock);
    CHECK(cfg.model.n_qubits == 4);
    CHECK(cfg.grid.count == 50);
    CHECK(cfg.grid.length == Catch::Approx(kPi / 2).margin(1e-15));
    CHECK(cfg.prior.kind == PriorKind::Gaussian);
    CHECK(cfg.shots_m == 1000);
    CHECK(cfg.m_total == 48000);
    CHECK(cfg.hidden == std::vector<int>{128, 128});
    CHECK(cfg.train.epochs == 120);
    CHECK(cfg.train.batch_size == 128);
    CHECK(cfg.train_until_crb);
    CHECK(cfg.crb_slack == 1.2);
    CHECK(cfg.eval_nus == std::vector<std::int64_t>{50, 200, 1000});
    CHECK(cfg.replicates == 10);
    CHECK(cfg.seed == 20220901);
    CHECK(cfg.out_dir == "out/fig10");
}

TEST_CASE("defaults apply when optional sections are missing") {
    ExperimentConfig cfg = parse_config(R"({
      "model": {"kind": "qubit"},
      "grid": {"d": 10, "L": 3.141592653589793},
      "prior": {"kind": "flat"},
      "m": 10,
      "m_total": 100,
      "seed": 1
    })");
    CHECK(cfg.model.kind == ModelKind::Qubit);
    CHECK(cfg.hidden == std::vector<int>{1024});
    CHECK(cfg.train.learning_rate == 1e-3);
    CHECK(cfg.train.beta1 == 0.9);
    CHECK(cfg.train.beta2 == 0.999);
    CHECK(cfg.train.epsilon == 1e-8);
    CHECK(cfg.eval_trials == 10000);
    CHECK(cfg.replicates == 1);
    CHECK_FALSE(cfg.fixed_quota);
    CHECK(cfg.out_dir == "out");
}

TEST_CASE("unknown keys are rejected everywhere") {
    CHECK_THROWS_AS(parse_config(R"({
      "model": {"kind": "qubit"}, "grid": {"d": 10, "L": 3.14},
      "prior": {"kind": "flat"}, "m": 10, "m_total": 100, "seed": 1,
      "surprise": true
    })"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config(R"({
      "model": {"kind": "qubit", "qubits": 2}, "grid": {"d": 10, "L": 3.14},
      "prior": {"kind": "flat"}, "m": 10, "m_total": 100, "seed": 1
    })"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config(R"({
      "model": {"kind": "qubit"}, "grid": {"d": 10, "L": 3.14},
      "prior": {"kind": "flat", "width": 1}, "m": 10, "m_total": 100, "seed": 1
    })"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config(R"({
      "model": {"kind": "qubit"}, "grid": {"d": 10, "L": 3.14},
      "prior": {"kind": "flat"}, "m": 10, "m_total": 100, "seed": 1,
      "train": {"epochs": 5, "momentum": 0.9}
    })"),
                    std::invalid_argument);
}

TEST_CASE("invariants are validated at load time") {
    // twin-Fock N must be even
    CHECK_THROWS_AS(parse_config(R"({
      "model": {"kind": "twin_fock", "n": 3}, "grid": {"d": 10, "L": 3.14},
      "prior": {"kind": "flat"}, "m": 10, "m_total": 100, "seed": 1
    })"),
                    std::invalid_argument);
    // step cutoff beyond the grid
    CHECK_THROWS_AS(parse_config(R"({
      "model": {"kind": "qubit"}, "grid": {"d": 10, "L": 3.14},
      "prior": {"kind": "step", "cutoff": 9.0}, "m": 10, "m_total": 100, "seed": 1
    })"),
                    std::invalid_argument);
    // ADAM decay rate out of range
    CHECK_THROWS_AS(parse_config(R"({
      "model": {"kind": "qubit"}, "grid": {"d": 10, "L": 3.14},
      "prior": {"kind": "flat"}, "m": 10, "m_total": 100, "seed": 1,
      "train": {"beta1": 1.5}
    })"),
                    std::invalid_argument);
    // unknown estimator id
    CHECK_THROWS_AS(parse_config(R"({
      "model": {"kind": "qubit"}, "grid": {"d": 10, "L": 3.14},
      "prior": {"kind": "flat"}, "m": 10, "m_total": 100, "seed": 1,
      "evaluation": {"estimators": ["oracle"]}
    })"),
                    std::invalid_argument);
}

TEST_CASE("config save/load round trip is idempotent") {
    ExperimentConfig cfg = parse_config(kFullConfig);
    std::string once = config_to_string(cfg);
    ExperimentConfig reparsed = parse_config(once);
    std::string twice = config_to_string(reparsed);
    CHECK(once == twice);
}
