#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "qcal/mlp.hpp"

using namespace qcal;

namespace {

// Small labelled dataset wrapped as a TrainingSet so train() can consume it.
TrainingSet toy_set(const LikelihoodModel& model, const PhaseGrid& grid, std::int64_t m_total,
                    std::int64_t m, std::uint64_t seed) {
    Prior prior = make_prior(PriorSpec::flat(), grid);
    return generate_training_set(model, grid, prior, m_total, m, seed);
}

MlpParams zero_network(int input_width, const std::vector<int>& hidden) {
    MlpParams params = init_network(input_width, hidden, 0);
    for (auto& w : params.weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : params.biases) std::fill(b.begin(), b.end(), 0.0);
    return params;
}

double finite_difference(const MlpParams& params, const SampleMatrix& batch, int layer, bool bias,
                         std::size_t index, double h = 1e-5) {
    MlpParams plus = params, minus = params;
    if (bias) {
        plus.biases[layer][index] += h;
        minus.biases[layer][index] -= h;
    } else {
        plus.weights[layer][index] += h;
        minus.weights[layer][index] -= h;
    }
    return (mse_cost(plus, batch) - mse_cost(minus, batch)) / (2.0 * h);
}

SampleMatrix random_batch(int n, int dim, Rng& rng) {
    SampleMatrix batch;
    batch.n = n;
    batch.dim = dim;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    batch.x.resize(static_cast<std::size_t>(n) * dim);
    batch.y.resize(n);
    for (auto& v : batch.x) v = uni(rng);
    for (auto& v : batch.y) v = uni(rng) * kPi;
    return batch;
}

}  // namespace

TEST_CASE("initialisation is deterministic with fan-in scaling") {
    MlpParams a = init_network(2, {1024}, 42);
    MlpParams b = init_network(2, {1024}, 42);
    CHECK(a.weights == b.weights);
    CHECK(a.biases == b.biases);
    MlpParams c = init_network(2, {1024}, 43);
    CHECK(a.weights != c.weights);

    for (const auto& bias : a.biases)
        for (double v : bias) CHECK(v == 0.0);

    // sample variance of each layer's weights ~ 2/fan-in
    for (int layer = 0; layer < a.layer_count(); ++layer) {
        const auto& w = a.weights[layer];
        double mean = 0.0;
        for (double v : w) mean += v;
        mean /= w.size();
        double var = 0.0;
        for (double v : w) var += (v - mean) * (v - mean);
        var /= w.size();
        double expected = 2.0 / a.widths[layer];
        CHECK(var > 0.8 * expected);
        CHECK(var < 1.2 * expected);
    }
}

TEST_CASE("forward of the zero network and the rectifier") {
    MlpParams zero = zero_network(2, {8});
    CHECK(forward(zero, {0.3, 0.7}) == 0.0);
    CHECK(forward(zero, {1.0, 0.0}) == 0.0);
    CHECK_THROWS_AS(forward(zero, {0.3}), std::invalid_argument);

    // one hidden neuron with a negative pre-activation contributes nothing
    MlpParams net = zero_network(1, {2});
    net.weights[0] = {1.0, -1.0};   // hidden pre-activations {x, -x}
    net.weights[1] = {5.0, 7.0};    // output reads both hidden units
    CHECK(forward(net, {0.5}) == Catch::Approx(2.5).margin(1e-15));   // only relu(x) survives
    CHECK(forward(net, {-0.5}) == Catch::Approx(3.5).margin(1e-15));  // only relu(-x) survives
}

TEST_CASE("mse cost closed forms") {
    auto model = LikelihoodModel::qubit();
    PhaseGrid grid(kPi, 5);
    TrainingSet set = toy_set(model, grid, 200, 10, 7);
    SampleMatrix samples = to_samples(set);

    // all-zero network outputs 0; cost is the label second moment
    MlpParams zero = zero_network(2, {4});
    double second_moment = 0.0;
    for (int r = 0; r < samples.n; ++r) second_moment += samples.y[r] * samples.y[r];
    second_moment /= samples.n;
    CHECK(mse_cost(zero, samples) == Catch::Approx(second_moment).margin(1e-12));

    // constant-output c network: cost = mean (c - theta_j)^2 from the histogram
    const double c = 1.2345;
    MlpParams constant = zero_network(2, {4});
    constant.biases[1][0] = c;
    double expected = 0.0;
    for (int j = 0; j < grid.count; ++j)
        expected += set.per_label_counts[j] * (c - grid.point(j)) * (c - grid.point(j));
    expected /= samples.n;
    CHECK(mse_cost(constant, samples) == Catch::Approx(expected).margin(1e-12));

    // permutation of records leaves the cost unchanged (up to rounding)
    TrainingSet shuffled = set;
    std::reverse(shuffled.records.begin(), shuffled.records.end());
    CHECK(mse_cost(constant, to_samples(shuffled)) == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("backward matches central finite differences") {
    Rng rng = make_rng(9001);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<int> hidden = (trial % 2) ? std::vector<int>{5} : std::vector<int>{4, 3};
        int dim = 2 + trial % 3;
        MlpParams params = init_network(dim, hidden, 100 + trial);
        SampleMatrix batch = random_batch(6, dim, rng);
        MlpGradients grads = backward(params, batch);
        for (int layer = 0; layer < params.layer_count(); ++layer) {
            for (std::size_t k = 0; k < grads.weights[layer].size(); ++k) {
                double fd = finite_difference(params, batch, layer, false, k);
                double an = grads.weights[layer][k];
                CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
            }
            for (std::size_t k = 0; k < grads.biases[layer].size(); ++k) {
                double fd = finite_difference(params, batch, layer, true, k);
                double an = grads.biases[layer][k];
                CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
            }
        }
    }
}

TEST_CASE("gradient structure at known points") {
    // zero gradient at a perfect fit of a constant dataset
    SampleMatrix batch;
    batch.n = 4;
    batch.dim = 2;
    batch.x = {0.1, 0.9, 0.4, 0.6, 0.8, 0.2, 0.5, 0.5};
    batch.y = {0.0, 0.0, 0.0, 0.0};
    MlpParams zero = zero_network(2, {3});
    MlpGradients grads = backward(zero, batch);
    for (const auto& w : grads.weights)
        for (double g : w) CHECK(g == 0.0);
    for (const auto& b : grads.biases)
        for (double g : b) CHECK(g == 0.0);

    // output-bias gradient is 2 * mean residual
    MlpParams net = init_network(2, {3}, 5);
    batch.y = {0.3, 1.1, 0.2, 2.0};
    MlpGradients g2 = backward(net, batch);
    double mean_residual = 0.0;
    for (int r = 0; r < batch.n; ++r) {
        std::vector<double> input{batch.x[2 * r], batch.x[2 * r + 1]};
        mean_residual += forward(net, input) - batch.y[r];
    }
    mean_residual /= batch.n;
    CHECK(g2.biases.back()[0] == Catch::Approx(2.0 * mean_residual).margin(1e-12));
}

TEST_CASE("training determinism and the zero-rate identity") {
    auto model = LikelihoodModel::qubit();
    PhaseGrid grid(kPi, 6);
    TrainingSet set = toy_set(model, grid, 300, 20, 11);

    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 32;
    cfg.seed = 99;

    MlpParams init = init_network(2, {16}, 1);
    TrainResult a = train(set, init, cfg);
    TrainResult b = train(set, init, cfg);
    CHECK(a.history == b.history);  // bitwise
    CHECK(a.params.weights == b.params.weights);

    TrainConfig frozen = cfg;
    frozen.learning_rate = 0.0;
    TrainResult c = train(set, init, frozen);
    CHECK(c.params.weights == init.weights);
    CHECK(c.params.biases == init.biases);
    double initial_cost = mse_cost(init, to_samples(set));
    for (double cost : c.history) CHECK(cost == initial_cost);
}

TEST_CASE("batch size validation and ADAM parameter checks") {
    auto model = LikelihoodModel::qubit();
    PhaseGrid grid(kPi, 4);
    TrainingSet set = toy_set(model, grid, 10, 5, 3);
    MlpParams init = init_network(2, {4}, 1);

    TrainConfig cfg;
    cfg.batch_size = 11;  // larger than the set
    CHECK_THROWS_AS(train(set, init, cfg), std::invalid_argument);
    cfg.batch_size = 4;
    cfg.beta1 = 1.0;
    CHECK_THROWS_AS(train(set, init, cfg), std::invalid_argument);
}

TEST_CASE("training diverges loudly on absurd step sizes") {
    auto model = LikelihoodModel::qubit();
    PhaseGrid grid(kPi, 4);
    TrainingSet set = toy_set(model, grid, 64, 5, 3);
    MlpParams init = init_network(2, {8}, 1);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 8;
    cfg.learning_rate = 1e9;
    CHECK_THROWS_AS(train(set, init, cfg), DivergenceError);
}

TEST_CASE("train_until_crb stopping semantics") {
    auto model = LikelihoodModel::qubit();
    PhaseGrid grid(kPi, 6);
    TrainingSet set = toy_set(model, grid, 500, 100, 21);
    MlpParams init = init_network(2, {64}, 2);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.batch_size = 16;
    cfg.seed = 5;

    // already-saturated target: zero additional epochs
    TrainResult none = train_until_crb(set, init, cfg, 1e6, 1.0);
    CHECK(none.saturated);
    CHECK(none.history.empty());
    CHECK(none.params.weights == init.weights);

    // unreachable target: cap reached with the flag false
    TrainResult capped = train_until_crb(set, init, cfg, 1e-30, 0.01);
    CHECK_FALSE(capped.saturated);
    CHECK(capped.history.size() == 40);

    // reachable target stops early
    TrainResult stopped = train_until_crb(set, init, cfg, 0.05, 1.2);
    CHECK(stopped.saturated);
    CHECK(stopped.history.size() < 40);
    CHECK(stopped.history.back() <= 1.2 * 0.05);
}

TEST_CASE("model persistence preserves forward outputs bitwise") {
    namespace fs = std::filesystem;
    auto model = LikelihoodModel::twin_fock(4);
    PhaseGrid grid(kPi / 2, 6);
    TrainingSet set = toy_set(model, grid, 100, 30, 8);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 10;
    cfg.seed = 77;
    TrainResult res = train(set, init_network(5, {12, 7}, 6), cfg);

    PersistedModel out{res.params, 77, training_set_header(set)};
    fs::path dir = fs::temp_directory_path() / "qcal_test_model";
    fs::create_directories(dir);
    fs::path path = dir / "model.txt";
    save_model(out, path);
    PersistedModel in = load_model(path);

    CHECK(in.train_seed == 77);
    CHECK(in.training_header == training_set_header(set));
    CHECK(in.params.widths == res.params.widths);
    Rng rng = make_rng(123);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> input(5);
        for (auto& v : input) v = uni(rng);
        double a = forward(res.params, input);
        double b = forward(in.params, input);
        CHECK(a == b);  // bitwise
    }

    // save -> load -> save is byte-stable
    fs::path path2 = dir / "model2.txt";
    save_model(in, path2);
    std::ifstream fa(path, std::ios::binary), fb(path2, std::ios::binary);
    std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
}
