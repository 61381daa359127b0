#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qcal/rng.hpp"
#include "qcal/training_set.hpp"

namespace qcal {

// Dense rectifier network mapping a D-vector of relative frequencies to a
// single linear output. Weight matrices are stored input-major,
// W[l][i * out + o], so every hot loop runs over contiguous memory.
struct MlpParams {
    std::vector<int> widths;  // {D, hidden..., 1}
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    int input_width() const { return widths.front(); }
    int layer_count() const { return static_cast<int>(widths.size()) - 1; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (int l = 0; l < layer_count(); ++l) n += weights[l].size() + biases[l].size();
        return n;
    }
};

// Zero-mean normal weights with variance 2/fan-in, zero biases.
inline MlpParams init_network(int input_width, const std::vector<int>& hidden_widths,
                              std::uint64_t seed) {
    require(input_width >= 1, "init_network: input width must be >= 1");
    for (int w : hidden_widths) require(w >= 1, "init_network: hidden widths must be >= 1");

    MlpParams params;
    params.widths.push_back(input_width);
    for (int w : hidden_widths) params.widths.push_back(w);
    params.widths.push_back(1);

    Rng rng = make_rng(seed);
    for (int l = 0; l < params.layer_count(); ++l) {
        const int in = params.widths[l];
        const int out = params.widths[l + 1];
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / in));
        std::vector<double> w(static_cast<std::size_t>(in) * out);
        for (double& x : w) x = normal(rng);
        params.weights.push_back(std::move(w));
        params.biases.push_back(std::vector<double>(out, 0.0));
    }
    return params;
}

namespace detail {

// Four-lane dot product: independent accumulator chains so the reduction is
// not serialised on FMA latency.
inline double dot_unrolled(const double* a, const double* w, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * w[i];
        s1 += a[i + 1] * w[i + 1];
        s2 += a[i + 2] * w[i + 2];
        s3 += a[i + 3] * w[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * w[i];
    return (s0 + s1) + (s2 + s3);
}

// Z[r][o] = b[o] + sum_i A[r][i] * W[i*out + o], optionally writing the
// rectified activations in the same pass. Fused single-pass paths cover the
// shapes that dominate here: wide layers fed by 2 or 3..8 inputs, and the
// scalar output layer.
inline void affine_forward(const double* a_in, int n, int in, const double* w, const double* b,
                           int out, double* z, double* act = nullptr) {
    if (out == 1) {
        const double b0 = b[0];
        for (int r = 0; r < n; ++r)
            z[r] = b0 + dot_unrolled(a_in + static_cast<std::size_t>(r) * in, w, in);
        if (act)
            for (int r = 0; r < n; ++r) act[r] = z[r] > 0.0 ? z[r] : 0.0;
        return;
    }
    if (in == 2) {
        const double* w0 = w;
        const double* w1 = w + out;
        for (int r = 0; r < n; ++r) {
            const double a0 = a_in[2 * r], a1 = a_in[2 * r + 1];
            double* zr = z + static_cast<std::size_t>(r) * out;
            for (int o = 0; o < out; ++o) zr[o] = b[o] + a0 * w0[o] + a1 * w1[o];
        }
    } else if (in <= 8) {
        for (int r = 0; r < n; ++r) {
            const double* a = a_in + static_cast<std::size_t>(r) * in;
            double* zr = z + static_cast<std::size_t>(r) * out;
            for (int o = 0; o < out; ++o) {
                double v = b[o];
                for (int i = 0; i < in; ++i) v += a[i] * w[static_cast<std::size_t>(i) * out + o];
                zr[o] = v;
            }
        }
    } else {
        for (int r = 0; r < n; ++r) {
            const double* a = a_in + static_cast<std::size_t>(r) * in;
            double* zr = z + static_cast<std::size_t>(r) * out;
            std::memcpy(zr, b, sizeof(double) * out);
            for (int i = 0; i < in; ++i) {
                const double ai = a[i];
                if (ai == 0.0) continue;
                const double* wi = w + static_cast<std::size_t>(i) * out;
                for (int o = 0; o < out; ++o) zr[o] += ai * wi[o];
            }
        }
    }
    if (act) {
        const std::size_t total = static_cast<std::size_t>(n) * out;
        for (std::size_t k = 0; k < total; ++k) act[k] = z[k] > 0.0 ? z[k] : 0.0;
    }
}

struct BatchWorkspace {
    std::vector<std::vector<double>> acts;    // acts[l]: n x widths[l], acts[0] = inputs
    std::vector<std::vector<double>> zs;      // zs[l]: n x widths[l+1]
    std::vector<std::vector<double>> deltas;  // deltas[l]: n x widths[l+1]
    std::vector<std::vector<double>> w_t;     // out-major transposes for the delta pass
    int capacity = 0;

    void resize(const MlpParams& params, int n) {
        const int layers = params.layer_count();
        acts.resize(layers + 1);
        zs.resize(layers);
        deltas.resize(layers);
        w_t.resize(layers);
        for (int l = 0; l <= layers; ++l)
            acts[l].resize(static_cast<std::size_t>(n) * params.widths[l]);
        for (int l = 0; l < layers; ++l) {
            zs[l].resize(static_cast<std::size_t>(n) * params.widths[l + 1]);
            deltas[l].resize(static_cast<std::size_t>(n) * params.widths[l + 1]);
        }
        capacity = n;
    }
};

// Forward pass for n rows already stored in ws.acts[0]; returns a pointer to
// the n outputs (the final pre-activations).
inline const double* forward_batch(const MlpParams& params, int n, BatchWorkspace& ws) {
    const int layers = params.layer_count();
    for (int l = 0; l < layers; ++l) {
        const int in = params.widths[l];
        const int out = params.widths[l + 1];
        double* act = l + 1 < layers ? ws.acts[l + 1].data() : nullptr;
        affine_forward(ws.acts[l].data(), n, in, params.weights[l].data(),
                       params.biases[l].data(), out, ws.zs[l].data(), act);
    }
    return ws.zs[layers - 1].data();
}

}  // namespace detail

inline double forward(const MlpParams& params, const std::vector<double>& input) {
    require(static_cast<int>(input.size()) == params.input_width(),
            "forward: input has wrong dimension");
    detail::BatchWorkspace ws;
    ws.resize(params, 1);
    std::memcpy(ws.acts[0].data(), input.data(), sizeof(double) * input.size());
    return detail::forward_batch(params, 1, ws)[0];
}

// Flattened (features, labels) view of a training set.
struct SampleMatrix {
    std::vector<double> x;  // n x dim, row-major
    std::vector<double> y;  // n
    int dim = 0;
    int n = 0;
};

inline SampleMatrix to_samples(const TrainingSet& set) {
    SampleMatrix s;
    s.dim = set.model.outcome_count();
    s.n = static_cast<int>(set.records.size());
    s.x.resize(static_cast<std::size_t>(s.n) * s.dim);
    s.y.resize(s.n);
    for (int r = 0; r < s.n; ++r) {
        const auto f = set.records[r].fv.freqs();
        std::memcpy(s.x.data() + static_cast<std::size_t>(r) * s.dim, f.data(),
                    sizeof(double) * s.dim);
        s.y[r] = set.grid.point(set.records[r].label_index);
    }
    return s;
}

// Mean-square error over the whole sample matrix, evaluated in chunks.
inline double mse_cost(const MlpParams& params, const SampleMatrix& samples) {
    require(samples.n >= 1, "mse_cost: empty sample set");
    require(samples.dim == params.input_width(), "mse_cost: dimension mismatch");
    constexpr int kChunk = 512;
    detail::BatchWorkspace ws;
    ws.resize(params, std::min(samples.n, kChunk));
    double acc = 0.0;
    for (int start = 0; start < samples.n; start += kChunk) {
        const int n = std::min(kChunk, samples.n - start);
        std::memcpy(ws.acts[0].data(), samples.x.data() + static_cast<std::size_t>(start) * samples.dim,
                    sizeof(double) * n * samples.dim);
        const double* out = detail::forward_batch(params, n, ws);
        for (int r = 0; r < n; ++r) {
            double diff = out[r] - samples.y[start + r];
            acc += diff * diff;
        }
    }
    return acc / samples.n;
}

struct MlpGradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

namespace detail {

inline MlpGradients zero_gradients(const MlpParams& params) {
    MlpGradients g;
    for (int l = 0; l < params.layer_count(); ++l) {
        g.weights.emplace_back(params.weights[l].size(), 0.0);
        g.biases.emplace_back(params.biases[l].size(), 0.0);
    }
    return g;
}

// Reverse pass of the batch MSE; ws must hold the forward state of the batch.
inline void backward_batch(const MlpParams& params, int n, const double* labels,
                           BatchWorkspace& ws, MlpGradients& grads) {
    const int layers = params.layer_count();
    const double* out = ws.zs[layers - 1].data();
    double* delta_last = ws.deltas[layers - 1].data();
    const double scale = 2.0 / n;
    for (int r = 0; r < n; ++r) delta_last[r] = scale * (out[r] - labels[r]);

    for (int l = layers - 1; l >= 0; --l) {
        const int in = params.widths[l];
        const int out_w = params.widths[l + 1];
        const double* delta = ws.deltas[l].data();
        const double* acts = ws.acts[l].data();
        double* dw = grads.weights[l].data();
        double* db = grads.biases[l].data();

        if (out_w == 1) {
            for (int r = 0; r < n; ++r) {
                const double d = delta[r];
                db[0] += d;
                const double* ar = acts + static_cast<std::size_t>(r) * in;
                for (int i = 0; i < in; ++i) dw[i] += d * ar[i];
            }
        } else {
            for (int r = 0; r < n; ++r) {
                const double* dr = delta + static_cast<std::size_t>(r) * out_w;
                for (int o = 0; o < out_w; ++o) db[o] += dr[o];
                const double* ar = acts + static_cast<std::size_t>(r) * in;
                for (int i = 0; i < in; ++i) {
                    const double ai = ar[i];
                    if (ai == 0.0) continue;
                    double* dwi = dw + static_cast<std::size_t>(i) * out_w;
                    for (int o = 0; o < out_w; ++o) dwi[o] += ai * dr[o];
                }
            }
        }

        if (l == 0) break;

        // transpose W_l once so the delta pass is contiguous
        auto& wt = ws.w_t[l];
        wt.resize(params.weights[l].size());
        const double* w = params.weights[l].data();
        for (int i = 0; i < in; ++i)
            for (int o = 0; o < out_w; ++o)
                wt[static_cast<std::size_t>(o) * in + i] = w[static_cast<std::size_t>(i) * out_w + o];

        const double* z_prev = ws.zs[l - 1].data();
        double* delta_prev = ws.deltas[l - 1].data();
        for (int r = 0; r < n; ++r) {
            double* dp = delta_prev + static_cast<std::size_t>(r) * in;
            std::memset(dp, 0, sizeof(double) * in);
            const double* dr = delta + static_cast<std::size_t>(r) * out_w;
            for (int o = 0; o < out_w; ++o) {
                const double d = dr[o];
                if (d == 0.0) continue;
                const double* wo = wt.data() + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) dp[i] += d * wo[i];
            }
            const double* zp = z_prev + static_cast<std::size_t>(r) * in;
            for (int i = 0; i < in; ++i)
                if (zp[i] <= 0.0) dp[i] = 0.0;
        }
    }
}

}  // namespace detail

// Exact reverse-mode gradient of the batch mean-square error.
inline MlpGradients backward(const MlpParams& params, const SampleMatrix& batch) {
    require(batch.n >= 1, "backward: empty batch");
    require(batch.dim == params.input_width(), "backward: dimension mismatch");
    detail::BatchWorkspace ws;
    ws.resize(params, batch.n);
    std::memcpy(ws.acts[0].data(), batch.x.data(), sizeof(double) * batch.x.size());
    detail::forward_batch(params, batch.n, ws);
    MlpGradients grads = detail::zero_gradients(params);
    detail::backward_batch(params, batch.n, batch.y.data(), ws, grads);
    return grads;
}

struct TrainConfig {
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    bool shuffle = true;
};

using CostHistory = std::vector<double>;

struct TrainResult {
    MlpParams params;
    CostHistory history;
    bool saturated = false;
};

namespace detail {

struct AdamState {
    MlpGradients m, v;
    std::int64_t t = 0;
};

class Trainer {
public:
    Trainer(const TrainingSet& set, MlpParams params, const TrainConfig& cfg)
        : samples_(to_samples(set)),
          params_(std::move(params)),
          cfg_(cfg),
          rng_(make_rng(cfg.seed)),
          domain_length_(set.grid.length) {
        require(!set.records.empty(), "train: empty training set");
        require(cfg.batch_size >= 1 && cfg.batch_size <= samples_.n,
                "train: batch size must be in [1, training-set size]");
        require(cfg.beta1 > 0.0 && cfg.beta1 < 1.0 && cfg.beta2 > 0.0 && cfg.beta2 < 1.0,
                "train: ADAM decay rates must be in (0, 1)");
        require(samples_.dim == params_.input_width(), "train: network/data dimension mismatch");
        adam_.m = zero_gradients(params_);
        adam_.v = zero_gradients(params_);
        grads_ = zero_gradients(params_);
        ws_.resize(params_, cfg.batch_size);
        order_.resize(samples_.n);
        for (int r = 0; r < samples_.n; ++r) order_[r] = r;
        batch_x_.resize(static_cast<std::size_t>(cfg.batch_size) * samples_.dim);
        batch_y_.resize(cfg.batch_size);
    }

    // One full pass of mini-batch ADAM; returns the full-set cost afterwards.
    double run_epoch(int epoch_index) {
        if (cfg_.shuffle) std::shuffle(order_.begin(), order_.end(), rng_);
        const int dim = samples_.dim;
        for (int start = 0; start < samples_.n; start += cfg_.batch_size) {
            const int n = std::min(cfg_.batch_size, samples_.n - start);
            for (int r = 0; r < n; ++r) {
                const int src = order_[start + r];
                std::memcpy(batch_x_.data() + static_cast<std::size_t>(r) * dim,
                            samples_.x.data() + static_cast<std::size_t>(src) * dim,
                            sizeof(double) * dim);
                batch_y_[r] = samples_.y[src];
            }
            for (auto& g : grads_.weights) std::fill(g.begin(), g.end(), 0.0);
            for (auto& g : grads_.biases) std::fill(g.begin(), g.end(), 0.0);
            std::memcpy(ws_.acts[0].data(), batch_x_.data(), sizeof(double) * n * dim);
            forward_batch(params_, n, ws_);
            backward_batch(params_, n, batch_y_.data(), ws_, grads_);
            adam_step();
        }
        double cost = mse_cost(params_, samples_);
        if (!std::isfinite(cost) || cost > 1e6 * domain_length_ * domain_length_)
            throw DivergenceError(epoch_index, cost);
        return cost;
    }

    double full_cost() const { return mse_cost(params_, samples_); }
    MlpParams take_params() { return std::move(params_); }

private:
    void adam_step() {
        adam_.t++;
        const double corr1 = 1.0 / (1.0 - std::pow(cfg_.beta1, static_cast<double>(adam_.t)));
        const double corr2 = 1.0 / (1.0 - std::pow(cfg_.beta2, static_cast<double>(adam_.t)));
        for (int l = 0; l < params_.layer_count(); ++l) {
            update_array(params_.weights[l], grads_.weights[l], adam_.m.weights[l],
                         adam_.v.weights[l], corr1, corr2);
            update_array(params_.biases[l], grads_.biases[l], adam_.m.biases[l], adam_.v.biases[l],
                         corr1, corr2);
        }
    }

    void update_array(std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v, double corr1, double corr2) {
        const double lr = cfg_.learning_rate;
        const double b1 = cfg_.beta1, b2 = cfg_.beta2, eps = cfg_.epsilon;
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            w[k] -= lr * (m[k] * corr1) / (std::sqrt(v[k] * corr2) + eps);
        }
    }

    SampleMatrix samples_;
    MlpParams params_;
    TrainConfig cfg_;
    Rng rng_;
    double domain_length_;
    AdamState adam_;
    MlpGradients grads_;
    BatchWorkspace ws_;
    std::vector<int> order_;
    std::vector<double> batch_x_;
    std::vector<double> batch_y_;
};

}  // namespace detail

inline TrainResult train(const TrainingSet& set, MlpParams params, const TrainConfig& cfg) {
    detail::Trainer trainer(set, std::move(params), cfg);
    CostHistory history;
    history.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) history.push_back(trainer.run_epoch(epoch));
    return TrainResult{trainer.take_params(), std::move(history), false};
}

// Epoch-by-epoch training until the full-set cost reaches slack * target or
// cfg.epochs is exhausted; `saturated` reports which happened. An initial
// cost already at the target returns immediately with an empty history.
inline TrainResult train_until_crb(const TrainingSet& set, MlpParams params, const TrainConfig& cfg,
                                   double target, double slack) {
    require(target > 0.0, "train_until_crb: target must be > 0");
    require(slack > 0.0, "train_until_crb: slack must be > 0");
    detail::Trainer trainer(set, std::move(params), cfg);
    CostHistory history;
    if (trainer.full_cost() <= slack * target)
        return TrainResult{trainer.take_params(), std::move(history), true};
    bool saturated = false;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double cost = trainer.run_epoch(epoch);
        history.push_back(cost);
        if (cost <= slack * target) {
            saturated = true;
            break;
        }
    }
    return TrainResult{trainer.take_params(), std::move(history), saturated};
}

// ---- persistence ----------------------------------------------------------

namespace detail {

inline std::string hexfloat(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", x);
    return buf;
}

}  // namespace detail

struct PersistedModel {
    MlpParams params;
    std::uint64_t train_seed = 0;
    std::string training_header;  // header of the producing training set
};

// Text format with hexfloat values: round-trips bitwise, stays diffable.
inline void save_model(const PersistedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_model: cannot open " + path.string());
    out << "# qcal-model v1\n# layers";
    for (int w : model.params.widths) out << ' ' << w;
    out << "\n# seed " << model.train_seed << "\n";
    std::istringstream header(model.training_header);
    std::string line;
    while (std::getline(header, line)) out << "# ts " << line << "\n";
    for (int l = 0; l < model.params.layer_count(); ++l) {
        const int in = model.params.widths[l];
        const int out_w = model.params.widths[l + 1];
        out << "W " << l << ' ' << in << ' ' << out_w << "\n";
        for (int i = 0; i < in; ++i) {
            for (int o = 0; o < out_w; ++o) {
                if (o) out << ' ';
                out << detail::hexfloat(model.params.weights[l][static_cast<std::size_t>(i) * out_w + o]);
            }
            out << "\n";
        }
        out << "b " << l << ' ' << out_w << "\n";
        for (int o = 0; o < out_w; ++o) {
            if (o) out << ' ';
            out << detail::hexfloat(model.params.biases[l][o]);
        }
        out << "\n";
    }
    require(out.good(), "save_model: write failed for " + path.string());
}

inline PersistedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_model: cannot open " + path.string());
    PersistedModel model;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# layers", 0) == 0) {
            std::istringstream ls(line.substr(8));
            int w;
            while (ls >> w) model.params.widths.push_back(w);
        } else if (line.rfind("# seed ", 0) == 0) {
            model.train_seed = std::stoull(line.substr(7));
        } else if (line.rfind("# ts ", 0) == 0) {
            model.training_header += line.substr(5) + "\n";
        } else if (line.rfind("W ", 0) == 0) {
            int l, in_w, out_w;
            std::istringstream h(line.substr(2));
            h >> l >> in_w >> out_w;
            std::vector<double> w(static_cast<std::size_t>(in_w) * out_w);
            for (int i = 0; i < in_w; ++i) {
                require(static_cast<bool>(std::getline(in, line)), "load_model: truncated weights");
                const char* p = line.c_str();
                char* end = nullptr;
                for (int o = 0; o < out_w; ++o) {
                    w[static_cast<std::size_t>(i) * out_w + o] = std::strtod(p, &end);
                    require(end != p, "load_model: bad weight value");
                    p = end;
                }
            }
            model.params.weights.push_back(std::move(w));
        } else if (line.rfind("b ", 0) == 0) {
            int l, out_w;
            std::istringstream h(line.substr(2));
            h >> l >> out_w;
            require(static_cast<bool>(std::getline(in, line)), "load_model: truncated biases");
            std::vector<double> b(out_w);
            const char* p = line.c_str();
            char* end = nullptr;
            for (int o = 0; o < out_w; ++o) {
                b[o] = std::strtod(p, &end);
                require(end != p, "load_model: bad bias value");
                p = end;
            }
            model.params.biases.push_back(std::move(b));
        }
    }
    require(model.params.widths.size() >= 2, "load_model: missing layers header");
    require(model.params.weights.size() == model.params.biases.size() &&
                static_cast<int>(model.params.weights.size()) == model.params.layer_count(),
            "load_model: layer data incomplete");
    return model;
}

}  // namespace qcal
