#pragma once

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qcal/grid.hpp"
#include "qcal/likelihood.hpp"
#include "qcal/rng.hpp"

namespace qcal {

struct TrainingRecord {
    int label_index = 0;
    FrequencyVector fv;
};

// Synthetic calibration data: labelled frequency vectors sampled per the
// training protocol (label from the prior, then m shots at that label).
struct TrainingSet {
    LikelihoodModel model;
    PhaseGrid grid;
    Prior prior;
    std::int64_t shots_per_record = 0;  // m
    std::uint64_t seed = 0;
    std::vector<TrainingRecord> records;
    std::vector<std::int64_t> per_label_counts;  // M_j

    double label(int record_index) const { return grid.point(records[record_index].label_index); }
};

struct GenerateOptions {
    // i.i.d. label draws from the prior by default; fixed quotas
    // M_j = round(M_total * P_j) (largest remainder) as a variance-reduction
    // alternative.
    bool fixed_quota = false;
};

inline TrainingSet generate_training_set(const LikelihoodModel& model, const PhaseGrid& grid,
                                         const Prior& prior, std::int64_t m_total, std::int64_t m,
                                         std::uint64_t seed, const GenerateOptions& opts = {}) {
    require(m_total >= 1, "generate_training_set: M_total must be >= 1");
    require(m >= 1, "generate_training_set: m must be >= 1");
    require(static_cast<int>(prior.weights.size()) == grid.count,
            "generate_training_set: prior/grid size mismatch");

    TrainingSet set;
    set.model = model;
    set.grid = grid;
    set.prior = prior;
    set.shots_per_record = m;
    set.seed = seed;
    set.per_label_counts.assign(grid.count, 0);
    set.records.reserve(m_total);

    Rng rng = make_rng(seed);
    std::vector<int> labels;
    labels.reserve(m_total);
    if (opts.fixed_quota) {
        std::vector<std::int64_t> quota(grid.count, 0);
        std::vector<std::pair<double, int>> remainder(grid.count);
        std::int64_t assigned = 0;
        for (int j = 0; j < grid.count; ++j) {
            double exact = prior.weights[j] * static_cast<double>(m_total);
            quota[j] = static_cast<std::int64_t>(exact);
            assigned += quota[j];
            remainder[j] = {exact - static_cast<double>(quota[j]), j};
        }
        std::stable_sort(remainder.begin(), remainder.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::int64_t k = 0; k < m_total - assigned; ++k) quota[remainder[k].second]++;
        for (int j = 0; j < grid.count; ++j)
            for (std::int64_t r = 0; r < quota[j]; ++r) labels.push_back(j);
    } else {
        for (std::int64_t r = 0; r < m_total; ++r)
            labels.push_back(static_cast<int>(sample_index(rng, prior.weights)));
    }

    for (int j : labels) {
        set.records.push_back({j, sample_frequencies(model, grid.point(j), m, rng)});
        set.per_label_counts[j]++;
    }
    return set;
}

namespace detail {

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::string prior_spec_string(const PriorSpec& spec) {
    switch (spec.kind) {
        case PriorKind::Flat:
            return "flat";
        case PriorKind::Gaussian:
            return "gaussian " + format_double(spec.theta0) + " " + format_double(spec.sigma_sq);
        case PriorKind::Step:
            return "step " + format_double(spec.cutoff);
        case PriorKind::Custom: {
            std::string s = "custom";
            for (double w : spec.weights) s += " " + format_double(w);
            return s;
        }
    }
    return "flat";
}

inline PriorSpec parse_prior_spec(const std::string& text) {
    std::istringstream in(text);
    std::string kind;
    in >> kind;
    if (kind == "flat") return PriorSpec::flat();
    if (kind == "gaussian") {
        double theta0 = 0.0, sigma_sq = 0.0;
        in >> theta0 >> sigma_sq;
        return PriorSpec::gaussian(theta0, sigma_sq);
    }
    if (kind == "step") {
        double cutoff = 0.0;
        in >> cutoff;
        return PriorSpec::step(cutoff);
    }
    if (kind == "custom") {
        std::vector<double> w;
        double x;
        while (in >> x) w.push_back(x);
        return PriorSpec::custom(std::move(w));
    }
    throw std::invalid_argument("unknown prior kind: " + kind);
}

}  // namespace detail

// Header of the training-set file; also embedded in persisted models for
// provenance.
inline std::string training_set_header(const TrainingSet& set) {
    std::string h;
    h += "# qcal-training-set v1\n";
    h += "# model " + set.model.name() + "\n";
    h += "# d " + std::to_string(set.grid.count) + "\n";
    h += "# L " + detail::format_double(set.grid.length) + "\n";
    h += "# m " + std::to_string(set.shots_per_record) + "\n";
    h += "# prior " + detail::prior_spec_string(set.prior.spec) + "\n";
    h += "# seed " + std::to_string(set.seed) + "\n";
    h += "# records " + std::to_string(set.records.size()) + "\n";
    return h;
}

// Record lines are "j,m_0,m_1,...,m_{D-1}" with integer tallies, so the file
// round-trips bit-exactly.
inline void save_training_set(const TrainingSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_training_set: cannot open " + path.string());
    out << training_set_header(set);
    for (const auto& rec : set.records) {
        out << rec.label_index;
        for (std::int64_t c : rec.fv.counts) out << ',' << c;
        out << '\n';
    }
    require(out.good(), "save_training_set: write failed for " + path.string());
}

inline TrainingSet load_training_set(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_training_set: cannot open " + path.string());

    TrainingSet set;
    std::int64_t n_records = -1;
    std::string line;
    PriorSpec prior_spec;
    int d = 0;
    double length = 0.0;

    auto header_value = [](const std::string& l, const std::string& key) {
        return l.substr(key.size());
    };

    while (std::getline(in, line) && !line.empty() && line[0] == '#') {
        if (line.rfind("# model ", 0) == 0) {
            std::string m = header_value(line, "# model ");
            if (m == "qubit") {
                set.model = LikelihoodModel::qubit();
            } else {
                std::istringstream ms(m);
                std::string kind;
                int n = 0;
                ms >> kind >> n;
                require(kind == "twinfock", "load_training_set: unknown model " + m);
                set.model = LikelihoodModel::twin_fock(n);
            }
        } else if (line.rfind("# d ", 0) == 0) {
            d = std::stoi(header_value(line, "# d "));
        } else if (line.rfind("# L ", 0) == 0) {
            length = std::strtod(header_value(line, "# L ").c_str(), nullptr);
        } else if (line.rfind("# m ", 0) == 0) {
            set.shots_per_record = std::stoll(header_value(line, "# m "));
        } else if (line.rfind("# prior ", 0) == 0) {
            prior_spec = detail::parse_prior_spec(header_value(line, "# prior "));
        } else if (line.rfind("# seed ", 0) == 0) {
            set.seed = std::stoull(header_value(line, "# seed "));
        } else if (line.rfind("# records ", 0) == 0) {
            n_records = std::stoll(header_value(line, "# records "));
        }
        // "# qcal-training-set v1" and unknown comment lines are skipped
    }
    require(d >= 2 && length > 0.0, "load_training_set: missing grid header");
    set.grid = PhaseGrid(length, d);
    set.prior = make_prior(prior_spec, set.grid);
    set.per_label_counts.assign(d, 0);

    const int outcome_count = set.model.outcome_count();
    // first non-header line is already in `line`
    do {
        if (line.empty() || line[0] == '#') continue;
        TrainingRecord rec;
        const char* p = line.c_str();
        char* end = nullptr;
        rec.label_index = static_cast<int>(std::strtol(p, &end, 10));
        require(end != p && rec.label_index >= 0 && rec.label_index < d,
                "load_training_set: bad label index in: " + line);
        p = end;
        rec.fv.counts.reserve(outcome_count);
        for (int k = 0; k < outcome_count; ++k) {
            require(*p == ',', "load_training_set: expected ',' in: " + line);
            ++p;
            std::int64_t c = std::strtoll(p, &end, 10);
            require(end != p && c >= 0, "load_training_set: bad tally in: " + line);
            rec.fv.counts.push_back(c);
            p = end;
        }
        rec.fv.shots = set.shots_per_record;
        require(rec.fv.count_sum() == set.shots_per_record,
                "load_training_set: tallies do not sum to m in: " + line);
        set.per_label_counts[rec.label_index]++;
        set.records.push_back(std::move(rec));
    } while (std::getline(in, line));

    require(n_records < 0 || n_records == static_cast<std::int64_t>(set.records.size()),
            "load_training_set: record count mismatch");
    return set;
}

}  // namespace qcal
