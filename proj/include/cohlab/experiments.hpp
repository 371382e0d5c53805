// experiments.hpp — End-to-end runs: tune/train/evaluate a mapping, constrained scenarios, size sweeps

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cohlab/dataset.hpp"
#include "cohlab/decision_tree.hpp"
#include "cohlab/errors.hpp"
#include "cohlab/knn.hpp"
#include "cohlab/metrics.hpp"
#include "cohlab/random.hpp"

namespace cohlab {

// Everything a run needs besides the subcommand. Loaded from --config.
struct RunConfig {
    std::uint64_t seed = 42;
    std::size_t n = 50000;
    ParamRanges ranges;
    EngineParams fixed;
    GeneratorForm form = GeneratorForm::consistent;
    double train_fraction = 0.70;
    std::size_t n_iter = 10;
    int folds = 5;
    bool standardize = false;
    Hyperparams defaults;
    std::vector<std::size_t> sizes{5000, 10000, 20000, 35000, 50000};
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{{"seed", c.seed},
                       {"n", c.n},
                       {"ranges", c.ranges},
                       {"fixed", c.fixed},
                       {"generator_form", to_string(c.form)},
                       {"train_fraction", c.train_fraction},
                       {"n_iter", c.n_iter},
                       {"folds", c.folds},
                       {"standardize", c.standardize},
                       {"defaults", c.defaults},
                       {"sizes", c.sizes}};
}

// Missing keys keep defaults; unknown keys are an error.
inline void from_json(const nlohmann::json& j, RunConfig& c) {
    if (!j.is_object()) throw DomainError("config: expected a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "n") c.n = v.get<std::size_t>();
            else if (key == "ranges") c.ranges = v.get<ParamRanges>();
            else if (key == "fixed") c.fixed = v.get<EngineParams>();
            else if (key == "generator_form") c.form = generator_form_from_string(v.get<std::string>());
            else if (key == "train_fraction") c.train_fraction = v.get<double>();
            else if (key == "n_iter") c.n_iter = v.get<std::size_t>();
            else if (key == "folds") c.folds = v.get<int>();
            else if (key == "standardize") c.standardize = v.get<bool>();
            else if (key == "defaults") c.defaults = v.get<Hyperparams>();
            else if (key == "sizes") c.sizes = v.get<std::vector<std::size_t>>();
            else throw DomainError("config: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("config: ") + e.what());
    }
}

struct PipelineOptions {
    Mapping mapping = Mapping::f1;
    bool tune = true;          // random search; otherwise `defaults` as-is
    Hyperparams defaults;
    std::size_t n_iter = 10;
    int folds = 5;
    bool standardize = false;
    std::uint64_t seed = 42;
};

struct PipelineResult {
    Mapping mapping = Mapping::f1;
    KnnModel model;
    std::optional<SearchResult> search;
    double cv_accuracy = 0.0;         // k-fold on the training split for the chosen hyperparameters
    double validation_accuracy = 0.0; // single shot on the validation split
    ConfusionMatrix confusion;
    std::vector<int> predictions;     // validation split, in dataset order

    MappingSummary summary() const {
        const auto& hp = model.hyperparams();
        return {to_string(mapping), hp.k, to_string(hp.weighting), to_string(hp.metric), cv_accuracy,
                validation_accuracy};
    }
};

/// Tunes (optionally), fits on the training split and scores the validation split.
inline PipelineResult run_pipeline(const Dataset& ds, const PipelineOptions& opt) {
    const auto train = ds.indices(Split::train);
    const auto valid = ds.indices(Split::validation);
    if (train.empty()) throw DomainError("run_pipeline: empty training split");
    if (valid.empty()) throw DomainError("run_pipeline: empty validation split");
    const auto subset = feature_subset(opt.mapping);

    FeatureMatrix xt = project(ds, train, subset);
    const auto yt = labels_of(ds, train);
    std::optional<ZScore> z;
    if (opt.standardize) {
        z = ZScore::fit(xt);
        xt = z->apply(std::move(xt));
    }

    PipelineResult out;
    out.mapping = opt.mapping;
    Hyperparams hp = opt.defaults;
    if (opt.tune) {
        HyperSpace space;
        out.search = random_search(xt, yt, space, opt.n_iter, opt.seed, opt.folds);
        hp = out.search->best;
        out.cv_accuracy = out.search->best_score;
    } else {
        out.cv_accuracy = kfold_accuracy(xt, yt, hp, opt.folds, opt.seed);
    }

    if (z) out.model = KnnModel::with_prescaled(std::move(xt), yt, hp, subset, *z);
    else out.model = KnnModel(std::move(xt), yt, hp, subset);

    const FeatureMatrix xv = project(ds, valid, subset);
    const auto yv = labels_of(ds, valid);
    out.predictions = out.model.predict(xv);
    out.validation_accuracy = single_shot_accuracy(out.predictions, yv);
    out.confusion = ConfusionMatrix::from(out.predictions, yv);
    return out;
}

/// Writes model.json, summary.csv, classes.csv, confusion.{csv,txt} and
/// (when tuned) search.csv into `dir`, prefixed by the mapping name.
inline void write_pipeline_report(const PipelineResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::string pre = to_string(r.mapping) + "_";
    auto open = [&](const std::string& name) {
        std::ofstream os(dir / (pre + name), std::ios::binary);
        if (!os) throw DomainError("cannot write " + (dir / (pre + name)).string());
        return os;
    };
    {
        auto os = open("model.json");
        os << model_to_json(r.model).dump() << '\n';
    }
    {
        auto os = open("summary.csv");
        const MappingSummary s[] = {r.summary()};
        write_summary_csv(os, s);
    }
    {
        auto os = open("classes.csv");
        write_class_csv(os, r.confusion);
    }
    {
        auto os = open("confusion.csv");
        write_confusion_csv(os, r.confusion);
    }
    {
        auto os = open("confusion.txt");
        os << render_confusion(r.confusion);
    }
    if (r.search) {
        auto os = open("search.csv");
        os << "k,weighting,metric,cv_accuracy\n";
        char buf[32];
        for (const auto& t : r.search->trials) {
            std::snprintf(buf, sizeof buf, "%.6f", t.score);
            os << t.hp.k << ',' << to_string(t.hp.weighting) << ',' << to_string(t.hp.metric) << ','
               << buf << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Constrained scenarios

enum class Constraint { equal, greater, less, absent };

inline std::string to_string(Constraint c) {
    switch (c) {
    case Constraint::equal: return "equal";
    case Constraint::greater: return "greater";
    case Constraint::less: return "less";
    case Constraint::absent: return "absent";
    }
    return "?";
}

inline Constraint constraint_from_string(const std::string& s) {
    if (s == "equal" || s == "=") return Constraint::equal;
    if (s == "greater" || s == ">") return Constraint::greater;
    if (s == "less" || s == "<") return Constraint::less;
    if (s == "absent") return Constraint::absent;
    throw DomainError("unknown constraint '" + s + "'");
}

struct ScenarioSpec {
    Constraint c12 = Constraint::equal;  // relation of C1 to C2; never absent
    Constraint c34 = Constraint::absent; // relation of C3 to C4
    std::size_t n = 1000;
    std::array<Interval, kNumFeatures> ranges{{{0.76, 1.001}, {0.80, 1.01}, {0.76, 1.002}, {0.76, 1.001}}};
    std::uint64_t seed = 42;

    void validate() const {
        if (c12 == Constraint::absent) throw DomainError("scenario: the C1/C2 constraint cannot be absent");
        if (n < 1) throw DomainError("scenario: n must be >= 1");
        for (const auto& iv : ranges)
            if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo <= iv.hi))
                throw DomainError("scenario: each range needs finite lo <= hi");
    }
};

inline void to_json(nlohmann::json& j, const ScenarioSpec& s) {
    j = nlohmann::json{{"c12", to_string(s.c12)}, {"c34", to_string(s.c34)}, {"n", s.n},
                       {"ranges", s.ranges},     {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, ScenarioSpec& s) {
    if (!j.is_object()) throw DomainError("scenario: expected a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "c12") s.c12 = constraint_from_string(v.get<std::string>());
            else if (key == "c34") s.c34 = constraint_from_string(v.get<std::string>());
            else if (key == "n") s.n = v.get<std::size_t>();
            else if (key == "seed") s.seed = v.get<std::uint64_t>();
            else if (key == "ranges") {
                if (!v.is_array() || v.size() != kNumFeatures)
                    throw DomainError("scenario: ranges must list four [lo, hi] pairs");
                for (std::size_t i = 0; i < kNumFeatures; ++i) s.ranges[i] = v[i].get<Interval>();
            } else throw DomainError("scenario: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("scenario: ") + e.what());
    }
    s.validate();
}

struct ScenarioResult {
    std::size_t n = 0;
    std::array<std::size_t, kNumClasses> unit_counts{}; // queries with all vote mass on one class
    std::array<double, kNumClasses> mean_proba{};
    int winner = 0; // class with most unit-probability predictions (smallest on ties)
    double acceptance_rate = 1.0;
};

inline constexpr std::uint64_t kMaxRejectionAttempts = 1000000;
inline constexpr double kMinAcceptanceRate = 0.01;

namespace detail {

struct PairSampler {
    std::uint64_t attempts = 0;
    std::uint64_t accepted = 0;

    // Draws (a, b) from (ra, rb) subject to c; `absent` draws independently.
    std::pair<double, double> draw(Constraint c, const Interval& ra, const Interval& rb, Rng& rng) {
        if (c == Constraint::equal) {
            const double a = rng.uniform(ra.lo, ra.hi);
            ++attempts;
            ++accepted;
            return {a, a};
        }
        for (std::uint64_t t = 0; t < kMaxRejectionAttempts; ++t) {
            const double a = rng.uniform(ra.lo, ra.hi);
            const double b = rng.uniform(rb.lo, rb.hi);
            ++attempts;
            if (c == Constraint::absent || (c == Constraint::greater && a > b) ||
                (c == Constraint::less && a < b)) {
                ++accepted;
                return {a, b};
            }
        }
        throw InfeasibleConstraintError("scenario: no draw satisfied '" + to_string(c) + "' in " +
                                        std::to_string(kMaxRejectionAttempts) + " attempts");
    }

    double rate() const { return attempts ? static_cast<double>(accepted) / static_cast<double>(attempts) : 1.0; }
};

} // namespace detail

/// Synthetic feature vectors drawn uniformly in the scenario ranges under the
/// pair constraints. Instance i uses Rng(seed, stream::scenario, i).
inline std::vector<Features> scenario_features(const ScenarioSpec& spec, double* acceptance = nullptr) {
    spec.validate();
    detail::PairSampler s12, s34;
    std::vector<Features> out(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Rng rng(spec.seed, stream::scenario, i);
        const auto [c1, c2] = s12.draw(spec.c12, spec.ranges[0], spec.ranges[1], rng);
        const auto [c3, c4] = s34.draw(spec.c34, spec.ranges[2], spec.ranges[3], rng);
        out[i] = {c1, c2, c3, c4};
    }
    const double rate = std::min(s12.rate(), s34.rate());
    if (rate < kMinAcceptanceRate)
        throw InfeasibleConstraintError("scenario: rejection acceptance rate " + std::to_string(rate) +
                                        " below 1%");
    if (acceptance) *acceptance = rate;
    return out;
}

/// Queries `model` on scenario draws and tallies unit-probability predictions.
/// Features the model does not use are dropped.
inline ScenarioResult run_scenario(const KnnModel& model, const ScenarioSpec& spec) {
    if (model.empty()) throw StateError("run_scenario: model has no training data");
    ScenarioResult r;
    const auto feats = scenario_features(spec, &r.acceptance_rate);
    const auto& subset = model.feature_subset();
    std::vector<double> q(subset.size());
    r.n = feats.size();
    for (const auto& f : feats) {
        for (std::size_t c = 0; c < subset.size(); ++c) q[c] = f[static_cast<std::size_t>(subset[c])];
        const ClassMass mass = model.vote_mass(q);
        const auto p = normalize(mass);
        int nonzero = 0, only = 0;
        for (int k = 0; k < kNumClasses; ++k) {
            r.mean_proba[static_cast<std::size_t>(k)] += p[static_cast<std::size_t>(k)];
            if (mass[static_cast<std::size_t>(k)] > 0.0) {
                ++nonzero;
                only = k;
            }
        }
        if (nonzero == 1) ++r.unit_counts[static_cast<std::size_t>(only)];
    }
    for (auto& m : r.mean_proba) m /= static_cast<double>(r.n);
    for (int k = 1; k < kNumClasses; ++k)
        if (r.unit_counts[static_cast<std::size_t>(k)] > r.unit_counts[static_cast<std::size_t>(r.winner)])
            r.winner = k;
    return r;
}

inline nlohmann::json scenario_result_json(const ScenarioSpec& spec, const ScenarioResult& r) {
    return nlohmann::json{{"spec", spec},
                          {"n", r.n},
                          {"unit_counts", r.unit_counts},
                          {"mean_proba", r.mean_proba},
                          {"winner", r.winner},
                          {"acceptance_rate", r.acceptance_rate}};
}

// ---------------------------------------------------------------------------
// Dataset-size sweep

struct SweepRow {
    std::size_t n;
    double kfold_accuracy;      // default hyperparameters, k-fold on the training split
    double validation_accuracy; // same hyperparameters, trained on train, scored on validation
    double tree_accuracy;       // CART baseline, validation split
};

struct SweepOptions {
    Mapping mapping = Mapping::f1;
    Hyperparams hp;
    int folds = 5;
    ParamRanges ranges;
    GenerateOptions gen;
    TreeOptions tree;
};

/// One row per size. Each size uses a fresh dataset from the same seed, so the
/// smaller datasets are prefixes of the larger ones (per-sample streams).
inline std::vector<SweepRow> run_size_sweep(std::span<const std::size_t> sizes, std::uint64_t seed,
                                            const SweepOptions& opt = {}) {
    if (sizes.empty()) throw DomainError("sweep: no sizes given");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (!(sizes[i] > sizes[i - 1])) throw DomainError("sweep: sizes must be strictly ascending");
    const auto subset = feature_subset(opt.mapping);
    std::vector<SweepRow> out;
    for (std::size_t n : sizes) {
        const Dataset ds = generate(n, opt.ranges, seed, opt.gen);
        const auto tr = ds.indices(Split::train), va = ds.indices(Split::validation);
        const FeatureMatrix xt = project(ds, tr, subset), xv = project(ds, va, subset);
        const auto yt = labels_of(ds, tr), yv = labels_of(ds, va);
        SweepRow row{n, kfold_accuracy(xt, yt, opt.hp, opt.folds, seed), 0.0, 0.0};
        const KnnModel m(xt, yt, opt.hp, subset);
        row.validation_accuracy = single_shot_accuracy(m, xv, yv);
        const auto tree = DecisionTree::fit(xt, yt, opt.tree);
        row.tree_accuracy = single_shot_accuracy(tree.predict(xv), yv);
        out.push_back(row);
    }
    return out;
}

inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
    os << "n,kfold_accuracy,validation_accuracy,tree_accuracy\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.4f,%.4f,%.4f\n", r.n, r.kfold_accuracy,
                      r.validation_accuracy, r.tree_accuracy);
        os << buf;
    }
}

// Whitespace-separated columns for gnuplot: `plot 'sweep.dat' u 1:2 w lp`.
inline void write_sweep_dat(std::ostream& os, std::span<const SweepRow> rows) {
    os << "# n kfold_accuracy validation_accuracy tree_accuracy\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu %.4f %.4f %.4f\n", r.n, r.kfold_accuracy, r.validation_accuracy,
                      r.tree_accuracy);
        os << buf;
    }
}

} // namespace cohlab
