// cohlab — command-line front end: data generation, training, scenarios, sweeps and self-checks

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cohlab/counting_stats.hpp"
#include "cohlab/dataset.hpp"
#include "cohlab/experiments.hpp"
#include "cohlab/knn.hpp"
#include "cohlab/metrics.hpp"
#include "cohlab/trajectory_oracle.hpp"
#include "cohlab/version.hpp"

namespace fs = std::filesystem;
using namespace cohlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Globals {
    std::uint64_t seed = 42;
    bool seed_given = false;
    std::string config;
    std::string out = "out";
};

nlohmann::json read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw DomainError("cannot open " + p.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(p.string() + ": " + e.what(), 0);
    }
}

RunConfig load_config(const Globals& g) {
    RunConfig c;
    if (!g.config.empty()) c = read_json(g.config).get<RunConfig>();
    if (g.seed_given) c.seed = g.seed;
    return c;
}

GenerateOptions gen_options(const RunConfig& c) {
    GenerateOptions o;
    o.fixed = c.fixed;
    o.form = c.form;
    o.train_fraction = c.train_fraction;
    return o;
}

void write_text(const fs::path& p, const std::string& s) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw DomainError("cannot write " + p.string());
    os << s;
}

Dataset load_or_generate(const std::string& data, const RunConfig& c) {
    if (!data.empty()) return read_csv(data);
    std::clog << "no --data given; generating " << c.n << " samples (seed " << c.seed << ")\n";
    return generate(c.n, c.ranges, c.seed, gen_options(c));
}

void print_result(const PipelineResult& r) {
    const auto& hp = r.model.hyperparams();
    std::printf("%s: k=%d weighting=%s metric=%s cv=%.2f%% validation=%.2f%%\n", to_string(r.mapping).c_str(),
                hp.k, to_string(hp.weighting).c_str(), to_string(hp.metric).c_str(), r.cv_accuracy,
                r.validation_accuracy);
    std::cout << render_confusion(r.confusion);
    write_class_csv(std::cout, r.confusion);
}

// Quick end-to-end consistency checks; returns the number of failures.
int oracle_check(const RunConfig& c, std::size_t draws) {
    int failures = 0;
    auto report = [&](bool ok, const std::string& what) {
        std::printf("%s %s\n", ok ? "ok  " : "FAIL", what.c_str());
        failures += !ok;
    };

    double worst_defect = 0.0;
    std::size_t bitwise = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        Rng rng(c.seed, stream::sample, i);
        EngineParams p = c.fixed;
        p.t_c = rng.uniform(c.ranges.t_c.lo, c.ranges.t_c.hi);
        p.t_h = rng.uniform(c.ranges.t_h.lo, c.ranges.t_h.hi);
        p.t_l = rng.uniform(c.ranges.t_l.lo, c.ranges.t_l.hi);
        p.p_c = rng.uniform(c.ranges.p_c.lo, c.ranges.p_c.hi);
        p.p_h = rng.uniform(c.ranges.p_h.lo, c.ranges.p_h.hi);
        worst_defect = std::max(worst_defect, build_generator(p, c.form).conservation_defect());
        try {
            const auto cs = cumulant_ratios(p.without_coherence(), c.form);
            bitwise += cs.c == Cumulants{1.0, 1.0, 1.0, 1.0};
        } catch (const DegenerateSampleError&) {
            ++bitwise; // no ratio to compare
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "population conservation over %zu draws (max |u^T L0| = %.2e)", draws,
                  worst_defect);
    report(worst_defect < 1e-12, buf);
    std::snprintf(buf, sizeof buf, "baseline identity at p=0: %zu/%zu bitwise", bitwise, draws);
    report(bitwise == draws, buf);

    // Gillespie vs analytic at the default engine.
    EngineParams p = c.fixed.without_coherence();
    const auto j = cumulants(build_generator(p));
    const auto proc = JumpProcess::from_params(p);
    const auto st = simulate(proc, 2e4, 40, c.seed);
    const double zm = (st.mean_rate - j[0]) / st.mean_rate_se;
    const double zv = (st.var_rate - j[1]) / st.var_rate_se;
    std::snprintf(buf, sizeof buf, "trajectory mean %.5f vs %.5f (z=%.2f), variance %.5f vs %.5f (z=%.2f)",
                  st.mean_rate, j[0], zm, st.var_rate, j[1], zv);
    report(std::abs(zm) < 4.0 && std::abs(zv) < 4.0, buf);
    return failures;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cohlab: counting statistics of a four-level heat engine and KNN coherence classifiers"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "RNG seed (overrides the config file)")
        ->each([&](const std::string&) { g.seed_given = true; });
    app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", g.out, "output directory (gen-data: CSV path or directory)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a labelled cumulant-ratio dataset");
    std::optional<std::size_t> gen_n;
    gen->add_option("--n", gen_n, "number of samples")->check(CLI::PositiveNumber);

    // train
    auto* train = app.add_subcommand("train", "tune, fit and evaluate one mapping");
    std::string train_mapping = "f1", train_data;
    bool untuned = false;
    std::optional<int> train_k;
    std::string train_weighting, train_metric;
    train->add_option("--mapping", train_mapping, "f1, f2 or f3")->check(CLI::IsMember({"f1", "f2", "f3"}));
    train->add_option("--data", train_data, "dataset CSV (generated from the config when omitted)");
    train->add_flag("--untuned", untuned, "skip the random search and use the given/default hyperparameters");
    train->add_option("--k", train_k, "neighbour count for --untuned");
    train->add_option("--weighting", train_weighting, "uniform or distance for --untuned")
        ->check(CLI::IsMember({"uniform", "distance"}));
    train->add_option("--metric", train_metric, "euclidean or manhattan for --untuned")
        ->check(CLI::IsMember({"euclidean", "manhattan"}));

    // tune
    auto* tune = app.add_subcommand("tune", "randomized hyperparameter search on the training split");
    std::string tune_mapping = "f1", tune_data;
    std::optional<std::size_t> tune_iter;
    tune->add_option("--mapping", tune_mapping, "f1, f2 or f3")->check(CLI::IsMember({"f1", "f2", "f3"}));
    tune->add_option("--data", tune_data, "dataset CSV (generated from the config when omitted)");
    tune->add_option("--n-iter", tune_iter, "number of sampled combinations")->check(CLI::PositiveNumber);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "score a saved model on a dataset's validation split");
    std::string eval_model, eval_data;
    bool eval_all = false;
    eval->add_option("--model", eval_model, "model JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", eval_data, "dataset CSV")->required()->check(CLI::ExistingFile);
    eval->add_flag("--all", eval_all, "score every sample instead of the validation split");

    // apply
    auto* apply = app.add_subcommand("apply", "run a constrained scenario through a saved model");
    std::string apply_model, apply_scenario;
    apply->add_option("--model", apply_model, "model JSON")->required()->check(CLI::ExistingFile);
    apply->add_option("--scenario", apply_scenario, "scenario JSON")->required()->check(CLI::ExistingFile);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "accuracy against dataset size with default hyperparameters");
    std::string sweep_mapping = "f1";
    std::vector<std::size_t> sweep_sizes;
    sweep->add_option("--mapping", sweep_mapping, "f1, f2 or f3")->check(CLI::IsMember({"f1", "f2", "f3"}));
    sweep->add_option("--sizes", sweep_sizes, "ascending dataset sizes");

    // oracle-check
    auto* oracle = app.add_subcommand("oracle-check", "cross-check the physics layer against its oracles");
    std::size_t oracle_draws = 200;
    oracle->add_option("--draws", oracle_draws, "random parameter draws")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        RunConfig cfg = load_config(g);
        const fs::path out = g.out;

        if (*gen) {
            const std::size_t n = gen_n.value_or(cfg.n);
            fs::path csv = out;
            if (csv.extension() != ".csv") csv = out / "data.csv";
            if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
            const Dataset ds = generate(n, cfg.ranges, cfg.seed, gen_options(cfg));
            write_csv(ds, csv);
            std::printf("wrote %zu samples to %s (%llu degenerate re-draws)\n", ds.size(), csv.string().c_str(),
                        static_cast<unsigned long long>(ds.meta.degenerate_redraws));
        } else if (*train) {
            const Dataset ds = load_or_generate(train_data, cfg);
            PipelineOptions po;
            po.mapping = mapping_from_string(train_mapping);
            po.tune = !untuned;
            po.defaults = cfg.defaults;
            if (train_k) po.defaults.k = *train_k;
            if (!train_weighting.empty()) po.defaults.weighting = weighting_from_string(train_weighting);
            if (!train_metric.empty()) po.defaults.metric = metric_from_string(train_metric);
            po.n_iter = cfg.n_iter;
            po.folds = cfg.folds;
            po.standardize = cfg.standardize;
            po.seed = cfg.seed;
            const auto r = run_pipeline(ds, po);
            write_pipeline_report(r, out);
            print_result(r);
        } else if (*tune) {
            const Dataset ds = load_or_generate(tune_data, cfg);
            const auto subset = feature_subset(mapping_from_string(tune_mapping));
            const auto tr = ds.indices(Split::train);
            FeatureMatrix x = project(ds, tr, subset);
            if (cfg.standardize) x = ZScore::fit(x).apply(std::move(x));
            const auto res = random_search(x, labels_of(ds, tr), HyperSpace{}, tune_iter.value_or(cfg.n_iter),
                                           cfg.seed, cfg.folds);
            nlohmann::json j{{"mapping", tune_mapping}, {"best", res.best}, {"cv_accuracy", res.best_score}};
            write_text(out / (tune_mapping + "_best.json"), j.dump(2) + "\n");
            std::printf("best k=%d weighting=%s metric=%s cv=%.2f%% over %zu candidates\n", res.best.k,
                        to_string(res.best.weighting).c_str(), to_string(res.best.metric).c_str(),
                        res.best_score, res.trials.size());
        } else if (*eval) {
            const KnnModel model = model_from_json(read_json(eval_model));
            const Dataset ds = read_csv(eval_data);
            std::vector<std::size_t> idx;
            if (eval_all) {
                for (std::size_t i = 0; i < ds.size(); ++i) idx.push_back(i);
            } else {
                idx = ds.indices(Split::validation);
            }
            if (idx.empty()) throw DomainError("evaluate: nothing to score");
            const auto pred = model.predict(project(ds, idx, model.feature_subset()));
            const auto truth = labels_of(ds, idx);
            const auto cm = ConfusionMatrix::from(pred, truth);
            fs::create_directories(out);
            std::ofstream cls(out / "eval_classes.csv", std::ios::binary);
            write_class_csv(cls, cm);
            std::ofstream conf(out / "eval_confusion.csv", std::ios::binary);
            write_confusion_csv(conf, cm);
            std::printf("accuracy %.2f%% on %zu samples\n", accuracy(cm), idx.size());
            std::cout << render_confusion(cm);
            write_class_csv(std::cout, cm);
        } else if (*apply) {
            const KnnModel model = model_from_json(read_json(apply_model));
            const auto spec = read_json(apply_scenario).get<ScenarioSpec>();
            const auto res = run_scenario(model, spec);
            const auto j = scenario_result_json(spec, res);
            write_text(out / (fs::path(apply_scenario).stem().string() + "_result.json"), j.dump(2) + "\n");
            std::printf("c12=%s c34=%s n=%zu unit counts [%zu %zu %zu %zu] winner class %d\n",
                        to_string(spec.c12).c_str(), to_string(spec.c34).c_str(), res.n, res.unit_counts[0],
                        res.unit_counts[1], res.unit_counts[2], res.unit_counts[3], res.winner);
        } else if (*sweep) {
            SweepOptions so;
            so.mapping = mapping_from_string(sweep_mapping);
            so.hp = cfg.defaults;
            so.folds = cfg.folds;
            so.ranges = cfg.ranges;
            so.gen = gen_options(cfg);
            const auto sizes = sweep_sizes.empty() ? cfg.sizes : sweep_sizes;
            const auto rows = run_size_sweep(sizes, cfg.seed, so);
            fs::create_directories(out);
            std::ofstream csv(out / "sweep.csv", std::ios::binary);
            write_sweep_csv(csv, rows);
            std::ofstream dat(out / "sweep.dat", std::ios::binary);
            write_sweep_dat(dat, rows);
            write_sweep_csv(std::cout, rows);
        } else if (*oracle) {
            const int failures = oracle_check(cfg, oracle_draws);
            if (failures > 0) return kExitNumerical;
        }
        return kExitOk;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const StateError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << '\n';
        return 1;
    }
}
