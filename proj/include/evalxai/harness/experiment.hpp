#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "evalxai/data.hpp"
#include "evalxai/error.hpp"
#include "evalxai/explain.hpp"
#include "evalxai/harness/config.hpp"
#include "evalxai/metrics.hpp"
#include "evalxai/models/any_model.hpp"
#include "evalxai/models/scoring.hpp"
#include "evalxai/models/serialize.hpp"
#include "evalxai/random.hpp"
#include "evalxai/simulate.hpp"
#include "evalxai/stats.hpp"

namespace evalxai {

inline constexpr double kAucGate = 0.75;

// Seeds for pipeline steps live on an instance index no test row can use.
inline constexpr std::uint64_t kPipelineStream = ~std::uint64_t{0};

struct ModelScoreRow {
    std::string name;
    std::string kind;
    ModelScore score;
    bool below_auc_gate = false;
    std::string search; // SearchResult::describe(), empty without search
};

/// One simulated variant of a test instance.
struct SimulatedRow {
    std::string instance_id;
    std::string variant; // original, green or red
    std::vector<double> values;
};

struct AlphaRun {
    double alpha = 1.0;
    std::size_t run = 1;
    std::vector<InstanceOutcome> outcomes; // ordered by test position
    std::vector<SimulatedRow> simulated;
    MetricReport report;
};

struct ModelArtifacts {
    ModelBundle bundle;
    ModelScoreRow score;
    std::vector<std::vector<Explanation>> explanations; // [run - 1][instance]
    std::vector<AlphaRun> results;                     // alpha-major, then run
    std::size_t failures = 0;
    bool all_failed = false;
    std::optional<ConsistencyReport> consistency;
};

struct RunArtifacts {
    std::vector<FeatureSpec> features;
    std::vector<double> alphas;
    std::size_t runs = 0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    std::size_t evaluated = 0;
    double significance = 0.05;
    std::vector<ModelArtifacts> models;
    ConsistencyReport consistency; // all models combined
    std::vector<std::string> warnings;
};

/// Worker count: EVALXAI_JOBS wins over `requested`; 0 means hardware
/// concurrency.
inline std::size_t resolve_jobs(std::size_t requested) {
    if (const char* env = std::getenv("EVALXAI_JOBS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1) throw ConfigError("EVALXAI_JOBS must be a positive integer");
        requested = static_cast<std::size_t>(v);
    }
    if (requested == 0) requested = std::max(1u, std::thread::hardware_concurrency());
    return requested;
}

/// Calls task(i) for i in [0, n) on `jobs` threads. The first exception by
/// index order is rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    jobs = std::min(jobs, n);
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline Dataset load_dataset(const DatasetSpec& spec) {
    Dataset ds;
    if (const auto* csv = std::get_if<CsvSource>(&spec.source)) {
        std::ifstream in(csv->path);
        if (!in) throw DataError("cannot open dataset '" + csv->path.string() + "'");
        ds = load_csv(in, csv->label_column, csv->positive_label);
    } else {
        const auto& s = std::get<SyntheticSource>(spec.source);
        ds = generate_synthetic(s.rows, s.coefficients, s.intercept, s.label_noise, s.seed);
    }
    mark_non_negative(ds, spec.non_negative);
    return ds;
}

namespace detail {

inline std::vector<std::vector<Explanation>> imported_runs(const std::filesystem::path& path, const Dataset& test,
                                                          std::size_t runs) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open explanation file '" + path.string() + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto list = import_explanations(text, test.features());

    // Document order gives the run index within each instance.
    std::map<std::string, std::vector<const Explanation*>> by_id;
    for (const auto& e : list) by_id[e.instance_id].push_back(&e);
    std::vector<std::vector<Explanation>> out(runs, std::vector<Explanation>(test.rows()));
    for (std::size_t i = 0; i < test.rows(); ++i) {
        const auto id = std::to_string(test.id(i));
        const auto it = by_id.find(id);
        const std::size_t have = it == by_id.end() ? 0 : it->second.size();
        if (have < runs) {
            throw DataError("explanation file '" + path.string() + "' has " + std::to_string(have) +
                            " explanation(s) for instance " + id + ", need " + std::to_string(runs));
        }
        for (std::size_t r = 0; r < runs; ++r) out[r][i] = *it->second[r];
    }
    return out;
}

} // namespace detail

/// Consistency over runs for one model. `results` is alpha-major, then run.
/// Each run's %Prob_diff series is restricted to instances explained
/// successfully in every run.
inline ConsistencyReport model_consistency(std::span<const AlphaRun> results, std::span<const double> alphas,
                                           std::size_t runs, double significance, std::string_view group) {
    if (results.size() != alphas.size() * runs) throw DataError("incomplete alpha/run grid for consistency");
    std::vector<RunSeries> series(runs);
    for (std::size_t r = 0; r < runs; ++r) series[r].label = "R" + std::to_string(r + 1);
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        std::map<std::string, std::size_t> ok;
        for (std::size_t r = 0; r < runs; ++r) {
            for (const auto& o : results[k * runs + r].outcomes) ok[o.instance_id] += !o.explanation_failed;
        }
        for (std::size_t r = 0; r < runs; ++r) {
            KeyedSeries s;
            for (const auto& o : results[k * runs + r].outcomes) {
                if (ok[o.instance_id] == runs) s.emplace_back(o.instance_id, signed_prob_diff(o));
            }
            series[r].by_alpha.emplace_back(alphas[k], std::move(s));
        }
    }
    return consistency(series, significance, group);
}

/// The full pipeline: load, filter, split, oversample the training split,
/// train and score each model, explain every test instance once per run,
/// simulate both directions per alpha, and aggregate metrics and
/// consistency. Deterministic for a given config regardless of `jobs`.
inline RunArtifacts run_experiment(const ExperimentConfig& config, std::size_t jobs = 1) {
    config.validate();
    Dataset ds = load_dataset(config.dataset);
    if (config.preprocessing.spearman_threshold) ds = spearman_filter(ds, *config.preprocessing.spearman_threshold);

    auto [train, test] = train_test_split(ds, config.preprocessing.test_fraction, config.preprocessing.stratified,
                                          derive_seed(config.master_seed, kPipelineStream, 0));
    if (config.preprocessing.smote) {
        train = smote(train, config.preprocessing.smote_k, derive_seed(config.master_seed, kPipelineStream, 1));
    }
    if (config.preprocessing.balance_test) {
        test = balance_test_set(test, derive_seed(config.master_seed, kPipelineStream, 2));
    }
    if (config.instance_cap && test.rows() > *config.instance_cap) {
        std::vector<std::size_t> keep(*config.instance_cap);
        std::iota(keep.begin(), keep.end(), std::size_t{0});
        test = test.subset(keep);
    }
    if (test.empty()) throw DataError("no usable test instances");

    const FeatureStats stats = feature_stats(train);
    RunArtifacts art;
    art.features = test.features();
    art.alphas = config.alphas;
    art.runs = config.runs;
    art.train_rows = train.rows();
    art.test_rows = test.rows();
    art.evaluated = test.rows();
    art.significance = config.significance;

    std::vector<std::string> feature_names;
    for (const auto& f : train.features()) feature_names.push_back(f.name);

    for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
        const auto& spec = config.models[mi];
        ModelArtifacts ma;
        ModelConfig mc = spec.config;
        set_seed(mc, derive_seed(config.master_seed, kPipelineStream, 16 + mi));
        ma.score.name = spec.name;
        ma.score.kind = std::string(kind_name(mc));
        if (spec.search) {
            const auto sr = search_hyperparams(mc, spec.search->space, spec.search->strategy, spec.search->budget,
                                               train, spec.search->cv_folds,
                                               derive_seed(config.master_seed, kPipelineStream, 1024 + mi));
            mc = sr.best;
            ma.score.search = sr.describe();
        }
        ma.bundle = {spec.name, feature_names, train_model(mc, train)};
        const AnyModel& model = ma.bundle.model;
        ma.score.score = score_model(model, test);
        ma.score.below_auc_gate = !ma.score.score.auc || *ma.score.score.auc < kAucGate;
        if (ma.score.below_auc_gate) {
            art.warnings.push_back("model '" + spec.name + "' is below the AUC gate of 0.75");
        }

        // Explanations: one work item per test instance covering every run.
        const std::size_t n = test.rows();
        ma.explanations.assign(config.runs, std::vector<Explanation>(n));
        if (config.explainer.kind == ExplainerKind::Import) {
            ma.explanations = detail::imported_runs(config.explainer.import_paths.at(spec.name), test, config.runs);
        } else {
            parallel_for(n, jobs, [&](std::size_t i) {
                const auto id = std::to_string(test.id(i));
                for (std::size_t r = 0; r < config.runs; ++r) {
                    const auto seed = derive_seed(config.master_seed, test.id(i), r + 1);
                    Explanation e;
                    if (config.explainer.kind == ExplainerKind::Oracle) {
                        e = linear_oracle_explain(*model.as<LogisticRegressionModel>(), test.row(i), test.features(),
                                                  config.explainer.oracle_top_k, id);
                        e.run_seed = seed;
                    } else {
                        e = surrogate_explain(model, test.row(i), train, config.explainer.surrogate, seed, id);
                    }
                    ma.explanations[r][i] = std::move(e);
                }
            });
        }

        // Simulation and outcomes per (alpha, run).
        for (double alpha : config.alphas) {
            for (std::size_t r = 0; r < config.runs; ++r) {
                AlphaRun ar;
                ar.alpha = alpha;
                ar.run = r + 1;
                const SimulationConfig sim{alpha, config.clamp_non_negative};
                ar.outcomes = build_outcomes(model, test, ma.explanations[r], stats, sim);
                for (std::size_t i = 0; i < n; ++i) {
                    const auto& e = ma.explanations[r][i];
                    const auto id = ar.outcomes[i].instance_id;
                    ar.simulated.push_back({id, "original", {test.row(i).begin(), test.row(i).end()}});
                    if (e.failed()) continue;
                    ar.simulated.push_back(
                        {id, "green", simulate(test.row(i), e, test.features(), stats, Direction::GreenWard, sim).values});
                    ar.simulated.push_back(
                        {id, "red", simulate(test.row(i), e, test.features(), stats, Direction::RedWard, sim).values});
                }
                ar.report = metric_report(ar.outcomes, spec.name, alpha, ar.run, config.class_basis);
                ma.results.push_back(std::move(ar));
            }
        }
        for (const auto& run : ma.explanations) {
            for (const auto& e : run) ma.failures += e.failed();
        }
        ma.all_failed = ma.failures == n * config.runs;
        if (ma.all_failed) {
            art.warnings.push_back("every explanation failed for model '" + spec.name + "'");
        } else if (config.runs >= 2) {
            ma.consistency = model_consistency(ma.results, config.alphas, config.runs, config.significance, spec.name);
            art.consistency.append(*ma.consistency);
        }
        art.models.push_back(std::move(ma));
    }
    art.consistency.significance = config.significance;
    return art;
}

} // namespace evalxai
