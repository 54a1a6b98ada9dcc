#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "evalxai/harness/config.hpp"
#include "evalxai/harness/experiment.hpp"
#include "evalxai/harness/reports.hpp"

namespace fs = std::filesystem;
using namespace evalxai;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ClassBasis parse_basis(const std::string& s) {
    if (s == "predicted") return ClassBasis::Predicted;
    if (s == "true_label") return ClassBasis::TrueLabel;
    throw ConfigError("--basis must be 'predicted' or 'true_label'");
}

std::vector<double> parse_alphas(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');) {
        const auto v = parse_double(tok);
        if (!v || !(*v > 0.0)) throw ConfigError("bad alpha '" + tok + "'");
        out.push_back(*v);
    }
    if (out.empty()) throw ConfigError("alpha list must be nonempty");
    return out;
}

// Output goes to `dir/name` when a directory is given, stdout otherwise.
void deliver(const std::optional<fs::path>& dir, const std::string& name, const std::string& content) {
    if (!dir) {
        std::cout << content;
        return;
    }
    fs::create_directories(*dir);
    std::ofstream out(*dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + (*dir / name).string() + "'");
    out << content;
}

// Groups an outcome dump into per-model alpha-major grids.
struct Grid {
    std::vector<double> alphas;
    std::size_t runs = 0;
    std::vector<AlphaRun> results;
};

// Models keep their order of first appearance.
std::vector<std::pair<std::string, Grid>> grids_from(const OutcomeGroups& dump) {
    std::vector<std::pair<std::string, Grid>> grids;
    for (const auto& [key, outcomes] : dump) {
        auto it = std::find_if(grids.begin(), grids.end(), [&](const auto& g) { return g.first == key.model; });
        if (it == grids.end()) it = grids.insert(grids.end(), {key.model, Grid{}});
        auto& g = it->second;
        if (g.alphas.empty() || g.alphas.back() != key.alpha) g.alphas.push_back(key.alpha);
        g.runs = std::max(g.runs, key.run);
        AlphaRun ar;
        ar.alpha = key.alpha;
        ar.run = key.run;
        ar.outcomes = outcomes;
        g.results.push_back(std::move(ar));
    }
    for (auto& [model, g] : grids) {
        if (g.results.size() != g.alphas.size() * g.runs) {
            throw DataError("outcome dump for model '" + model + "' does not cover every (alpha, run)");
        }
        for (std::size_t i = 0; i < g.results.size(); ++i) {
            if (g.results[i].run != i % g.runs + 1) {
                throw DataError("outcome dump for model '" + model + "' has gaps in its run numbering");
            }
        }
    }
    return grids;
}

int cmd_run(const fs::path& config_path, const std::optional<fs::path>& out_opt, std::size_t jobs) {
    auto config = load_config(config_path);
    if (out_opt) config.output_dir = *out_opt;
    if (config.output_dir.empty()) throw ConfigError("no output directory: pass --out or set 'output'");
    const auto art = run_experiment(config, resolve_jobs(jobs));
    const auto files = emit_reports(art, config.output_dir);
    for (const auto& w : art.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& ma : art.models) {
        std::cerr << ma.score.name << ": AUC " << format_optional(ma.score.score.auc);
        if (ma.consistency) std::cerr << ", inconsistent " << ma.consistency->inconsistent << "/" << ma.consistency->total();
        std::cerr << "\n";
    }
    std::cerr << "wrote " << files.size() << " files to " << config.output_dir.string() << "\n";
    return 0;
}

int cmd_metrics(const fs::path& outcomes_path, const std::string& basis, const std::optional<fs::path>& out) {
    std::ifstream in(outcomes_path);
    if (!in) throw DataError("cannot read '" + outcomes_path.string() + "'");
    const auto dump = read_outcomes(in);
    const auto b = parse_basis(basis);
    std::string metrics(kMetricsHeader);
    std::string prob_diff(kProbDiffHeader);
    for (const auto& [key, outcomes] : dump) {
        const auto r = metric_report(outcomes, key.model, key.alpha, key.run, b);
        append_metric_rows(metrics, r);
        append_prob_diff_rows(prob_diff, r);
    }
    deliver(out, "metrics.csv", metrics);
    if (out) deliver(out, "prob_diff.csv", prob_diff);
    return 0;
}

int cmd_consistency(const fs::path& runs_dir, double level, const std::optional<fs::path>& out) {
    std::ifstream in(runs_dir / "outcomes.csv");
    if (!in) throw DataError("no outcomes.csv under '" + runs_dir.string() + "'");
    ConsistencyReport total;
    total.significance = level;
    for (const auto& [model, g] : grids_from(read_outcomes(in))) {
        if (g.runs < 2) continue;
        total.append(model_consistency(g.results, g.alphas, g.runs, level, model));
    }
    std::string csv(kConsistencyHeader);
    append_consistency_rows(csv, total);
    deliver(out, "consistency.csv", csv);
    std::cerr << "inconsistent " << total.inconsistent << "/" << total.total() << " ("
              << format_double(total.percentage()) << "%)\n";
    return 0;
}

struct ImportOptions {
    fs::path file, dataset, model;
    std::string label = "label";
    std::string positive = "1";
    std::string alphas = "1,2,3";
    std::optional<fs::path> stats_from;
    bool clamp = false;
    std::string basis = "predicted";
    std::optional<fs::path> out;
};

Dataset load_for_model(const fs::path& path, const ImportOptions& o, const ModelBundle& bundle) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    const Dataset full = load_csv(in, o.label, o.positive);
    std::vector<std::size_t> keep;
    for (const auto& name : bundle.features) {
        const auto f = full.feature_index(name);
        if (!f) throw DataError("dataset '" + path.string() + "' lacks model feature '" + name + "'");
        keep.push_back(*f);
    }
    return full.select_features(keep);
}

int cmd_import(const ImportOptions& o) {
    const auto doc = ordered_json::parse(read_text(o.model), nullptr, false);
    if (doc.is_discarded()) throw DataError("model file is not valid JSON");
    const auto bundle = model_from_json(doc);
    const Dataset ds = load_for_model(o.dataset, o, bundle);
    const FeatureStats stats = feature_stats(o.stats_from ? load_for_model(*o.stats_from, o, bundle) : ds);
    const auto alphas = parse_alphas(o.alphas);
    const auto list = import_explanations(read_text(o.file), ds.features());

    // Instance ids are zero-based data row indices; document order is the run.
    std::map<std::size_t, std::vector<const Explanation*>> by_row;
    for (const auto& e : list) {
        const auto v = parse_double(e.instance_id);
        if (!v || *v < 0 || *v != std::floor(*v) || *v >= static_cast<double>(ds.rows())) {
            throw DataError("instance_id '" + e.instance_id + "' is not a row index of the dataset");
        }
        by_row[static_cast<std::size_t>(*v)].push_back(&e);
    }
    if (by_row.empty()) throw DataError("no explanations to score");
    const std::size_t runs = by_row.begin()->second.size();
    std::vector<std::size_t> rows;
    for (const auto& [row, es] : by_row) {
        if (es.size() != runs) throw DataError("instances have differing numbers of explanations");
        rows.push_back(row);
    }
    const Dataset test = ds.subset(rows);

    std::string metrics(kMetricsHeader), prob_diff(kProbDiffHeader), outcomes(kOutcomesHeader);
    std::vector<AlphaRun> grid;
    for (double alpha : alphas) {
        for (std::size_t r = 0; r < runs; ++r) {
            std::vector<Explanation> ex;
            for (const auto& [row, es] : by_row) ex.push_back(*es[r]);
            AlphaRun ar;
            ar.alpha = alpha;
            ar.run = r + 1;
            ar.outcomes = build_outcomes(bundle.model, test, ex, stats, {alpha, o.clamp});
            ar.report = metric_report(ar.outcomes, bundle.name, alpha, ar.run, parse_basis(o.basis));
            append_metric_rows(metrics, ar.report);
            append_prob_diff_rows(prob_diff, ar.report);
            append_outcome_rows(outcomes, bundle.name, ar);
            grid.push_back(std::move(ar));
        }
    }
    deliver(o.out, "metrics.csv", metrics);
    if (o.out) {
        deliver(o.out, "prob_diff.csv", prob_diff);
        deliver(o.out, "outcomes.csv", outcomes);
        if (runs >= 2) {
            std::string csv(kConsistencyHeader);
            append_consistency_rows(csv, model_consistency(grid, alphas, runs, 0.05, bundle.name));
            deliver(o.out, "consistency.csv", csv);
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reliability and consistency evaluation of rule-based local explanations"};
    app.require_subcommand(1);

    fs::path config_path;
    std::optional<fs::path> run_out;
    std::size_t jobs = 1;
    auto* run = app.add_subcommand("run", "Run a full experiment from a JSON config");
    run->add_option("--config", config_path, "Experiment config")->required();
    run->add_option("--out", run_out, "Output directory (overrides the config)");
    run->add_option("--jobs", jobs, "Worker threads, 0 = all cores (EVALXAI_JOBS overrides)");

    fs::path outcomes_path;
    std::string basis = "predicted";
    std::optional<fs::path> metrics_out;
    auto* metrics = app.add_subcommand("metrics", "Recompute metrics from an outcome dump");
    metrics->add_option("--outcomes", outcomes_path, "outcomes.csv")->required();
    metrics->add_option("--basis", basis, "Class basis for granular metrics: predicted or true_label");
    metrics->add_option("--out", metrics_out, "Write metrics.csv and prob_diff.csv here instead of stdout");

    fs::path runs_dir;
    double level = 0.05;
    std::optional<fs::path> cons_out;
    auto* cons = app.add_subcommand("consistency", "Wilcoxon/Cliff's delta consistency from a run directory");
    cons->add_option("--runs", runs_dir, "Directory holding outcomes.csv")->required();
    cons->add_option("--alpha-level", level, "Significance level");
    cons->add_option("--out", cons_out, "Write consistency.csv here instead of stdout");

    ImportOptions imp;
    auto* import = app.add_subcommand("import-explanations", "Score explanations produced by an external tool");
    import->add_option("--file", imp.file, "Explanation exchange document")->required();
    import->add_option("--dataset", imp.dataset, "CSV with the explained instances")->required();
    import->add_option("--model", imp.model, "Model document")->required();
    import->add_option("--label", imp.label, "Label column");
    import->add_option("--positive", imp.positive, "Label value of the positive class");
    import->add_option("--alphas", imp.alphas, "Comma-separated alpha list");
    import->add_option("--stats-from", imp.stats_from, "CSV used for feature standard deviations");
    import->add_flag("--clamp", imp.clamp, "Clamp non-negative features at zero");
    import->add_option("--basis", imp.basis, "Class basis for granular metrics");
    import->add_option("--out", imp.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(config_path, run_out, jobs);
        if (*metrics) return cmd_metrics(outcomes_path, basis, metrics_out);
        if (*cons) {
            if (!(level > 0.0 && level < 1.0)) throw ConfigError("--alpha-level must be in (0, 1)");
            return cmd_consistency(runs_dir, level, cons_out);
        }
        if (*import) return cmd_import(imp);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
