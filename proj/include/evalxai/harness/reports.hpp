#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "evalxai/error.hpp"
#include "evalxai/format.hpp"
#include "evalxai/harness/experiment.hpp"
#include "evalxai/metrics.hpp"
#include "evalxai/stats.hpp"

namespace evalxai {

namespace detail {

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline ordered_json optional_json(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

inline ordered_json summary_json(const std::optional<SeriesSummary>& s) {
    if (!s) return nullptr;
    return {{"count", s->count}, {"mean", s->mean},     {"min", s->min}, {"q1", s->q1},
            {"median", s->median}, {"q3", s->q3}, {"max", s->max}};
}

inline ordered_json fraction_json(const Fraction& f) {
    return {{"hits", f.hits}, {"denominator", f.denominator}, {"percent", optional_json(f.percent())}};
}

} // namespace detail

// ---------------------------------------------------------------------------
// CSV tables shared by the run reports and the CLI subcommands

inline constexpr std::string_view kMetricsHeader = "model,alpha,run,partition,metric,hits,denominator,value\n";
inline constexpr std::string_view kProbDiffHeader =
    "model,alpha,run,partition,count,negative,mean,min,q1,median,q3,max\n";
inline constexpr std::string_view kConsistencyHeader =
    "model,alpha,run_a,run_b,n,w,p_value,method,cliffs_delta,magnitude,inconsistent\n";
inline constexpr std::string_view kOutcomesHeader = "model,run,alpha,instance_id,true_label,predicted_class,"
                                                    "original_risk,green_risk,red_risk,failed,clamp_events\n";

inline void append_metric_rows(std::string& out, const MetricReport& r) {
    auto row = [&](Partition p, std::string_view metric, const Fraction& f) {
        out += detail::csv_field(r.model) + "," + format_double(r.alpha) + "," + std::to_string(r.run) + "," +
               std::string(partition_name(p)) + "," + std::string(metric) + "," + std::to_string(f.hits) + "," +
               std::to_string(f.denominator) + "," + format_optional(f.percent()) + "\n";
    };
    for (auto p : kPartitions) {
        row(p, "pct_reversed", r.reversed[static_cast<int>(p)]);
        for (auto m : kGranularMetrics) row(p, metric_name(m), r.granular.at(m, p));
    }
}

inline void append_prob_diff_rows(std::string& out, const MetricReport& r) {
    for (auto p : kPartitions) {
        const int i = static_cast<int>(p);
        const auto& s = r.prob_diff_summary[i];
        out += detail::csv_field(r.model) + "," + format_double(r.alpha) + "," + std::to_string(r.run) + "," +
               std::string(partition_name(p)) + "," + std::to_string(s ? s->count : 0) + "," +
               std::to_string(r.prob_diff_negative[i]);
        for (auto v : {&SeriesSummary::mean, &SeriesSummary::min, &SeriesSummary::q1, &SeriesSummary::median,
                       &SeriesSummary::q3, &SeriesSummary::max}) {
            out += "," + (s ? format_double((*s).*v) : std::string());
        }
        out += "\n";
    }
}

inline void append_consistency_rows(std::string& out, const ConsistencyReport& rep) {
    for (const auto& v : rep.rows) {
        out += detail::csv_field(v.group) + "," + format_double(v.alpha) + "," + v.run_a + "," + v.run_b + "," +
               std::to_string(v.wilcoxon.n_effective) + "," + format_double(v.wilcoxon.w_statistic) + "," +
               format_double(v.wilcoxon.p_value) + "," + std::string(method_name(v.wilcoxon.method)) + "," +
               format_double(v.effect.delta) + "," + std::string(magnitude_name(v.effect.magnitude)) + "," +
               (v.inconsistent ? "true" : "false") + "\n";
    }
}

inline void append_outcome_rows(std::string& out, std::string_view model, const AlphaRun& ar) {
    for (const auto& o : ar.outcomes) {
        out += detail::csv_field(model) + "," + std::to_string(ar.run) + "," + format_double(ar.alpha) + "," +
               detail::csv_field(o.instance_id) + "," + std::to_string(o.true_label) + "," +
               std::to_string(o.predicted_class) + "," + format_double(o.original_risk) + "," +
               format_optional(o.green_risk) + "," + format_optional(o.red_risk) + "," +
               (o.explanation_failed ? "true" : "false") + "," + std::to_string(o.clamp_events) + "\n";
    }
}

inline ordered_json metric_report_json(const MetricReport& r) {
    ordered_json j;
    j["model"] = r.model;
    j["alpha"] = r.alpha;
    j["run"] = r.run;
    j["outcomes"] = r.outcomes;
    j["failures"] = r.failures;
    j["clamp_events"] = r.clamp_events;
    for (auto p : kPartitions) {
        const int i = static_cast<int>(p);
        ordered_json part;
        part["pct_reversed"] = detail::fraction_json(r.reversed[i]);
        for (auto m : kGranularMetrics) part[std::string(metric_name(m))] = detail::fraction_json(r.granular.at(m, p));
        part["prob_diff"] = detail::summary_json(r.prob_diff_summary[i]);
        part["prob_diff_negative"] = r.prob_diff_negative[i];
        j[std::string(partition_name(p))] = std::move(part);
    }
    return j;
}

inline ordered_json consistency_json(const ConsistencyReport& rep) {
    ordered_json rows = ordered_json::array();
    for (const auto& v : rep.rows) {
        rows.push_back({{"model", v.group},
                        {"alpha", v.alpha},
                        {"run_a", v.run_a},
                        {"run_b", v.run_b},
                        {"n", v.wilcoxon.n_effective},
                        {"w", v.wilcoxon.w_statistic},
                        {"p_value", v.wilcoxon.p_value},
                        {"method", method_name(v.wilcoxon.method)},
                        {"cliffs_delta", v.effect.delta},
                        {"magnitude", magnitude_name(v.effect.magnitude)},
                        {"inconsistent", v.inconsistent}});
    }
    return {{"significance", rep.significance},
            {"total", rep.total()},
            {"inconsistent", rep.inconsistent},
            {"percentage", rep.percentage()},
            {"rows", std::move(rows)}};
}

// ---------------------------------------------------------------------------
// Plot series

/// Line series (alpha on x, one series per model and partition, y = mean
/// over runs) and boxplot quantiles for every metric.
inline ordered_json plot_series(const RunArtifacts& art) {
    ordered_json lines = ordered_json::array();
    ordered_json boxes = ordered_json::array();
    const std::vector<std::string> metrics{"pct_reversed", "PCPD", "PCPI", "NCPD", "NCPI", "prob_diff"};

    auto value_of = [](const MetricReport& r, std::string_view metric, Partition p) -> std::optional<double> {
        const int i = static_cast<int>(p);
        if (metric == "pct_reversed") return r.reversed[i].percent();
        if (metric == "prob_diff") {
            return r.prob_diff_summary[i] ? std::optional<double>(r.prob_diff_summary[i]->mean) : std::nullopt;
        }
        for (auto m : kGranularMetrics) {
            if (metric_name(m) == metric) return r.granular.at(m, p).percent();
        }
        return std::nullopt;
    };

    for (const auto& metric : metrics) {
        for (const auto& ma : art.models) {
            for (auto p : kPartitions) {
                ordered_json ys = ordered_json::array();
                for (std::size_t k = 0; k < art.alphas.size(); ++k) {
                    double sum = 0.0;
                    std::size_t count = 0;
                    std::vector<double> per_run;
                    for (std::size_t r = 0; r < art.runs; ++r) {
                        if (const auto v = value_of(ma.results[k * art.runs + r].report, metric, p)) {
                            sum += *v;
                            ++count;
                            per_run.push_back(*v);
                        }
                    }
                    ys.push_back(count ? ordered_json(sum / static_cast<double>(count)) : ordered_json(nullptr));
                    if (metric != "prob_diff") {
                        // Spread of a fraction metric across runs.
                        if (const auto s = summarize(per_run)) {
                            boxes.push_back({{"metric", metric}, {"model", ma.bundle.name},
                                             {"partition", partition_name(p)}, {"alpha", art.alphas[k]},
                                             {"run", nullptr}, {"min", s->min}, {"q1", s->q1},
                                             {"median", s->median}, {"q3", s->q3}, {"max", s->max}});
                        }
                    }
                }
                lines.push_back({{"metric", metric}, {"model", ma.bundle.name}, {"partition", partition_name(p)},
                                 {"x", art.alphas}, {"y", std::move(ys)}});
            }
        }
    }
    // Per-instance %Prob_diff distribution for every run.
    for (const auto& ma : art.models) {
        for (const auto& ar : ma.results) {
            for (auto p : kPartitions) {
                const auto& s = ar.report.prob_diff_summary[static_cast<int>(p)];
                if (!s) continue;
                boxes.push_back({{"metric", "prob_diff"}, {"model", ma.bundle.name}, {"partition", partition_name(p)},
                                 {"alpha", ar.alpha}, {"run", ar.run}, {"min", s->min}, {"q1", s->q1},
                                 {"median", s->median}, {"q3", s->q3}, {"max", s->max}});
            }
        }
    }
    return {{"alphas", art.alphas}, {"lines", std::move(lines)}, {"boxplots", std::move(boxes)}};
}

inline void emit_plot_series(const RunArtifacts& art, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    detail::write_file(dir / "plots.json", detail::dump(plot_series(art)));
}

// ---------------------------------------------------------------------------
// Report files

/// Writes every report under `dir` and returns the relative paths written.
/// Output depends only on the artifacts, so re-emission is byte-identical.
inline std::vector<std::string> emit_reports(const RunArtifacts& art, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "models", ec);
    std::filesystem::create_directories(dir / "explanations", ec);
    if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());

    std::vector<std::string> files;
    auto put = [&](const std::string& rel, const std::string& content) {
        detail::write_file(dir / rel, content);
        files.push_back(rel);
    };

    std::string scores = "model,kind,accuracy,f1,auc,auc_gate,search\n";
    ordered_json scores_json = ordered_json::array();
    for (const auto& ma : art.models) {
        const auto& s = ma.score;
        scores += detail::csv_field(s.name) + "," + s.kind + "," + format_double(s.score.accuracy) + "," +
                  format_double(s.score.f1) + "," + format_optional(s.score.auc) + "," +
                  (s.below_auc_gate ? "fail" : "pass") + "," + detail::csv_field(s.search) + "\n";
        scores_json.push_back({{"model", s.name},
                               {"kind", s.kind},
                               {"accuracy", s.score.accuracy},
                               {"f1", s.score.f1},
                               {"auc", detail::optional_json(s.score.auc)},
                               {"below_auc_gate", s.below_auc_gate},
                               {"search", s.search}});
    }
    put("scores.csv", scores);
    put("scores.json", detail::dump(scores_json));

    for (const auto& ma : art.models) {
        put("models/" + ma.bundle.name + ".json", detail::dump(model_to_json(ma.bundle)));
        for (std::size_t r = 0; r < ma.explanations.size(); ++r) {
            put("explanations/" + ma.bundle.name + "_run" + std::to_string(r + 1) + ".json",
                export_explanations(ma.explanations[r]));
        }
    }

    std::string outcomes(kOutcomesHeader);
    std::string simulated = "model,run,alpha,instance_id,variant";
    for (const auto& f : art.features) simulated += "," + detail::csv_field(f.name);
    simulated += "\n";
    std::string metrics(kMetricsHeader);
    std::string prob_diff(kProbDiffHeader);
    ordered_json metrics_json = ordered_json::array();
    for (const auto& ma : art.models) {
        for (const auto& ar : ma.results) {
            append_outcome_rows(outcomes, ma.bundle.name, ar);
            for (const auto& row : ar.simulated) {
                simulated += detail::csv_field(ma.bundle.name) + "," + std::to_string(ar.run) + "," +
                             format_double(ar.alpha) + "," + detail::csv_field(row.instance_id) + "," + row.variant;
                for (double v : row.values) simulated += "," + format_double(v);
                simulated += "\n";
            }
            append_metric_rows(metrics, ar.report);
            append_prob_diff_rows(prob_diff, ar.report);
            metrics_json.push_back(metric_report_json(ar.report));
        }
    }
    put("outcomes.csv", outcomes);
    put("simulated.csv", simulated);
    put("metrics.csv", metrics);
    put("prob_diff.csv", prob_diff);
    put("metrics.json", detail::dump(metrics_json));

    std::string cons(kConsistencyHeader);
    append_consistency_rows(cons, art.consistency);
    put("consistency.csv", cons);
    ordered_json cj = consistency_json(art.consistency);
    ordered_json per_model = ordered_json::object();
    for (const auto& ma : art.models) {
        if (ma.consistency) {
            per_model[ma.bundle.name] = {{"total", ma.consistency->total()},
                                         {"inconsistent", ma.consistency->inconsistent},
                                         {"percentage", ma.consistency->percentage()}};
        }
    }
    cj["per_model"] = std::move(per_model);
    put("consistency.json", detail::dump(cj));

    emit_plot_series(art, dir);
    files.push_back("plots.json");

    ordered_json manifest;
    manifest["train_rows"] = art.train_rows;
    manifest["test_rows"] = art.test_rows;
    manifest["alphas"] = art.alphas;
    manifest["runs"] = art.runs;
    ordered_json counters = ordered_json::array();
    for (const auto& ma : art.models) {
        std::size_t clamps = 0;
        for (const auto& ar : ma.results) clamps += ar.report.clamp_events;
        counters.push_back({{"model", ma.bundle.name},
                            {"explanation_failures", ma.failures},
                            {"all_failed", ma.all_failed},
                            {"clamp_events", clamps},
                            {"below_auc_gate", ma.score.below_auc_gate}});
    }
    manifest["models"] = std::move(counters);
    manifest["warnings"] = art.warnings;
    manifest["files"] = files;
    detail::write_file(dir / "manifest.json", detail::dump(manifest));
    files.push_back("manifest.json");
    return files;
}

// ---------------------------------------------------------------------------
// Reading an outcome dump back

struct OutcomeKey {
    std::string model;
    double alpha = 0.0;
    std::size_t run = 0;
    auto operator<=>(const OutcomeKey&) const = default;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += line[++i];
            else if (c == '"') quoted = false;
            else cur += c;
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

} // namespace detail

using OutcomeGroups = std::vector<std::pair<OutcomeKey, std::vector<InstanceOutcome>>>;

/// Parses outcomes.csv into outcome lists per (model, alpha, run). Groups
/// and the outcomes inside them keep their file order.
inline OutcomeGroups read_outcomes(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("outcome dump is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line + "\n" != kOutcomesHeader) throw DataError("outcome dump has an unexpected header");
    OutcomeGroups out;
    std::map<OutcomeKey, std::size_t> index;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        const auto where = " (outcome dump row " + std::to_string(row) + ")";
        if (f.size() != 11) throw DataError("wrong field count" + where);
        auto num = [&](const std::string& s) {
            const auto v = parse_double(s);
            if (!v) throw DataError("non-numeric value '" + s + "'" + where);
            return *v;
        };
        auto flag = [&](const std::string& s) {
            if (s == "true") return true;
            if (s == "false") return false;
            throw DataError("expected true/false, got '" + s + "'" + where);
        };
        auto cls = [&](const std::string& s) {
            if (s == "0") return 0;
            if (s == "1") return 1;
            throw DataError("expected 0/1, got '" + s + "'" + where);
        };
        InstanceOutcome o;
        o.instance_id = f[3];
        o.true_label = cls(f[4]);
        o.predicted_class = cls(f[5]);
        o.original_risk = num(f[6]);
        o.explanation_failed = flag(f[9]);
        if (!o.explanation_failed) {
            o.green_risk = num(f[7]);
            o.red_risk = num(f[8]);
        }
        o.clamp_events = static_cast<std::size_t>(num(f[10]));
        const double run = num(f[1]);
        if (run < 1 || run != std::floor(run)) throw DataError("run must be a positive integer" + where);
        const OutcomeKey key{f[0], num(f[2]), static_cast<std::size_t>(run)};
        const auto [it, fresh] = index.try_emplace(key, out.size());
        if (fresh) out.emplace_back(key, std::vector<InstanceOutcome>{});
        out[it->second].second.push_back(std::move(o));
    }
    return out;
}

} // namespace evalxai
