// Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "evalxai/explain.hpp"
#include "evalxai/harness/config.hpp"
#include "evalxai/harness/experiment.hpp"
#include "evalxai/harness/reports.hpp"
#include "evalxai/metrics.hpp"
#include "evalxai/models/logreg.hpp"
#include "evalxai/models/scoring.hpp"
#include "evalxai/simulate.hpp"
#include "evalxai/stats.hpp"

using namespace evalxai;
namespace fs = std::filesystem;

namespace {

struct Failure {
    std::string what;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure{what};
}

const std::vector<double> kEightCoefficients{2.0, -2.0, 1.6, -1.2, 1.0, -0.8, 0.6, 0.4};

ExperimentConfig synthetic_config(std::string_view explainer, std::size_t runs) {
    std::ostringstream os;
    os << R"({"dataset": {"synthetic": {"rows": 2000, "seed": 5}}, "models": [{"name": "lr", "kind": "lr"}],)"
       << R"("explainer": {"kind": ")" << explainer << R"(", "top_k": 3}, "alphas": [1, 2, 3], "runs": )" << runs
       << R"(, "master_seed": 2024})";
    return parse_config(os.str());
}

// ---------------------------------------------------------------------------

void metric_oracle() {
    Rng rng(101);
    for (int set = 0; set < 50; ++set) {
        const std::size_t n = 1 + rng.below(20);
        std::vector<InstanceOutcome> v;
        for (std::size_t i = 0; i < n; ++i) {
            InstanceOutcome o;
            o.instance_id = std::to_string(i);
            o.true_label = static_cast<int>(rng.below(2));
            auto risk = [&] { return rng.below(5) == 0 ? 0.5 : rng.uniform(); };
            o.original_risk = risk();
            o.predicted_class = o.original_risk >= 0.5;
            o.explanation_failed = rng.below(10) == 0;
            if (!o.explanation_failed) {
                o.green_risk = rng.below(6) == 0 ? o.original_risk : risk();
                o.red_risk = rng.below(6) == 0 ? o.original_risk : risk();
            }
            v.push_back(o);
        }
        for (auto p : kPartitions) {
            std::size_t rev = 0, den = 0;
            std::vector<double> diffs;
            std::size_t g_hits[4] = {0, 0, 0, 0}, g_den[4] = {0, 0, 0, 0};
            for (const auto& o : v) {
                if (o.explanation_failed) continue;
                const bool correct = o.true_label == o.predicted_class;
                if ((p == Partition::Correct && !correct) || (p == Partition::Wrong && correct)) continue;
                ++den;
                if (o.predicted_class == 1) {
                    rev += *o.green_risk < 0.5;
                    diffs.push_back(o.original_risk - *o.green_risk);
                    ++g_den[0];
                    ++g_den[1];
                    g_hits[0] += *o.green_risk < o.original_risk;
                    g_hits[1] += *o.red_risk > o.original_risk;
                } else {
                    rev += *o.red_risk >= 0.5;
                    diffs.push_back(*o.red_risk - o.original_risk);
                    ++g_den[2];
                    ++g_den[3];
                    g_hits[2] += *o.green_risk < o.original_risk;
                    g_hits[3] += *o.red_risk > o.original_risk;
                }
            }
            const auto got = reversed_fraction(v, p);
            require(got.hits == rev && got.denominator == den, "%Reversed differs from enumeration");
            const auto pd = prob_diff(v, p);
            require(pd.values.size() == diffs.size(), "%Prob_diff count differs");
            for (std::size_t i = 0; i < diffs.size(); ++i) {
                require(pd.values[i].second == diffs[i], "%Prob_diff value differs");
            }
            for (std::size_t m = 0; m < 4; ++m) {
                const auto f = granular_fraction(v, kGranularMetrics[m], p);
                require(f.hits == g_hits[m] && f.denominator == g_den[m],
                        std::string(metric_name(kGranularMetrics[m])) + " differs from enumeration");
                if (g_den[m]) {
                    require(*f.percent() == 100.0 * static_cast<double>(g_hits[m]) / static_cast<double>(g_den[m]),
                            "granular percentage differs");
                }
            }
        }
    }
}

void oracle_ceiling() {
    const auto art = run_experiment(synthetic_config("oracle", 1));
    require(art.features.size() == 8, "synthetic dataset must have 8 features");
    for (const auto& ar : art.models[0].results) {
        for (auto m : kGranularMetrics) {
            const auto pct = ar.report.granular.at(m, Partition::All).percent();
            require(pct && *pct == 100.0, std::string(metric_name(m)) + " below 100 at alpha " + format_double(ar.alpha));
        }
        for (const auto& [id, d] : ar.report.prob_diff_all.values) {
            require(d > 0.0, "nonpositive %Prob_diff for instance " + id);
        }
        require(ar.report.failures == 0, "oracle explanation failed");
    }
}

void flip_threshold_law() {
    const double w = 1.7, b = -0.3;
    const LogisticRegressionModel model({w}, b);
    const std::vector<FeatureSpec> schema{{"x", false}};
    Rng rng(303);
    std::vector<double> xs(100);
    for (auto& x : xs) x = 2.0 * rng.normal();
    const Dataset test(schema, xs, std::vector<int>(xs.size(), 0));
    const FeatureStats stats = feature_stats(test);
    const double s = stats.features[0].std;

    std::vector<Explanation> ex;
    std::vector<double> alpha_star;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        ex.push_back(linear_oracle_explain(model, test.row(i), schema, 1, std::to_string(i)));
        require(ex.back().rules[0].threshold == xs[i], "oracle threshold must equal the instance value");
        alpha_star.push_back(std::abs(w * xs[i] + b) / (s * std::abs(w)));
    }
    auto reversed_at = [&](double alpha) {
        return build_outcomes(model, test, ex, stats, {.alpha = alpha});
    };
    for (std::size_t i = 0; i < test.rows(); ++i) {
        const Dataset one = test.subset(std::vector<std::size_t>{i});
        for (auto [factor, flips] : {std::pair{1.0 - 1e-6, false}, std::pair{1.0 + 1e-6, true}}) {
            const auto o = build_outcomes(model, one, std::span(ex).subspan(i, 1), stats, {.alpha = alpha_star[i] * factor});
            require((class_of(*o[0].flip_risk()) != o[0].predicted_class) == flips,
                    "flip disagrees with the margin law for instance " + std::to_string(i));
        }
    }
    std::vector<double> sorted = alpha_star;
    std::sort(sorted.begin(), sorted.end());
    const double below = sorted.front() * (1 - 1e-6), above = sorted.back() * (1 + 1e-6);
    require(*percent_reversed(reversed_at(below), Partition::All) == 0.0, "%Reversed not 0 below every alpha*");
    require(*percent_reversed(reversed_at(above), Partition::All) == 100.0, "%Reversed not 100 above every alpha*");
    for (double alpha = 0.05; alpha < 3.0; alpha += 0.05) {
        const auto expected = static_cast<std::size_t>(
            std::count_if(alpha_star.begin(), alpha_star.end(), [&](double a) { return alpha > a; }));
        require(reversed_fraction(reversed_at(alpha), Partition::All).hits == expected,
                "%Reversed disagrees with the alpha* count at alpha " + format_double(alpha));
    }
}

void simulated_arithmetic() {
    const std::vector<FeatureSpec> schema{{"LOC", true}};
    const FeatureStats stats{{{"LOC", 10.0, 1.9, 0.0, 20.0}}};
    const Explanation e{"0", 1, 0.77, {{"LOC", Orientation::LessThan, 6.35}}, "fixture", 0};
    const std::vector<double> x{5.0};
    const auto s = simulate(x, e, schema, stats, Direction::GreenWard, {.alpha = 1.0});
    require(s.values[0] == 8.25, "expected 8.25, got " + format_double(s.values[0]));
}

void wilcoxon_correctness() {
    Rng rng(505);
    std::size_t checked = 0;
    for (int t = 0; t < 400; ++t) {
        const std::size_t n = 1 + rng.below(12);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = static_cast<double>(rng.below(6));
            b[i] = t % 2 ? rng.normal() : static_cast<double>(rng.below(6));
        }
        const auto r = wilcoxon_signed_rank(a, b);
        if (r.all_zero) continue;
        const auto ranks = detail::signed_ranks(a, b).ranks;
        std::size_t at_most = 0;
        for (std::size_t mask = 0; mask < (std::size_t{1} << ranks.size()); ++mask) {
            double sum = 0;
            for (std::size_t i = 0; i < ranks.size(); ++i) {
                if (mask >> i & 1) sum += ranks[i];
            }
            at_most += sum <= r.w_statistic + 1e-9;
        }
        const double p = std::min(1.0, 2.0 * static_cast<double>(at_most) / std::ldexp(1.0, static_cast<int>(ranks.size())));
        require(std::abs(p - r.p_value) <= 1e-12, "exact p differs from enumeration");
        ++checked;
    }
    require(checked > 300, "too few nondegenerate series");
    std::vector<double> a{0.11, 0.25, 0.32, 0.47, 0.58, 0.69}, b;
    for (double x : a) b.push_back(x + 10);
    const auto r = wilcoxon_signed_rank(a, b);
    require(r.p_value == 0.03125, "shifted example p = " + format_double(r.p_value));
}

void cliffs_correctness() {
    Rng rng(606);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> a(1 + rng.below(30)), b(1 + rng.below(30));
        for (auto& x : a) x = static_cast<double>(rng.below(12));
        for (auto& x : b) x = static_cast<double>(rng.below(12));
        long long dom = 0;
        for (double x : a)
            for (double y : b) dom += (x > y) - (x < y);
        const double expected = static_cast<double>(dom) / static_cast<double>(a.size() * b.size());
        require(cliffs_delta(a, b).delta == expected, "Cliff's delta differs from pair enumeration");
    }
    const std::pair<double, Magnitude> edges[] = {{0.147, Magnitude::Small},
                                                  {0.33, Magnitude::Medium},
                                                  {0.474, Magnitude::Large}};
    Magnitude below = Magnitude::Negligible;
    for (auto [edge, label] : edges) {
        require(magnitude_of(std::nextafter(edge, 0.0)) == below, "label just below " + format_double(edge));
        require(magnitude_of(edge) == label, "label at " + format_double(edge));
        require(magnitude_of(-edge) == label, "label at -" + format_double(edge));
        below = label;
    }
}

void consistency_protocol() {
    const auto art = run_experiment(synthetic_config("oracle", 3));
    require(art.consistency.total() == 9, "expected 3 pairs x 3 alphas");
    require(art.consistency.inconsistent == 0, "deterministic explainer reported inconsistency");

    // 2 models x 2 datasets x 3 alphas x 3 run pairs. Shifting a run by a
    // constant gives p = 0.03125 against an unshifted one; equal runs give 1.
    const std::vector<double> base{0.11, 0.25, 0.32, 0.47, 0.58, 0.69};
    auto series = [&](double shift) {
        KeyedSeries s;
        for (std::size_t i = 0; i < base.size(); ++i) s.emplace_back(std::to_string(i), base[i] + shift);
        return s;
    };
    ConsistencyReport total;
    std::size_t cell = 0;
    for (const char* group : {"lr/a", "lr/b", "rf/a", "rf/b"}) {
        std::vector<RunSeries> runs{{"R1", {}}, {"R2", {}}, {"R3", {}}};
        for (double alpha : {1.0, 2.0, 3.0}) {
            // seven cells with all three pairs differing, five with two
            const bool all_three = cell++ < 7;
            runs[0].by_alpha.emplace_back(alpha, series(0));
            runs[1].by_alpha.emplace_back(alpha, series(10));
            runs[2].by_alpha.emplace_back(alpha, series(all_three ? 20 : 10));
        }
        total.append(consistency(runs, 0.05, group));
    }
    require(total.total() == 36, "fixture must have 36 combinations");
    require(total.inconsistent == 31, "fixture must have 31 inconsistent combinations");
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", total.percentage());
    require(std::string(buf) == "86.11", std::string("reported ") + buf);
}

void model_sanity() {
    const auto ds = generate_synthetic(2000, kEightCoefficients, 0.0, 0.05, 5);
    const auto [train, test] = train_test_split(ds, 0.1, true, 77);
    require(test.rows() <= 200, "test split must be at most 200 rows");
    for (const char* kind : {"lr", "dt", "rf"}) {
        const auto model = train_model(default_config(kind), train);
        const auto risks = predict_risks(model, test);
        const auto auc = auc_from_risks(risks, test.labels());
        require(auc.has_value(), std::string(kind) + ": AUC undefined");
        require(*auc >= 0.75, std::string(kind) + ": AUC " + format_double(*auc));
        double wins = 0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < test.rows(); ++i) {
            for (std::size_t j = 0; j < test.rows(); ++j) {
                if (test.label(i) != 1 || test.label(j) != 0) continue;
                ++pairs;
                wins += risks[i] > risks[j] ? 1.0 : risks[i] == risks[j] ? 0.5 : 0.0;
            }
        }
        require(*auc == wins / static_cast<double>(pairs), std::string(kind) + ": AUC differs from pair counting");
    }
}

void cli_reproducibility() {
    const auto dir = fs::temp_directory_path() / "evalxai_acceptance_repro";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "config.json") << R"({
      "dataset": {"synthetic": {"rows": 800, "seed": 9}},
      "models": [{"name": "lr", "kind": "lr"}, {"name": "rf", "kind": "rf", "params": {"n_estimators": 20}}],
      "explainer": {"kind": "surrogate", "num_samples": 200, "top_k": 3},
      "alphas": [1, 2, 3], "runs": 3, "instance_cap": 30, "master_seed": 99
    })";
    unsetenv("EVALXAI_JOBS");
    for (const char* jobs : {"1", "4"}) {
        const std::string cmd = std::string(EVALXAI_CLI) + " run --config " + (dir / "config.json").string() +
                                " --out " + (dir / ("jobs" + std::string(jobs))).string() + " --jobs " + jobs +
                                " >/dev/null 2>&1";
        require(std::system(cmd.c_str()) == 0, std::string("run with --jobs ") + jobs + " failed");
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dir / "jobs1")) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), dir / "jobs1");
        auto read = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        };
        require(fs::exists(dir / "jobs4" / rel), rel.string() + " missing from the second run");
        require(read(entry.path()) == read(dir / "jobs4" / rel), rel.string() + " differs between runs");
        ++compared;
    }
    require(compared >= 10, "too few report files");
}

void exchange_fidelity() {
    std::vector<FeatureSpec> schema;
    for (int f = 0; f < 8; ++f) schema.push_back({"f" + std::to_string(f), false});
    Rng rng(1010);
    for (int t = 0; t < 1000; ++t) {
        std::vector<Explanation> list(rng.below(5));
        for (auto& e : list) {
            e.instance_id = "i" + std::to_string(rng.below(1000));
            e.predicted_class = static_cast<int>(rng.below(2));
            e.risk_score = rng.uniform();
            e.explainer_id = rng.below(2) ? "lime" : "pyexplainer";
            e.run_seed = rng.next();
            std::vector<std::size_t> idx(schema.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            rng.shuffle(idx);
            for (std::size_t r = 0, k = rng.below(schema.size() + 1); r < k; ++r) {
                e.rules.push_back({schema[idx[r]].name, rng.below(2) ? Orientation::LessThan : Orientation::MoreThan,
                                   std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.below(100)) - 50)});
            }
        }
        require(import_explanations(export_explanations(list), schema) == list, "import(export(x)) != x");
    }
    const std::vector<FeatureSpec> fig{{"nCommit"}, {"AddedLOC"}, {"LOC"}};
    const std::vector<Explanation> fixture{{"commit", 1, 0.77,
                                            {{"nCommit", Orientation::MoreThan, 0.62}, {"LOC", Orientation::MoreThan, 11.0}},
                                            "pyexplainer", 0}};
    const auto doc = export_explanations(fixture);
    const auto back = import_explanations(doc, fig);
    require(back == fixture, "fixture did not round-trip");
    require(back[0].rules[0].threshold == 0.62 && back[0].rules[1].threshold == 11.0 && back[0].risk_score == 0.77,
            "fixture values changed");
    require(export_explanations(back) == doc, "fixture document not byte-stable");
}

} // namespace

int main() {
    struct Criterion {
        int id;
        std::string name;
        std::function<void()> check;
        double limit_seconds; // 0 = no runtime bound
    };
    const std::vector<Criterion> criteria{
        {1, "metric oracle equivalence", metric_oracle, 5},
        {2, "oracle explainer reliability ceiling", oracle_ceiling, 30},
        {3, "flip-threshold law", flip_threshold_law, 0},
        {4, "simulated-instance arithmetic", simulated_arithmetic, 0},
        {5, "Wilcoxon correctness", wilcoxon_correctness, 0},
        {6, "Cliff's delta correctness", cliffs_correctness, 0},
        {7, "consistency protocol", consistency_protocol, 0},
        {8, "model sanity", model_sanity, 60},
        {9, "reproducibility across --jobs", cli_reproducibility, 0},
        {10, "exchange-format fidelity", exchange_fidelity, 0},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            c.check();
        } catch (const Failure& f) {
            ok = false;
            detail = f.what;
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && c.limit_seconds > 0 && secs >= c.limit_seconds) {
            ok = false;
            detail = "runtime limit " + format_double(c.limit_seconds) + " s exceeded";
        }
        char timing[32];
        std::snprintf(timing, sizeof timing, "%.2fs", secs);
        std::cout << (ok ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << timing << ")";
        if (!ok) std::cout << ": " << detail;
        std::cout << "\n";
        failed += !ok;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
    return failed ? 1 : 0;
}
