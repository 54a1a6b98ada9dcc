#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "evalxai/error.hpp"
#include "evalxai/explain.hpp"
#include "evalxai/metrics.hpp"
#include "evalxai/models/any_model.hpp"
#include "evalxai/models/scoring.hpp"

namespace evalxai {

struct CsvSource {
    std::filesystem::path path;
    std::string label_column = "label";
    std::string positive_label = "1";
};

struct SyntheticSource {
    std::size_t rows = 2000;
    std::vector<double> coefficients{2.0, -2.0, 1.6, -1.2, 1.0, -0.8, 0.6, 0.4};
    double intercept = 0.0;
    double label_noise = 0.05;
    std::uint64_t seed = 1;
};

struct DatasetSpec {
    std::variant<SyntheticSource, CsvSource> source;
    std::vector<std::string> non_negative;
};

struct Preprocessing {
    double test_fraction = 0.1;
    bool stratified = true;
    bool smote = false;
    std::size_t smote_k = 5;
    std::optional<double> spearman_threshold;
    bool balance_test = false;
};

struct SearchSpec {
    SearchStrategy strategy = SearchStrategy::Grid;
    SearchSpace space;
    std::size_t budget = 10;
    std::size_t cv_folds = 5;
};

struct ModelSpec {
    std::string name;
    ModelConfig config;
    std::optional<SearchSpec> search;
};

enum class ExplainerKind { Surrogate, Oracle, Import };

struct ExplainerSpec {
    ExplainerKind kind = ExplainerKind::Surrogate;
    SurrogateConfig surrogate;
    std::size_t oracle_top_k = 3;
    // Import: one exchange document per model name.
    std::map<std::string, std::filesystem::path> import_paths;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    Preprocessing preprocessing;
    std::vector<ModelSpec> models;
    ExplainerSpec explainer;
    std::vector<double> alphas{1.0, 2.0, 3.0};
    std::size_t runs = 3;
    std::optional<std::size_t> instance_cap;
    std::uint64_t master_seed = 0;
    double significance = 0.05;
    bool clamp_non_negative = false;
    ClassBasis class_basis = ClassBasis::Predicted;
    std::filesystem::path output_dir;

    void validate() const;
};

inline void ExperimentConfig::validate() const {
    if (alphas.empty()) throw ConfigError("alpha list must be nonempty");
    for (double a : alphas) {
        if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("every alpha must be positive");
    }
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        for (std::size_t j = i + 1; j < alphas.size(); ++j) {
            if (alphas[i] == alphas[j]) throw ConfigError("alpha list has duplicates");
        }
    }
    if (runs == 0) throw ConfigError("runs must be >= 1");
    if (instance_cap && *instance_cap == 0) throw ConfigError("instance cap must be >= 1");
    if (!(significance > 0.0 && significance < 1.0)) throw ConfigError("significance must be in (0, 1)");
    if (!(preprocessing.test_fraction > 0.0 && preprocessing.test_fraction < 1.0)) {
        throw ConfigError("test_fraction must be in (0, 1)");
    }
    if (models.empty()) throw ConfigError("at least one model is required");
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = i + 1; j < models.size(); ++j) {
            if (models[i].name == models[j].name) throw ConfigError("duplicate model name '" + models[i].name + "'");
        }
        const auto& n = models[i].name;
        if (n.empty() || n.find_first_of("/\\,\" ") != std::string::npos) {
            throw ConfigError("model name '" + n + "' must be nonempty without separators");
        }
    }
    if (explainer.kind == ExplainerKind::Surrogate) explainer.surrogate.validate();
    if (explainer.kind == ExplainerKind::Oracle) {
        if (explainer.oracle_top_k == 0) throw ConfigError("oracle top_k must be >= 1");
        for (const auto& m : models) {
            if (!std::holds_alternative<LogRegConfig>(m.config)) {
                throw ConfigError("the oracle explainer only supports logistic regression (model '" + m.name + "')");
            }
        }
    }
    if (explainer.kind == ExplainerKind::Import) {
        for (const auto& m : models) {
            if (!explainer.import_paths.contains(m.name)) {
                throw ConfigError("no explanation file for model '" + m.name + "'");
            }
        }
    }
}

namespace detail {

using json = nlohmann::ordered_json;

inline void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError("unknown key '" + k + "' in " + std::string(where));
        }
    }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

inline ParamDomain domain_from(const json& j) {
    ParamDomain d;
    if (j.is_array()) {
        d.values = j.get<std::vector<double>>();
        if (d.values.empty()) throw ConfigError("search value list must be nonempty");
    } else if (j.is_object()) {
        check_keys(j, "search range", {"min", "max", "integer"});
        d.range = {j.at("min").get<double>(), j.at("max").get<double>()};
        d.integer = j.value("integer", false);
        if (!(d.range->first <= d.range->second)) throw ConfigError("search range needs min <= max");
    } else {
        throw ConfigError("search domain must be a list or a {min, max} range");
    }
    return d;
}

inline ModelSpec model_from(const json& j) {
    check_keys(j, "model", {"name", "kind", "params", "search"});
    ModelSpec m;
    const auto kind = j.at("kind").get<std::string>();
    m.config = default_config(kind);
    m.name = j.value("name", kind);
    if (j.contains("params")) {
        check_keys(j.at("params"), "params", {"learning_rate", "epochs", "l2", "max_depth", "min_samples_split",
                                              "min_samples_leaf", "max_features", "n_estimators", "bootstrap"});
        for (const auto& [k, v] : j.at("params").items()) {
            set_param(m.config, k, v.is_boolean() ? (v.get<bool>() ? 1.0 : 0.0) : v.get<double>());
        }
    }
    if (j.contains("search")) {
        const auto& s = j.at("search");
        check_keys(s, "search", {"strategy", "space", "budget", "cv_folds"});
        SearchSpec spec;
        const auto strategy = s.value("strategy", std::string("grid"));
        if (strategy == "grid") spec.strategy = SearchStrategy::Grid;
        else if (strategy == "random") spec.strategy = SearchStrategy::Random;
        else throw ConfigError("unknown search strategy '" + strategy + "'");
        spec.budget = s.value("budget", spec.budget);
        spec.cv_folds = s.value("cv_folds", spec.cv_folds);
        if (spec.cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
        for (const auto& [k, v] : s.at("space").items()) spec.space.emplace_back(k, domain_from(v));
        if (spec.space.empty()) throw ConfigError("search space must be nonempty");
        m.search = std::move(spec);
    }
    return m;
}

} // namespace detail

/// Parses one experiment document. Relative paths are resolved against
/// `base_dir`. Unknown keys are rejected.
inline ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
    using detail::json;
    ExperimentConfig c;
    try {
        const json j = json::parse(text);
        detail::check_keys(j, "config",
                           {"dataset", "preprocessing", "models", "explainer", "alphas", "runs", "instance_cap",
                            "master_seed", "significance", "clamp_non_negative", "class_basis", "output"});

        const auto& ds = j.at("dataset");
        detail::check_keys(ds, "dataset", {"csv", "label", "positive", "synthetic", "non_negative"});
        if (ds.contains("csv") == ds.contains("synthetic")) {
            throw ConfigError("dataset needs exactly one of 'csv' or 'synthetic'");
        }
        if (ds.contains("csv")) {
            CsvSource src;
            src.path = detail::resolve(base_dir, ds.at("csv").get<std::string>());
            src.label_column = ds.value("label", src.label_column);
            src.positive_label = ds.value("positive", src.positive_label);
            c.dataset.source = src;
        } else {
            const auto& s = ds.at("synthetic");
            detail::check_keys(s, "synthetic", {"rows", "coefficients", "intercept", "label_noise", "seed"});
            SyntheticSource src;
            src.rows = s.value("rows", src.rows);
            src.coefficients = s.value("coefficients", src.coefficients);
            src.intercept = s.value("intercept", src.intercept);
            src.label_noise = s.value("label_noise", src.label_noise);
            src.seed = s.value("seed", src.seed);
            c.dataset.source = src;
        }
        c.dataset.non_negative = ds.value("non_negative", std::vector<std::string>{});

        if (j.contains("preprocessing")) {
            const auto& p = j.at("preprocessing");
            detail::check_keys(p, "preprocessing",
                               {"test_fraction", "stratified", "smote", "smote_k", "spearman_threshold", "balance_test"});
            auto& pp = c.preprocessing;
            pp.test_fraction = p.value("test_fraction", pp.test_fraction);
            pp.stratified = p.value("stratified", pp.stratified);
            pp.smote = p.value("smote", pp.smote);
            pp.smote_k = p.value("smote_k", pp.smote_k);
            if (p.contains("spearman_threshold") && !p.at("spearman_threshold").is_null()) {
                pp.spearman_threshold = p.at("spearman_threshold").get<double>();
            }
            pp.balance_test = p.value("balance_test", pp.balance_test);
        }

        for (const auto& m : j.at("models")) c.models.push_back(detail::model_from(m));

        if (j.contains("explainer")) {
            const auto& e = j.at("explainer");
            detail::check_keys(e, "explainer",
                               {"kind", "num_samples", "top_k", "kernel_width", "ridge_l2", "quantile_bins", "files"});
            const auto kind = e.value("kind", std::string("surrogate"));
            auto& ex = c.explainer;
            if (kind == "surrogate") {
                ex.kind = ExplainerKind::Surrogate;
                ex.surrogate.num_samples = e.value("num_samples", ex.surrogate.num_samples);
                ex.surrogate.top_k = e.value("top_k", ex.surrogate.top_k);
                if (e.contains("kernel_width")) ex.surrogate.kernel_width = e.at("kernel_width").get<double>();
                ex.surrogate.ridge_l2 = e.value("ridge_l2", ex.surrogate.ridge_l2);
                ex.surrogate.quantile_bins = e.value("quantile_bins", ex.surrogate.quantile_bins);
            } else if (kind == "oracle") {
                ex.kind = ExplainerKind::Oracle;
                ex.oracle_top_k = e.value("top_k", ex.oracle_top_k);
            } else if (kind == "import") {
                ex.kind = ExplainerKind::Import;
                for (const auto& [name, path] : e.at("files").items()) {
                    ex.import_paths[name] = detail::resolve(base_dir, path.get<std::string>());
                }
            } else {
                throw ConfigError("unknown explainer kind '" + kind + "'");
            }
        }

        if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
        c.runs = j.value("runs", c.runs);
        if (j.contains("instance_cap") && !j.at("instance_cap").is_null()) {
            c.instance_cap = j.at("instance_cap").get<std::size_t>();
        }
        c.master_seed = j.value("master_seed", c.master_seed);
        c.significance = j.value("significance", c.significance);
        c.clamp_non_negative = j.value("clamp_non_negative", c.clamp_non_negative);
        const auto basis = j.value("class_basis", std::string("predicted"));
        if (basis == "predicted") c.class_basis = ClassBasis::Predicted;
        else if (basis == "true_label") c.class_basis = ClassBasis::TrueLabel;
        else throw ConfigError("class_basis must be 'predicted' or 'true_label'");
        if (j.contains("output")) c.output_dir = detail::resolve(base_dir, j.at("output").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text, path.parent_path());
}

} // namespace evalxai
