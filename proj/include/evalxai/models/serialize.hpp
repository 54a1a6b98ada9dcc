#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "evalxai/error.hpp"
#include "evalxai/models/any_model.hpp"

namespace evalxai {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

/// A trained model together with the feature names it was trained on.
struct ModelBundle {
    std::string name;
    std::vector<std::string> features;
    AnyModel model;
};

namespace detail {

inline ordered_json tree_config_json(const TreeConfig& c) {
    ordered_json j;
    j["max_depth"] = c.max_depth;
    j["min_samples_split"] = c.min_samples_split;
    j["min_samples_leaf"] = c.min_samples_leaf;
    j["max_features"] = c.max_features ? ordered_json(*c.max_features) : ordered_json(nullptr);
    j["seed"] = c.seed;
    return j;
}

inline TreeConfig tree_config_from(const ordered_json& j) {
    TreeConfig c;
    c.max_depth = j.at("max_depth").get<std::size_t>();
    c.min_samples_split = j.at("min_samples_split").get<std::size_t>();
    c.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
    if (!j.at("max_features").is_null()) c.max_features = j.at("max_features").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

inline ordered_json nodes_json(const DecisionTreeModel& t) {
    ordered_json arr = ordered_json::array();
    for (const auto& n : t.nodes()) {
        ordered_json j;
        j["feature"] = n.feature;
        j["threshold"] = n.threshold;
        j["left"] = n.left;
        j["right"] = n.right;
        j["value"] = n.value;
        j["samples"] = n.samples;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline DecisionTreeModel tree_from(const ordered_json& nodes, const TreeConfig& config, std::size_t n_features) {
    std::vector<TreeNode> out;
    for (const auto& j : nodes) {
        TreeNode n;
        n.feature = j.at("feature").get<int>();
        n.threshold = j.at("threshold").get<double>();
        n.left = j.at("left").get<std::size_t>();
        n.right = j.at("right").get<std::size_t>();
        n.value = j.at("value").get<double>();
        n.samples = j.at("samples").get<std::size_t>();
        out.push_back(n);
    }
    if (out.empty()) throw DataError("model document: tree without nodes");
    for (const auto& n : out) {
        if (n.is_leaf()) continue;
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= n_features || n.left >= out.size() ||
            n.right >= out.size()) {
            throw DataError("model document: malformed tree node");
        }
    }
    return DecisionTreeModel(std::move(out), config);
}

} // namespace detail

inline ordered_json model_to_json(const ModelBundle& b) {
    ordered_json j;
    j["version"] = kModelFormatVersion;
    j["kind"] = std::string(kind_name(b.model));
    j["name"] = b.name;
    j["features"] = b.features;
    if (const auto* lr = b.model.as<LogisticRegressionModel>()) {
        const auto& c = lr->config();
        j["config"] = {{"learning_rate", c.learning_rate}, {"epochs", c.epochs}, {"l2", c.l2}, {"seed", c.seed}};
        j["weights"] = lr->weights();
        j["intercept"] = lr->intercept();
    } else if (const auto* dt = b.model.as<DecisionTreeModel>()) {
        j["config"] = detail::tree_config_json(dt->config());
        j["nodes"] = detail::nodes_json(*dt);
    } else {
        const auto& rf = *b.model.as<RandomForestModel>();
        const auto& c = rf.config();
        ordered_json cfg;
        cfg["n_estimators"] = c.n_estimators;
        cfg["max_features"] = c.max_features.kind == MaxFeatures::Kind::Sqrt  ? ordered_json("sqrt")
                              : c.max_features.kind == MaxFeatures::Kind::All ? ordered_json("all")
                                                                               : ordered_json(c.max_features.count);
        cfg["bootstrap"] = c.bootstrap;
        cfg["tree"] = detail::tree_config_json(c.tree);
        cfg["seed"] = c.seed;
        j["config"] = std::move(cfg);
        ordered_json trees = ordered_json::array();
        for (const auto& t : rf.trees()) {
            trees.push_back({{"config", detail::tree_config_json(t.config())}, {"nodes", detail::nodes_json(t)}});
        }
        j["trees"] = std::move(trees);
    }
    return j;
}

inline ModelBundle model_from_json(const ordered_json& j) {
    try {
        if (j.at("version").get<int>() != kModelFormatVersion) {
            throw DataError("model document: unsupported version");
        }
        ModelBundle b;
        b.name = j.value("name", std::string{});
        b.features = j.at("features").get<std::vector<std::string>>();
        const auto kind = j.at("kind").get<std::string>();
        const auto& cfg = j.at("config");
        if (kind == "logistic_regression") {
            LogRegConfig c;
            c.learning_rate = cfg.at("learning_rate").get<double>();
            c.epochs = cfg.at("epochs").get<std::size_t>();
            c.l2 = cfg.at("l2").get<double>();
            c.seed = cfg.at("seed").get<std::uint64_t>();
            auto w = j.at("weights").get<std::vector<double>>();
            if (w.size() != b.features.size()) throw DataError("model document: weight count mismatch");
            b.model = LogisticRegressionModel(std::move(w), j.at("intercept").get<double>(), c);
        } else if (kind == "decision_tree") {
            b.model = detail::tree_from(j.at("nodes"), detail::tree_config_from(cfg), b.features.size());
        } else if (kind == "random_forest") {
            ForestConfig c;
            c.n_estimators = cfg.at("n_estimators").get<std::size_t>();
            const auto& mf = cfg.at("max_features");
            if (mf.is_string()) {
                c.max_features.kind = mf.get<std::string>() == "all" ? MaxFeatures::Kind::All : MaxFeatures::Kind::Sqrt;
            } else {
                c.max_features = {MaxFeatures::Kind::Count, mf.get<std::size_t>()};
            }
            c.bootstrap = cfg.at("bootstrap").get<bool>();
            c.tree = detail::tree_config_from(cfg.at("tree"));
            c.seed = cfg.at("seed").get<std::uint64_t>();
            std::vector<DecisionTreeModel> trees;
            for (const auto& t : j.at("trees")) {
                trees.push_back(detail::tree_from(t.at("nodes"), detail::tree_config_from(t.at("config")),
                                                  b.features.size()));
            }
            if (trees.empty()) throw DataError("model document: forest without trees");
            b.model = RandomForestModel(std::move(trees), c);
        } else {
            throw DataError("model document: unknown kind '" + kind + "'");
        }
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model document: ") + e.what());
    }
}

} // namespace evalxai
