#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "evalxai/data.hpp"
#include "evalxai/error.hpp"
#include "evalxai/explain.hpp"

namespace evalxai {

/// GreenWard moves an instance so its risk should fall, RedWard so it
/// should rise.
enum class Direction { GreenWard, RedWard };

inline Direction opposite(Direction d) {
    return d == Direction::GreenWard ? Direction::RedWard : Direction::GreenWard;
}

/// The direction that should flip the predicted class.
inline Direction flip_direction(int predicted_class) {
    return predicted_class == 1 ? Direction::GreenWard : Direction::RedWard;
}

/// Which side of the threshold a simulated value lands on.
///
///   predicted positive   GreenWard: lt -> +1, gt -> -1   RedWard: lt -> -1, gt -> +1
///   predicted negative   GreenWard: lt -> -1, gt -> +1   RedWard: lt -> +1, gt -> -1
///
/// A rule supports the predicted class, so moving against it lowers the
/// confidence in that class and moving with it raises it.
constexpr int direction_sign(Orientation orientation, int predicted_class, Direction direction) {
    const int o = orientation == Orientation::LessThan ? 1 : -1;
    const int c = predicted_class == 1 ? 1 : -1;
    const int d = direction == Direction::GreenWard ? 1 : -1;
    return o * c * d;
}

struct SimulationConfig {
    double alpha = 1.0; // multiple of the training standard deviation
    // Apply max(0, .) to features flagged non_negative.
    bool clamp_non_negative = false;
};

struct SimulatedInstance {
    std::vector<double> values;
    std::size_t clamp_events = 0;
};

/// Copies `instance` and moves every ruled feature to
/// threshold + sign * alpha * std, where sign comes from direction_sign.
/// Features without a rule are left untouched.
inline SimulatedInstance simulate(std::span<const double> instance, const Explanation& explanation,
                                  std::span<const FeatureSpec> features, const FeatureStats& stats,
                                  Direction direction, const SimulationConfig& config) {
    if (!(config.alpha > 0.0)) throw ConfigError("simulation alpha must be positive");
    if (explanation.failed()) throw DataError("cannot simulate from a failed (empty) explanation");
    if (instance.size() != features.size()) throw DataError("instance width does not match the feature schema");

    SimulatedInstance out{{instance.begin(), instance.end()}, 0};
    for (const auto& rule : explanation.rules) {
        const auto it = std::find_if(features.begin(), features.end(),
                                     [&](const FeatureSpec& f) { return f.name == rule.feature; });
        if (it == features.end()) throw DataError("rule on unknown feature '" + rule.feature + "'");
        const auto* s = stats.find(rule.feature);
        if (!s) throw DataError("missing statistics for ruled feature '" + rule.feature + "'");
        const auto f = static_cast<std::size_t>(it - features.begin());

        const int sign = direction_sign(rule.orientation, explanation.predicted_class, direction);
        double v = rule.threshold + sign * config.alpha * s->std;
        if (config.clamp_non_negative && it->non_negative && v < 0.0) {
            v = 0.0;
            ++out.clamp_events;
        }
        out.values[f] = v;
    }
    return out;
}

} // namespace evalxai
