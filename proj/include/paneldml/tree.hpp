#pragma once

#include "paneldml/table.hpp"

#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

namespace paneldml {

/// Node of a depth-limited regression tree. feature < 0 marks a leaf.
/// Internal nodes keep their training mean and coverage so children always
/// partition the parent's coverage.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    int count = 0;

    bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
  public:
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const {
        int idx = 0;
        while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
            const auto& node = nodes[static_cast<std::size_t>(idx)];
            idx = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                              : node.right;
        }
        return nodes[static_cast<std::size_t>(idx)].value;
    }
};

struct GbrtConfig {
    int n_trees = 200;
    int max_depth = 3;
    double learning_rate = 0.05;
    double subsample = 0.8;
    int min_leaf = 5;
};

/// Squared-loss gradient boosting over exhaustive-search CART trees.
/// Split ties break toward the lowest feature index, then the lowest
/// threshold, so training is deterministic; subsampling draws from a
/// stream derived from the stored seed.
class GradientBoostedEnsemble {
  public:
    static GradientBoostedEnsemble fit(const NumericTable& features, std::span<const double> y,
                                       const GbrtConfig& config, std::uint64_t seed);

    double predict(std::span<const double> x) const {
        if (x.size() != n_features_)
            throw SchemaError("predict: expected " + std::to_string(n_features_) +
                              " features, got " + std::to_string(x.size()));
        double out = base_;
        for (const auto& tree : trees_) out += config_.learning_rate * tree.predict(x);
        return out;
    }

    std::vector<double> predict_rows(const NumericTable& features) const;

    double base() const { return base_; }
    const std::vector<RegressionTree>& trees() const { return trees_; }
    const GbrtConfig& config() const { return config_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t n_features() const { return n_features_; }
    const std::vector<double>& training_mse_trace() const { return train_mse_; }

    nlohmann::json to_json() const;
    static GradientBoostedEnsemble from_json(const nlohmann::json& doc);

  private:
    double base_ = 0.0;
    std::vector<RegressionTree> trees_;
    GbrtConfig config_;
    std::uint64_t seed_ = 0;
    std::size_t n_features_ = 0;
    std::vector<double> train_mse_; // [0] = base model, then one entry per tree
};

} // namespace paneldml
