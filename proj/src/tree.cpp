#include "paneldml/tree.hpp"

#include "paneldml/error.hpp"
#include "paneldml/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace paneldml {

namespace {

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

struct NodeStats {
    double sum = 0.0;
    int count = 0;
};

/// Grows one CART tree on the rows where node_of_row[r] == 0, writing into
/// `tree`. sorted_by_feature holds all training row indices sorted per
/// feature; rows outside the current subsample carry node id -1.
void grow_tree(RegressionTree& tree, const NumericTable& features, std::span<const double> target,
               std::vector<int>& node_of_row,
               const std::vector<std::vector<std::uint32_t>>& sorted_by_feature,
               const GbrtConfig& config) {
    const std::size_t n_features = features.n_cols();

    NodeStats root{};
    for (std::size_t r = 0; r < node_of_row.size(); ++r) {
        if (node_of_row[r] != 0) continue;
        root.sum += target[r];
        root.count++;
    }

    tree.nodes.clear();
    TreeNode root_node;
    root_node.value = root.count > 0 ? root.sum / root.count : 0.0;
    root_node.count = root.count;
    tree.nodes.push_back(root_node);

    std::vector<int> frontier = {0};
    std::vector<NodeStats> stats = {root};     // aligned with frontier
    std::vector<SplitCandidate> best;          // aligned with frontier
    std::vector<int> frontier_slot(tree.nodes.size(), -1);

    for (int depth = 0; depth < config.max_depth && !frontier.empty(); ++depth) {
        best.assign(frontier.size(), SplitCandidate{});
        frontier_slot.assign(tree.nodes.size(), -1);
        for (std::size_t s = 0; s < frontier.size(); ++s)
            frontier_slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);

        std::vector<double> left_sum(frontier.size());
        std::vector<int> left_cnt(frontier.size());
        std::vector<double> prev_val(frontier.size());

        for (std::size_t f = 0; f < n_features; ++f) {
            std::fill(left_sum.begin(), left_sum.end(), 0.0);
            std::fill(left_cnt.begin(), left_cnt.end(), 0);
            std::fill(prev_val.begin(), prev_val.end(),
                      std::numeric_limits<double>::quiet_NaN());

            for (const std::uint32_t r : sorted_by_feature[f]) {
                const int node = node_of_row[r];
                if (node < 0) continue;
                const int slot = frontier_slot[static_cast<std::size_t>(node)];
                if (slot < 0) continue;

                const double v = features.at(r, f);
                const NodeStats& total = stats[static_cast<std::size_t>(slot)];
                const int lc = left_cnt[static_cast<std::size_t>(slot)];
                if (lc > 0 && v > prev_val[static_cast<std::size_t>(slot)] &&
                    lc >= config.min_leaf && total.count - lc >= config.min_leaf) {
                    const double ls = left_sum[static_cast<std::size_t>(slot)];
                    const double rs = total.sum - ls;
                    const int rc = total.count - lc;
                    const double gain = ls * ls / lc + rs * rs / rc -
                                        total.sum * total.sum / total.count;
                    // Strict > keeps the lowest (feature, threshold) on ties.
                    if (gain > best[static_cast<std::size_t>(slot)].gain &&
                        gain > 1e-12 * (std::abs(total.sum) + 1.0)) {
                        best[static_cast<std::size_t>(slot)] = {
                            gain, static_cast<int>(f),
                            (prev_val[static_cast<std::size_t>(slot)] + v) / 2.0};
                    }
                }
                left_sum[static_cast<std::size_t>(slot)] += target[r];
                left_cnt[static_cast<std::size_t>(slot)] += 1;
                prev_val[static_cast<std::size_t>(slot)] = v;
            }
        }

        // Materialize the chosen splits.
        std::vector<int> next_frontier;
        std::vector<NodeStats> next_stats;
        bool any_split = false;
        for (std::size_t s = 0; s < frontier.size(); ++s) {
            if (best[s].feature < 0) continue;
            any_split = true;
            auto& node = tree.nodes[static_cast<std::size_t>(frontier[s])];
            node.feature = best[s].feature;
            node.threshold = best[s].threshold;
            node.left = static_cast<int>(tree.nodes.size());
            node.right = node.left + 1;
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            next_frontier.push_back(node.left);
            next_frontier.push_back(node.right);
            next_stats.emplace_back();
            next_stats.emplace_back();
        }
        if (!any_split) break;

        for (std::size_t r = 0; r < node_of_row.size(); ++r) {
            const int node = node_of_row[r];
            if (node < 0) continue;
            const int slot = frontier_slot[static_cast<std::size_t>(node)];
            if (slot < 0) continue;
            const auto& parent = tree.nodes[static_cast<std::size_t>(node)];
            if (parent.is_leaf()) continue;
            const int child = features.at(r, static_cast<std::size_t>(parent.feature)) <=
                                      parent.threshold
                                  ? parent.left
                                  : parent.right;
            node_of_row[r] = child;
        }

        for (std::size_t i = 0; i < next_frontier.size(); ++i) {
            NodeStats st{};
            for (std::size_t r = 0; r < node_of_row.size(); ++r) {
                if (node_of_row[r] != next_frontier[i]) continue;
                st.sum += target[r];
                st.count++;
            }
            auto& child = tree.nodes[static_cast<std::size_t>(next_frontier[i])];
            child.value = st.count > 0 ? st.sum / st.count : 0.0;
            child.count = st.count;
            next_stats[i] = st;
        }
        frontier = std::move(next_frontier);
        stats = std::move(next_stats);
        frontier_slot.resize(tree.nodes.size(), -1);
    }
}

} // namespace

GradientBoostedEnsemble GradientBoostedEnsemble::fit(const NumericTable& features,
                                                     std::span<const double> y,
                                                     const GbrtConfig& config,
                                                     std::uint64_t seed) {
    const std::size_t n = features.n_rows;
    if (n < 2) throw DataError("fit_gbrt: need at least 2 rows");
    if (y.size() != n) throw SchemaError("fit_gbrt: target length does not match rows");
    if (config.subsample <= 0.0 || config.subsample > 1.0)
        throw SchemaError("fit_gbrt: subsample must lie in (0,1]");

    GradientBoostedEnsemble model;
    model.config_ = config;
    model.seed_ = seed;
    model.n_features_ = features.n_cols();

    double sum = 0.0;
    for (double v : y) sum += v;
    model.base_ = sum / static_cast<double>(n);

    double sse = 0.0;
    for (double v : y) sse += (v - model.base_) * (v - model.base_);
    model.train_mse_.push_back(sse / static_cast<double>(n));
    if (sse == 0.0) return model; // constant target: base prediction only

    // Rows sorted per feature once; ties keep index order for determinism.
    std::vector<std::vector<std::uint32_t>> sorted_by_feature(features.n_cols());
    for (std::size_t f = 0; f < features.n_cols(); ++f) {
        auto& order = sorted_by_feature[f];
        order.resize(n);
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return features.at(a, f) < features.at(b, f);
        });
    }

    std::vector<double> fitted(n, model.base_);
    std::vector<double> residual(n);
    std::vector<int> node_of_row(n);
    std::vector<std::uint32_t> pool(n);

    const auto m = static_cast<std::size_t>(
        std::max<double>(2.0, std::floor(config.subsample * static_cast<double>(n))));

    for (int round = 0; round < config.n_trees; ++round) {
        for (std::size_t r = 0; r < n; ++r) residual[r] = y[r] - fitted[r];

        if (config.subsample < 1.0) {
            std::fill(node_of_row.begin(), node_of_row.end(), -1);
            std::iota(pool.begin(), pool.end(), 0u);
            Rng rng(derive_seed(seed, "subsample", static_cast<std::uint64_t>(round)));
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
                std::swap(pool[i], pool[j]);
                node_of_row[pool[i]] = 0;
            }
        } else {
            std::fill(node_of_row.begin(), node_of_row.end(), 0);
        }

        RegressionTree tree;
        grow_tree(tree, features, residual, node_of_row, sorted_by_feature, config);
        model.trees_.push_back(tree);

        double mse = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            fitted[r] += config.learning_rate * tree.predict({features.row(r), model.n_features_});
            const double e = y[r] - fitted[r];
            mse += e * e;
        }
        model.train_mse_.push_back(mse / static_cast<double>(n));
    }
    return model;
}

std::vector<double> GradientBoostedEnsemble::predict_rows(const NumericTable& features) const {
    std::vector<double> out(features.n_rows);
    for (std::size_t r = 0; r < features.n_rows; ++r)
        out[r] = predict({features.row(r), n_features_});
    return out;
}

nlohmann::json GradientBoostedEnsemble::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : trees_) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree.nodes)
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"left", n.left},
                             {"right", n.right},
                             {"value", n.value},
                             {"count", n.count}});
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    return {{"format_version", 1},
            {"config",
             {{"n_trees", config_.n_trees},
              {"max_depth", config_.max_depth},
              {"learning_rate", config_.learning_rate},
              {"subsample", config_.subsample},
              {"min_leaf", config_.min_leaf}}},
            {"seed", seed_},
            {"base", base_},
            {"n_features", n_features_},
            {"trees", std::move(trees)},
            {"training_mse", train_mse_}};
}

GradientBoostedEnsemble GradientBoostedEnsemble::from_json(const nlohmann::json& doc) {
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1)
        throw SchemaError("ensemble document: unsupported format_version");
    GradientBoostedEnsemble model;
    const auto& cfg = doc.at("config");
    model.config_.n_trees = cfg.at("n_trees").get<int>();
    model.config_.max_depth = cfg.at("max_depth").get<int>();
    model.config_.learning_rate = cfg.at("learning_rate").get<double>();
    model.config_.subsample = cfg.at("subsample").get<double>();
    model.config_.min_leaf = cfg.at("min_leaf").get<int>();
    model.seed_ = doc.at("seed").get<std::uint64_t>();
    model.base_ = doc.at("base").get<double>();
    model.n_features_ = doc.at("n_features").get<std::size_t>();
    model.train_mse_ = doc.at("training_mse").get<std::vector<double>>();
    for (const auto& tree_doc : doc.at("trees")) {
        RegressionTree tree;
        for (const auto& n : tree_doc.at("nodes")) {
            TreeNode node;
            node.feature = n.at("feature").get<int>();
            node.threshold = n.at("threshold").get<double>();
            node.left = n.at("left").get<int>();
            node.right = n.at("right").get<int>();
            node.value = n.at("value").get<double>();
            node.count = n.at("count").get<int>();
            tree.nodes.push_back(node);
        }
        model.trees_.push_back(std::move(tree));
    }
    return model;
}

} // namespace paneldml
