#pragma once

#include "paneldml/panel.hpp"
#include "paneldml/table.hpp"
#include "paneldml/tree.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace paneldml {

/// Maps ensemble input columns onto attribution players. A column is either a
/// player itself or a product of two players (derived regressors such as an
/// interaction term attribute to their base variables).
struct FeatureMap {
    struct Col {
        int player_a = -1;
        int player_b = -1; // < 0: identity column for player_a
    };
    std::vector<Col> cols;
    int n_players = 0;

    static FeatureMap identity(int d) {
        FeatureMap map;
        map.n_players = d;
        map.cols.resize(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) map.cols[static_cast<std::size_t>(i)] = {i, -1};
        return map;
    }

    double eval(std::size_t col, const double* players) const {
        const Col& c = cols[col];
        const double a = players[static_cast<std::size_t>(c.player_a)];
        return c.player_b < 0 ? a : a * players[static_cast<std::size_t>(c.player_b)];
    }

    /// Model value at a player vector (maps players to ensemble inputs).
    double predict(const GradientBoostedEnsemble& model, const double* players) const;
};

struct ShapAttribution {
    std::vector<double> phi; // one per player
    double baseline = 0.0;   // expected prediction over the background
    double prediction = 0.0;
};

/// Exact interventional Shapley values for a boosted tree ensemble: per-tree
/// path enumeration against every background row, composed by additivity.
class TreeShapExplainer {
  public:
    TreeShapExplainer(const GradientBoostedEnsemble& model, FeatureMap map,
                      NumericTable background);

    ShapAttribution shap_values(std::span<const double> players) const;

    const FeatureMap& feature_map() const { return map_; }
    const NumericTable& background() const { return background_; }

  private:
    const GradientBoostedEnsemble& model_;
    FeatureMap map_;
    NumericTable background_; // player space
    // Coalition-weight sums indexed [k][m]: contribution factors for a leaf
    // requiring k players from x and excluding m players.
    std::vector<std::vector<double>> t_pos_, t_neg_;
};

struct ImportanceEntry {
    int player = 0;
    std::string name;
    double mean_abs_shap = 0.0;
};

/// Mean |phi| per player over a dataset, descending, ties by player index.
std::vector<ImportanceEntry> global_importance(const TreeShapExplainer& explainer,
                                               const NumericTable& dataset,
                                               const std::vector<std::string>& player_names,
                                               int threads = 1);

struct DependenceRow {
    double feature_value = 0.0;
    double shap_value = 0.0;
    double color_value = 0.0;
};

std::vector<DependenceRow> dependence_data(const TreeShapExplainer& explainer,
                                           const NumericTable& dataset, int feature_player,
                                           int color_player, int threads = 1);

struct ReliabilityBin {
    double bin_low = 0.0, bin_high = 0.0;
    std::size_t count = 0;
    double mean_predicted = 0.0;
    double observed_rate = 0.0;
};

struct PredictiveModel {
    GradientBoostedEnsemble ensemble;
    FeatureMap map;
    std::vector<std::string> player_names;    // base features (no derived columns)
    std::vector<std::string> ensemble_columns; // what the booster consumed
    NumericTable players;                     // player-space rows of the modeled panel
    std::vector<std::size_t> panel_rows;
    std::vector<std::size_t> train_rows, test_rows; // indices into `players`
    double auc = 0.0;
    std::vector<ReliabilityBin> reliability;  // 10-bin calibration table (test set)
};

/// Gradient-boosted dropout model on the full feature set (treatment lags,
/// moderator, interaction, controls) with a stratified split and rank AUC.
PredictiveModel fit_predictive_model(const Panel& panel, double train_fraction,
                                     std::uint64_t seed, const GbrtConfig& config);

/// Seeded background subsample (at most `max_rows` training rows).
NumericTable background_sample(const PredictiveModel& model, std::size_t max_rows,
                               std::uint64_t seed);

} // namespace paneldml
