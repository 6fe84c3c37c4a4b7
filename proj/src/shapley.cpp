#include "paneldml/shapley.hpp"

#include "paneldml/error.hpp"
#include "paneldml/frame.hpp"
#include "paneldml/parallel.hpp"
#include "paneldml/rng.hpp"
#include "paneldml/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace paneldml {

double FeatureMap::predict(const GradientBoostedEnsemble& model, const double* players) const {
    std::vector<double> inputs(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) inputs[c] = eval(c, players);
    return model.predict(inputs);
}

TreeShapExplainer::TreeShapExplainer(const GradientBoostedEnsemble& model, FeatureMap map,
                                     NumericTable background)
    : model_(model), map_(std::move(map)), background_(std::move(background)) {
    if (background_.n_rows == 0) throw DataError("TreeShapExplainer: empty background");
    if (map_.cols.size() != model_.n_features())
        throw SchemaError("TreeShapExplainer: feature map does not match the ensemble");
    if (background_.n_cols() != static_cast<std::size_t>(map_.n_players))
        throw SchemaError("TreeShapExplainer: background is not in player space");

    // Shapley coalition weights w(s) = s!(d-s-1)!/d! via the stable recurrence
    // w(0) = 1/d, w(s) = w(s-1) * s / (d - s), then the leaf-requirement sums
    //   Tpos(k,m) = sum_j C(d-k-m, j) w(k-1+j)
    //   Tneg(k,m) = sum_j C(d-k-m, j) w(k+j).
    const int d = map_.n_players;
    std::vector<double> w(static_cast<std::size_t>(d));
    w[0] = 1.0 / static_cast<double>(d);
    for (int s = 1; s < d; ++s)
        w[static_cast<std::size_t>(s)] =
            w[static_cast<std::size_t>(s - 1)] * static_cast<double>(s) / static_cast<double>(d - s);

    std::vector<std::vector<double>> binom(static_cast<std::size_t>(d + 1));
    for (int q = 0; q <= d; ++q) {
        binom[static_cast<std::size_t>(q)].assign(static_cast<std::size_t>(q + 1), 1.0);
        for (int j = 1; j < q; ++j)
            binom[static_cast<std::size_t>(q)][static_cast<std::size_t>(j)] =
                binom[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(j - 1)] +
                binom[static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(j)];
    }

    t_pos_.assign(static_cast<std::size_t>(d + 1),
                  std::vector<double>(static_cast<std::size_t>(d + 1), 0.0));
    t_neg_ = t_pos_;
    for (int k = 0; k <= d; ++k) {
        for (int m = 0; k + m <= d; ++m) {
            const int free = d - k - m;
            if (k >= 1) {
                double acc = 0.0;
                for (int j = 0; j <= free; ++j)
                    acc += binom[static_cast<std::size_t>(free)][static_cast<std::size_t>(j)] *
                           w[static_cast<std::size_t>(k - 1 + j)];
                t_pos_[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)] = acc;
            }
            if (m >= 1) {
                double acc = 0.0;
                for (int j = 0; j <= free; ++j)
                    acc += binom[static_cast<std::size_t>(free)][static_cast<std::size_t>(j)] *
                           w[static_cast<std::size_t>(k + j)];
                t_neg_[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)] = acc;
            }
        }
    }
}

namespace {

// Per-player source during the path walk: free, pinned to x, or pinned to the
// background row.
enum class Source : std::uint8_t { free, from_x, from_b };

struct WalkContext {
    const RegressionTree* tree = nullptr;
    const FeatureMap* map = nullptr;
    const double* x = nullptr;
    const double* b = nullptr;
    const std::vector<std::vector<double>>* t_pos = nullptr;
    const std::vector<std::vector<double>>* t_neg = nullptr;
    double scale = 1.0; // learning rate / |background|
    std::vector<Source>* state = nullptr;
    std::vector<std::pair<int, Source>>* assignment_stack = nullptr;
    std::vector<double>* phi = nullptr;
};

// Value of a player under the walk state; `forced` overrides for the combo
// currently being probed (unassigned players are always forced by the caller).
double player_value(const WalkContext& ctx, int player, Source forced) {
    const Source s = forced != Source::free ? forced : (*ctx.state)[static_cast<std::size_t>(player)];
    return s == Source::from_b ? ctx.b[player] : ctx.x[player];
}

void walk(const WalkContext& ctx, int node_idx, int k, int m) {
    const TreeNode& node = ctx.tree->nodes[static_cast<std::size_t>(node_idx)];
    if (node.is_leaf()) {
        if (k == 0 && m == 0) return; // concordant path, no attribution
        const double v = node.value * ctx.scale;
        const double pos = (*ctx.t_pos)[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)];
        const double neg = (*ctx.t_neg)[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)];
        for (const auto& [player, src] : *ctx.assignment_stack) {
            if (src == Source::from_x)
                (*ctx.phi)[static_cast<std::size_t>(player)] += v * pos;
            else
                (*ctx.phi)[static_cast<std::size_t>(player)] -= v * neg;
        }
        return;
    }

    const FeatureMap::Col& col = ctx.map->cols[static_cast<std::size_t>(node.feature)];
    int unassigned[2];
    int n_unassigned = 0;
    if ((*ctx.state)[static_cast<std::size_t>(col.player_a)] == Source::free)
        unassigned[n_unassigned++] = col.player_a;
    if (col.player_b >= 0 && col.player_b != col.player_a &&
        (*ctx.state)[static_cast<std::size_t>(col.player_b)] == Source::free)
        unassigned[n_unassigned++] = col.player_b;

    const int combos = 1 << n_unassigned;
    int sides = 0; // bitmask of sides taken across combos
    int side_of[4];
    for (int c = 0; c < combos; ++c) {
        double a_val, b_val = 1.0;
        {
            Source forced_a = Source::free;
            Source forced_b = Source::free;
            for (int u = 0; u < n_unassigned; ++u) {
                const Source chosen = (c >> u) & 1 ? Source::from_x : Source::from_b;
                if (unassigned[u] == col.player_a) forced_a = chosen;
                if (unassigned[u] == col.player_b) forced_b = chosen;
            }
            a_val = player_value(ctx, col.player_a, forced_a);
            if (col.player_b >= 0) b_val = player_value(ctx, col.player_b, forced_b);
        }
        const double value = col.player_b >= 0 ? a_val * b_val : a_val;
        side_of[c] = value <= node.threshold ? 0 : 1;
        sides |= 1 << side_of[c];
    }

    if (sides != 3) {
        // Every membership combination goes the same way: follow it without
        // pinning any player.
        walk(ctx, side_of[0] == 0 ? node.left : node.right, k, m);
        return;
    }

    for (int c = 0; c < combos; ++c) {
        int dk = 0, dm = 0;
        for (int u = 0; u < n_unassigned; ++u) {
            const Source chosen = (c >> u) & 1 ? Source::from_x : Source::from_b;
            (*ctx.state)[static_cast<std::size_t>(unassigned[u])] = chosen;
            ctx.assignment_stack->emplace_back(unassigned[u], chosen);
            if (chosen == Source::from_x)
                ++dk;
            else
                ++dm;
        }
        walk(ctx, side_of[c] == 0 ? node.left : node.right, k + dk, m + dm);
        for (int u = 0; u < n_unassigned; ++u) {
            (*ctx.state)[static_cast<std::size_t>(unassigned[u])] = Source::free;
            ctx.assignment_stack->pop_back();
        }
    }
}

} // namespace

ShapAttribution TreeShapExplainer::shap_values(std::span<const double> players) const {
    if (players.size() != static_cast<std::size_t>(map_.n_players))
        throw SchemaError("shap_values: instance is not in player space");

    ShapAttribution out;
    out.phi.assign(static_cast<std::size_t>(map_.n_players), 0.0);
    out.prediction = map_.predict(model_, players.data());

    std::vector<Source> state(static_cast<std::size_t>(map_.n_players), Source::free);
    std::vector<std::pair<int, Source>> stack;
    stack.reserve(16);

    double baseline = 0.0;
    const double inv_b = 1.0 / static_cast<double>(background_.n_rows);
    for (std::size_t b = 0; b < background_.n_rows; ++b) {
        baseline += map_.predict(model_, background_.row(b));
        WalkContext ctx;
        ctx.map = &map_;
        ctx.x = players.data();
        ctx.b = background_.row(b);
        ctx.t_pos = &t_pos_;
        ctx.t_neg = &t_neg_;
        ctx.scale = model_.config().learning_rate * inv_b;
        ctx.state = &state;
        ctx.assignment_stack = &stack;
        ctx.phi = &out.phi;
        for (const auto& tree : model_.trees()) {
            ctx.tree = &tree;
            walk(ctx, 0, 0, 0);
        }
    }
    out.baseline = baseline * inv_b;
    return out;
}

std::vector<ImportanceEntry> global_importance(const TreeShapExplainer& explainer,
                                               const NumericTable& dataset,
                                               const std::vector<std::string>& player_names,
                                               int threads) {
    if (dataset.n_rows == 0) throw DataError("global_importance: empty dataset");
    const auto d = static_cast<std::size_t>(explainer.feature_map().n_players);

    std::vector<std::vector<double>> abs_sums(dataset.n_rows);
    parallel_for(dataset.n_rows, threads, [&](std::size_t r) {
        const auto attribution = explainer.shap_values({dataset.row(r), d});
        auto& acc = abs_sums[r];
        acc.resize(d);
        for (std::size_t j = 0; j < d; ++j) acc[j] = std::abs(attribution.phi[j]);
    });

    std::vector<ImportanceEntry> entries(d);
    for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t r = 0; r < dataset.n_rows; ++r) acc += abs_sums[r][j];
        entries[j].player = static_cast<int>(j);
        entries[j].name = j < player_names.size() ? player_names[j] : std::to_string(j);
        entries[j].mean_abs_shap = acc / static_cast<double>(dataset.n_rows);
    }
    std::sort(entries.begin(), entries.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
        if (a.mean_abs_shap != b.mean_abs_shap) return a.mean_abs_shap > b.mean_abs_shap;
        return a.player < b.player;
    });
    return entries;
}

std::vector<DependenceRow> dependence_data(const TreeShapExplainer& explainer,
                                           const NumericTable& dataset, int feature_player,
                                           int color_player, int threads) {
    const auto d = static_cast<std::size_t>(explainer.feature_map().n_players);
    if (feature_player < 0 || static_cast<std::size_t>(feature_player) >= d ||
        color_player < 0 || static_cast<std::size_t>(color_player) >= d)
        throw SchemaError("dependence_data: player index out of range");

    std::vector<DependenceRow> rows(dataset.n_rows);
    parallel_for(dataset.n_rows, threads, [&](std::size_t r) {
        const auto attribution = explainer.shap_values({dataset.row(r), d});
        rows[r] = {dataset.at(r, static_cast<std::size_t>(feature_player)),
                   attribution.phi[static_cast<std::size_t>(feature_player)],
                   dataset.at(r, static_cast<std::size_t>(color_player))};
    });
    return rows;
}

PredictiveModel fit_predictive_model(const Panel& panel, double train_fraction,
                                     std::uint64_t seed, const GbrtConfig& config) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DataError("fit_predictive_model: train fraction must lie in (0,1)");

    PredictiveModel model;
    model.player_names = {"strikes_lag1",  "strikes_lag2",
                          "strikes_lag3",  "inflation_at_entry",
                          "cum_gpa",       "repeat_ratio",
                          "credits_approved_cum", "semester_number",
                          "calendar_year", "gender_code",
                          "work_status"};
    model.ensemble_columns = model.player_names;
    model.ensemble_columns.push_back("interaction_term");

    std::vector<std::string> frame_cols = {"dropout_next_sem"};
    frame_cols.insert(frame_cols.end(), model.ensemble_columns.begin(),
                      model.ensemble_columns.end());
    ModelFrame frame = build_model_frame(panel, frame_cols);
    if (frame.table.n_rows < 20) throw DataError("fit_predictive_model: too few complete rows");

    model.players = frame.table.select(model.player_names);
    model.panel_rows = frame.panel_rows;

    model.map.n_players = static_cast<int>(model.player_names.size());
    for (std::size_t c = 0; c < model.ensemble_columns.size(); ++c) {
        if (model.ensemble_columns[c] == "interaction_term") {
            FeatureMap::Col col;
            col.player_a = static_cast<int>(
                std::find(model.player_names.begin(), model.player_names.end(), "strikes_lag2") -
                model.player_names.begin());
            col.player_b = static_cast<int>(
                std::find(model.player_names.begin(), model.player_names.end(),
                          "inflation_at_entry") -
                model.player_names.begin());
            model.map.cols.push_back(col);
        } else {
            FeatureMap::Col col;
            col.player_a = static_cast<int>(c);
            col.player_b = -1;
            model.map.cols.push_back(col);
        }
    }

    const NumericTable features = frame.table.select(model.ensemble_columns);
    const std::vector<double> y = frame.table.column_values(frame.table.require("dropout_next_sem"));

    // Stratified split: shuffle each class separately, keep the outcome rate
    // aligned to within one instance per class.
    std::vector<std::size_t> class0, class1;
    for (std::size_t r = 0; r < y.size(); ++r) (y[r] == 1.0 ? class1 : class0).push_back(r);
    if (class0.empty() || class1.empty())
        throw DataError("fit_predictive_model: a class is absent from the data");

    Rng rng(derive_seed(seed, "stratified-split"));
    auto split_class = [&](std::vector<std::size_t>& members) {
        std::vector<std::size_t> shuffled = members;
        rng.shuffle(shuffled);
        const auto n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(shuffled.size())));
        for (std::size_t i = 0; i < shuffled.size(); ++i)
            (i < n_train ? model.train_rows : model.test_rows).push_back(shuffled[i]);
    };
    split_class(class0);
    split_class(class1);
    std::sort(model.train_rows.begin(), model.train_rows.end());
    std::sort(model.test_rows.begin(), model.test_rows.end());

    auto class_present = [&](const std::vector<std::size_t>& rows, double label) {
        return std::any_of(rows.begin(), rows.end(), [&](std::size_t r) { return y[r] == label; });
    };
    for (const auto* rows : {&model.train_rows, &model.test_rows})
        if (rows->empty() || !class_present(*rows, 0.0) || !class_present(*rows, 1.0))
            throw DataError("fit_predictive_model: a class is absent from the train or test split");

    NumericTable train_x;
    train_x.names = features.names;
    std::vector<double> train_y;
    for (const std::size_t r : model.train_rows) {
        train_x.data.insert(train_x.data.end(), features.row(r), features.row(r) + features.n_cols());
        train_y.push_back(y[r]);
    }
    train_x.n_rows = train_y.size();

    model.ensemble =
        GradientBoostedEnsemble::fit(train_x, train_y, config, derive_seed(seed, "predictive-gbrt"));

    std::vector<double> scores;
    std::vector<int> labels;
    for (const std::size_t r : model.test_rows) {
        scores.push_back(model.ensemble.predict({features.row(r), features.n_cols()}));
        labels.push_back(static_cast<int>(y[r]));
    }
    model.auc = stats::auc_rank(scores, labels);

    // 10-bin reliability table on the test set; predictions clamped to [0,1]
    // at this reporting layer only.
    model.reliability.assign(10, ReliabilityBin{});
    for (std::size_t bin = 0; bin < 10; ++bin) {
        model.reliability[bin].bin_low = static_cast<double>(bin) / 10.0;
        model.reliability[bin].bin_high = static_cast<double>(bin + 1) / 10.0;
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double p = std::clamp(scores[i], 0.0, 1.0);
        auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(p * 10.0));
        auto& slot = model.reliability[bin];
        slot.count++;
        slot.mean_predicted += p;
        slot.observed_rate += labels[i];
    }
    for (auto& slot : model.reliability) {
        if (slot.count == 0) continue;
        slot.mean_predicted /= static_cast<double>(slot.count);
        slot.observed_rate /= static_cast<double>(slot.count);
    }
    return model;
}

NumericTable background_sample(const PredictiveModel& model, std::size_t max_rows,
                               std::uint64_t seed) {
    std::vector<std::size_t> rows = model.train_rows;
    if (rows.size() > max_rows) {
        Rng rng(derive_seed(seed, "shap-background"));
        rng.shuffle(rows);
        rows.resize(max_rows);
        std::sort(rows.begin(), rows.end());
    }
    NumericTable bg;
    bg.names = model.players.names;
    for (const std::size_t r : rows)
        bg.data.insert(bg.data.end(), model.players.row(r),
                       model.players.row(r) + model.players.n_cols());
    bg.n_rows = rows.size();
    return bg;
}

} // namespace paneldml
