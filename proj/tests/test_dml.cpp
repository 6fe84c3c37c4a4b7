#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "paneldml/dml.hpp"
#include "paneldml/error.hpp"
#include "paneldml/rng.hpp"
#include "paneldml/stats.hpp"
#include "paneldml/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

using namespace paneldml;

namespace {

DmlData toy_dml_data(Rng& rng, std::size_t n, double tau, double gamma, bool constant_x = false) {
    DmlData data;
    data.outcome_col = "y";
    data.treatment_col = "t";
    data.interaction_col = "tx";
    data.nuisance_cols = {"w1", "w2", "x"};
    data.table.names = {"y", "t", "tx", "w1", "w2", "x"};
    data.table.n_rows = n;
    data.table.data.resize(n * 6);
    data.panel_rows.resize(n);
    std::iota(data.panel_rows.begin(), data.panel_rows.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double w1 = rng.normal();
        const double w2 = rng.uniform01();
        const double x = constant_x ? 0.5 : 0.1 + 1.4 * rng.uniform01();
        const double t = 0.5 * rng.uniform01() + 0.2 * w2; // exposure tied to W
        const double g = 0.3 * w1 + 0.5 * w2 * w2;
        const double y = tau * t + gamma * t * x + g + 0.3 * rng.normal();
        data.table.at(i, 0) = y;
        data.table.at(i, 1) = t;
        data.table.at(i, 2) = t * x;
        data.table.at(i, 3) = w1;
        data.table.at(i, 4) = w2;
        data.table.at(i, 5) = x;
    }
    return data;
}

GbrtConfig light_learner() {
    GbrtConfig cfg;
    cfg.n_trees = 80;
    cfg.max_depth = 3;
    cfg.learning_rate = 0.1;
    cfg.subsample = 0.8;
    return cfg;
}

} // namespace

TEST_CASE("assign_folds: near-equal sizes and determinism") {
    auto folds = assign_folds(10, 5, 1);
    std::map<int, int> sizes;
    for (int f : folds) sizes[f]++;
    REQUIRE(sizes.size() == 5);
    for (const auto& [f, n] : sizes) CHECK(n == 2);

    CHECK(assign_folds(10, 5, 1) == folds);
    CHECK(assign_folds(10, 5, 2) != folds);

    // 1,343 rows over 5 folds: sizes {269,269,269,268,268} in some order.
    auto big = assign_folds(1343, 5, 42);
    std::map<int, int> big_sizes;
    for (int f : big) big_sizes[f]++;
    std::vector<int> counts;
    for (const auto& [f, n] : big_sizes) counts.push_back(n);
    std::sort(counts.rbegin(), counts.rend());
    CHECK(counts == std::vector<int>{269, 269, 269, 268, 268});

    CHECK_THROWS_AS(assign_folds(3, 5, 1), DataError);
}

TEST_CASE("canonicalize_folds: label permutations collapse to one labeling") {
    Rng rng(3);
    auto folds = assign_folds(200, 4, 9);
    const auto canonical = canonicalize_folds(folds);

    // Apply several random label permutations; canonical form is unchanged.
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::uint32_t> perm = rng.permutation(4);
        std::vector<int> relabeled(folds.size());
        for (std::size_t i = 0; i < folds.size(); ++i)
            relabeled[i] = static_cast<int>(perm[static_cast<std::size_t>(folds[i])]);
        CHECK(canonicalize_folds(relabeled) == canonical);
    }
}

TEST_CASE("crossfit_residualize: K=2, n=4 equals hand-computed out-of-fold means") {
    // With two rows per training fold and min_leaf 5, no split is possible, so
    // the nuisance prediction is the training-fold mean of the target.
    NumericTable table;
    table.names = {"y", "w"};
    table.n_rows = 4;
    table.data = {10.0, 0.0, 20.0, 1.0, 30.0, 2.0, 40.0, 3.0};
    const std::vector<int> folds = {0, 1, 0, 1};

    GbrtConfig cfg;
    cfg.n_trees = 10;
    const auto res =
        crossfit_residualize(table, "y", {"w"}, folds, 2, cfg, 7, "outcome", nullptr, 1);

    // Fold 0 rows predicted from fold 1: mean(20,40)=30; fold 1 from fold 0: mean(10,30)=20.
    CHECK(res[0] == doctest::Approx(10.0 - 30.0));
    CHECK(res[1] == doctest::Approx(20.0 - 20.0));
    CHECK(res[2] == doctest::Approx(30.0 - 30.0));
    CHECK(res[3] == doctest::Approx(40.0 - 20.0));
}

TEST_CASE("crossfit_residualize: noiseless linear target is nearly eliminated") {
    Rng rng(11);
    NumericTable table;
    table.names = {"y", "w"};
    table.n_rows = 2000;
    table.data.resize(2000 * 2);
    for (std::size_t i = 0; i < 2000; ++i) {
        const double w = rng.uniform01();
        table.at(i, 1) = w;
        table.at(i, 0) = 2.0 + 3.0 * w;
    }
    GbrtConfig cfg;
    cfg.n_trees = 200;
    cfg.learning_rate = 0.1;
    cfg.subsample = 1.0;
    CrossfitDiagnostics diag;
    const auto folds = canonicalize_folds(assign_folds(2000, 5, 1));
    const auto res = crossfit_residualize(table, "y", {"w"}, folds, 5, cfg, 1, "outcome", &diag, 1);

    double max_abs = 0.0;
    for (double r : res) max_abs = std::max(max_abs, std::abs(r));
    CHECK(max_abs < 0.05);
    for (double mse : diag.oof_mse) CHECK(mse < 1e-3);
}

TEST_CASE("crossfit_residualize: independent target keeps its variance") {
    Rng rng(13);
    NumericTable table;
    table.names = {"y", "w"};
    table.n_rows = 5000;
    table.data.resize(5000 * 2);
    std::vector<double> raw(5000);
    for (std::size_t i = 0; i < 5000; ++i) {
        raw[i] = rng.normal();
        table.at(i, 0) = raw[i];
        table.at(i, 1) = rng.uniform01();
    }
    const auto folds = canonicalize_folds(assign_folds(5000, 5, 2));
    const auto res =
        crossfit_residualize(table, "y", {"w"}, folds, 5, light_learner(), 2, "outcome", nullptr, 1);

    CHECK(stats::variance(res) == doctest::Approx(stats::variance(raw)).epsilon(0.10));
}

TEST_CASE("crossfit_residualize: constant training target warns and centers") {
    NumericTable table;
    table.names = {"y", "w"};
    table.n_rows = 12;
    table.data.resize(24);
    for (std::size_t i = 0; i < 12; ++i) {
        table.at(i, 0) = 5.0;
        table.at(i, 1) = static_cast<double>(i);
    }
    CrossfitDiagnostics diag;
    const auto folds = canonicalize_folds(assign_folds(12, 3, 4));
    const auto res =
        crossfit_residualize(table, "y", {"w"}, folds, 3, light_learner(), 4, "outcome", &diag, 1);
    CHECK_FALSE(diag.warnings.empty());
    for (double r : res) CHECK(r == 0.0);
}

TEST_CASE("dml_fit_data: pooled residuals are approximately centered") {
    Rng rng(17);
    DmlData data = toy_dml_data(rng, 3000, 0.1, 0.05);
    DmlConfig config;
    config.nuisance = light_learner();
    config.seed = 5;
    ResidualSet res;
    dml_fit_data(data, config, &res);

    for (const auto* v : {&res.y_res, &res.t_res, &res.tx_res}) {
        const double m = stats::mean(*v);
        const double bound = 3.0 * stats::stddev(*v) / std::sqrt(static_cast<double>(v->size()));
        CHECK(std::abs(m) <= bound);
    }
}

TEST_CASE("dml_fit_data: deterministic and invariant to thread count") {
    Rng rng(19);
    DmlData data = toy_dml_data(rng, 800, 0.0, 0.1);
    DmlConfig config;
    config.nuisance = light_learner();
    config.seed = 11;
    config.threads = 1;
    const auto a = dml_fit_data(data, config);
    const auto b = dml_fit_data(data, config);
    CHECK(a.tau.estimate == b.tau.estimate);
    CHECK(a.gamma.se == b.gamma.se);

    config.threads = 4;
    const auto c = dml_fit_data(data, config);
    CHECK(a.tau.estimate == c.tau.estimate);
    CHECK(a.gamma.estimate == c.gamma.estimate);
    CHECK(a.gamma.se == c.gamma.se);
}

TEST_CASE("dml_fit_data: adding a constant to Y leaves tau and gamma unchanged") {
    Rng rng(23);
    DmlData data = toy_dml_data(rng, 1200, 0.05, 0.08);
    DmlConfig config;
    config.nuisance = light_learner();
    config.seed = 3;
    const auto base = dml_fit_data(data, config);

    DmlData shifted = data;
    const std::size_t y_col = shifted.table.require("y");
    for (std::size_t r = 0; r < shifted.table.n_rows; ++r) shifted.table.at(r, y_col) += 4.2;
    const auto moved = dml_fit_data(shifted, config);

    CHECK(std::abs(base.tau.estimate - moved.tau.estimate) < 1e-10);
    CHECK(std::abs(base.gamma.estimate - moved.gamma.estimate) < 1e-10);
}

TEST_CASE("dml_fit_data: collinear residualized regressors are rejected") {
    Rng rng(29);
    DmlData data = toy_dml_data(rng, 500, 0.1, 0.0, /*constant_x=*/true);
    DmlConfig config;
    config.nuisance = light_learner();
    // Full-rate sampling makes the two nuisance fits deterministic, so the
    // interaction residual is exactly proportional to the treatment residual.
    config.nuisance.subsample = 1.0;
    CHECK_THROWS_WITH_AS(dml_fit_data(data, config), doctest::Contains("collinear"),
                         NumericError);
}

TEST_CASE("dml_fit: recovers a known interaction on the synthetic generator") {
    // Single smoke-level recovery run; the acceptance suite sweeps seeds.
    DgpConfig cfg = preset_config("dual-stressor", 2500, 404);
    const auto generated = generate_panel(cfg);
    DmlConfig config;
    config.seed = 404;
    config.nuisance = light_learner();
    config.threads = 2;
    const auto est = dml_fit(generated.panel, config);

    CHECK(est.gamma.ci_low < 0.06);
    CHECK(est.gamma.ci_high > 0.06 * 0.2); // loose sanity: the CI sits near the truth
    CHECK(est.n_rows > 2500);
    CHECK(est.folds == 5);
}

TEST_CASE("dml_fit: residual export is aligned with the modeled rows") {
    DgpConfig cfg = preset_config("null", 600, 12);
    const auto generated = generate_panel(cfg);
    DmlConfig config;
    config.nuisance = light_learner();
    ResidualSet res;
    dml_fit(generated.panel, config, &res);
    REQUIRE_FALSE(res.panel_rows.empty());
    CHECK(res.panel_rows.size() == res.y_res.size());
    CHECK(res.panel_rows.size() == res.folds.size());
    // Modeled rows must have the treatment lag present.
    for (const std::size_t row : res.panel_rows)
        CHECK(generated.panel.rows[row].strikes_lag2.has_value());
}
