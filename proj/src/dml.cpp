#include "paneldml/dml.hpp"

#include "paneldml/error.hpp"
#include "paneldml/frame.hpp"
#include "paneldml/parallel.hpp"
#include "paneldml/rng.hpp"
#include "paneldml/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <mutex>

namespace paneldml {

std::vector<int> assign_folds(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw DataError("assign_folds: need at least 2 folds");
    if (n < static_cast<std::size_t>(k))
        throw DataError("assign_folds: fewer rows than folds");

    Rng rng(derive_seed(seed, "fold-assignment"));
    auto order = rng.permutation(static_cast<std::uint32_t>(n));
    std::vector<int> folds(n);
    for (std::size_t i = 0; i < n; ++i) folds[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    return folds;
}

std::vector<int> canonicalize_folds(const std::vector<int>& folds) {
    std::vector<int> relabel(folds.size(), -1);
    std::vector<int> out(folds.size());
    int next = 0;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        const int f = folds[i];
        if (f < 0 || static_cast<std::size_t>(f) >= folds.size())
            throw SchemaError("canonicalize_folds: fold label out of range");
        if (relabel[static_cast<std::size_t>(f)] < 0) relabel[static_cast<std::size_t>(f)] = next++;
        out[i] = relabel[static_cast<std::size_t>(f)];
    }
    return out;
}

std::vector<double> crossfit_residualize(const NumericTable& table, const std::string& target,
                                         const std::vector<std::string>& w_cols,
                                         const std::vector<int>& folds, int n_folds,
                                         const GbrtConfig& config, std::uint64_t master_seed,
                                         const std::string& stream_tag,
                                         CrossfitDiagnostics* diagnostics, int threads) {
    const std::size_t n = table.n_rows;
    if (folds.size() != n) throw SchemaError("crossfit_residualize: fold labels misaligned");

    const NumericTable w = table.select(w_cols);
    const std::vector<double> obs = table.column_values(table.require(target));

    std::vector<double> residuals(n, 0.0);
    std::vector<double> oof_mse(static_cast<std::size_t>(n_folds), 0.0);
    std::vector<std::string> warnings(static_cast<std::size_t>(n_folds));

    parallel_for(static_cast<std::size_t>(n_folds), threads, [&](std::size_t f) {
        NumericTable train_w;
        train_w.names = w.names;
        std::vector<double> train_y;
        std::vector<std::size_t> holdout;
        for (std::size_t r = 0; r < n; ++r) {
            if (folds[r] == static_cast<int>(f)) {
                holdout.push_back(r);
            } else {
                train_w.data.insert(train_w.data.end(), w.row(r), w.row(r) + w.n_cols());
                train_y.push_back(obs[r]);
            }
        }
        train_w.n_rows = train_y.size();
        if (train_y.empty() || holdout.empty())
            throw DataError("crossfit_residualize: empty fold");

        if (stats::variance(train_y) == 0.0)
            warnings[f] = "fold " + std::to_string(f) + ": constant training target for " +
                          stream_tag + "; residuals are observed minus that constant";

        const auto model = GradientBoostedEnsemble::fit(
            train_w, train_y, config, derive_seed(master_seed, "nuisance", f, stream_tag));

        double mse = 0.0;
        for (const std::size_t r : holdout) {
            const double pred = model.predict({w.row(r), w.n_cols()});
            residuals[r] = obs[r] - pred;
            mse += residuals[r] * residuals[r];
        }
        oof_mse[f] = mse / static_cast<double>(holdout.size());
    });

    if (diagnostics) {
        diagnostics->oof_mse = oof_mse;
        for (auto& msg : warnings)
            if (!msg.empty()) diagnostics->warnings.push_back(std::move(msg));
    }
    return residuals;
}

DmlData build_dml_data(const Panel& panel) {
    DmlData data;
    data.outcome_col = "dropout_next_sem";
    data.treatment_col = "strikes_lag2";
    data.interaction_col = "interaction_term";
    data.nuisance_cols = dml_nuisance_columns();

    std::vector<std::string> cols = {data.outcome_col, data.treatment_col, data.interaction_col};
    for (const auto& c : data.nuisance_cols)
        if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);

    ModelFrame frame = build_model_frame(panel, cols);
    data.table = std::move(frame.table);
    data.panel_rows = std::move(frame.panel_rows);
    return data;
}

namespace {

ParamEstimate param_from(double estimate, double se, double confidence) {
    ParamEstimate p;
    p.estimate = estimate;
    p.se = se;
    p.z = se > 0.0 ? estimate / se : 0.0;
    p.p_value = se > 0.0 ? stats::two_sided_p(p.z) : 1.0;
    const double q = stats::normal_quantile(0.5 + confidence / 2.0);
    p.ci_low = estimate - q * se;
    p.ci_high = estimate + q * se;
    return p;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = stats::mean(a);
    const double mb = stats::mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 1.0;
    return sab / std::sqrt(saa * sbb);
}

} // namespace

DmlEstimate dml_fit_data(const DmlData& data, const DmlConfig& config, ResidualSet* residuals) {
    const std::size_t n = data.table.n_rows;
    if (config.folds < 2) throw DataError("dml_fit: need at least 2 folds");
    if (n < static_cast<std::size_t>(config.folds) || n < 10)
        throw DataError("dml_fit: too few complete rows (" + std::to_string(n) + ")");
    if (!(config.confidence > 0.0 && config.confidence < 1.0))
        throw DataError("dml_fit: confidence level must lie in (0,1)");

    const std::vector<int> folds =
        canonicalize_folds(assign_folds(n, config.folds, config.seed));

    DmlEstimate est;
    est.folds = config.folds;
    est.seed = config.seed;
    est.confidence = config.confidence;
    est.n_rows = n;

    const auto y_res = crossfit_residualize(data.table, data.outcome_col, data.nuisance_cols,
                                            folds, config.folds, config.nuisance, config.seed,
                                            "outcome", &est.outcome_diag, config.threads);
    const auto t_res = crossfit_residualize(data.table, data.treatment_col, data.nuisance_cols,
                                            folds, config.folds, config.nuisance, config.seed,
                                            "treatment", &est.treatment_diag, config.threads);
    const auto tx_res = crossfit_residualize(data.table, data.interaction_col, data.nuisance_cols,
                                             folds, config.folds, config.nuisance, config.seed,
                                             "interaction", &est.interaction_diag, config.threads);

    if (std::abs(correlation(t_res, tx_res)) > 0.999)
        throw NumericError(
            "dml_fit: residualized treatment and interaction are collinear "
            "(|corr| > 0.999); inspect whether inflation_at_entry varies across cohorts");

    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        X(static_cast<Eigen::Index>(r), 0) = 1.0;
        X(static_cast<Eigen::Index>(r), 1) = t_res[r];
        X(static_cast<Eigen::Index>(r), 2) = tx_res[r];
        yv[static_cast<Eigen::Index>(r)] = y_res[r];
    }
    const stats::OlsFit ols = stats::ols_hc1(X, yv);

    est.alpha = param_from(ols.beta[0], std::sqrt(ols.cov(0, 0)), config.confidence);
    est.tau = param_from(ols.beta[1], std::sqrt(ols.cov(1, 1)), config.confidence);
    est.gamma = param_from(ols.beta[2], std::sqrt(ols.cov(2, 2)), config.confidence);

    if (residuals) {
        residuals->panel_rows = data.panel_rows;
        residuals->folds = folds;
        residuals->y_res = y_res;
        residuals->t_res = t_res;
        residuals->tx_res = tx_res;
    }
    return est;
}

DmlEstimate dml_fit(const Panel& panel, const DmlConfig& config, ResidualSet* residuals) {
    return dml_fit_data(build_dml_data(panel), config, residuals);
}

void write_residuals_csv(const std::filesystem::path& path, const Panel& panel,
                         const ResidualSet& residuals) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(residuals.panel_rows.size());
    for (std::size_t i = 0; i < residuals.panel_rows.size(); ++i) {
        const auto& row = panel.rows[residuals.panel_rows[i]];
        rows.push_back({row.student_id, std::to_string(row.semester_number),
                        std::to_string(residuals.folds[i]), format_double(residuals.y_res[i]),
                        format_double(residuals.t_res[i]), format_double(residuals.tx_res[i])});
    }
    write_csv(path, {"student_id", "semester_number", "fold", "y_residual", "t_residual",
                     "tx_residual"},
              rows);
}

} // namespace paneldml
