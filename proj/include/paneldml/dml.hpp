#pragma once

#include "paneldml/panel.hpp"
#include "paneldml/table.hpp"
#include "paneldml/tree.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace paneldml {

struct DmlConfig {
    int folds = 5;
    std::uint64_t seed = 42;
    GbrtConfig nuisance{};
    double confidence = 0.95;
    int threads = 1;
};

/// Seeded random partition into K near-equal folds (sizes differ by <= 1).
std::vector<int> assign_folds(std::size_t n, int k, std::uint64_t seed);

/// Relabels folds by order of first appearance so estimates depend on the
/// partition, not on the labeling.
std::vector<int> canonicalize_folds(const std::vector<int>& folds);

struct CrossfitDiagnostics {
    std::vector<double> oof_mse; // per fold, out-of-fold
    std::vector<std::string> warnings;
};

/// Out-of-fold residuals of `target` on `w_cols`: for each fold, the nuisance
/// learner is trained on the other folds only. Stream derivation is
/// (master seed, fold index, stream_tag).
std::vector<double> crossfit_residualize(const NumericTable& table, const std::string& target,
                                         const std::vector<std::string>& w_cols,
                                         const std::vector<int>& folds, int n_folds,
                                         const GbrtConfig& config, std::uint64_t master_seed,
                                         const std::string& stream_tag,
                                         CrossfitDiagnostics* diagnostics, int threads);

struct ParamEstimate {
    double estimate = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct DmlEstimate {
    ParamEstimate tau;       // treatment main effect
    ParamEstimate gamma;     // treatment x moderator interaction
    ParamEstimate alpha;     // final-stage intercept, diagnostic (expected ~ 0)
    int folds = 0;
    std::uint64_t seed = 0;
    double confidence = 0.95;
    std::size_t n_rows = 0;
    CrossfitDiagnostics outcome_diag, treatment_diag, interaction_diag;
};

struct ResidualSet {
    std::vector<std::size_t> panel_rows;
    std::vector<int> folds;
    std::vector<double> y_res, t_res, tx_res;
};

/// Modeling table for the DML stage: outcome, treatment, interaction and the
/// nuisance controls, restricted to complete rows.
struct DmlData {
    NumericTable table;
    std::vector<std::size_t> panel_rows;
    std::string outcome_col, treatment_col, interaction_col;
    std::vector<std::string> nuisance_cols;
};

DmlData build_dml_data(const Panel& panel);

/// Cross-fitted partialling-out: residualize Y, T and T*X on W, then one
/// joint OLS of the outcome residual on both treatment residuals with an
/// intercept and HC1 standard errors.
DmlEstimate dml_fit_data(const DmlData& data, const DmlConfig& config,
                         ResidualSet* residuals = nullptr);

DmlEstimate dml_fit(const Panel& panel, const DmlConfig& config,
                    ResidualSet* residuals = nullptr);

void write_residuals_csv(const std::filesystem::path& path, const Panel& panel,
                         const ResidualSet& residuals);

} // namespace paneldml
