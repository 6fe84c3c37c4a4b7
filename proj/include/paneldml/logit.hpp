#pragma once

#include "paneldml/panel.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace paneldml {

/// Design matrix with an intercept column first and a name per column.
struct DesignMatrix {
    Eigen::MatrixXd X;
    std::vector<std::string> names;
    std::vector<std::size_t> row_ids; // back-reference into the source panel

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }
};

struct LogitFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance; // inverse observed information at the optimum
    double deviance = 0.0;
    int iterations = 0;
    bool converged = false;
    bool separation = false;
    std::vector<double> deviance_trace;
    std::vector<std::string> names;
};

struct LogitOptions {
    double tol = 1e-8;
    int max_iter = 100;
    double divergence_bound = 30.0; // |beta_j| beyond this flags separation
};

/// Logistic regression by iteratively reweighted least squares, with
/// step-halving so the recorded deviance trace never increases.
LogitFit fit_logit(const DesignMatrix& design, const Eigen::VectorXd& y,
                   const LogitOptions& options = {});

struct MarginalEffect {
    std::string variable;
    double ame = 0.0; // probability units, analytic derivative for continuous treatments
    double se = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

/// Average marginal effect of a design column with a delta-method standard
/// error. Refuses to run on a non-converged fit.
MarginalEffect average_marginal_effect(const LogitFit& fit, const DesignMatrix& design,
                                       const std::string& variable, double level = 0.95);

struct LagProfileRow {
    int lag = 0;
    bool ok = false;
    std::string error;
    MarginalEffect effect;
    std::size_t n_rows = 0;
};

struct Table1Report {
    std::vector<LagProfileRow> rows; // lags 1..3
};

/// One logit per lag (lag + controls) over the rows where all three lags are
/// present; per-lag failures are recorded without aborting the other lags.
Table1Report fit_lag_profile(const Panel& panel, const LogitOptions& options = {});

/// Design matrix [intercept, focal columns..., controls...] over complete rows.
DesignMatrix build_logit_design(const Panel& panel, const std::vector<std::string>& focal,
                                const std::vector<std::string>& complete_required);

} // namespace paneldml
