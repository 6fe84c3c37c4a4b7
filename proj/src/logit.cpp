#include "paneldml/logit.hpp"

#include "paneldml/error.hpp"
#include "paneldml/frame.hpp"
#include "paneldml/stats.hpp"

#include <cmath>
#include <sstream>

namespace paneldml {

namespace {

double log1pexp(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double deviance_at(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
    double nll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) nll += log1pexp(eta[i]) - y[i] * eta[i];
    return 2.0 * nll;
}

void check_full_rank(const DesignMatrix& design) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.X);
    qr.setThreshold(1e-10);
    const auto rank = qr.rank();
    if (rank == design.X.cols()) return;

    // Columns whose pivots fall beyond the numerical rank are the redundant ones.
    std::ostringstream msg;
    msg << "design matrix is rank deficient; collinear columns:";
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index i = rank; i < design.X.cols(); ++i)
        msg << ' ' << design.names[static_cast<std::size_t>(perm[i])];
    throw NumericError(msg.str());
}

} // namespace

LogitFit fit_logit(const DesignMatrix& design, const Eigen::VectorXd& y,
                   const LogitOptions& options) {
    const Eigen::Index n = design.X.rows();
    const Eigen::Index p = design.X.cols();
    if (y.size() != n) throw SchemaError("fit_logit: y length does not match design rows");
    if (n <= p) throw NumericError("fit_logit: need more rows than columns");

    Eigen::Index ones = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw SchemaError("fit_logit: outcome must be 0/1");
        if (y[i] == 1.0) ++ones;
    }
    if (ones == 0 || ones == n)
        throw NumericError("fit_logit: outcome is constant; likelihood is unbounded");

    check_full_rank(design);

    LogitFit fit;
    fit.names = design.names;
    fit.beta = Eigen::VectorXd::Zero(p);

    Eigen::VectorXd eta = design.X * fit.beta;
    double deviance = deviance_at(eta, y);
    fit.deviance_trace.push_back(deviance);

    Eigen::VectorXd prob(n), w(n), z(n);
    Eigen::MatrixXd xtwx(p, p);

    for (int iter = 0; iter < options.max_iter; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pi = 1.0 / (1.0 + std::exp(-eta[i]));
            prob[i] = pi;
            const double wi = std::max(pi * (1.0 - pi), 1e-10);
            w[i] = wi;
            z[i] = eta[i] + (y[i] - pi) / wi;
        }
        xtwx.noalias() = design.X.transpose() * w.asDiagonal() * design.X;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
        if (ldlt.info() != Eigen::Success)
            throw NumericError("fit_logit: weighted normal equations not solvable");
        Eigen::VectorXd beta_new = ldlt.solve(design.X.transpose() * (w.asDiagonal() * z));

        // Step-halving keeps the recorded deviance trace non-increasing.
        double step = 1.0;
        Eigen::VectorXd candidate = beta_new;
        Eigen::VectorXd eta_new = design.X * candidate;
        double dev_new = deviance_at(eta_new, y);
        for (int h = 0; h < 40 && !(dev_new <= deviance + 1e-12); ++h) {
            step *= 0.5;
            candidate = fit.beta + step * (beta_new - fit.beta);
            eta_new = design.X * candidate;
            dev_new = deviance_at(eta_new, y);
        }
        if (!(dev_new <= deviance + 1e-12)) {
            // No improving step exists; treat the current point as converged.
            fit.iterations = iter;
            fit.converged = true;
            break;
        }

        fit.beta = candidate;
        eta = eta_new;
        const double improvement = deviance - dev_new;
        deviance = dev_new;
        fit.deviance_trace.push_back(deviance);
        fit.iterations = iter + 1;

        if (fit.beta.cwiseAbs().maxCoeff() > options.divergence_bound) {
            fit.separation = true;
            fit.converged = false;
            break;
        }
        if (improvement < options.tol) {
            fit.converged = true;
            break;
        }
    }

    // A deviance at the numerical floor means every observation is fitted
    // perfectly, which a finite logit coefficient cannot do: separation.
    if (deviance < 1e-6) {
        fit.separation = true;
        fit.converged = false;
    }

    fit.deviance = deviance;

    for (Eigen::Index i = 0; i < n; ++i) {
        const double pi = 1.0 / (1.0 + std::exp(-eta[i]));
        w[i] = std::max(pi * (1.0 - pi), 1e-10);
    }
    xtwx.noalias() = design.X.transpose() * w.asDiagonal() * design.X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
    fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    return fit;
}

MarginalEffect average_marginal_effect(const LogitFit& fit, const DesignMatrix& design,
                                       const std::string& variable, double level) {
    if (!fit.converged)
        throw NumericError("average_marginal_effect: fit did not converge (separation=" +
                           std::string(fit.separation ? "yes" : "no") + ", iterations=" +
                           std::to_string(fit.iterations) + ")");
    const int v = design.column(variable);
    if (v < 0) throw SchemaError("average_marginal_effect: no design column '" + variable + "'");

    const Eigen::Index n = design.X.rows();
    const Eigen::Index p = design.X.cols();
    const Eigen::VectorXd eta = design.X * fit.beta;

    // AME = mean_i beta_v * p_i (1 - p_i); gradient by the chain rule.
    const double beta_v = fit.beta[v];
    double ame = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pi = 1.0 / (1.0 + std::exp(-eta[i]));
        const double wi = pi * (1.0 - pi);
        ame += beta_v * wi;
        grad[v] += wi;
        grad += beta_v * wi * (1.0 - 2.0 * pi) * design.X.row(i).transpose();
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    ame *= inv_n;
    grad *= inv_n;

    MarginalEffect effect;
    effect.variable = variable;
    effect.ame = ame;
    effect.se = std::sqrt(std::max(0.0, double(grad.transpose() * fit.covariance * grad)));
    effect.z = effect.se > 0.0 ? ame / effect.se : 0.0;
    effect.p_value = effect.se > 0.0 ? stats::two_sided_p(effect.z) : 1.0;
    const double q = stats::normal_quantile(0.5 + level / 2.0);
    effect.ci_low = ame - q * effect.se;
    effect.ci_high = ame + q * effect.se;
    return effect;
}

DesignMatrix build_logit_design(const Panel& panel, const std::vector<std::string>& focal,
                                const std::vector<std::string>& complete_required) {
    std::vector<std::string> frame_cols = {"dropout_next_sem"};
    for (const auto& c : complete_required)
        if (std::find(frame_cols.begin(), frame_cols.end(), c) == frame_cols.end())
            frame_cols.push_back(c);
    for (const auto& c : focal)
        if (std::find(frame_cols.begin(), frame_cols.end(), c) == frame_cols.end())
            frame_cols.push_back(c);
    for (const auto& c : control_columns())
        if (std::find(frame_cols.begin(), frame_cols.end(), c) == frame_cols.end())
            frame_cols.push_back(c);

    const ModelFrame frame = build_model_frame(panel, frame_cols);

    DesignMatrix design;
    design.names.push_back("(intercept)");
    for (const auto& c : focal) design.names.push_back(c);
    for (const auto& c : control_columns()) design.names.push_back(c);

    design.X.resize(static_cast<Eigen::Index>(frame.table.n_rows),
                    static_cast<Eigen::Index>(design.names.size()));
    for (std::size_t r = 0; r < frame.table.n_rows; ++r) {
        design.X(static_cast<Eigen::Index>(r), 0) = 1.0;
        for (std::size_t j = 1; j < design.names.size(); ++j)
            design.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                frame.table.at(r, frame.table.require(design.names[j]));
    }
    design.row_ids = frame.panel_rows;
    return design;
}

Table1Report fit_lag_profile(const Panel& panel, const LogitOptions& options) {
    static const std::vector<std::string> all_lags = {"strikes_lag1", "strikes_lag2",
                                                      "strikes_lag3"};
    Table1Report report;
    for (int lag = 1; lag <= 3; ++lag) {
        LagProfileRow row;
        row.lag = lag;
        const std::string lag_col = "strikes_lag" + std::to_string(lag);
        try {
            // One common sample: rows where all three lags are present.
            const DesignMatrix design = build_logit_design(panel, {lag_col}, all_lags);
            Eigen::VectorXd y(design.X.rows());
            for (std::size_t r = 0; r < design.row_ids.size(); ++r)
                y[static_cast<Eigen::Index>(r)] =
                    static_cast<double>(panel.rows[design.row_ids[r]].dropout_next_sem);
            const LogitFit fit = fit_logit(design, y, options);
            row.effect = average_marginal_effect(fit, design, lag_col);
            row.n_rows = design.row_ids.size();
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace paneldml
