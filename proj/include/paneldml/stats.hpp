#pragma once

#include <Eigen/Dense>
#include <vector>

namespace paneldml::stats {

/// Standard normal CDF.
double normal_cdf(double z);

/// Inverse standard normal CDF (Acklam's rational approximation with one
/// Halley refinement; |relative error| < 1e-15 over (0,1)).
double normal_quantile(double p);

/// Two-sided p-value for a standard-normal test statistic.
double two_sided_p(double z);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v); // sample variance, n-1
double stddev(const std::vector<double>& v);

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov; // HC1 heteroskedasticity-robust covariance
    Eigen::VectorXd residuals;
    std::size_t n = 0;
    std::size_t k = 0;
};

/// OLS with HC1 robust covariance. X must have full column rank.
OlsFit ols_hc1(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Kolmogorov-Smirnov distance between a sample and Uniform(0,1).
double ks_uniform(std::vector<double> sample);

/// Rank-based AUC with midranks for ties. labels must contain both classes.
double auc_rank(const std::vector<double>& scores, const std::vector<int>& labels);

} // namespace paneldml::stats
