#pragma once

#include <span>
#include <string>
#include <vector>

namespace geppml {

/// One categorical fixed-effect dimension.
struct FeSpec {
    std::string name;
    /// Level index of every observation, in [0, n_levels).
    std::vector<int> level_of;
    int n_levels = 0;
    /// Optional level labels (for reports); empty or size n_levels.
    std::vector<std::string> labels;
    /// Level pinned to 0 after estimation. Falls back to the first retained
    /// level if this one is dropped.
    int reference = 0;
};

struct Covariate {
    std::string name;
    std::vector<double> values;
};

/// Everything fit_ppml needs. Optional vectors are empty when unused.
struct PpmlProblem {
    std::vector<double> y;
    std::vector<Covariate> covariates;
    std::vector<FeSpec> fes;
    std::vector<double> offset;   // log-scale, added to the linear predictor
    std::vector<double> weights;  // prior observation weights
    std::vector<int> cluster;     // cluster id per observation (for SEs)
};

struct PpmlOptions {
    int max_iter = 100;
    /// Relative deviance change |dev - dev_old| / (|dev| + 0.1).
    double dev_tol = 1e-9;
    /// Scaled score max-norm below which the fit stops outright.
    double grad_tol = 1e-10;
    /// Required first-order-condition accuracy of any accepted fit.
    double foc_tol = 1e-8;
    /// Relative change criterion of the alternating-projection demeaning.
    double demean_tol = 1e-10;
    int max_demean_iter = 100000;
    /// Collinearity threshold on the share of a column's weighted variation
    /// left after partialling out FEs and earlier columns.
    double collinear_tol = 1e-9;
};

struct FeValues {
    std::string name;
    std::vector<double> values;  // NaN for levels not retained
    std::vector<bool> retained;
    std::vector<std::string> labels;
    int reference = 0;
};

struct PpmlDiagnostics {
    std::size_t n_obs = 0;       // observations used
    std::size_t n_dropped = 0;   // dropped for separation
    int iterations = 0;
    double deviance = 0.0;
    double null_deviance = 0.0;
    double log_likelihood = 0.0;
    double squared_correlation = 0.0;
    double pseudo_r2 = 0.0;
    double bic = 0.0;
    std::size_t n_params = 0;
    /// Final scaled score max-norm over covariates and FE levels.
    double max_score = 0.0;
    std::vector<std::string> warnings;
};

/// Result of a PPML fit. The linear predictor of a used observation is
/// offset + sum_k beta_k x_k + intercept + sum_d fe_d[level].
struct PpmlFit {
    std::vector<std::string> names;
    std::vector<double> beta;
    std::vector<double> se_clustered;  // empty when no cluster ids were given
    std::vector<double> vcov;          // K*K clustered covariance (row-major)
    double intercept = 0.0;
    std::vector<FeValues> fe_values;
    std::vector<double> fitted;  // per input observation; 0 where not used
    std::vector<bool> used;
    PpmlDiagnostics diagnostics;

    double coefficient(const std::string& name) const;
    double std_error(const std::string& name) const;
    const FeValues& fe(const std::string& name) const;
};

/// Poisson pseudo-maximum-likelihood with an arbitrary number of FE
/// dimensions, solved by IRLS whose weighted least-squares step partials out
/// the fixed effects by alternating weighted demeaning.
///
/// Levels whose observations are all zero are dropped (with a warning) before
/// estimation. Throws EstimationError on collinearity or non-convergence.
PpmlFit fit_ppml(const PpmlProblem& problem, const PpmlOptions& options = {});

/// Cluster-robust sandwich covariance of the covariate coefficients, with the
/// G/(G-1) small-sample factor. Needs at least two clusters among used
/// observations. Returns K*K row-major.
std::vector<double> cluster_vcov(const PpmlProblem& problem, const PpmlFit& fit,
                                 std::span<const int> cluster, const PpmlOptions& options = {});

/// Square roots of the diagonal of cluster_vcov.
std::vector<double> cluster_se(const PpmlProblem& problem, const PpmlFit& fit,
                               std::span<const int> cluster, const PpmlOptions& options = {});

/// Heteroskedasticity-robust errors (each observation its own cluster).
std::vector<double> robust_se(const PpmlProblem& problem, const PpmlFit& fit,
                              const PpmlOptions& options = {});

/// Largest |sum_{obs in g} w (y - mu)| / sum_{obs in g} w mu over every level
/// g of every FE dimension of `problem`, evaluated at `fitted`.
double max_fe_score(const PpmlProblem& problem, std::span<const double> fitted,
                    const std::vector<bool>& used);

/// Largest |sum w x_k (y - mu)| / sum w mu over covariates.
double max_covariate_score(const PpmlProblem& problem, std::span<const double> fitted,
                           const std::vector<bool>& used);

/// (exp(beta) - 1) * 100: percentage change in trade implied by a log-scale
/// coefficient.
double percent_effect(double beta);

/// Two-sided normal p-value of beta / se.
double p_value(double beta, double se);

/// "***" for p < 0.01, "**" for p < 0.05, "*" for p < 0.1, else "".
std::string significance_stars(double p);

}  // namespace geppml
