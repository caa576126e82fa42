#include "geppml/ppml.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "geppml/error.hpp"

namespace geppml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Used observations and their compact FE level indices.
struct Design {
    std::vector<std::size_t> rows;
    struct Dim {
        std::vector<int> level;  // per used row, compact
        int n_levels = 0;
        std::vector<int> original;  // compact -> original level
    };
    std::vector<Dim> dims;

    Design(const PpmlProblem& p, const std::vector<bool>& used) {
        for (std::size_t i = 0; i < used.size(); ++i) {
            if (used[i]) rows.push_back(i);
        }
        for (const auto& fe : p.fes) {
            Dim d;
            std::vector<int> map(fe.n_levels, -1);
            d.level.reserve(rows.size());
            for (auto r : rows) {
                int g = fe.level_of[r];
                if (map[g] < 0) {
                    map[g] = d.n_levels++;
                    d.original.push_back(g);
                }
                d.level.push_back(map[g]);
            }
            dims.push_back(std::move(d));
        }
    }
};

// Weighted alternating projections onto the orthogonal complement of the FE
// dummies.
class Demeaner {
public:
    Demeaner(const Design& design, const std::vector<double>& w, double tol, int max_iter)
        : design_(design), w_(w), tol_(tol), max_iter_(max_iter) {
        for (const auto& d : design.dims) {
            std::vector<double> inv(d.n_levels, 0.0);
            for (std::size_t r = 0; r < w.size(); ++r) inv[d.level[r]] += w[r];
            for (auto& s : inv) s = 1.0 / s;
            inv_wsum_.push_back(std::move(inv));
        }
    }

    // Returns false if the tolerance was not met within max_iter sweeps.
    bool operator()(std::vector<double>& v) const {
        const auto& dims = design_.dims;
        if (dims.empty()) return true;
        double scale = 0.0;
        for (double x : v) scale = std::max(scale, std::abs(x));
        if (scale == 0.0) return true;
        std::vector<double> acc;
        for (int sweep = 0; sweep < max_iter_; ++sweep) {
            double moved = 0.0;
            for (std::size_t d = 0; d < dims.size(); ++d) {
                const auto& lev = dims[d].level;
                acc.assign(dims[d].n_levels, 0.0);
                for (std::size_t r = 0; r < v.size(); ++r) acc[lev[r]] += w_[r] * v[r];
                for (int g = 0; g < dims[d].n_levels; ++g) {
                    acc[g] *= inv_wsum_[d][g];
                    moved = std::max(moved, std::abs(acc[g]));
                }
                for (std::size_t r = 0; r < v.size(); ++r) v[r] -= acc[lev[r]];
            }
            if (dims.size() == 1 || moved <= tol_ * scale) return true;
        }
        return false;
    }

private:
    const Design& design_;
    const std::vector<double>& w_;
    std::vector<std::vector<double>> inv_wsum_;
    double tol_;
    int max_iter_;
};

double weight_of(const PpmlProblem& p, std::size_t i) {
    return p.weights.empty() ? 1.0 : p.weights[i];
}

double offset_of(const PpmlProblem& p, std::size_t i) {
    return p.offset.empty() ? 0.0 : p.offset[i];
}

void validate(const PpmlProblem& p) {
    const std::size_t n = p.y.size();
    if (n == 0) throw EstimationError(EstimationError::Kind::Degenerate, "no observations");
    for (double y : p.y) {
        if (!(y >= 0.0) || !std::isfinite(y)) {
            throw EstimationError(EstimationError::Kind::Degenerate,
                                  "responses must be finite and nonnegative");
        }
    }
    for (const auto& c : p.covariates) {
        if (c.values.size() != n) {
            throw EstimationError(EstimationError::Kind::Degenerate,
                                  "covariate '" + c.name + "' has wrong length");
        }
        for (double x : c.values) {
            if (!std::isfinite(x)) {
                throw EstimationError(EstimationError::Kind::Degenerate,
                                      "covariate '" + c.name + "' has non-finite values");
            }
        }
    }
    for (const auto& fe : p.fes) {
        if (fe.level_of.size() != n) {
            throw EstimationError(EstimationError::Kind::Degenerate,
                                  "fixed effect '" + fe.name + "' has wrong length");
        }
        for (int g : fe.level_of) {
            if (g < 0 || g >= fe.n_levels) {
                throw EstimationError(EstimationError::Kind::Degenerate,
                                      "fixed effect '" + fe.name + "' has out-of-range level");
            }
        }
    }
    if (!p.offset.empty() && p.offset.size() != n) {
        throw EstimationError(EstimationError::Kind::Degenerate, "offset has wrong length");
    }
    for (double o : p.offset) {
        if (!std::isfinite(o)) {
            throw EstimationError(EstimationError::Kind::Degenerate, "offset has non-finite values");
        }
    }
    if (!p.weights.empty() && p.weights.size() != n) {
        throw EstimationError(EstimationError::Kind::Degenerate, "weights have wrong length");
    }
    for (double w : p.weights) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw EstimationError(EstimationError::Kind::Degenerate, "weights must be positive");
        }
    }
    if (!p.cluster.empty() && p.cluster.size() != n) {
        throw EstimationError(EstimationError::Kind::Degenerate, "cluster ids have wrong length");
    }
}

// Drops observations of FE levels whose responses are all zero, repeating
// until no such level remains.
std::vector<bool> drop_separated(const PpmlProblem& p, std::vector<std::string>& warnings) {
    std::vector<bool> used(p.y.size(), true);
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& fe : p.fes) {
            std::vector<double> ysum(fe.n_levels, 0.0);
            std::vector<int> count(fe.n_levels, 0);
            for (std::size_t i = 0; i < p.y.size(); ++i) {
                if (!used[i]) continue;
                ysum[fe.level_of[i]] += p.y[i];
                ++count[fe.level_of[i]];
            }
            std::size_t levels = 0, obs = 0;
            std::string example;
            for (int g = 0; g < fe.n_levels; ++g) {
                if (count[g] > 0 && ysum[g] == 0.0) {
                    ++levels;
                    obs += count[g];
                    if (example.empty()) {
                        example = fe.labels.empty() ? std::to_string(g) : fe.labels[g];
                    }
                }
            }
            if (levels == 0) continue;
            for (std::size_t i = 0; i < p.y.size(); ++i) {
                if (used[i] && ysum[fe.level_of[i]] == 0.0) used[i] = false;
            }
            warnings.push_back("dropped " + std::to_string(levels) + " level(s) of '" + fe.name +
                               "' with all-zero responses (" + std::to_string(obs) +
                               " observations; e.g. " + example + ")");
            changed = true;
        }
    }
    if (p.fes.empty()) {
        double total = 0.0;
        for (double y : p.y) total += y;
        if (total == 0.0) {
            throw EstimationError(EstimationError::Kind::Separation, "all responses are zero");
        }
    }
    return used;
}

double deviance(const PpmlProblem& p, const std::vector<std::size_t>& rows,
                const std::vector<double>& mu) {
    double dev = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        double y = p.y[rows[r]];
        double term = (y > 0.0 ? y * std::log(y / mu[r]) : 0.0) - (y - mu[r]);
        dev += weight_of(p, rows[r]) * term;
    }
    return 2.0 * dev;
}

struct Scores {
    double covariate = 0.0;
    double fe = 0.0;
    double max() const { return std::max(covariate, fe); }
};

Scores scores(const PpmlProblem& p, const Design& design, const std::vector<double>& mu) {
    Scores s;
    double total_mu = 0.0;
    for (std::size_t r = 0; r < design.rows.size(); ++r) total_mu += weight_of(p, design.rows[r]) * mu[r];
    for (const auto& c : p.covariates) {
        double g = 0.0;
        for (std::size_t r = 0; r < design.rows.size(); ++r) {
            auto i = design.rows[r];
            g += weight_of(p, i) * c.values[i] * (p.y[i] - mu[r]);
        }
        s.covariate = std::max(s.covariate, std::abs(g) / total_mu);
    }
    for (const auto& d : design.dims) {
        std::vector<double> resid(d.n_levels, 0.0), level_mu(d.n_levels, 0.0);
        for (std::size_t r = 0; r < design.rows.size(); ++r) {
            auto i = design.rows[r];
            resid[d.level[r]] += weight_of(p, i) * (p.y[i] - mu[r]);
            level_mu[d.level[r]] += weight_of(p, i) * mu[r];
        }
        for (int g = 0; g < d.n_levels; ++g) s.fe = std::max(s.fe, std::abs(resid[g]) / level_mu[g]);
    }
    return s;
}

// Demeaned covariate matrix (rows = used observations) at weights w.
Eigen::MatrixXd demeaned_design(const PpmlProblem& p, const Design& design, const Demeaner& demean) {
    const std::size_t n = design.rows.size();
    Eigen::MatrixXd X(n, p.covariates.size());
    std::vector<double> col(n);
    for (std::size_t k = 0; k < p.covariates.size(); ++k) {
        for (std::size_t r = 0; r < n; ++r) col[r] = p.covariates[k].values[design.rows[r]];
        demean(col);
        for (std::size_t r = 0; r < n; ++r) X(r, k) = col[r];
    }
    return X;
}

void check_collinearity(const PpmlProblem& p, const Design& design, const std::vector<double>& w,
                        const Eigen::MatrixXd& Xd, double tol) {
    const std::size_t n = design.rows.size();
    const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(n));
    std::vector<Eigen::VectorXd> basis;
    for (std::size_t k = 0; k < p.covariates.size(); ++k) {
        Eigen::VectorXd raw(n);
        for (std::size_t r = 0; r < n; ++r) raw(r) = p.covariates[k].values[design.rows[r]];
        double raw_norm = (wv.array() * raw.array().square()).sum();
        Eigen::VectorXd v = Xd.col(k);
        for (const auto& b : basis) v -= (wv.array() * v.array() * b.array()).sum() * b;
        double left = (wv.array() * v.array().square()).sum();
        if (raw_norm == 0.0 || left <= tol * raw_norm) {
            throw EstimationError(EstimationError::Kind::Collinearity,
                                  "covariate '" + p.covariates[k].name +
                                      "' is collinear with the fixed effects or earlier covariates");
        }
        basis.push_back(v / std::sqrt(left));
    }
}

}  // namespace

double PpmlFit::coefficient(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (names[k] == name) return beta[k];
    }
    throw InputError("no coefficient named '" + name + "'");
}

double PpmlFit::std_error(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (names[k] == name) return se_clustered.empty() ? kNaN : se_clustered[k];
    }
    throw InputError("no coefficient named '" + name + "'");
}

const FeValues& PpmlFit::fe(const std::string& name) const {
    for (const auto& f : fe_values) {
        if (f.name == name) return f;
    }
    throw InputError("no fixed effect named '" + name + "'");
}

namespace {

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

}  // namespace

PpmlFit fit_ppml(const PpmlProblem& p, const PpmlOptions& opt) {
    validate(p);
    if (p.fes.empty()) {
        // The intercept lives in a constant level pinned to zero.
        PpmlProblem q = p;
        q.fes.push_back(FeSpec{"(intercept)", std::vector<int>(p.y.size(), 0), 1, {}, 0});
        PpmlFit f = fit_ppml(q, opt);
        f.fe_values.clear();
        return f;
    }
    PpmlFit fit;
    fit.used = drop_separated(p, fit.diagnostics.warnings);
    const Design design(p, fit.used);
    const std::size_t n = design.rows.size();
    const std::size_t K = p.covariates.size();
    if (n == 0) throw EstimationError(EstimationError::Kind::Separation, "no observations left after dropping separated levels");
    fit.diagnostics.n_obs = n;
    fit.diagnostics.n_dropped = p.y.size() - n;
    for (const auto& c : p.covariates) fit.names.push_back(c.name);

    std::vector<double> y(n), x_off(n), omega(n);
    double ybar = 0.0, wsum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        auto i = design.rows[r];
        y[r] = p.y[i];
        x_off[r] = offset_of(p, i);
        omega[r] = weight_of(p, i);
        ybar += omega[r] * y[r];
        wsum += omega[r];
    }
    ybar /= wsum;

    std::vector<double> mu(n), eta(n), w(n), z(n), zd(n);
    for (std::size_t r = 0; r < n; ++r) {
        mu[r] = 0.5 * (y[r] + ybar);
        eta[r] = std::log(mu[r]);
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
    double dev = deviance(p, design.rows, mu);
    bool converged = false;
    Scores score;
    double best_score = std::numeric_limits<double>::infinity();
    int stalled = 0;
    for (int iter = 1; iter <= opt.max_iter && !converged; ++iter) {
        for (std::size_t r = 0; r < n; ++r) {
            w[r] = omega[r] * mu[r];
            z[r] = eta[r] - x_off[r] + (y[r] - mu[r]) / mu[r];
        }
        Demeaner demean(design, w, opt.demean_tol, opt.max_demean_iter);
        zd = z;
        demean(zd);
        Eigen::MatrixXd Xd = demeaned_design(p, design, demean);
        if (iter == 1) check_collinearity(p, design, w, Xd, opt.collinear_tol);

        Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(n));
        Eigen::Map<const Eigen::VectorXd> zdv(zd.data(), static_cast<Eigen::Index>(n));
        if (K > 0) {
            Eigen::MatrixXd XtW = Xd.transpose() * wv.asDiagonal();
            Eigen::MatrixXd H = XtW * Xd;
            Eigen::VectorXd rhs = XtW * zdv;
            beta = H.ldlt().solve(rhs);
        }
        Eigen::VectorXd resid = zdv - Xd * beta;

        std::vector<double> eta_new(n), mu_new(n);
        for (std::size_t r = 0; r < n; ++r) {
            eta_new[r] = x_off[r] + z[r] - resid(static_cast<Eigen::Index>(r));
            mu_new[r] = std::exp(eta_new[r]);
        }
        double dev_new = deviance(p, design.rows, mu_new);
        // Step halving guards against overshooting from poor starting values.
        for (int half = 0; half < 30 && (!std::isfinite(dev_new) || dev_new > dev * (1.0 + 1e-10) + 1e-12) && iter > 1; ++half) {
            for (std::size_t r = 0; r < n; ++r) {
                eta_new[r] = 0.5 * (eta_new[r] + eta[r]);
                mu_new[r] = std::exp(eta_new[r]);
            }
            dev_new = deviance(p, design.rows, mu_new);
        }
        double rel_change = std::abs(dev_new - dev) / (std::abs(dev_new) + 0.1);
        eta.swap(eta_new);
        mu.swap(mu_new);
        dev = dev_new;
        fit.diagnostics.iterations = iter;

        score = scores(p, design, mu);
        // Past the FOC requirement, a score that has stopped shrinking is at
        // its floating-point floor.
        stalled = score.max() >= 0.5 * best_score ? stalled + 1 : 0;
        best_score = std::min(best_score, score.max());
        if (score.max() <= opt.foc_tol &&
            (rel_change <= opt.dev_tol || score.max() <= opt.grad_tol || stalled >= 3)) {
            converged = true;
        }
    }
    if (!converged) {
        score = scores(p, design, mu);
        throw EstimationError(EstimationError::Kind::NonConvergence,
                              "PPML did not converge in " + std::to_string(opt.max_iter) +
                                  " iterations (final scaled gradient norm " + sci(score.max()) + ")");
    }

    // Split the fixed-effect part of the linear predictor into per-dimension values.
    std::vector<double> phi(n);
    for (std::size_t r = 0; r < n; ++r) {
        double xb = 0.0;
        for (std::size_t k = 0; k < K; ++k) xb += beta(static_cast<Eigen::Index>(k)) * p.covariates[k].values[design.rows[r]];
        phi[r] = eta[r] - x_off[r] - xb;
    }
    std::vector<std::vector<double>> fe(design.dims.size());
    for (std::size_t d = 0; d < design.dims.size(); ++d) fe[d].assign(design.dims[d].n_levels, 0.0);
    if (!design.dims.empty()) {
        for (std::size_t r = 0; r < n; ++r) w[r] = omega[r] * mu[r];
        double scale = 1.0;
        for (double v : phi) scale = std::max(scale, std::abs(v));
        std::vector<double> resid = phi, acc, inv;
        for (int sweep = 0; sweep < opt.max_demean_iter; ++sweep) {
            double moved = 0.0;
            for (std::size_t d = 0; d < design.dims.size(); ++d) {
                const auto& dim = design.dims[d];
                acc.assign(dim.n_levels, 0.0);
                inv.assign(dim.n_levels, 0.0);
                for (std::size_t r = 0; r < n; ++r) {
                    acc[dim.level[r]] += w[r] * resid[r];
                    inv[dim.level[r]] += w[r];
                }
                for (int g = 0; g < dim.n_levels; ++g) {
                    acc[g] /= inv[g];
                    fe[d][g] += acc[g];
                    moved = std::max(moved, std::abs(acc[g]));
                }
                for (std::size_t r = 0; r < n; ++r) resid[r] -= acc[dim.level[r]];
            }
            if (design.dims.size() == 1 || moved <= 1e-14 * scale) break;
        }
    }

    fit.beta.assign(beta.data(), beta.data() + K);
    for (std::size_t d = 0; d < design.dims.size(); ++d) {
        const auto& spec = p.fes[d];
        FeValues v;
        v.name = spec.name;
        v.labels = spec.labels;
        v.values.assign(spec.n_levels, kNaN);
        v.retained.assign(spec.n_levels, false);
        for (int g = 0; g < design.dims[d].n_levels; ++g) {
            v.values[design.dims[d].original[g]] = fe[d][g];
            v.retained[design.dims[d].original[g]] = true;
        }
        int ref = spec.reference;
        if (ref < 0 || ref >= spec.n_levels || !v.retained[ref]) {
            ref = design.dims[d].original.empty() ? 0 : *std::min_element(design.dims[d].original.begin(), design.dims[d].original.end());
            fit.diagnostics.warnings.push_back("reference level of '" + spec.name + "' not retained; pinned level " +
                                               (spec.labels.empty() ? std::to_string(ref) : spec.labels[ref]) + " instead");
        }
        v.reference = ref;
        double shift = v.values[ref];
        for (int g = 0; g < spec.n_levels; ++g) {
            if (v.retained[g]) v.values[g] -= shift;
        }
        fit.intercept += shift;
        fit.fe_values.push_back(std::move(v));
    }

    // Fitted values from the reported parameters, so that they are exactly
    // what the coefficients and FE values imply.
    fit.fitted.assign(p.y.size(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        auto i = design.rows[r];
        double lin = x_off[r] + fit.intercept;
        for (std::size_t k = 0; k < K; ++k) lin += fit.beta[k] * p.covariates[k].values[i];
        for (std::size_t d = 0; d < design.dims.size(); ++d) lin += fit.fe_values[d].values[p.fes[d].level_of[i]];
        mu[r] = std::exp(lin);
        fit.fitted[i] = mu[r];
    }
    score = scores(p, design, mu);

    auto& diag = fit.diagnostics;
    diag.max_score = score.max();
    diag.deviance = deviance(p, design.rows, mu);
    {
        std::vector<double> mu0(n, ybar);
        diag.null_deviance = deviance(p, design.rows, mu0);
    }
    diag.pseudo_r2 = diag.null_deviance > 0.0 ? 1.0 - diag.deviance / diag.null_deviance : kNaN;
    double ll = 0.0, my = 0.0, mm = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        ll += omega[r] * (y[r] * std::log(mu[r]) - mu[r] - std::lgamma(y[r] + 1.0));
        my += y[r];
        mm += mu[r];
    }
    my /= static_cast<double>(n);
    mm /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        sxy += (y[r] - my) * (mu[r] - mm);
        sxx += (y[r] - my) * (y[r] - my);
        syy += (mu[r] - mm) * (mu[r] - mm);
    }
    diag.squared_correlation = (sxx > 0.0 && syy > 0.0) ? sxy * sxy / (sxx * syy) : kNaN;
    diag.log_likelihood = ll;
    diag.n_params = K;
    for (const auto& d : design.dims) diag.n_params += static_cast<std::size_t>(d.n_levels);
    diag.bic = -2.0 * ll + static_cast<double>(diag.n_params) * std::log(static_cast<double>(n));

    if (!p.cluster.empty() && K > 0) {
        fit.vcov = cluster_vcov(p, fit, p.cluster, opt);
        for (std::size_t k = 0; k < K; ++k) fit.se_clustered.push_back(std::sqrt(fit.vcov[k * K + k]));
    }
    return fit;
}

std::vector<double> cluster_vcov(const PpmlProblem& p, const PpmlFit& fit, std::span<const int> cluster,
                                 const PpmlOptions& opt) {
    if (cluster.size() != p.y.size()) {
        throw EstimationError(EstimationError::Kind::Degenerate, "cluster ids have wrong length");
    }
    const Design design(p, fit.used);
    const std::size_t n = design.rows.size();
    const std::size_t K = p.covariates.size();
    std::vector<double> w(n);
    for (std::size_t r = 0; r < n; ++r) w[r] = weight_of(p, design.rows[r]) * fit.fitted[design.rows[r]];
    Demeaner demean(design, w, opt.demean_tol, opt.max_demean_iter);
    Eigen::MatrixXd Xd = demeaned_design(p, design, demean);

    std::map<int, std::size_t> slot;
    for (auto r : design.rows) slot.emplace(cluster[r], 0);
    if (slot.size() < 2) {
        throw EstimationError(EstimationError::Kind::Degenerate, "clustered errors need at least 2 clusters");
    }
    std::size_t G = 0;
    for (auto& [id, s] : slot) s = G++;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(G), static_cast<Eigen::Index>(K));
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    for (std::size_t r = 0; r < n; ++r) {
        auto i = design.rows[r];
        double u = weight_of(p, i) * (p.y[i] - fit.fitted[i]);
        auto row = Xd.row(static_cast<Eigen::Index>(r));
        S.row(static_cast<Eigen::Index>(slot[cluster[i]])) += u * row;
        H.noalias() += w[r] * row.transpose() * row;
    }
    Eigen::MatrixXd Hinv = H.ldlt().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K)));
    Eigen::MatrixXd V = Hinv * (S.transpose() * S) * Hinv;
    V *= static_cast<double>(G) / static_cast<double>(G - 1);
    std::vector<double> out(K * K);
    for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = 0; b < K; ++b) out[a * K + b] = V(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    return out;
}

std::vector<double> cluster_se(const PpmlProblem& p, const PpmlFit& fit, std::span<const int> cluster,
                               const PpmlOptions& opt) {
    auto V = cluster_vcov(p, fit, cluster, opt);
    const std::size_t K = p.covariates.size();
    std::vector<double> se(K);
    for (std::size_t k = 0; k < K; ++k) se[k] = std::sqrt(V[k * K + k]);
    return se;
}

std::vector<double> robust_se(const PpmlProblem& p, const PpmlFit& fit, const PpmlOptions& opt) {
    std::vector<int> own(p.y.size());
    std::iota(own.begin(), own.end(), 0);
    return cluster_se(p, fit, own, opt);
}

double max_fe_score(const PpmlProblem& p, std::span<const double> fitted, const std::vector<bool>& used) {
    double worst = 0.0;
    for (const auto& fe : p.fes) {
        std::vector<double> resid(fe.n_levels, 0.0), level_mu(fe.n_levels, 0.0);
        for (std::size_t i = 0; i < p.y.size(); ++i) {
            if (!used[i]) continue;
            resid[fe.level_of[i]] += weight_of(p, i) * (p.y[i] - fitted[i]);
            level_mu[fe.level_of[i]] += weight_of(p, i) * fitted[i];
        }
        for (int g = 0; g < fe.n_levels; ++g) {
            if (level_mu[g] > 0.0) worst = std::max(worst, std::abs(resid[g]) / level_mu[g]);
        }
    }
    return worst;
}

double max_covariate_score(const PpmlProblem& p, std::span<const double> fitted, const std::vector<bool>& used) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.y.size(); ++i) {
        if (used[i]) total += weight_of(p, i) * fitted[i];
    }
    double worst = 0.0;
    for (const auto& c : p.covariates) {
        double g = 0.0;
        for (std::size_t i = 0; i < p.y.size(); ++i) {
            if (used[i]) g += weight_of(p, i) * c.values[i] * (p.y[i] - fitted[i]);
        }
        worst = std::max(worst, std::abs(g) / total);
    }
    return worst;
}

double percent_effect(double beta) { return std::expm1(beta) * 100.0; }

double p_value(double beta, double se) {
    if (!(se > 0.0)) return kNaN;
    return std::erfc(std::abs(beta / se) / std::sqrt(2.0));
}

std::string significance_stars(double p) {
    if (!(p == p)) return "";
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.1) return "*";
    return "";
}

}  // namespace geppml
