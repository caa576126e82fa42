#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "geppml/panel.hpp"
#include "geppml/ppml.hpp"
#include "geppml/scenario.hpp"
#include "geppml/trade_costs.hpp"

namespace geppml {

struct GeConfig {
    double sigma = 7.0;
    double price_tol = 1e-3;
    double sd_tol = 1e-3;
    int max_outer_iter = 100;
    /// Weight on the new price in each outer step; 1 is undamped.
    double damping = 0.5;
    /// Two-way fits are cheap, so they run to near machine precision.
    PpmlOptions ppml = tight_ppml();

    static PpmlOptions tight_ppml() {
        PpmlOptions o;
        o.dev_tol = 1e-14;
        o.grad_tol = 1e-11;
        o.demean_tol = 1e-13;
        return o;
    }

    void validate() const;
};

struct GravityCell {
    std::size_t exporter = 0;
    std::size_t importer = 0;
};

/// The evaluation-year cross-section the counterfactual is solved on.
/// Every off-diagonal pair is a cell; diagonal cells only when internal
/// trade is recorded in that year.
struct GeBaseline {
    CountryRegistry countries;
    std::size_t reference = 0;
    int year = 0;
    std::vector<GravityCell> cells;
    std::vector<double> flow;      // observed, 0 where the pair is missing
    std::vector<double> log_cost;  // log t^(1-sigma)
    std::vector<int> fta;          // baseline indicator
    double beta = 0.0;             // FTA coefficient held fixed

    std::size_t n_countries() const noexcept { return countries.size(); }
    std::vector<int> indicator(const FtaMatrix& m) const;
};

GeBaseline make_ge_baseline(const IntervalPanel& panel, const CostMatrix& costs, double beta, int year,
                            const CountryCode& reference);

/// PPML of `y` on exporter and importer effects only, with the trade-cost
/// offset log t^(1-sigma) + beta * fta held fixed. The reference country's
/// importer effect is pinned to zero.
PpmlFit fit_constrained(const GeBaseline& base, std::span<const double> y, std::span<const int> fta,
                        const PpmlOptions& options = {});

/// Inward (P) and outward (Pi) resistances, as (sigma-1) powers and levels.
struct Resistances {
    std::vector<double> imr_pow;  // P_j^(sigma-1)
    std::vector<double> omr_pow;  // Pi_i^(sigma-1)
    std::vector<double> imr;
    std::vector<double> omr;
};

/// Maps the constrained fit's fixed effects to resistances normalized so
/// that P_reference = 1 and X_ij = Y_i E_j / Y * tau_ij * Pi_i^(s-1) P_j^(s-1)
/// reproduces the fitted flows.
Resistances recover_mr(const PpmlFit& fit, std::span<const double> output,
                       std::span<const double> expenditure, std::size_t reference, double sigma,
                       const CountryRegistry& countries);

struct EconomyState {
    std::vector<double> output;       // Y_i
    std::vector<double> expenditure;  // E_j
    std::vector<double> price;        // p_i, baseline 1
    Resistances mr;
    double world_output = 0.0;
    std::vector<double> flows;  // fitted, per cell
};

struct ConditionalResult {
    EconomyState baseline;
    EconomyState counterfactual;
    PpmlFit baseline_fit;
    PpmlFit counterfactual_fit;
    /// 100 * relative change of international exports per country.
    std::vector<double> export_change_pct;
};

/// Counterfactual with output and expenditure held at baseline.
ConditionalResult conditional_ge(const GeBaseline& base, const FtaMatrix& counterfactual,
                                 const GeConfig& config);

struct TraceRow {
    int iteration = 0;
    double d = 0.0;                 // |max(s)|, s = price change minus previous
    double sd = 0.0;                // sample standard deviation of s
    double max_price_change = 0.0;  // max |s|
    double decomposition_error = 0.0;
    double market_clearing_error = 0.0;
};

struct GeOutcomeRow {
    CountryCode country;
    double pct_trade_conditional = 0.0;
    double pct_trade_full = 0.0;
    double pct_rgdp = 0.0;
    double pct_imr = 0.0;
    double pct_omr = 0.0;
    double pct_prices = 0.0;
};

struct GeOutcome {
    std::vector<GeOutcomeRow> rows;
    std::vector<TraceRow> trace;
    int iterations = 0;
    double final_d = 0.0;
    double final_sd = 0.0;
    double sigma = 0.0;
};

/// Everything a full-endowment run produces, kept for reporting and for
/// re-verification of the stored artifacts.
struct GeSolution {
    ConditionalResult conditional;
    EconomyState full;
    PpmlFit full_fit;
    std::vector<double> full_dependent;  // response the final fit was run on
    std::vector<double> endowment;       // q_i = Y_i at baseline prices
    std::vector<double> phi;             // E_j / Y_j at baseline
    std::vector<int> fta_baseline;
    std::vector<int> fta_counterfactual;
    GeOutcome outcome;
};

/// Raised when the outer loop stops without meeting the convergence test.
/// Carries the trace so it can still be written out.
class GeConvergenceError : public std::runtime_error {
public:
    GeConvergenceError(const std::string& what, std::vector<TraceRow> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<TraceRow>& trace() const noexcept { return trace_; }

private:
    std::vector<TraceRow> trace_;
};

/// Full-endowment counterfactual: repeated constrained estimation with
/// factory-gate prices, output and expenditure updated until the change in
/// the price-change vector satisfies d <= price_tol and sd <= sd_tol.
/// Expenditure follows E_j = phi_j Y_j, rescaled so world expenditure equals
/// world output. Also runs the conditional solution for the outcome table.
GeSolution full_endowment_ge(const GeBaseline& base, const FtaMatrix& counterfactual,
                             const GeConfig& config);

/// Scales a positive matrix on `cells` until its row sums equal `output` and
/// column sums equal `expenditure` (which must have equal totals).
std::vector<double> rescale_to_margins(const GeBaseline& base, std::vector<double> seed,
                                       std::span<const double> output,
                                       std::span<const double> expenditure);

/// Largest relative gap between fitted flows and the structural
/// recomposition Y_i E_j / Y tau_ij Pi_i^(s-1) P_j^(s-1).
double decomposition_error(const GeBaseline& base, std::span<const int> fta, const EconomyState& state);

/// Largest |sum_j X_ij - Y_i| / Y_i.
double market_clearing_error(const GeBaseline& base, std::span<const double> flows,
                             std::span<const double> output);

/// International exports per country.
std::vector<double> international_exports(const GeBaseline& base, std::span<const double> flows);

}  // namespace geppml
