#include "geppml/ge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geppml/error.hpp"

namespace geppml {

void GeConfig::validate() const {
    if (!(sigma > 1.0) || !std::isfinite(sigma)) throw InputError("sigma must exceed 1");
    if (!(price_tol > 0.0)) throw InputError("price tolerance must be positive");
    if (!(sd_tol > 0.0)) throw InputError("sd tolerance must be positive");
    if (max_outer_iter < 1) throw InputError("max_outer_iter must be at least 1");
    if (!(damping > 0.0 && damping <= 1.0)) throw InputError("damping must be in (0, 1]");
}

std::vector<int> GeBaseline::indicator(const FtaMatrix& m) const {
    if (!(m.countries == countries)) throw InputError("FTA matrix registry does not match the baseline");
    std::vector<int> out;
    out.reserve(cells.size());
    for (const auto& c : cells) out.push_back(m.at(c.exporter, c.importer));
    return out;
}

GeBaseline make_ge_baseline(const IntervalPanel& panel, const CostMatrix& costs, double beta, int year,
                            const CountryCode& reference) {
    if (!(panel.countries == costs.countries)) throw InputError("cost matrix countries do not match the panel");
    if (!panel.has_year(year)) throw InputError("evaluation year " + std::to_string(year) + " is not in the panel");
    costs.validate();
    const std::size_t n = panel.n_countries();
    GeBaseline b;
    b.countries = panel.countries;
    b.reference = panel.countries.index_of(reference);
    b.year = year;
    b.beta = beta;

    std::vector<double> observed(n * n, 0.0);
    std::vector<bool> intra(n, false);
    for (const auto& o : panel.cross_section(year)) {
        observed[o.exporter * n + o.importer] = o.flow;
        if (o.intra_national()) intra[o.exporter] = true;
    }
    auto fta = fta_matrix(panel, year);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                if (!intra[i]) continue;
                if (!costs.has(i, i)) {
                    throw InputError("no internal trade cost for " + panel.countries[i].str() +
                                     " although internal trade is recorded");
                }
            }
            b.cells.push_back({i, j});
            b.flow.push_back(observed[i * n + j]);
            b.log_cost.push_back(std::log(costs.at(i, j)));
            b.fta.push_back(fta.at(i, j));
        }
    }
    std::vector<double> ex(n, 0.0), im(n, 0.0);
    for (std::size_t k = 0; k < b.cells.size(); ++k) {
        ex[b.cells[k].exporter] += b.flow[k];
        im[b.cells[k].importer] += b.flow[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(ex[i] > 0.0)) throw InputError(panel.countries[i].str() + " has no trade flows out in " + std::to_string(year));
        if (!(im[i] > 0.0)) throw InputError(panel.countries[i].str() + " has no trade flows in during " + std::to_string(year));
    }
    return b;
}

PpmlFit fit_constrained(const GeBaseline& base, std::span<const double> y, std::span<const int> fta,
                        const PpmlOptions& options) {
    const std::size_t n = base.n_countries();
    if (y.size() != base.cells.size() || fta.size() != base.cells.size()) {
        throw InputError("constrained fit: inputs do not match the baseline cells");
    }
    PpmlProblem p;
    p.y.assign(y.begin(), y.end());
    FeSpec ex{kExporter, {}, static_cast<int>(n), {}, static_cast<int>(base.reference)};
    FeSpec im{kImporter, {}, static_cast<int>(n), {}, static_cast<int>(base.reference)};
    for (const auto& c : base.countries.codes()) {
        ex.labels.push_back(c.str());
        im.labels.push_back(c.str());
    }
    for (std::size_t k = 0; k < base.cells.size(); ++k) {
        ex.level_of.push_back(static_cast<int>(base.cells[k].exporter));
        im.level_of.push_back(static_cast<int>(base.cells[k].importer));
        p.offset.push_back(base.log_cost[k] + base.beta * fta[k]);
    }
    p.fes = {std::move(ex), std::move(im)};
    return fit_ppml(p, options);
}

Resistances recover_mr(const PpmlFit& fit, std::span<const double> output,
                       std::span<const double> expenditure, std::size_t reference, double sigma,
                       const CountryRegistry& countries) {
    const auto& ex = fit.fe(kExporter);
    const auto& im = fit.fe(kImporter);
    const std::size_t n = countries.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!ex.retained[i] || !im.retained[i]) {
            throw InputError("no multilateral resistance for " + countries[i].str() + ": fixed effect not identified");
        }
    }
    const double world = std::accumulate(output.begin(), output.end(), 0.0);
    const double er = expenditure[reference];
    const double br = im.values[reference];
    Resistances r;
    r.imr_pow.resize(n);
    r.omr_pow.resize(n);
    r.imr.resize(n);
    r.omr.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        r.imr_pow[j] = std::exp(im.values[j] - br) * er / expenditure[j];
        r.omr_pow[j] = std::exp(fit.intercept + ex.values[j] + br) * world / (output[j] * er);
        r.imr[j] = std::pow(r.imr_pow[j], 1.0 / (sigma - 1.0));
        r.omr[j] = std::pow(r.omr_pow[j], 1.0 / (sigma - 1.0));
    }
    return r;
}

std::vector<double> rescale_to_margins(const GeBaseline& base, std::vector<double> seed,
                                       std::span<const double> output,
                                       std::span<const double> expenditure) {
    const std::size_t n = base.n_countries();
    std::vector<double> row(n), col(n);
    for (int iter = 0; iter < 10000; ++iter) {
        std::fill(row.begin(), row.end(), 0.0);
        for (std::size_t k = 0; k < seed.size(); ++k) row[base.cells[k].exporter] += seed[k];
        for (std::size_t k = 0; k < seed.size(); ++k) seed[k] *= output[base.cells[k].exporter] / row[base.cells[k].exporter];
        std::fill(col.begin(), col.end(), 0.0);
        for (std::size_t k = 0; k < seed.size(); ++k) col[base.cells[k].importer] += seed[k];
        double gap = 0.0;
        for (std::size_t j = 0; j < n; ++j) gap = std::max(gap, std::abs(col[j] / expenditure[j] - 1.0));
        for (std::size_t k = 0; k < seed.size(); ++k) seed[k] *= expenditure[base.cells[k].importer] / col[base.cells[k].importer];
        if (gap < 1e-14) break;
    }
    return seed;
}

std::vector<double> international_exports(const GeBaseline& base, std::span<const double> flows) {
    std::vector<double> out(base.n_countries(), 0.0);
    for (std::size_t k = 0; k < base.cells.size(); ++k) {
        if (base.cells[k].exporter != base.cells[k].importer) out[base.cells[k].exporter] += flows[k];
    }
    return out;
}

double decomposition_error(const GeBaseline& base, std::span<const int> fta, const EconomyState& state) {
    double worst = 0.0;
    for (std::size_t k = 0; k < base.cells.size(); ++k) {
        const auto [i, j] = base.cells[k];
        double x = state.output[i] * state.expenditure[j] / state.world_output *
                   std::exp(base.log_cost[k] + base.beta * fta[k]) * state.mr.omr_pow[i] * state.mr.imr_pow[j];
        worst = std::max(worst, std::abs(x - state.flows[k]) / state.flows[k]);
    }
    return worst;
}

double market_clearing_error(const GeBaseline& base, std::span<const double> flows,
                             std::span<const double> output) {
    std::vector<double> row(base.n_countries(), 0.0);
    for (std::size_t k = 0; k < base.cells.size(); ++k) row[base.cells[k].exporter] += flows[k];
    double worst = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) worst = std::max(worst, std::abs(row[i] - output[i]) / output[i]);
    return worst;
}

namespace {

EconomyState make_state(const GeBaseline& base, const PpmlFit& fit, std::vector<double> output,
                        std::vector<double> expenditure, std::vector<double> price, double sigma) {
    EconomyState s;
    s.mr = recover_mr(fit, output, expenditure, base.reference, sigma, base.countries);
    s.world_output = std::accumulate(output.begin(), output.end(), 0.0);
    s.output = std::move(output);
    s.expenditure = std::move(expenditure);
    s.price = std::move(price);
    s.flows = fit.fitted;
    return s;
}

/// exp of the exporter effect including the reference importer's effect.
std::vector<double> exporter_scale(const PpmlFit& fit, std::size_t reference) {
    const auto& ex = fit.fe(kExporter);
    const double br = fit.fe(kImporter).values[reference];
    std::vector<double> out(ex.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(fit.intercept + ex.values[i] + br);
    return out;
}

std::vector<double> margins(const GeBaseline& base, std::span<const double> flows, bool rows) {
    std::vector<double> out(base.n_countries(), 0.0);
    for (std::size_t k = 0; k < base.cells.size(); ++k) {
        out[rows ? base.cells[k].exporter : base.cells[k].importer] += flows[k];
    }
    return out;
}

double pct(double after, double before) { return 100.0 * (after / before - 1.0); }

}  // namespace

ConditionalResult conditional_ge(const GeBaseline& base, const FtaMatrix& counterfactual,
                                 const GeConfig& config) {
    config.validate();
    const auto cf = base.indicator(counterfactual);
    auto output = margins(base, base.flow, true);
    auto expenditure = margins(base, base.flow, false);
    const std::vector<double> ones(base.n_countries(), 1.0);

    ConditionalResult r;
    r.baseline_fit = fit_constrained(base, base.flow, base.fta, config.ppml);
    r.counterfactual_fit = fit_constrained(base, base.flow, cf, config.ppml);
    r.baseline = make_state(base, r.baseline_fit, output, expenditure, ones, config.sigma);
    r.counterfactual = make_state(base, r.counterfactual_fit, output, expenditure, ones, config.sigma);
    auto before = international_exports(base, r.baseline.flows);
    auto after = international_exports(base, r.counterfactual.flows);
    for (std::size_t i = 0; i < before.size(); ++i) r.export_change_pct.push_back(pct(after[i], before[i]));
    return r;
}

GeSolution full_endowment_ge(const GeBaseline& base, const FtaMatrix& counterfactual,
                             const GeConfig& config) {
    config.validate();
    const std::size_t n = base.n_countries();
    const std::size_t R = base.reference;
    const double inv = 1.0 / (1.0 - config.sigma);

    GeSolution sol;
    sol.conditional = conditional_ge(base, counterfactual, config);
    sol.fta_baseline = base.fta;
    sol.fta_counterfactual = base.indicator(counterfactual);
    const auto& bl = sol.conditional.baseline;
    sol.endowment = bl.output;
    sol.phi.resize(n);
    for (std::size_t i = 0; i < n; ++i) sol.phi[i] = bl.expenditure[i] / bl.output[i];

    const auto scale_b = exporter_scale(sol.conditional.baseline_fit, R);
    const double er_b = bl.expenditure[R];

    std::vector<double> price(n, 1.0);
    std::vector<double> output = bl.output;
    std::vector<double> expenditure = bl.expenditure;
    std::vector<double> carrier = base.flow;
    std::vector<double> prev_fitted;
    std::vector<TraceRow> trace;
    int growing = 0;
    bool converged = false;

    for (int m = 1; m <= config.max_outer_iter; ++m) {
        if (m > 1) carrier = rescale_to_margins(base, prev_fitted, output, expenditure);
        auto fit = fit_constrained(base, carrier, sol.fta_counterfactual, config.ppml);
        auto state = make_state(base, fit, output, expenditure, price, config.sigma);

        const auto scale = exporter_scale(fit, R);
        std::vector<double> step(n);
        for (std::size_t i = 0; i < n; ++i) {
            double target = std::pow((scale[i] / expenditure[R]) / (scale_b[i] / er_b), inv);
            double next = price[i] + config.damping * (target - price[i]);
            step[i] = next - price[i];
            price[i] = next;
        }

        TraceRow row;
        row.iteration = m;
        row.d = std::abs(*std::max_element(step.begin(), step.end()));
        double mean = std::accumulate(step.begin(), step.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double s : step) {
            ss += (s - mean) * (s - mean);
            row.max_price_change = std::max(row.max_price_change, std::abs(s));
        }
        row.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        row.decomposition_error = decomposition_error(base, sol.fta_counterfactual, state);
        row.market_clearing_error = market_clearing_error(base, state.flows, output);
        if (!trace.empty() && row.d > trace.back().d) {
            ++growing;
        } else {
            growing = 0;
        }
        trace.push_back(row);

        for (std::size_t i = 0; i < n; ++i) output[i] = price[i] * sol.endowment[i];
        double world = std::accumulate(output.begin(), output.end(), 0.0);
        double spend = 0.0;
        for (std::size_t i = 0; i < n; ++i) spend += sol.phi[i] * output[i];
        for (std::size_t i = 0; i < n; ++i) expenditure[i] = sol.phi[i] * output[i] * world / spend;
        prev_fitted = std::move(state.flows);

        if (row.d <= config.price_tol && row.sd <= config.sd_tol) {
            converged = true;
            break;
        }
        if (growing >= 5) {
            throw GeConvergenceError("full-endowment loop diverged: d grew for 5 consecutive iterations", trace);
        }
    }
    if (!converged) {
        throw GeConvergenceError("full-endowment loop did not converge within " +
                                     std::to_string(config.max_outer_iter) + " iterations",
                                 trace);
    }

    sol.full_dependent = rescale_to_margins(base, prev_fitted, output, expenditure);
    sol.full_fit = fit_constrained(base, sol.full_dependent, sol.fta_counterfactual, config.ppml);
    sol.full = make_state(base, sol.full_fit, output, expenditure, price, config.sigma);

    auto& out = sol.outcome;
    out.trace = std::move(trace);
    out.iterations = static_cast<int>(out.trace.size());
    out.final_d = out.trace.back().d;
    out.final_sd = out.trace.back().sd;
    out.sigma = config.sigma;
    auto x_b = international_exports(base, bl.flows);
    auto x_f = international_exports(base, sol.full.flows);
    for (std::size_t i = 0; i < n; ++i) {
        GeOutcomeRow r;
        r.country = base.countries[i];
        r.pct_trade_conditional = sol.conditional.export_change_pct[i];
        r.pct_trade_full = pct(x_f[i], x_b[i]);
        r.pct_rgdp = pct(sol.full.output[i] / sol.full.mr.imr[i], bl.output[i] / bl.mr.imr[i]);
        r.pct_imr = pct(sol.full.mr.imr[i], bl.mr.imr[i]);
        r.pct_omr = pct(sol.full.mr.omr[i], bl.mr.omr[i]);
        r.pct_prices = pct(sol.full.price[i], 1.0);
        out.rows.push_back(r);
    }
    return sol;
}

}  // namespace geppml
