#include "geppml/trade_costs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "geppml/csv.hpp"
#include "geppml/error.hpp"

namespace geppml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

BaselineFit fit_baseline(const IntervalPanel& panel, const CountryCode& reference,
                         const PpmlOptions& options) {
    if (panel.observations.empty()) throw InputError("panel has no observations");
    const std::size_t n = panel.n_countries();
    const std::size_t T = panel.years.size();
    BaselineFit out;
    out.countries = panel.countries;
    out.years = panel.years;
    out.reference = panel.countries.index_of(reference);
    const std::size_t R = out.reference;

    auto year_pos = [&](int year) {
        return static_cast<std::size_t>(std::lower_bound(panel.years.begin(), panel.years.end(), year) -
                                        panel.years.begin());
    };

    FeSpec exp_year{kExporterYear, {}, static_cast<int>(n * T), {}, static_cast<int>(R * T + T - 1)};
    FeSpec imp_year{kImporterYear, {}, static_cast<int>(n * T), {}, static_cast<int>(R * T + T - 1)};
    FeSpec pair{kPair, {}, static_cast<int>(n * n), {}, -1};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            exp_year.labels.push_back(panel.countries[i].str() + "-" + std::to_string(panel.years[t]));
        }
    }
    imp_year.labels = exp_year.labels;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            pair.labels.push_back(panel.countries[i].str() + "-" + panel.countries[j].str());
        }
    }

    Covariate fta{kFta, {}};
    auto& p = out.problem;
    for (std::size_t k = 0; k < panel.observations.size(); ++k) {
        const auto& o = panel.observations[k];
        auto t = year_pos(o.year);
        p.y.push_back(o.flow);
        fta.values.push_back(o.fta);
        exp_year.level_of.push_back(static_cast<int>(o.exporter * T + t));
        imp_year.level_of.push_back(static_cast<int>(o.importer * T + t));
        pair.level_of.push_back(static_cast<int>(o.exporter * n + o.importer));
        p.cluster.push_back(static_cast<int>(o.exporter * n + o.importer));
        out.obs_index.push_back(k);
    }
    // Pin the reference country's internal pair if present, else its first export pair.
    std::vector<bool> trades(n, false);
    for (const auto& o : panel.observations) {
        if (o.exporter == R && o.flow > 0.0) trades[o.importer] = true;
    }
    pair.reference = 0;
    if (trades[R]) {
        pair.reference = static_cast<int>(R * n + R);
    } else if (auto first = std::find(trades.begin(), trades.end(), true); first != trades.end()) {
        pair.reference = static_cast<int>(R * n + static_cast<std::size_t>(first - trades.begin()));
    }
    p.covariates.push_back(std::move(fta));
    p.fes = {std::move(exp_year), std::move(imp_year), std::move(pair)};
    out.fit = fit_ppml(p, options);
    return out;
}

std::string to_string(CostSource s) {
    switch (s) {
        case CostSource::Estimated: return "estimated";
        case CostSource::Predicted: return "predicted";
        case CostSource::External: return "external";
    }
    return "unknown";
}

CostSource cost_source_from_string(const std::string& s) {
    if (s == "estimated") return CostSource::Estimated;
    if (s == "predicted") return CostSource::Predicted;
    if (s == "external") return CostSource::External;
    throw InputError("unknown cost source '" + s + "'");
}

bool PartialCosts::identified(std::size_t i, std::size_t j) const { return !std::isnan(at(i, j)); }

std::size_t PartialCosts::count() const {
    return static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [](double v) { return !std::isnan(v); }));
}

bool CostMatrix::has(std::size_t i, std::size_t j) const { return !std::isnan(at(i, j)); }

bool CostMatrix::has_diagonal() const {
    for (std::size_t i = 0; i < size(); ++i) {
        if (!has(i, i)) return false;
    }
    return size() > 0;
}

void CostMatrix::validate() const {
    const std::size_t n = size();
    if (values.size() != n * n || source.size() != n * n) throw InputError("cost matrix has wrong shape");
    if (!(sigma > 1.0)) throw InputError("sigma must exceed 1");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double v = at(i, j);
            if (i == j && std::isnan(v)) continue;
            if (std::isnan(v)) {
                throw InputError("cost matrix is missing " + countries[i].str() + "->" + countries[j].str());
            }
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw InputError("cost for " + countries[i].str() + "->" + countries[j].str() +
                                 " must be positive and finite");
            }
        }
    }
}

PartialCosts costs_from_pair_fe(const BaselineFit& baseline) {
    const auto& fes = baseline.fit.fe_values;
    auto it = std::find_if(fes.begin(), fes.end(), [](const FeValues& f) { return f.name == kPair; });
    if (it == fes.end()) throw InputError("fit has no pair fixed effects");
    const std::size_t n = baseline.countries.size();
    PartialCosts out;
    out.countries = baseline.countries;
    out.values.assign(n * n, kNaN);
    for (std::size_t level = 0; level < n * n; ++level) {
        if (it->retained[level]) out.values[level] = std::exp(it->values[level]);
    }
    return out;
}

const std::vector<std::string>& stage2_covariate_names() {
    static const std::vector<std::string> names{"log_dist", "cntg", "lang", "clny"};
    return names;
}

double Stage2Fit::predict(std::size_t i, std::size_t j, const GravityCovariates& x) const {
    const auto& ex = fit.fe(kExporter);
    const auto& im = fit.fe(kImporter);
    if (!ex.retained[i]) {
        throw InputError("cannot predict costs for exporter " + countries[i].str() +
                         ": no identified pairs in stage 2");
    }
    if (!im.retained[j]) {
        throw InputError("cannot predict costs for importer " + countries[j].str() +
                         ": no identified pairs in stage 2");
    }
    const auto& b = fit.beta;
    double lin = fit.intercept + ex.values[i] + im.values[j] + b[0] * x.log_dist + b[1] * x.cntg +
                 b[2] * x.lang + b[3] * x.clny;
    return std::exp(lin);
}

Stage2Fit fit_stage2(const PartialCosts& costs, const IntervalPanel& panel, Stage2Weights weights,
                     const CountryCode& reference, const PpmlOptions& options) {
    const std::size_t n = costs.countries.size();
    if (!(panel.countries == costs.countries)) throw InputError("stage 2: registry mismatch");
    Stage2Fit out;
    out.countries = costs.countries;
    out.reference = costs.countries.index_of(reference);
    std::vector<double> volume;
    if (weights == Stage2Weights::TradeVolume) {
        volume.assign(n * n, 0.0);
        for (const auto& o : panel.observations) volume[o.exporter * n + o.importer] += o.flow;
    }

    auto& p = out.problem;
    std::vector<Covariate> cols;
    for (const auto& name : stage2_covariate_names()) cols.push_back({name, {}});
    FeSpec ex{kExporter, {}, static_cast<int>(n), {}, static_cast<int>(out.reference)};
    FeSpec im{kImporter, {}, static_cast<int>(n), {}, static_cast<int>(out.reference)};
    for (const auto& c : costs.countries.codes()) {
        ex.labels.push_back(c.str());
        im.labels.push_back(c.str());
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (!costs.identified(i, j)) continue;
            const auto* g = panel.covariates_for(i, j);
            if (!g) {
                throw InputError("stage 2: no covariates for identified pair " + costs.countries[i].str() +
                                 "->" + costs.countries[j].str());
            }
            p.y.push_back(costs.at(i, j));
            cols[0].values.push_back(g->log_dist);
            cols[1].values.push_back(g->cntg);
            cols[2].values.push_back(g->lang);
            cols[3].values.push_back(g->clny);
            ex.level_of.push_back(static_cast<int>(i));
            im.level_of.push_back(static_cast<int>(j));
            p.cluster.push_back(static_cast<int>(i * n + j));
            if (!volume.empty()) p.weights.push_back(std::max(volume[i * n + j], 1e-300));
            out.cells.push_back(i * n + j);
        }
    }
    if (p.y.empty()) throw InputError("stage 2: no identified pairs");
    if (!volume.empty()) {
        // Zero-volume pairs keep a tiny weight instead of being removed; rescale
        // so weights average one.
        double s = 0.0;
        for (double w : p.weights) s += w;
        for (auto& w : p.weights) w *= static_cast<double>(p.weights.size()) / s;
    }
    p.covariates = std::move(cols);
    p.fes = {std::move(ex), std::move(im)};
    out.fit = fit_ppml(p, options);
    return out;
}

CostMatrix complete_costs(const PartialCosts& costs, const Stage2Fit& stage2, const IntervalPanel& panel,
                          double sigma) {
    const std::size_t n = costs.countries.size();
    CostMatrix out;
    out.countries = costs.countries;
    out.sigma = sigma;
    out.values.assign(n * n, kNaN);
    out.source.assign(n * n, CostSource::Estimated);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t cell = i * n + j;
            if (costs.identified(i, j)) {
                out.values[cell] = costs.values[cell];
                continue;
            }
            const auto* g = panel.covariates_for(i, j);
            if (!g) {
                if (i == j) continue;
                throw InputError("cannot predict costs for " + costs.countries[i].str() + "->" +
                                 costs.countries[j].str() + ": no covariates");
            }
            out.values[cell] = stage2.predict(i, j, *g);
            out.source[cell] = CostSource::Predicted;
        }
    }
    out.validate();
    return out;
}

void write_costs(const CostMatrix& costs, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write " + file.string());
    out << "exporter,importer,cost,source\n";
    const std::size_t n = costs.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (!costs.has(i, j)) continue;
            csv::write_row(out, {costs.countries[i].str(), costs.countries[j].str(),
                                 csv::format_exact(costs.at(i, j)), to_string(costs.source[i * n + j])});
        }
    }
}

CostMatrix read_costs(const std::filesystem::path& file, const CountryRegistry& countries, double sigma) {
    auto t = csv::read(file, {"exporter", "importer", "cost", "source"});
    const std::size_t n = countries.size();
    CostMatrix out;
    out.countries = countries;
    out.sigma = sigma;
    out.values.assign(n * n, kNaN);
    out.source.assign(n * n, CostSource::External);
    for (const auto& row : t.rows) {
        const auto& f = row.fields;
        auto i = countries.find(f[0]);
        auto j = countries.find(f[1]);
        if (!i || !j) throw InputError(t.path, row.line, "unknown country in cost row " + f[0] + "->" + f[1]);
        double v = csv::parse_double(f[2], t.path, row.line, "cost");
        if (!(v > 0.0)) throw InputError(t.path, row.line, "cost must be positive");
        std::size_t cell = *i * n + *j;
        if (!std::isnan(out.values[cell])) throw InputError(t.path, row.line, "duplicate cost row " + f[0] + "->" + f[1]);
        out.values[cell] = v;
        try {
            out.source[cell] = cost_source_from_string(f[3]);
        } catch (const InputError& e) {
            throw InputError(t.path, row.line, e.what());
        }
    }
    out.validate();
    return out;
}

}  // namespace geppml
