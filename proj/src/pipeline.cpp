#include "geppml/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <json.hpp>

#include "geppml/csv.hpp"
#include "geppml/error.hpp"

namespace geppml {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kVersion = "0.1.0";

json doubles(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) {
        if (std::isfinite(x)) {
            a.push_back(x);
        } else {
            a.push_back(nullptr);
        }
    }
    return a;
}

std::vector<double> doubles(const json& a) {
    std::vector<double> out;
    out.reserve(a.size());
    for (const auto& x : a) out.push_back(x.is_null() ? kNaN : x.get<double>());
    return out;
}

json read_json(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(file.string() + ": " + e.what());
    }
}

void write_json(const json& j, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write " + file.string());
    out << j.dump(1) << '\n';
}

std::vector<std::string> codes(const CountryRegistry& r) {
    std::vector<std::string> out;
    for (const auto& c : r.codes()) out.push_back(c.str());
    return out;
}

}  // namespace

BaselineState EstimateResult::state(std::string manifest_id) const {
    BaselineState s;
    s.panel = panel;
    s.reference = stage1.countries[stage1.reference];
    s.beta_fta = stage1.beta_fta();
    s.se_fta = stage1.se_fta();
    s.costs = costs;
    s.stage1_fitted.assign(panel.observations.size(), 0.0);
    for (std::size_t k = 0; k < stage1.obs_index.size(); ++k) s.stage1_fitted[stage1.obs_index[k]] = stage1.fit.fitted[k];
    s.stage2_names = stage2.fit.names;
    s.stage2_beta = stage2.fit.beta;
    s.manifest_id = std::move(manifest_id);
    return s;
}

IntervalPanel apply_window(const IntervalPanel& panel, const EstimateOptions& o) {
    if (!o.start_year && !o.end_year && !o.interval) return panel;
    if (panel.years.empty()) throw InputError("panel has no observations");
    int start = o.start_year.value_or(panel.years.front());
    int end = o.end_year.value_or(panel.years.back());
    int step = o.interval.value_or(panel.interval > 0 ? panel.interval : 1);
    return build_interval_panel(panel, start, end, step);
}

EstimateResult run_estimate(const IntervalPanel& panel, const EstimateOptions& o) {
    if (panel.observations.empty()) throw InputError("panel has no observations");
    EstimateResult r;
    r.panel = panel;
    r.stage1 = fit_baseline(panel, o.reference, o.ppml);
    r.partial = costs_from_pair_fe(r.stage1);
    r.stage2 = fit_stage2(r.partial, panel, o.weights, o.reference, o.ppml);
    r.costs = complete_costs(r.partial, r.stage2, panel, o.sigma);

    r.summary = report::fit_summary("stage1", r.stage1.fit, {kExporterYear, kImporterYear, kPair});
    r.summary.insert(r.summary.begin() + 1,
                     {"stage1", "FTA effect (%)", report::format_display(percent_effect(r.stage1.beta_fta()))});
    auto s2 = report::fit_summary("stage2", r.stage2.fit, {kExporter, kImporter});
    r.summary.insert(r.summary.end(), s2.begin(), s2.end());
    std::size_t predicted = 0;
    for (auto s : r.costs.source) predicted += s == CostSource::Predicted;
    r.summary.push_back({"costs", "Identified pairs", report::format_count(r.partial.count())});
    r.summary.push_back({"costs", "Predicted pairs", report::format_count(predicted)});
    r.summary.push_back({"costs", "sigma", csv::format_exact(o.sigma)});
    return r;
}

void save_baseline(const BaselineState& s, const std::filesystem::path& file) {
    const auto& p = s.panel;
    const std::size_t n = p.n_countries();
    json j;
    j["manifest_id"] = s.manifest_id;
    j["reference"] = s.reference.str();
    j["countries"] = codes(p.countries);
    j["years"] = p.years;
    j["interval"] = p.interval;
    json obs;
    std::vector<std::size_t> ex, im;
    std::vector<int> yr, fta;
    std::vector<double> flow;
    for (const auto& o : p.observations) {
        ex.push_back(o.exporter);
        im.push_back(o.importer);
        yr.push_back(o.year);
        flow.push_back(o.flow);
        fta.push_back(o.fta);
    }
    obs["exporter"] = ex;
    obs["importer"] = im;
    obs["year"] = yr;
    obs["flow"] = doubles(flow);
    obs["fta"] = fta;
    j["observations"] = obs;
    json cov = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t jj = 0; jj < n; ++jj) {
            const auto* g = p.covariates_for(i, jj);
            if (!g) continue;
            cov.push_back({i, jj, g->log_dist, g->cntg, g->lang, g->clny});
        }
    }
    j["covariates"] = cov;
    json force = json::array();
    for (const auto& [a, b, y] : p.fta_in_force) force.push_back({a, b, y});
    j["fta_in_force"] = force;
    j["stage1"] = {{"beta_fta", s.beta_fta}, {"se_fta", s.se_fta}, {"fitted", doubles(s.stage1_fitted)}};
    j["stage2"] = {{"names", s.stage2_names}, {"beta", doubles(s.stage2_beta)}};
    std::vector<std::string> src;
    for (auto c : s.costs.source) src.push_back(to_string(c));
    j["costs"] = {{"sigma", s.costs.sigma}, {"values", doubles(s.costs.values)}, {"source", src}};
    write_json(j, file);
}

BaselineState load_baseline(const std::filesystem::path& file) {
    json j = read_json(file);
    BaselineState s;
    try {
        std::vector<CountryCode> cs;
        for (const auto& c : j.at("countries")) cs.emplace_back(c.get<std::string>());
        auto& p = s.panel;
        p.countries = CountryRegistry(std::move(cs));
        const std::size_t n = p.n_countries();
        p.years = j.at("years").get<std::vector<int>>();
        p.interval = j.at("interval").get<int>();
        const auto& obs = j.at("observations");
        auto ex = obs.at("exporter").get<std::vector<std::size_t>>();
        auto im = obs.at("importer").get<std::vector<std::size_t>>();
        auto yr = obs.at("year").get<std::vector<int>>();
        auto flow = doubles(obs.at("flow"));
        auto fta = obs.at("fta").get<std::vector<int>>();
        for (std::size_t k = 0; k < ex.size(); ++k) {
            if (ex[k] >= n || im[k] >= n) throw InputError(file.string() + ": observation country out of range");
            p.observations.push_back({ex[k], im[k], yr.at(k), flow.at(k), fta.at(k)});
        }
        p.covariates.assign(n * n, std::nullopt);
        for (const auto& c : j.at("covariates")) {
            auto i = c.at(0).get<std::size_t>(), jj = c.at(1).get<std::size_t>();
            if (i >= n || jj >= n) throw InputError(file.string() + ": covariate country out of range");
            p.covariates[i * n + jj] =
                GravityCovariates{c.at(2).get<double>(), c.at(3).get<int>(), c.at(4).get<int>(), c.at(5).get<int>()};
        }
        for (const auto& f : j.at("fta_in_force")) {
            p.fta_in_force.insert({f.at(0).get<std::size_t>(), f.at(1).get<std::size_t>(), f.at(2).get<int>()});
        }
        s.reference = CountryCode(j.at("reference").get<std::string>());
        s.manifest_id = j.value("manifest_id", "");
        s.beta_fta = j.at("stage1").at("beta_fta").get<double>();
        s.se_fta = j.at("stage1").at("se_fta").get<double>();
        s.stage1_fitted = doubles(j.at("stage1").at("fitted"));
        s.stage2_names = j.at("stage2").at("names").get<std::vector<std::string>>();
        s.stage2_beta = doubles(j.at("stage2").at("beta"));
        const auto& c = j.at("costs");
        s.costs.countries = p.countries;
        s.costs.sigma = c.at("sigma").get<double>();
        s.costs.values = doubles(c.at("values"));
        for (const auto& v : c.at("source")) s.costs.source.push_back(cost_source_from_string(v.get<std::string>()));
    } catch (const json::exception& e) {
        throw InputError(file.string() + ": malformed baseline state: " + e.what());
    }
    if (s.stage1_fitted.size() != s.panel.observations.size()) {
        throw InputError(file.string() + ": fitted values do not match the observations");
    }
    s.costs.validate();
    return s;
}

SimulationRun run_simulate(const BaselineState& state, const Scenario& scenario, const GeConfig& config) {
    config.validate();
    SimulationRun r;
    r.scenario = scenario;
    r.config = config;
    auto cf = apply_scenario(state.panel, scenario);
    r.base = make_ge_baseline(state.panel, state.costs, state.beta_fta, scenario.evaluation_year, scenario.reference);
    r.solution = full_endowment_ge(r.base, cf, config);
    return r;
}

namespace {

json fit_json(const PpmlFit& fit, const EconomyState& s) {
    return {{"output", doubles(s.output)},
            {"expenditure", doubles(s.expenditure)},
            {"price", doubles(s.price)},
            {"flows", doubles(s.flows)},
            {"intercept", fit.intercept},
            {"exporter_fe", doubles(fit.fe(kExporter).values)},
            {"importer_fe", doubles(fit.fe(kImporter).values)}};
}

}  // namespace

void write_simulation(const SimulationRun& run, const std::string& manifest_id, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& sol = run.solution;
    report::write_outcome(sol.outcome.rows, dir / "outcome.csv");
    report::write_outcome_display(sol.outcome.rows, dir / "outcome_display.csv");
    report::write_trace(sol.outcome.trace, dir / "trace.csv");

    const auto& b = run.base;
    std::vector<std::size_t> ex, im;
    for (const auto& c : b.cells) {
        ex.push_back(c.exporter);
        im.push_back(c.importer);
    }
    json j;
    j["manifest_id"] = manifest_id;
    j["scenario"] = run.scenario.name;
    j["countries"] = codes(b.countries);
    j["reference"] = b.countries[b.reference].str();
    j["evaluation_year"] = b.year;
    j["beta_fta"] = b.beta;
    j["config"] = {{"sigma", run.config.sigma},
                   {"price_tol", run.config.price_tol},
                   {"sd_tol", run.config.sd_tol},
                   {"max_outer_iter", run.config.max_outer_iter},
                   {"damping", run.config.damping}};
    j["iterations"] = sol.outcome.iterations;
    j["cells"] = {{"exporter", ex}, {"importer", im}, {"log_cost", doubles(b.log_cost)}};
    j["fta_baseline"] = sol.fta_baseline;
    j["fta_counterfactual"] = sol.fta_counterfactual;
    j["endowment"] = doubles(sol.endowment);
    j["phi"] = doubles(sol.phi);
    j["baseline"] = fit_json(sol.conditional.baseline_fit, sol.conditional.baseline);
    j["baseline"]["dependent"] = doubles(b.flow);
    j["conditional"] = fit_json(sol.conditional.counterfactual_fit, sol.conditional.counterfactual);
    j["conditional"]["dependent"] = doubles(b.flow);
    j["full"] = fit_json(sol.full_fit, sol.full);
    j["full"]["dependent"] = doubles(sol.full_dependent);
    write_json(j, dir / "ge_state.json");
}

std::string Manifest::id() const {
    std::string key = command + '\n';
    for (const auto& p : inputs) key += p.filename().string() + ':' + report::file_digest(p) + '\n';
    for (const auto& [k, v] : config) key += k + '=' + v + '\n';
    if (seed) key += "seed=" + std::to_string(*seed) + '\n';
    key += kVersion;
    return report::fnv1a_hex(key);
}

void Manifest::write(const std::filesystem::path& dir, const std::vector<std::string>& outputs) const {
    json j;
    j["manifest_id"] = id();
    j["command"] = command;
    j["version"] = kVersion;
    json in = json::array();
    for (const auto& p : inputs) in.push_back({{"path", p.string()}, {"digest", report::file_digest(p)}});
    j["inputs"] = in;
    json cfg = json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = cfg;
    j["seed"] = seed ? json(*seed) : json(nullptr);
    json out = json::array();
    for (const auto& f : outputs) out.push_back({{"file", f}, {"digest", report::file_digest(dir / f)}});
    j["outputs"] = out;
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    j["created_utc"] = stamp;
    write_json(j, dir / "manifest.json");
}

bool VerifyReport::passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

namespace {

struct Worst {
    double value = 0.0;
    std::string where;
    void update(double v, const std::string& w) {
        if (!(v <= value)) {
            value = v;
            where = w;
        }
    }
};

VerifyCheck make_check(std::string name, const Worst& w, double tol, const std::string& what) {
    VerifyCheck c;
    c.name = std::move(name);
    c.magnitude = w.value;
    c.tolerance = tol;
    c.passed = w.value <= tol;
    if (!w.where.empty()) c.detail = "worst " + what + " " + w.where;
    return c;
}

/// Largest |sum(y - mu)| / sum(mu) over the groups given by `key`.
template <typename Key>
Worst group_score(std::size_t count, const std::vector<double>& y, const std::vector<double>& mu, Key key) {
    std::map<std::string, std::pair<double, double>> g;
    for (std::size_t k = 0; k < count; ++k) {
        auto& e = g[key(k)];
        e.first += y[k] - mu[k];
        e.second += mu[k];
    }
    Worst w;
    for (const auto& [name, e] : g) {
        if (e.second > 0.0) w.update(std::abs(e.first) / e.second, name);
    }
    return w;
}

void verify_stage1(const BaselineState& s, const VerifyOptions& o, VerifyReport& rep) {
    const auto& p = s.panel;
    const auto& obs = p.observations;
    std::vector<double> y;
    for (const auto& ob : obs) y.push_back(ob.flow);
    const auto& mu = s.stage1_fitted;
    auto cc = [&](std::size_t i) { return p.countries[i].str(); };
    Worst w;
    auto merge = [&](const Worst& x, const std::string& dim) { w.update(x.value, dim + " " + x.where); };
    merge(group_score(obs.size(), y, mu, [&](std::size_t k) { return cc(obs[k].exporter) + "-" + std::to_string(obs[k].year); }),
          kExporterYear);
    merge(group_score(obs.size(), y, mu, [&](std::size_t k) { return cc(obs[k].importer) + "-" + std::to_string(obs[k].year); }),
          kImporterYear);
    merge(group_score(obs.size(), y, mu, [&](std::size_t k) { return cc(obs[k].exporter) + "-" + cc(obs[k].importer); }),
          kPair);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
        num += obs[k].fta * (y[k] - mu[k]);
        den += mu[k];
    }
    if (den > 0.0) w.update(std::abs(num) / den, kFta);
    rep.checks.push_back(make_check("stage1 adding-up", w, o.foc_tol, "level"));
}

void verify_ge(const std::filesystem::path& dir, const VerifyOptions& o, VerifyReport& rep) {
    json j = read_json(dir / "ge_state.json");
    std::vector<CountryCode> cs;
    for (const auto& c : j.at("countries")) cs.emplace_back(c.get<std::string>());
    CountryRegistry countries(cs);
    const std::size_t n = countries.size();
    const std::size_t R = countries.index_of(j.at("reference").get<std::string>());
    const double sigma = j.at("config").at("sigma").get<double>();
    const double beta = j.at("beta_fta").get<double>();
    auto ex = j.at("cells").at("exporter").get<std::vector<std::size_t>>();
    auto im = j.at("cells").at("importer").get<std::vector<std::size_t>>();
    auto log_cost = doubles(j.at("cells").at("log_cost"));
    const std::size_t m = ex.size();
    auto cell = [&](std::size_t k) { return countries[ex[k]].str() + "->" + countries[im[k]].str(); };

    Worst decomp, foc;
    std::map<std::string, std::vector<double>> row_sums;
    for (const char* stage : {"baseline", "conditional", "full"}) {
        const auto& st = j.at(stage);
        auto fta = j.at(std::string(stage) == "baseline" ? "fta_baseline" : "fta_counterfactual").get<std::vector<int>>();
        auto output = doubles(st.at("output"));
        auto expenditure = doubles(st.at("expenditure"));
        auto flows = doubles(st.at("flows"));
        auto dep = doubles(st.at("dependent"));
        PpmlFit fit;
        fit.intercept = st.at("intercept").get<double>();
        for (const char* dim : {kExporter, kImporter}) {
            FeValues f;
            f.name = dim;
            f.values = doubles(st.at(std::string(dim) + "_fe"));
            f.retained.assign(n, true);
            for (std::size_t i = 0; i < n; ++i) f.retained[i] = std::isfinite(f.values[i]);
            fit.fe_values.push_back(std::move(f));
        }
        auto mr = recover_mr(fit, output, expenditure, R, sigma, countries);
        double world = 0.0;
        for (double v : output) world += v;
        for (std::size_t k = 0; k < m; ++k) {
            double x = output[ex[k]] * expenditure[im[k]] / world * std::exp(log_cost[k] + beta * fta[k]) *
                       mr.omr_pow[ex[k]] * mr.imr_pow[im[k]];
            decomp.update(std::abs(x - flows[k]) / flows[k], std::string(stage) + " " + cell(k));
        }
        auto a = group_score(m, dep, flows, [&](std::size_t k) { return "exporter " + countries[ex[k]].str(); });
        auto b = group_score(m, dep, flows, [&](std::size_t k) { return "importer " + countries[im[k]].str(); });
        foc.update(a.value, std::string(stage) + " " + a.where);
        foc.update(b.value, std::string(stage) + " " + b.where);
        auto& rs = row_sums[stage];
        rs.assign(n, 0.0);
        for (std::size_t k = 0; k < m; ++k) rs[ex[k]] += flows[k];
    }
    rep.checks.push_back(make_check("decomposition identity", decomp, o.decomposition_tol, "cell"));
    rep.checks.push_back(make_check("constrained adding-up", foc, o.foc_tol, "level"));

    // Market clearing at the reported prices.
    auto rows = report::read_outcome(dir / "outcome.csv");
    auto q = doubles(j.at("endowment"));
    auto base_output = doubles(j.at("baseline").at("output"));
    Worst clear;
    if (rows.size() != n) throw InputError("outcome.csv does not list every country");
    for (const auto& r : rows) {
        auto i = countries.index_of(r.country);
        double y = (1.0 + r.pct_prices / 100.0) * q[i];
        clear.update(std::abs(row_sums["full"][i] - y) / y, r.country.str());
        clear.update(std::abs(row_sums["baseline"][i] - base_output[i]) / base_output[i], r.country.str() + " (baseline)");
        clear.update(std::abs(row_sums["conditional"][i] - base_output[i]) / base_output[i],
                     r.country.str() + " (conditional)");
    }
    rep.checks.push_back(make_check("market clearing", clear, o.clearing_tol, "country"));

    // Stopping rule: the loop must stop at the first row meeting both tolerances.
    const double ptol = o.price_tol.value_or(j.at("config").at("price_tol").get<double>());
    const double stol = o.sd_tol.value_or(j.at("config").at("sd_tol").get<double>());
    auto trace = report::read_trace(dir / "trace.csv");
    VerifyCheck stop;
    stop.name = "stopping rule";
    stop.tolerance = ptol;
    if (trace.empty()) {
        stop.detail = "trace.csv is empty";
    } else {
        const auto& last = trace.back();
        stop.magnitude = last.d;
        bool early = false;
        for (std::size_t k = 0; k + 1 < trace.size(); ++k) {
            if (trace[k].d <= ptol && trace[k].sd <= stol) {
                early = true;
                stop.detail = "criterion already met at iteration " + std::to_string(trace[k].iteration);
                break;
            }
        }
        bool met = last.d <= ptol && last.sd <= stol;
        bool counted = static_cast<int>(trace.size()) == j.at("iterations").get<int>();
        stop.passed = met && !early && counted;
        if (!met) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "final d=%.3g sd=%.3g against price_tol=%.3g sd_tol=%.3g", last.d,
                          last.sd, ptol, stol);
            stop.detail = buf;
        } else if (!counted) {
            stop.detail = "trace length disagrees with the recorded iteration count";
        }
    }
    rep.checks.push_back(stop);
}

}  // namespace

VerifyReport verify_run(const std::filesystem::path& dir, const VerifyOptions& o) {
    VerifyReport rep;
    std::filesystem::path baseline = dir / "baseline.json";
    if (!std::filesystem::exists(baseline) && std::filesystem::exists(dir / "manifest.json")) {
        json m = read_json(dir / "manifest.json");
        for (const auto& in : m.value("inputs", json::array())) {
            if (!in.is_object() || !in.contains("path") || !in["path"].is_string()) continue;
            std::filesystem::path p = in["path"].get<std::string>();
            if (p.filename() == "baseline.json") baseline = p;
        }
    }
    try {
        if (std::filesystem::exists(baseline)) verify_stage1(load_baseline(baseline), o, rep);
        if (std::filesystem::exists(dir / "ge_state.json")) verify_ge(dir, o, rep);
    } catch (const json::exception& e) {
        throw InputError(dir.string() + ": malformed run artifacts: " + e.what());
    }
    if (rep.checks.empty()) throw InputError(dir.string() + " holds neither baseline.json nor ge_state.json");
    return rep;
}

}  // namespace geppml
