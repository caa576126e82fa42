#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "geppml/error.hpp"
#include "geppml/pipeline.hpp"
#include "geppml/ppml.hpp"
#include "geppml/report.hpp"
#include "geppml/synth.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace geppml;

namespace {

py::dict synth(const fs::path& out, int n_countries, std::vector<int> years, double beta, double sigma,
               std::uint64_t seed, double noise_cv, double fta_share, double zero_share) {
    SynthConfig cfg;
    cfg.n_countries = n_countries;
    cfg.years = std::move(years);
    cfg.beta_fta = beta;
    cfg.sigma = sigma;
    cfg.seed = seed;
    cfg.noise_cv = noise_cv;
    cfg.fta_share = fta_share;
    cfg.zero_pair_share = zero_share;
    auto w = synth_world(cfg);
    fs::create_directories(out);
    write_panel(w.panel, out);
    write_truth(w.truth, out / "truth.csv");
    py::dict d;
    d["beta_fta"] = w.truth.beta_fta;
    d["sigma"] = w.truth.sigma;
    d["seed"] = w.truth.seed;
    d["observations"] = w.panel.observations.size();
    std::vector<std::string> codes;
    for (std::size_t i = 0; i < w.panel.n_countries(); ++i) codes.push_back(w.panel.countries[i].str());
    d["countries"] = codes;
    return d;
}

py::dict estimate(const fs::path& data, std::optional<fs::path> out, const std::string& reference,
                  const std::string& weights, double sigma) {
    EstimateOptions o;
    o.reference = CountryCode(reference);
    o.sigma = sigma;
    if (weights == "volume") {
        o.weights = Stage2Weights::TradeVolume;
    } else if (weights != "uniform") {
        throw InputError("stage2_weights must be 'uniform' or 'volume'");
    }
    auto panel = load_panel(data / "flows.csv", data / "covariates.csv", data / "fta.csv");
    auto r = run_estimate(panel, o);
    if (out) {
        fs::create_directories(*out);
        report::write_summary(r.summary, *out / "fit_summary.csv");
        write_costs(r.costs, *out / "costs.csv");
        save_baseline(r.state(), *out / "baseline.json");
    }
    py::dict d;
    d["beta_fta"] = r.stage1.beta_fta();
    d["se_fta"] = r.stage1.se_fta();
    d["percent_effect"] = percent_effect(r.stage1.beta_fta());
    py::dict s2;
    for (std::size_t k = 0; k < r.stage2.fit.names.size(); ++k) s2[py::str(r.stage2.fit.names[k])] = r.stage2.fit.beta[k];
    d["stage2"] = s2;
    py::list rows;
    for (const auto& row : r.summary) rows.append(py::make_tuple(row.section, row.name, row.value));
    d["summary"] = rows;
    return d;
}

py::dict outcome_dict(const GeOutcome& o) {
    py::list rows;
    for (const auto& r : o.rows) {
        py::dict x;
        x["country"] = r.country.str();
        x["pct_trade_cond"] = r.pct_trade_conditional;
        x["pct_trade_full"] = r.pct_trade_full;
        x["pct_rgdp"] = r.pct_rgdp;
        x["pct_imr"] = r.pct_imr;
        x["pct_omr"] = r.pct_omr;
        x["pct_prices"] = r.pct_prices;
        rows.append(x);
    }
    py::list trace;
    for (const auto& t : o.trace) {
        py::dict x;
        x["iteration"] = t.iteration;
        x["d"] = t.d;
        x["sd"] = t.sd;
        x["max_price_change"] = t.max_price_change;
        trace.append(x);
    }
    py::dict d;
    d["rows"] = rows;
    d["trace"] = trace;
    d["iterations"] = o.iterations;
    return d;
}

py::dict simulate(const fs::path& baseline, const fs::path& scenario, std::optional<fs::path> out,
                  std::optional<double> sigma, std::optional<double> price_tol, std::optional<double> sd_tol,
                  std::optional<int> max_outer_iter, std::optional<double> damping) {
    auto state = load_baseline(baseline);
    auto file = load_scenario(scenario);
    GeConfig cfg;
    cfg.sigma = sigma.value_or(file.sigma.value_or(state.costs.sigma));
    cfg.price_tol = price_tol.value_or(file.price_tol.value_or(cfg.price_tol));
    cfg.sd_tol = sd_tol.value_or(file.sd_tol.value_or(cfg.sd_tol));
    cfg.max_outer_iter = max_outer_iter.value_or(file.max_outer_iter.value_or(cfg.max_outer_iter));
    cfg.damping = damping.value_or(file.damping.value_or(cfg.damping));
    auto run = run_simulate(state, file.scenario, cfg);
    if (out) {
        fs::create_directories(*out);
        write_simulation(run, "", *out);
    }
    return outcome_dict(run.solution.outcome);
}

py::list verify(const fs::path& run, double decomposition_tol, double clearing_tol, double foc_tol,
                std::optional<double> price_tol, std::optional<double> sd_tol) {
    VerifyOptions o{decomposition_tol, clearing_tol, foc_tol, price_tol, sd_tol};
    py::list out;
    for (const auto& c : verify_run(run, o).checks) {
        py::dict x;
        x["name"] = c.name;
        x["passed"] = c.passed;
        x["magnitude"] = c.magnitude;
        x["tolerance"] = c.tolerance;
        x["detail"] = c.detail;
        out.append(x);
    }
    return out;
}

py::dict fit(const std::vector<double>& y, const std::vector<std::pair<std::string, std::vector<double>>>& covariates,
             const std::vector<std::pair<std::string, std::vector<int>>>& fes, std::optional<std::vector<double>> offset,
             std::optional<std::vector<int>> cluster) {
    PpmlProblem p;
    p.y = y;
    for (const auto& [name, values] : covariates) p.covariates.push_back({name, values});
    for (const auto& [name, levels] : fes) {
        int n = levels.empty() ? 0 : *std::max_element(levels.begin(), levels.end()) + 1;
        p.fes.push_back(FeSpec{name, levels, n, {}, 0});
    }
    if (offset) p.offset = *offset;
    if (cluster) p.cluster = *cluster;
    auto f = fit_ppml(p);
    py::dict d;
    py::dict beta, se;
    for (std::size_t k = 0; k < f.names.size(); ++k) {
        beta[py::str(f.names[k])] = f.beta[k];
        if (!f.se_clustered.empty()) se[py::str(f.names[k])] = f.se_clustered[k];
    }
    d["beta"] = beta;
    d["se_clustered"] = se;
    d["intercept"] = f.intercept;
    d["fitted"] = f.fitted;
    d["iterations"] = f.diagnostics.iterations;
    d["warnings"] = f.diagnostics.warnings;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Structural gravity estimation and GE counterfactuals";

    static py::exception<InputError> input_error(m, "InputError", PyExc_ValueError);
    static py::exception<EstimationError> estimation_error(m, "EstimationError", PyExc_RuntimeError);
    static py::exception<GeConvergenceError> convergence_error(m, "GeConvergenceError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const InputError& e) {
            PyErr_SetString(input_error.ptr(), e.what());
        } catch (const EstimationError& e) {
            PyErr_SetString(estimation_error.ptr(), e.what());
        } catch (const GeConvergenceError& e) {
            PyErr_SetString(convergence_error.ptr(), e.what());
        }
    });

    m.def("percent_effect", &percent_effect, py::arg("beta"), "100 * (exp(beta) - 1)");
    m.def("format_display", &report::format_display, py::arg("value"), "Two-decimal table formatting");
    m.def("synth", &synth, py::arg("out"), py::arg("n_countries") = 10,
          py::arg("years") = std::vector<int>{2000, 2004, 2008}, py::arg("beta") = 0.5, py::arg("sigma") = 7.0,
          py::arg("seed") = 1, py::arg("noise_cv") = 0.0, py::arg("fta_share") = 0.3, py::arg("zero_share") = 0.0,
          "Write a synthetic panel and its ground truth to `out`");
    m.def("estimate", &estimate, py::arg("data"), py::arg("out") = py::none(), py::arg("reference") = "DEU",
          py::arg("stage2_weights") = "uniform", py::arg("sigma") = 7.0,
          "Stage-1 PPML, cost recovery and completion on the panel in `data`");
    m.def("simulate", &simulate, py::arg("baseline"), py::arg("scenario"), py::arg("out") = py::none(),
          py::arg("sigma") = py::none(), py::arg("price_tol") = py::none(), py::arg("sd_tol") = py::none(),
          py::arg("max_outer_iter") = py::none(), py::arg("damping") = py::none(),
          "Conditional and full-endowment GE for a scenario file");
    m.def("verify", &verify, py::arg("run"), py::arg("decomposition_tol") = 1e-8, py::arg("clearing_tol") = 1e-8,
          py::arg("foc_tol") = 1e-8, py::arg("price_tol") = py::none(), py::arg("sd_tol") = py::none(),
          "Re-check the invariants of a run directory");
    m.def("fit_ppml", &fit, py::arg("y"), py::arg("covariates") = std::vector<std::pair<std::string, std::vector<double>>>{},
          py::arg("fes") = std::vector<std::pair<std::string, std::vector<int>>>{}, py::arg("offset") = py::none(),
          py::arg("cluster") = py::none(), "PPML with categorical fixed effects");
}
