// geppml: estimate, complete costs, simulate and verify FTA counterfactuals.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "geppml/csv.hpp"
#include "geppml/error.hpp"
#include "geppml/pipeline.hpp"
#include "geppml/synth.hpp"

namespace fs = std::filesystem;
using namespace geppml;

namespace {

enum Exit { kOk = 0, kInput = 1, kEstimation = 2, kNoConvergence = 3, kVerifyFailed = 4 };

std::string num(double v) { return csv::format_exact(v); }

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct SynthArgs {
    std::string out;
    SynthConfig cfg;
    std::string years = "2000,2004,2008";
    std::string codes;
    std::string sizes;
    bool no_intra = false;
};

int run_synth(const SynthArgs& a) {
    SynthConfig cfg = a.cfg;
    cfg.years.clear();
    for (const auto& y : split(a.years)) cfg.years.push_back(std::stoi(y));
    cfg.codes = split(a.codes);
    for (const auto& s : split(a.sizes)) cfg.size_scale.push_back(std::stod(s));
    cfg.intra_national = !a.no_intra;
    auto world = synth_world(cfg);
    fs::create_directories(a.out);
    write_panel(world.panel, a.out);
    write_truth(world.truth, fs::path(a.out) / "truth.csv");
    Manifest m;
    m.command = "synth";
    m.seed = cfg.seed;
    m.config = {{"countries", std::to_string(world.panel.n_countries())},
                {"years", a.years},
                {"beta_fta", num(cfg.beta_fta)},
                {"sigma", num(cfg.sigma)},
                {"noise_cv", num(cfg.noise_cv)}};
    m.write(a.out, {"flows.csv", "covariates.csv", "fta.csv", "truth.csv"});
    std::cout << "wrote " << world.panel.observations.size() << " observations for "
              << world.panel.n_countries() << " countries to " << a.out << '\n';
    return kOk;
}

struct EstimateArgs {
    std::string data, flows, covariates, fta, out, reference = "DEU", weights = "uniform";
    std::optional<int> start, end, interval;
    double sigma = 7.0;
};

int run_estimate_cmd(const EstimateArgs& a) {
    fs::path flows = a.flows.empty() ? fs::path(a.data) / "flows.csv" : fs::path(a.flows);
    fs::path cov = a.covariates.empty() ? fs::path(a.data) / "covariates.csv" : fs::path(a.covariates);
    fs::path fta = a.fta.empty() ? fs::path(a.data) / "fta.csv" : fs::path(a.fta);
    EstimateOptions o;
    o.reference = CountryCode(a.reference);
    o.start_year = a.start;
    o.end_year = a.end;
    o.interval = a.interval;
    o.sigma = a.sigma;
    if (a.weights == "volume") {
        o.weights = Stage2Weights::TradeVolume;
    } else if (a.weights != "uniform") {
        throw InputError("--stage2-weights must be 'uniform' or 'volume'");
    }
    auto panel = apply_window(load_panel(flows, cov, fta), o);
    auto r = run_estimate(panel, o);

    Manifest m;
    m.command = "estimate";
    m.inputs = {flows, cov, fta};
    m.config = {{"reference", a.reference},
                {"start_year", a.start ? std::to_string(*a.start) : ""},
                {"end_year", a.end ? std::to_string(*a.end) : ""},
                {"interval", a.interval ? std::to_string(*a.interval) : ""},
                {"stage2_weights", a.weights},
                {"sigma", num(a.sigma)}};
    fs::path out(a.out);
    fs::create_directories(out);
    report::write_summary(r.summary, out / "fit_summary.csv");
    report::write_coefficients({{"stage1", &r.stage1.fit}, {"stage2", &r.stage2.fit}}, out / "coefficients.csv");
    write_costs(r.costs, out / "costs.csv");
    save_baseline(r.state(m.id()), out / "baseline.json");
    m.write(out, {"fit_summary.csv", "coefficients.csv", "costs.csv", "baseline.json"});
    report::print_summary(std::cout, r.summary);
    for (const auto& w : r.stage1.fit.diagnostics.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& w : r.stage2.fit.diagnostics.warnings) std::cerr << "warning: " << w << '\n';
    return kOk;
}

struct CostsArgs {
    std::string baseline, export_to, import_from, out;
};

int run_costs(const CostsArgs& a) {
    auto state = load_baseline(a.baseline);
    if (!a.export_to.empty()) {
        write_costs(state.costs, a.export_to);
        std::cout << "wrote " << a.export_to << '\n';
    }
    if (!a.import_from.empty()) {
        state.costs = read_costs(a.import_from, state.panel.countries, state.costs.sigma);
        fs::path out = a.out.empty() ? fs::path(a.baseline) : fs::path(a.out);
        Manifest m;
        m.command = "costs";
        m.inputs = {a.baseline, a.import_from};
        state.manifest_id = m.id();
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        save_baseline(state, out);
        std::cout << "baseline with imported costs written to " << out.string() << '\n';
    }
    if (a.export_to.empty() && a.import_from.empty()) throw InputError("costs needs --export or --import");
    return kOk;
}

struct SimulateArgs {
    std::string baseline, scenario, out;
    std::optional<double> sigma, price_tol, sd_tol, damping;
    std::optional<int> max_outer_iter, year;
    std::optional<std::string> reference;
};

int run_simulate_cmd(const SimulateArgs& a) {
    auto state = load_baseline(a.baseline);
    auto file = load_scenario(a.scenario);
    auto sc = file.scenario;
    if (a.year) sc.evaluation_year = *a.year;
    if (a.reference) sc.reference = CountryCode(*a.reference);
    GeConfig cfg;
    cfg.sigma = a.sigma.value_or(file.sigma.value_or(state.costs.sigma));
    cfg.price_tol = a.price_tol.value_or(file.price_tol.value_or(cfg.price_tol));
    cfg.sd_tol = a.sd_tol.value_or(file.sd_tol.value_or(cfg.sd_tol));
    cfg.max_outer_iter = a.max_outer_iter.value_or(file.max_outer_iter.value_or(cfg.max_outer_iter));
    cfg.damping = a.damping.value_or(file.damping.value_or(cfg.damping));

    Manifest m;
    m.command = "simulate";
    m.inputs = {a.baseline, a.scenario};
    m.config = {{"sigma", num(cfg.sigma)},
                {"price_tol", num(cfg.price_tol)},
                {"sd_tol", num(cfg.sd_tol)},
                {"max_outer_iter", std::to_string(cfg.max_outer_iter)},
                {"damping", num(cfg.damping)},
                {"reference", sc.reference.str()},
                {"evaluation_year", std::to_string(sc.evaluation_year)}};
    fs::path out(a.out);
    fs::create_directories(out);
    try {
        auto run = run_simulate(state, sc, cfg);
        write_simulation(run, m.id(), out);
        m.write(out, {"outcome.csv", "outcome_display.csv", "trace.csv", "ge_state.json"});
        const auto& o = run.solution.outcome;
        std::cout << "scenario " << sc.name << " (year " << sc.evaluation_year << ", sigma " << num(cfg.sigma)
                  << ", reference " << sc.reference.str() << ")\n";
        std::cout << "exporter cond full rgdp imr omr prices\n";
        for (const auto& r : o.rows) std::cout << report::display_row(r) << '\n';
        std::cout << "converged in " << o.iterations << " iterations: d=" << num(o.final_d)
                  << " sd=" << num(o.final_sd) << '\n';
    } catch (const GeConvergenceError& e) {
        report::write_trace(e.trace(), out / "trace.csv");
        m.write(out, {"trace.csv"});
        throw;
    }
    return kOk;
}

struct VerifyArgs {
    std::string run;
    VerifyOptions opts;
};

int run_verify(const VerifyArgs& a) {
    auto rep = verify_run(a.run, a.opts);
    std::printf("tolerances: decomposition=%g clearing=%g foc=%g", a.opts.decomposition_tol, a.opts.clearing_tol,
                a.opts.foc_tol);
    if (a.opts.price_tol) std::printf(" price=%g", *a.opts.price_tol);
    if (a.opts.sd_tol) std::printf(" sd=%g", *a.opts.sd_tol);
    std::printf("\n");
    for (const auto& c : rep.checks) {
        std::printf("%s %-24s %.3e (tol %.3e)%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.magnitude,
                    c.tolerance, c.detail.empty() ? "" : "  ", c.detail.c_str());
    }
    return rep.passed() ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structural gravity estimation and GE counterfactuals for FTA scenarios"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic panel with known parameters");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--countries", sa.cfg.n_countries, "Number of countries")->capture_default_str();
    synth->add_option("--years", sa.years, "Comma-separated years")->capture_default_str();
    synth->add_option("--beta", sa.cfg.beta_fta, "Planted FTA coefficient")->capture_default_str();
    synth->add_option("--sigma", sa.cfg.sigma, "Trade elasticity")->capture_default_str();
    synth->add_option("--seed", sa.cfg.seed, "Random seed")->capture_default_str();
    synth->add_option("--noise-cv", sa.cfg.noise_cv, "Multiplicative noise coefficient of variation")->capture_default_str();
    synth->add_option("--zero-share", sa.cfg.zero_pair_share, "Share of never-trading pairs")->capture_default_str();
    synth->add_option("--fta-share", sa.cfg.fta_share, "Share of pairs signing an FTA")->capture_default_str();
    synth->add_option("--codes", sa.codes, "Comma-separated country codes");
    synth->add_option("--sizes", sa.sizes, "Comma-separated output multipliers, same order as --codes");
    synth->add_flag("--no-intra", sa.no_intra, "Omit intra-national flows");

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "Fit the baseline gravity model and complete trade costs");
    est->add_option("--data", ea.data, "Directory holding flows.csv, covariates.csv and fta.csv");
    est->add_option("--flows", ea.flows, "Flows file");
    est->add_option("--covariates", ea.covariates, "Covariates file");
    est->add_option("--fta", ea.fta, "FTA file");
    est->add_option("--out", ea.out, "Output directory")->required();
    est->add_option("--start", ea.start, "First year of the window");
    est->add_option("--end", ea.end, "Last year of the window");
    est->add_option("--interval", ea.interval, "Year spacing of the window");
    est->add_option("--reference", ea.reference, "Reference country")->capture_default_str();
    est->add_option("--stage2-weights", ea.weights, "uniform or volume")->capture_default_str();
    est->add_option("--sigma", ea.sigma, "Trade elasticity recorded with the costs")->capture_default_str();

    CostsArgs ca;
    auto* costs = app.add_subcommand("costs", "Export or replace the completed cost matrix");
    costs->add_option("--baseline", ca.baseline, "baseline.json from estimate")->required();
    costs->add_option("--export", ca.export_to, "Write costs to this CSV");
    costs->add_option("--import", ca.import_from, "Read costs from this CSV");
    costs->add_option("--out", ca.out, "Where to write the updated baseline (default: in place)");

    SimulateArgs sma;
    auto* sim = app.add_subcommand("simulate", "Solve a counterfactual scenario");
    sim->add_option("--baseline", sma.baseline, "baseline.json from estimate")->required();
    sim->add_option("--scenario", sma.scenario, "Scenario TOML file")->required();
    sim->add_option("--out", sma.out, "Output directory")->required();
    sim->add_option("--sigma", sma.sigma, "Trade elasticity");
    sim->add_option("--price-tol", sma.price_tol, "Tolerance on d");
    sim->add_option("--sd-tol", sma.sd_tol, "Tolerance on sd(s)");
    sim->add_option("--max-outer-iter", sma.max_outer_iter, "Outer iteration limit");
    sim->add_option("--damping", sma.damping, "Price step damping in (0, 1]");
    sim->add_option("--year", sma.year, "Evaluation year");
    sim->add_option("--reference", sma.reference, "Reference country");

    VerifyArgs va;
    auto* ver = app.add_subcommand("verify", "Re-check invariants on a run directory");
    ver->add_option("--run", va.run, "Directory written by estimate or simulate")->required();
    ver->add_option("--decomp-tol", va.opts.decomposition_tol, "Decomposition identity tolerance")->capture_default_str();
    ver->add_option("--clearing-tol", va.opts.clearing_tol, "Market clearing tolerance")->capture_default_str();
    ver->add_option("--foc-tol", va.opts.foc_tol, "Adding-up tolerance")->capture_default_str();
    ver->add_option("--price-tol", va.opts.price_tol, "Stopping-rule tolerance on d");
    ver->add_option("--sd-tol", va.opts.sd_tol, "Stopping-rule tolerance on sd(s)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInput;
    }

    try {
        if (*synth) return run_synth(sa);
        if (*est) return run_estimate_cmd(ea);
        if (*costs) return run_costs(ca);
        if (*sim) return run_simulate_cmd(sma);
        if (*ver) return run_verify(va);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInput;
    } catch (const EstimationError& e) {
        std::cerr << "estimation failed: " << e.what() << '\n';
        return kEstimation;
    } catch (const GeConvergenceError& e) {
        std::cerr << "GE solver failed: " << e.what() << " (trace written)\n";
        return kNoConvergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: bad number: " << e.what() << '\n';
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInput;
    }
    return kInput;
}
