#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "geppml/ge.hpp"
#include "geppml/panel.hpp"
#include "geppml/report.hpp"
#include "geppml/scenario.hpp"
#include "geppml/trade_costs.hpp"

namespace geppml {

struct EstimateOptions {
    CountryCode reference{"DEU"};
    std::optional<int> start_year;
    std::optional<int> end_year;
    std::optional<int> interval;
    Stage2Weights weights = Stage2Weights::Uniform;
    double sigma = 7.0;
    PpmlOptions ppml;
};

/// What estimate hands to simulate and verify: the panel it ran on, the
/// stage-1 result and the completed cost matrix.
struct BaselineState {
    IntervalPanel panel;
    CountryCode reference;
    double beta_fta = 0.0;
    double se_fta = 0.0;
    CostMatrix costs;
    std::vector<double> stage1_fitted;  // per panel observation
    std::vector<std::string> stage2_names;
    std::vector<double> stage2_beta;
    std::string manifest_id;
};

struct EstimateResult {
    IntervalPanel panel;
    BaselineFit stage1;
    PartialCosts partial;
    Stage2Fit stage2;
    CostMatrix costs;
    std::vector<report::SummaryRow> summary;

    BaselineState state(std::string manifest_id = {}) const;
};

/// Restricts `panel` to the requested window when any bound is given.
IntervalPanel apply_window(const IntervalPanel& panel, const EstimateOptions& options);

/// Stage 1, pair-effect costs, stage 2 and completion on an already windowed panel.
EstimateResult run_estimate(const IntervalPanel& panel, const EstimateOptions& options);

void save_baseline(const BaselineState& state, const std::filesystem::path& file);
BaselineState load_baseline(const std::filesystem::path& file);

struct SimulationRun {
    Scenario scenario;
    GeConfig config;
    GeBaseline base;
    GeSolution solution;
};

/// Applies the scenario to the stored baseline and solves both GE variants.
SimulationRun run_simulate(const BaselineState& state, const Scenario& scenario, const GeConfig& config);

/// outcome.csv, outcome_display.csv, trace.csv and ge_state.json.
void write_simulation(const SimulationRun& run, const std::string& manifest_id,
                      const std::filesystem::path& dir);

/// Run provenance. The id depends only on the command, input contents and
/// configuration so that repeated runs agree; the manifest file additionally
/// carries paths, output digests and a timestamp.
struct Manifest {
    std::string command;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::pair<std::string, std::string>> config;
    std::optional<std::uint64_t> seed;

    std::string id() const;
    /// Writes dir/manifest.json listing `outputs` (file names inside dir).
    void write(const std::filesystem::path& dir, const std::vector<std::string>& outputs) const;
};

struct VerifyOptions {
    double decomposition_tol = 1e-8;
    double clearing_tol = 1e-8;
    double foc_tol = 1e-8;
    /// Stopping-rule tolerances; the run's own settings when empty.
    std::optional<double> price_tol;
    std::optional<double> sd_tol;
};

struct VerifyCheck {
    std::string name;
    bool passed = false;
    double magnitude = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    bool passed() const;
};

/// Re-checks whatever artifacts `dir` holds: stage-1 adding-up from
/// baseline.json; decomposition identity, market clearing, constrained-fit
/// adding-up and the stopping rule from ge_state.json, outcome.csv and trace.csv.
VerifyReport verify_run(const std::filesystem::path& dir, const VerifyOptions& options = {});

}  // namespace geppml
