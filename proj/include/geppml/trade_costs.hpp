#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geppml/panel.hpp"
#include "geppml/ppml.hpp"

namespace geppml {

/// Names of the fixed-effect dimensions used throughout the pipeline.
inline constexpr const char* kExporterYear = "exporter-year";
inline constexpr const char* kImporterYear = "importer-year";
inline constexpr const char* kPair = "pair";
inline constexpr const char* kExporter = "exporter";
inline constexpr const char* kImporter = "importer";
inline constexpr const char* kFta = "FTA";

/// Stage-1 panel fit: FTA coefficient with exporter-year, importer-year and
/// pair fixed effects, errors clustered by pair.
struct BaselineFit {
    PpmlProblem problem;
    PpmlFit fit;
    CountryRegistry countries;
    std::vector<int> years;
    std::size_t reference = 0;
    /// Observation i of `problem` is panel observation obs_index[i].
    std::vector<std::size_t> obs_index;

    double beta_fta() const { return fit.beta.at(0); }
    double se_fta() const { return fit.se_clustered.empty() ? 0.0 : fit.se_clustered.at(0); }
};

/// Estimates the panel gravity equation on every observation of `panel`.
/// Pair levels are indexed exporter * n + importer; exporter-year levels
/// exporter * T + t. The reference country (latest year for time-interacted
/// dimensions) is pinned to zero.
BaselineFit fit_baseline(const IntervalPanel& panel, const CountryCode& reference,
                         const PpmlOptions& options = {});

enum class CostSource { Estimated, Predicted, External };

std::string to_string(CostSource s);
CostSource cost_source_from_string(const std::string& s);

/// exp(mu_ij) for identified pairs; NaN where the pair was not identified.
struct PartialCosts {
    CountryRegistry countries;
    std::vector<double> values;  // n*n

    double at(std::size_t i, std::size_t j) const { return values[i * countries.size() + j]; }
    bool identified(std::size_t i, std::size_t j) const;
    std::size_t count() const;
};

/// Complete bilateral t^(1-sigma) matrix. Off-diagonal cells are always
/// present; the diagonal may be absent (NaN) when internal trade is not
/// modelled.
struct CostMatrix {
    CountryRegistry countries;
    std::vector<double> values;  // n*n
    std::vector<CostSource> source;
    double sigma = 7.0;

    std::size_t size() const noexcept { return countries.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
    bool has(std::size_t i, std::size_t j) const;
    bool has_diagonal() const;
    /// Throws InputError unless complete, strictly positive and finite, sigma > 1.
    void validate() const;
};

PartialCosts costs_from_pair_fe(const BaselineFit& baseline);

enum class Stage2Weights { Uniform, TradeVolume };

struct Stage2Fit {
    PpmlProblem problem;
    PpmlFit fit;
    CountryRegistry countries;
    std::size_t reference = 0;
    std::vector<std::size_t> cells;  // i*n+j of each observation

    /// exp(x_ij' beta + intercept + exporter_i + importer_j); throws if the
    /// exporter or importer level was not estimated.
    double predict(std::size_t i, std::size_t j, const GravityCovariates& x) const;
};

/// Names of the stage-2 covariates, in coefficient order.
const std::vector<std::string>& stage2_covariate_names();

/// PPML of the identified cost levels on log distance, contiguity, common
/// language and colonial ties with exporter and importer fixed effects.
/// TradeVolume weights each pair by its total observed flow in `panel`.
Stage2Fit fit_stage2(const PartialCosts& costs, const IntervalPanel& panel, Stage2Weights weights,
                     const CountryCode& reference, const PpmlOptions& options = {});

/// Keeps every identified value and fills the rest with stage-2 predictions.
/// Off-diagonal cells are always filled; a diagonal cell is filled when it is
/// identified or when covariates for it exist.
CostMatrix complete_costs(const PartialCosts& costs, const Stage2Fit& stage2,
                          const IntervalPanel& panel, double sigma = 7.0);

void write_costs(const CostMatrix& costs, const std::filesystem::path& file);
/// Reads `exporter,importer,cost,source`; countries must be in `countries`.
CostMatrix read_costs(const std::filesystem::path& file, const CountryRegistry& countries,
                      double sigma = 7.0);

}  // namespace geppml
