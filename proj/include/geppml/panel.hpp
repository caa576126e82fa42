#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "geppml/country.hpp"

namespace geppml {

/// One exporter -> importer flow in one year. Country fields index into the
/// owning panel's registry.
struct TradeObservation {
    std::size_t exporter = 0;
    std::size_t importer = 0;
    int year = 0;
    double flow = 0.0;  // >= 0; explicit zeros are kept, absent pairs are missing
    int fta = 0;        // 0 or 1

    bool intra_national() const noexcept { return exporter == importer; }
};

struct GravityCovariates {
    double log_dist = 0.0;
    int cntg = 0;
    int lang = 0;
    int clny = 0;
};

/// Validated bilateral panel. A loaded panel is immutable in practice; every
/// transformation returns a new value.
///
/// Observations are kept sorted by (year, exporter, importer) and that key is
/// unique. `interval` is the common spacing of `years`, or 0 when the source
/// years are irregular (only possible for panels straight from load_panel).
struct IntervalPanel {
    CountryRegistry countries;
    std::vector<int> years;
    int interval = 0;
    std::vector<TradeObservation> observations;
    /// Dense n*n table, row = exporter.
    std::vector<std::optional<GravityCovariates>> covariates;
    /// (exporter, importer, year) keys listed with fta = 1, for every year of
    /// the FTA file, whether or not a flow was recorded.
    std::set<std::tuple<std::size_t, std::size_t, int>> fta_in_force;

    std::size_t n_countries() const noexcept { return countries.size(); }
    const GravityCovariates* covariates_for(std::size_t exporter, std::size_t importer) const;
    int fta(std::size_t exporter, std::size_t importer, int year) const;
    bool has_intra_national() const;
    bool has_year(int year) const;
    /// Observations of one year, in (exporter, importer) order.
    std::vector<TradeObservation> cross_section(int year) const;
};

/// Reads the three input files. The registry is the set of countries named in
/// the flows file; covariates and FTA rows must refer to registry countries.
IntervalPanel load_panel(const std::filesystem::path& flows_file,
                         const std::filesystem::path& covariates_file,
                         const std::filesystem::path& fta_file);

/// Keeps years {start, start + interval, ..., end}. Throws InputError listing
/// every requested year missing from the source.
IntervalPanel build_interval_panel(const IntervalPanel& panel, int start_year, int end_year,
                                   int interval);

/// Writes flows.csv, covariates.csv and fta.csv into `dir` using the same
/// formats load_panel reads. Values are written in shortest round-trip form.
void write_panel(const IntervalPanel& panel, const std::filesystem::path& dir);

}  // namespace geppml
