#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "geppml/country.hpp"
#include "geppml/panel.hpp"

namespace geppml {

enum class EditAction { Drop, Add };

struct ScenarioEdit {
    CountryCode a;
    CountryCode b;
    EditAction action = EditAction::Drop;
};

/// A counterfactual: FTA edits applied symmetrically at one evaluation year.
struct Scenario {
    std::string name;
    std::vector<ScenarioEdit> edits;
    int evaluation_year = 0;
    CountryCode reference;

    /// Throws InputError on a self-pair, a duplicate unordered pair, or a
    /// country (edit or reference) missing from `countries`.
    void validate(const CountryRegistry& countries) const;
};

/// Directed FTA indicator for one year, row = exporter.
struct FtaMatrix {
    CountryRegistry countries;
    std::vector<std::uint8_t> values;

    int at(std::size_t i, std::size_t j) const { return values[i * countries.size() + j]; }
    bool operator==(const FtaMatrix&) const = default;
};

/// Indicator in force in `year` according to the panel's FTA table.
FtaMatrix fta_matrix(const IntervalPanel& panel, int year);

/// Sets both directions of every edited pair: drop -> 0, add -> 1.
FtaMatrix apply_edits(const FtaMatrix& baseline, const std::vector<ScenarioEdit>& edits);

/// Counterfactual indicator at the scenario's evaluation year. The panel is
/// not modified.
FtaMatrix apply_scenario(const IntervalPanel& panel, const Scenario& scenario);

/// One add edit per (acceding, member) pair.
Scenario accession_scenario(const std::vector<CountryCode>& members, const CountryCode& acceding,
                            std::string name = "accession", int evaluation_year = 0,
                            CountryCode reference = CountryCode("DEU"));

/// A scenario file: the scenario plus the solver settings it pins. Settings
/// left out of the file stay empty and fall back to the solver defaults.
struct ScenarioFile {
    Scenario scenario;
    std::optional<double> sigma;
    std::optional<double> price_tol;
    std::optional<double> sd_tol;
    std::optional<int> max_outer_iter;
    std::optional<double> damping;
};

/// Parses a TOML scenario file:
///
///     name = "drop-chl-usa"
///     evaluation_year = 2004
///     reference_country = "DEU"
///     sigma = 7
///     drop = [["CHL", "USA"]]
///     add = []
///     [accession]            # optional; expands to add edits
///     acceding = "CHL"
///     members = ["JPN", "AUS"]
///     [tolerances]
///     price = 1e-3
///     sd = 1e-3
///     max_outer_iter = 100
///     damping = 0.5
ScenarioFile load_scenario(const std::filesystem::path& file);
ScenarioFile parse_scenario(std::string_view text, const std::string& source = "<scenario>");

}  // namespace geppml
