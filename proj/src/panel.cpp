#include "geppml/panel.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "geppml/csv.hpp"
#include "geppml/error.hpp"

namespace geppml {

namespace {

CountryCode parse_code(const std::string& s, const std::string& file, long line) {
    if (!CountryCode::valid(s)) {
        throw InputError(file, line, "invalid country code '" + s + "'");
    }
    return CountryCode(s);
}

std::size_t resolve(const CountryRegistry& reg, const std::string& s, const std::string& file,
                    long line) {
    auto code = parse_code(s, file, line);
    auto idx = reg.find(code);
    if (!idx) throw InputError(file, line, "unknown country code " + s + " (not in flows file)");
    return *idx;
}

int parse_binary(const std::string& s, const std::string& file, long line, const char* what) {
    long v = csv::parse_long(s, file, line, what);
    if (v != 0 && v != 1) {
        throw InputError(file, line, std::string(what) + " must be 0 or 1, found " + s);
    }
    return static_cast<int>(v);
}

int spacing_of(const std::vector<int>& years) {
    if (years.size() < 2) return 1;
    int step = years[1] - years[0];
    for (std::size_t i = 2; i < years.size(); ++i) {
        if (years[i] - years[i - 1] != step) return 0;
    }
    return step;
}

}  // namespace

const GravityCovariates* IntervalPanel::covariates_for(std::size_t exporter,
                                                       std::size_t importer) const {
    const auto& c = covariates.at(exporter * n_countries() + importer);
    return c ? &*c : nullptr;
}

int IntervalPanel::fta(std::size_t exporter, std::size_t importer, int year) const {
    return fta_in_force.count({exporter, importer, year}) ? 1 : 0;
}

bool IntervalPanel::has_intra_national() const {
    return std::any_of(observations.begin(), observations.end(),
                       [](const TradeObservation& o) { return o.intra_national(); });
}

bool IntervalPanel::has_year(int year) const {
    return std::binary_search(years.begin(), years.end(), year);
}

std::vector<TradeObservation> IntervalPanel::cross_section(int year) const {
    auto lo = std::lower_bound(observations.begin(), observations.end(), year,
                               [](const TradeObservation& o, int y) { return o.year < y; });
    auto hi = std::upper_bound(observations.begin(), observations.end(), year,
                               [](int y, const TradeObservation& o) { return y < o.year; });
    return {lo, hi};
}

IntervalPanel load_panel(const std::filesystem::path& flows_file,
                         const std::filesystem::path& covariates_file,
                         const std::filesystem::path& fta_file) {
    auto flows = csv::read(flows_file, {"exporter", "importer", "year", "flow"});
    auto covs = csv::read(covariates_file, {"exporter", "importer", "log_dist", "cntg", "lang", "clny"});
    auto ftas = csv::read(fta_file, {"exporter", "importer", "year", "fta"});

    struct RawFlow {
        CountryCode exporter, importer;
        int year;
        double flow;
        long line;
    };
    std::vector<RawFlow> raw;
    raw.reserve(flows.rows.size());
    std::vector<CountryCode> codes;
    for (const auto& row : flows.rows) {
        const auto& f = row.fields;
        RawFlow r{parse_code(f[0], flows.path, row.line), parse_code(f[1], flows.path, row.line),
                  static_cast<int>(csv::parse_long(f[2], flows.path, row.line, "year")),
                  csv::parse_double(f[3], flows.path, row.line, "flow"), row.line};
        if (r.flow < 0.0) {
            throw InputError(flows.path, row.line, "negative flow " + f[3] + " for " + f[0] + "->" + f[1]);
        }
        codes.push_back(r.exporter);
        codes.push_back(r.importer);
        raw.push_back(r);
    }
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());

    IntervalPanel panel;
    panel.countries = CountryRegistry(std::move(codes));
    const std::size_t n = panel.countries.size();

    std::map<std::tuple<int, std::size_t, std::size_t>, long> seen;
    panel.observations.reserve(raw.size());
    for (const auto& r : raw) {
        TradeObservation o;
        o.exporter = *panel.countries.find(r.exporter);
        o.importer = *panel.countries.find(r.importer);
        o.year = r.year;
        o.flow = r.flow;
        auto [it, inserted] = seen.emplace(std::make_tuple(o.year, o.exporter, o.importer), r.line);
        if (!inserted) {
            throw InputError(flows.path, r.line,
                             "duplicate key (" + r.exporter.str() + ", " + r.importer.str() + ", " +
                                 std::to_string(r.year) + "), first seen on line " +
                                 std::to_string(it->second));
        }
        panel.observations.push_back(o);
    }
    std::sort(panel.observations.begin(), panel.observations.end(),
              [](const TradeObservation& a, const TradeObservation& b) {
                  return std::tie(a.year, a.exporter, a.importer) < std::tie(b.year, b.exporter, b.importer);
              });
    for (const auto& o : panel.observations) {
        if (panel.years.empty() || panel.years.back() != o.year) panel.years.push_back(o.year);
    }
    panel.interval = spacing_of(panel.years);

    panel.covariates.assign(n * n, std::nullopt);
    for (const auto& row : covs.rows) {
        const auto& f = row.fields;
        auto i = resolve(panel.countries, f[0], covs.path, row.line);
        auto j = resolve(panel.countries, f[1], covs.path, row.line);
        GravityCovariates g;
        g.log_dist = csv::parse_double(f[2], covs.path, row.line, "log_dist");
        if (i != j && !(g.log_dist > 0.0)) {
            throw InputError(covs.path, row.line, "log_dist must be > 0 for distinct countries");
        }
        g.cntg = parse_binary(f[3], covs.path, row.line, "cntg");
        g.lang = parse_binary(f[4], covs.path, row.line, "lang");
        g.clny = parse_binary(f[5], covs.path, row.line, "clny");
        auto& slot = panel.covariates[i * n + j];
        if (slot) throw InputError(covs.path, row.line, "duplicate covariates for " + f[0] + "->" + f[1]);
        slot = g;
    }

    for (const auto& row : ftas.rows) {
        const auto& f = row.fields;
        auto i = resolve(panel.countries, f[0], ftas.path, row.line);
        auto j = resolve(panel.countries, f[1], ftas.path, row.line);
        int year = static_cast<int>(csv::parse_long(f[2], ftas.path, row.line, "year"));
        if (parse_binary(f[3], ftas.path, row.line, "fta") == 1) {
            panel.fta_in_force.emplace(i, j, year);
        }
    }
    for (auto& o : panel.observations) o.fta = panel.fta(o.exporter, o.importer, o.year);
    return panel;
}

IntervalPanel build_interval_panel(const IntervalPanel& panel, int start_year, int end_year,
                                   int interval) {
    if (interval < 1) throw InputError("interval must be >= 1");
    if (start_year > end_year) throw InputError("start year must not exceed end year");
    std::vector<int> wanted;
    for (int y = start_year; y <= end_year; y += interval) wanted.push_back(y);
    std::vector<int> missing;
    for (int y : wanted) {
        if (!panel.has_year(y)) missing.push_back(y);
    }
    if (!missing.empty()) {
        std::string list;
        for (int y : missing) list += (list.empty() ? "" : ", ") + std::to_string(y);
        throw InputError("requested years absent from source panel: " + list);
    }
    IntervalPanel out;
    out.countries = panel.countries;
    out.years = wanted;
    out.interval = interval;
    out.covariates = panel.covariates;
    out.fta_in_force = panel.fta_in_force;
    for (const auto& o : panel.observations) {
        if (std::binary_search(wanted.begin(), wanted.end(), o.year)) out.observations.push_back(o);
    }
    return out;
}

void write_panel(const IntervalPanel& panel, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& reg = panel.countries;
    {
        std::ofstream out(dir / "flows.csv", std::ios::binary);
        out << "exporter,importer,year,flow\n";
        for (const auto& o : panel.observations) {
            csv::write_row(out, {reg[o.exporter].str(), reg[o.importer].str(), std::to_string(o.year),
                                 csv::format_exact(o.flow)});
        }
    }
    {
        std::ofstream out(dir / "covariates.csv", std::ios::binary);
        out << "exporter,importer,log_dist,cntg,lang,clny\n";
        const std::size_t n = reg.size();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const auto* g = panel.covariates_for(i, j);
                if (!g) continue;
                csv::write_row(out, {reg[i].str(), reg[j].str(), csv::format_exact(g->log_dist),
                                     std::to_string(g->cntg), std::to_string(g->lang),
                                     std::to_string(g->clny)});
            }
        }
    }
    {
        std::ofstream out(dir / "fta.csv", std::ios::binary);
        out << "exporter,importer,year,fta\n";
        for (const auto& [i, j, year] : panel.fta_in_force) {
            csv::write_row(out, {reg[i].str(), reg[j].str(), std::to_string(year), "1"});
        }
    }
}

}  // namespace geppml
