#include "geppml/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <toml.hpp>

#include "geppml/error.hpp"

namespace geppml {

void Scenario::validate(const CountryRegistry& countries) const {
    if (!countries.find(reference)) {
        throw InputError("reference country " + reference.str() + " is not in the panel");
    }
    std::set<std::pair<CountryCode, CountryCode>> seen;
    for (const auto& e : edits) {
        if (e.a == e.b) throw InputError("scenario edit pairs " + e.a.str() + " with itself");
        for (const auto& c : {e.a, e.b}) {
            if (!countries.find(c)) throw InputError("scenario edit references unknown country " + c.str());
        }
        auto key = std::minmax(e.a, e.b);
        if (!seen.insert(key).second) {
            throw InputError("scenario lists the pair " + key.first.str() + "-" + key.second.str() + " twice");
        }
    }
}

FtaMatrix fta_matrix(const IntervalPanel& panel, int year) {
    const std::size_t n = panel.n_countries();
    FtaMatrix m;
    m.countries = panel.countries;
    m.values.assign(n * n, 0);
    for (const auto& [i, j, y] : panel.fta_in_force) {
        if (y == year) m.values[i * n + j] = 1;
    }
    return m;
}

FtaMatrix apply_edits(const FtaMatrix& baseline, const std::vector<ScenarioEdit>& edits) {
    FtaMatrix out = baseline;
    const std::size_t n = out.countries.size();
    for (const auto& e : edits) {
        auto i = out.countries.index_of(e.a);
        auto j = out.countries.index_of(e.b);
        std::uint8_t v = e.action == EditAction::Add ? 1 : 0;
        out.values[i * n + j] = v;
        out.values[j * n + i] = v;
    }
    return out;
}

FtaMatrix apply_scenario(const IntervalPanel& panel, const Scenario& scenario) {
    scenario.validate(panel.countries);
    if (!panel.has_year(scenario.evaluation_year)) {
        throw InputError("evaluation year " + std::to_string(scenario.evaluation_year) + " is not in the panel");
    }
    return apply_edits(fta_matrix(panel, scenario.evaluation_year), scenario.edits);
}

Scenario accession_scenario(const std::vector<CountryCode>& members, const CountryCode& acceding,
                            std::string name, int evaluation_year, CountryCode reference) {
    if (members.empty()) throw InputError("accession needs at least one member");
    if (std::find(members.begin(), members.end(), acceding) != members.end()) {
        throw InputError(acceding.str() + " is already a member");
    }
    Scenario s;
    s.name = std::move(name);
    s.evaluation_year = evaluation_year;
    s.reference = reference;
    for (const auto& m : members) s.edits.push_back({acceding, m, EditAction::Add});
    return s;
}

namespace {

CountryCode code_of(const toml::node& node, const std::string& source) {
    auto s = node.value<std::string>();
    if (!s) throw InputError(source + ": country codes must be strings");
    if (!CountryCode::valid(*s)) throw InputError(source + ": invalid country code '" + *s + "'");
    return CountryCode(*s);
}

void read_pairs(const toml::table& t, const char* key, EditAction action, const std::string& source,
                std::vector<ScenarioEdit>& out) {
    const auto* node = t.get(key);
    if (!node) return;
    const auto* arr = node->as_array();
    if (!arr) throw InputError(source + ": '" + key + "' must be an array of [a, b] pairs");
    for (const auto& item : *arr) {
        const auto* pair = item.as_array();
        if (!pair || pair->size() != 2) {
            throw InputError(source + ": each '" + key + "' entry must be a two-element array");
        }
        out.push_back({code_of(*pair->get(0), source), code_of(*pair->get(1), source), action});
    }
}

template <typename T>
std::optional<T> optional_number(const toml::table& t, const char* key, const std::string& source) {
    const auto* node = t.get(key);
    if (!node) return std::nullopt;
    if constexpr (std::is_same_v<T, int>) {
        auto v = node->value<int64_t>();
        if (!v) throw InputError(source + ": '" + key + "' must be an integer");
        return static_cast<int>(*v);
    } else {
        auto v = node->value<double>();
        if (!v) throw InputError(source + ": '" + key + "' must be a number");
        return *v;
    }
}

}  // namespace

ScenarioFile parse_scenario(std::string_view text, const std::string& source) {
    toml::table t;
    try {
        t = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << source << ":" << e.source().begin.line << ": " << e.description();
        throw InputError(msg.str());
    }
    ScenarioFile f;
    auto& s = f.scenario;
    s.name = t["name"].value_or(std::string("scenario"));
    auto year = t["evaluation_year"].value<int64_t>();
    if (!year) throw InputError(source + ": missing integer 'evaluation_year'");
    s.evaluation_year = static_cast<int>(*year);
    auto ref = t["reference_country"].value<std::string>();
    if (!ref) throw InputError(source + ": missing 'reference_country'");
    if (!CountryCode::valid(*ref)) throw InputError(source + ": invalid reference country '" + *ref + "'");
    s.reference = CountryCode(*ref);
    read_pairs(t, "drop", EditAction::Drop, source, s.edits);
    read_pairs(t, "add", EditAction::Add, source, s.edits);
    if (const auto* acc = t["accession"].as_table()) {
        const auto* who = acc->get("acceding");
        const auto* members = acc->get_as<toml::array>("members");
        if (!who || !members) throw InputError(source + ": [accession] needs 'acceding' and 'members'");
        std::vector<CountryCode> list;
        for (const auto& m : *members) list.push_back(code_of(m, source));
        auto expanded = accession_scenario(list, code_of(*who, source));
        s.edits.insert(s.edits.end(), expanded.edits.begin(), expanded.edits.end());
    }
    f.sigma = optional_number<double>(t, "sigma", source);
    if (const auto* tol = t["tolerances"].as_table()) {
        f.price_tol = optional_number<double>(*tol, "price", source);
        f.sd_tol = optional_number<double>(*tol, "sd", source);
        f.max_outer_iter = optional_number<int>(*tol, "max_outer_iter", source);
        f.damping = optional_number<double>(*tol, "damping", source);
    }
    return f;
}

ScenarioFile load_scenario(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), file.string());
}

}  // namespace geppml
