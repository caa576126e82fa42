#include "geppml/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "geppml/csv.hpp"
#include "geppml/error.hpp"

namespace geppml::report {

std::string format_display(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s(buf);
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string format_estimate(double v) {
    if (!std::isfinite(v)) return "NA";
    int decimals = 4;
    if (v != 0.0) {
        int mag = static_cast<int>(std::floor(std::log10(std::abs(v))));
        decimals = std::clamp(3 - mag, 0, 4);
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
    return s;
}

std::string format_coefficient(double beta, double se) {
    std::string out = format_estimate(beta);
    if (std::isfinite(se) && se > 0.0) {
        out += significance_stars(p_value(beta, se));
        out += " (" + format_estimate(se) + ")";
    }
    return out;
}

std::string format_count(std::size_t n) {
    std::string digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

std::vector<SummaryRow> fit_summary(const std::string& section, const PpmlFit& fit,
                                    const std::vector<std::string>& fixed_effects) {
    std::vector<SummaryRow> rows;
    for (std::size_t k = 0; k < fit.names.size(); ++k) {
        double se = fit.se_clustered.empty() ? NAN : fit.se_clustered[k];
        rows.push_back({section, fit.names[k], format_coefficient(fit.beta[k], se)});
    }
    std::string fes;
    for (const auto& f : fixed_effects) fes += (fes.empty() ? "" : "; ") + f;
    const auto& d = fit.diagnostics;
    char buf[64];
    rows.push_back({section, "Fixed effects", fes});
    rows.push_back({section, "Observations", format_count(d.n_obs)});
    std::snprintf(buf, sizeof buf, "%.5f", d.squared_correlation);
    rows.push_back({section, "Squared Correlation", buf});
    std::snprintf(buf, sizeof buf, "%.5f", d.pseudo_r2);
    rows.push_back({section, "Pseudo R2", buf});
    std::snprintf(buf, sizeof buf, "%.1f", d.bic);
    rows.push_back({section, "BIC", buf});
    rows.push_back({section, "Signif. Codes", kSignifCodes});
    return rows;
}

void write_summary(const std::vector<SummaryRow>& rows, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write " + file.string());
    out << "section,name,value\n";
    for (const auto& r : rows) csv::write_row(out, {r.section, r.name, r.value});
}

void print_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
    std::string current;
    for (const auto& r : rows) {
        if (r.section != current) {
            if (!current.empty()) out << '\n';
            out << r.section << '\n';
            current = r.section;
        }
        out << "  " << std::left << std::setw(22) << r.name << r.value << '\n';
    }
}

void write_coefficients(const std::vector<std::pair<std::string, const PpmlFit*>>& fits,
                        const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write " + file.string());
    out << "stage,name,estimate,std_error,p_value\n";
    for (const auto& [stage, fit] : fits) {
        for (std::size_t k = 0; k < fit->names.size(); ++k) {
            std::string se = "NA", p = "NA";
            if (!fit->se_clustered.empty()) {
                se = csv::format_exact(fit->se_clustered[k]);
                p = csv::format_exact(p_value(fit->beta[k], fit->se_clustered[k]));
            }
            csv::write_row(out, {stage, fit->names[k], csv::format_exact(fit->beta[k]), se, p});
        }
    }
}

namespace {

std::vector<double> columns(const GeOutcomeRow& r) {
    return {r.pct_trade_conditional, r.pct_trade_full, r.pct_rgdp, r.pct_imr, r.pct_omr, r.pct_prices};
}

template <typename Fmt>
void write_rows(const std::vector<GeOutcomeRow>& rows, const std::filesystem::path& file, Fmt fmt) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write " + file.string());
    csv::write_row(out, outcome_header());
    for (const auto& r : rows) {
        std::vector<std::string> f{r.country.str()};
        for (double v : columns(r)) f.push_back(fmt(v));
        csv::write_row(out, f);
    }
}

}  // namespace

void write_outcome(const std::vector<GeOutcomeRow>& rows, const std::filesystem::path& file) {
    write_rows(rows, file, [](double v) { return csv::format_exact(v); });
}

void write_outcome_display(const std::vector<GeOutcomeRow>& rows, const std::filesystem::path& file) {
    write_rows(rows, file, format_display);
}

std::vector<GeOutcomeRow> read_outcome(const std::filesystem::path& file) {
    auto t = csv::read(file, outcome_header());
    std::vector<GeOutcomeRow> out;
    for (const auto& row : t.rows) {
        const auto& f = row.fields;
        if (!CountryCode::valid(f[0])) throw InputError(t.path, row.line, "invalid country code '" + f[0] + "'");
        GeOutcomeRow r;
        r.country = CountryCode(f[0]);
        double* dst[] = {&r.pct_trade_conditional, &r.pct_trade_full, &r.pct_rgdp,
                         &r.pct_imr,               &r.pct_omr,        &r.pct_prices};
        for (std::size_t k = 0; k < 6; ++k) *dst[k] = csv::parse_double(f[k + 1], t.path, row.line, outcome_header()[k + 1]);
        out.push_back(r);
    }
    return out;
}

std::string display_row(const GeOutcomeRow& row) {
    std::string s = row.country.str();
    for (double v : columns(row)) s += " " + format_display(v);
    return s;
}

void write_trace(const std::vector<TraceRow>& trace, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write " + file.string());
    out << "iteration,d,sd,max_price_change\n";
    for (const auto& r : trace) {
        csv::write_row(out, {std::to_string(r.iteration), csv::format_exact(r.d), csv::format_exact(r.sd),
                             csv::format_exact(r.max_price_change)});
    }
}

std::vector<TraceRow> read_trace(const std::filesystem::path& file) {
    auto t = csv::read(file, {"iteration", "d", "sd", "max_price_change"});
    std::vector<TraceRow> out;
    for (const auto& row : t.rows) {
        TraceRow r;
        r.iteration = static_cast<int>(csv::parse_long(row.fields[0], t.path, row.line, "iteration"));
        r.d = csv::parse_double(row.fields[1], t.path, row.line, "d");
        r.sd = csv::parse_double(row.fields[2], t.path, row.line, "sd");
        r.max_price_change = csv::parse_double(row.fields[3], t.path, row.line, "max_price_change");
        out.push_back(r);
    }
    return out;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_digest(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a_hex(bytes);
}

}  // namespace geppml::report
