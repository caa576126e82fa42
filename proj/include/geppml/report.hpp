#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "geppml/ge.hpp"
#include "geppml/ppml.hpp"

namespace geppml::report {

/// "%.2f" of the binary value (ties to even), with "-0.00" shown as "0.00".
std::string format_display(double v);

/// Four significant digits, at most four decimals: 0.4383, -1.023, 12.35.
std::string format_estimate(double v);

/// "0.4383*** (0.0987)"; the parenthesis is omitted when se is not finite.
std::string format_coefficient(double beta, double se);

/// 12345 -> "12,345".
std::string format_count(std::size_t n);

inline constexpr const char* kSignifCodes = "***: 0.01, **: 0.05, *: 0.1";

/// `section,name,value` rows shaped like the paper's estimation tables.
struct SummaryRow {
    std::string section;
    std::string name;
    std::string value;
};

std::vector<SummaryRow> fit_summary(const std::string& section, const PpmlFit& fit,
                                    const std::vector<std::string>& fixed_effects);

void write_summary(const std::vector<SummaryRow>& rows, const std::filesystem::path& file);

/// Console rendering of the summary rows, one block per section.
void print_summary(std::ostream& out, const std::vector<SummaryRow>& rows);

/// `stage,name,estimate,std_error,p_value` at full precision.
void write_coefficients(const std::vector<std::pair<std::string, const PpmlFit*>>& fits,
                        const std::filesystem::path& file);

inline const std::vector<std::string>& outcome_header() {
    static const std::vector<std::string> h{"exporter",  "pct_trade_cond", "pct_trade_full", "pct_rgdp",
                                            "pct_imr",   "pct_omr",        "pct_prices"};
    return h;
}

void write_outcome(const std::vector<GeOutcomeRow>& rows, const std::filesystem::path& file);
void write_outcome_display(const std::vector<GeOutcomeRow>& rows, const std::filesystem::path& file);
std::vector<GeOutcomeRow> read_outcome(const std::filesystem::path& file);

/// Whitespace-separated table row: "CHL 5.44 5.64 0.48 -0.29 -0.22 0.19".
std::string display_row(const GeOutcomeRow& row);

/// `iteration,d,sd,max_price_change`.
void write_trace(const std::vector<TraceRow>& trace, const std::filesystem::path& file);
std::vector<TraceRow> read_trace(const std::filesystem::path& file);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& file);

}  // namespace geppml::report
