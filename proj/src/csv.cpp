#include "geppml/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

#include "geppml/error.hpp"

namespace geppml::csv {

namespace {

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    for (auto& f : out) {
        auto b = f.find_first_not_of(" \t");
        auto e = f.find_last_not_of(" \t");
        f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += v[i];
    }
    return s;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw InputError(path + ": missing column '" + std::string(name) + "'");
}

Table read(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    Table t;
    t.path = path.string();
    std::string line;
    long lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto fields = split(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            if (!expected_header.empty() && t.header != expected_header) {
                throw InputError(t.path, lineno,
                                 "unexpected header '" + join(t.header) + "', expected '" +
                                     join(expected_header) + "'");
            }
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw InputError(t.path, lineno,
                             "malformed row: expected " + std::to_string(t.header.size()) +
                                 " fields, found " + std::to_string(fields.size()));
        }
        t.rows.push_back(Row{lineno, std::move(fields)});
    }
    if (!have_header) throw InputError(t.path + ": empty file (no header row)");
    return t;
}

double parse_double(std::string_view s, const std::string& file, long line, std::string_view what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
        throw InputError(file, line,
                         "malformed " + std::string(what) + " value '" + std::string(s) + "'");
    }
    return v;
}

long parse_long(std::string_view s, const std::string& file, long line, std::string_view what) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw InputError(file, line,
                         "malformed " + std::string(what) + " value '" + std::string(s) + "'");
    }
    return v;
}

std::string format_exact(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        const auto& f = fields[i];
        if (f.find_first_of(",\"\n") != std::string::npos) {
            out << '"';
            for (char c : f) {
                if (c == '"') out << '"';
                out << c;
            }
            out << '"';
        } else {
            out << f;
        }
    }
    out << '\n';
}

}  // namespace geppml::csv
