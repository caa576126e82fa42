#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "geppml/ge.hpp"
#include "geppml/synth.hpp"
#include "structural_ge.hpp"

namespace support {

namespace fs = std::filesystem;

/// Fresh empty directory under the system temp dir.
inline fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "geppml_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

inline void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    out << text;
}

inline std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline geppml::SynthWorld world(int n, std::uint64_t seed, double noise_cv = 0.0,
                                std::vector<int> years = {2000, 2004, 2008}) {
    geppml::SynthConfig cfg;
    cfg.n_countries = n;
    cfg.seed = seed;
    cfg.noise_cv = noise_cv;
    cfg.years = std::move(years);
    return geppml::synth_world(cfg);
}

/// Cost matrix straight from the planted surface.
inline geppml::CostMatrix planted_costs(const geppml::SynthWorld& w) {
    geppml::CostMatrix c;
    c.countries = w.panel.countries;
    c.sigma = w.truth.sigma;
    for (double v : w.truth.log_cost) c.values.push_back(std::exp(v));
    c.source.assign(c.values.size(), geppml::CostSource::External);
    return c;
}

/// GE baseline on the planted costs and coefficient at the last panel year.
inline geppml::GeBaseline planted_baseline(const geppml::SynthWorld& w, const std::string& reference) {
    return geppml::make_ge_baseline(w.panel, planted_costs(w), w.truth.beta_fta, w.panel.years.back(),
                                    geppml::CountryCode(reference));
}

inline oracle::World oracle_world(const geppml::GeBaseline& b, const std::vector<int>& fta, double sigma) {
    oracle::World w;
    w.n = b.n_countries();
    w.reference = b.reference;
    w.sigma = sigma;
    for (std::size_t k = 0; k < b.cells.size(); ++k) {
        w.exporter.push_back(b.cells[k].exporter);
        w.importer.push_back(b.cells[k].importer);
        w.tau.push_back(std::exp(b.log_cost[k] + b.beta * fta[k]));
    }
    return w;
}

}  // namespace support
