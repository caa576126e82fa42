#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geppml/panel.hpp"

namespace geppml {

/// Coefficients of the planted log trade-cost surface
/// log t_ij^(1-sigma) = dist*log_dist + cntg*CNTG + lang*LANG + clny*CLNY.
struct CostCoefficients {
    double dist = -1.0;
    double cntg = 0.5;
    double lang = 0.3;
    double clny = 0.4;
};

/// An FTA forced into the synthetic world, in force from `start_year` onward.
struct PlantedFta {
    std::string a;
    std::string b;
    int start_year = 0;
};

struct SynthConfig {
    int n_countries = 10;
    std::vector<int> years{2000, 2004, 2008};
    double beta_fta = 0.5;
    double sigma = 7.0;
    std::uint64_t seed = 1;
    /// Coefficient of variation of the mean-one lognormal noise; 0 = noiseless.
    double noise_cv = 0.0;
    bool intra_national = true;
    /// Share of international ordered pairs that never trade (explicit zeros).
    double zero_pair_share = 0.0;
    /// Probability that an unordered pair signs an FTA inside the window.
    double fta_share = 0.3;
    CostCoefficients costs;
    /// Optional explicit country codes; default draws from a fixed list.
    std::vector<std::string> codes;
    /// Optional per-country output multipliers (same order as `codes`).
    std::vector<double> size_scale;
    std::vector<PlantedFta> planted_ftas;
};

/// What the generator planted. Per-year vectors are indexed by registry order.
struct GroundTruth {
    double beta_fta = 0.0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    double noise_cv = 0.0;
    CostCoefficients costs;
    std::vector<double> log_cost;                  // n*n, NaN where no pair is modelled
    std::vector<std::vector<double>> output;       // [year][country]
    std::vector<std::vector<double>> expenditure;  // [year][country]
    /// Noiseless flows per year, n*n, for market-clearing checks.
    std::vector<std::vector<double>> clean_flows;
};

struct SynthWorld {
    IntervalPanel panel;
    GroundTruth truth;
};

/// Generates a panel from the structural gravity system with known
/// parameters. Deterministic in `seed`.
SynthWorld synth_world(const SynthConfig& config);

/// `param,value` sidecar with beta_fta, sigma, seed (and the other planted scalars).
void write_truth(const GroundTruth& truth, const std::filesystem::path& file);

}  // namespace geppml
