#include "geppml/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "geppml/csv.hpp"
#include "geppml/error.hpp"

namespace geppml {

namespace {

constexpr const char* kDefaultCodes[] = {
    "AUS", "CHL", "DEU", "JPN", "MEX", "USA", "CAN", "CHN", "FRA", "GBR", "KOR", "BRA",
    "ARG", "CHE", "ESP", "IDN", "IND", "ITA", "MYS", "NLD", "NZL", "PER", "POL", "RUS",
    "SGP", "SWE", "THA", "TUR", "VNM", "ZAF"};

std::vector<std::string> default_codes(int n) {
    std::vector<std::string> out;
    for (const char* c : kDefaultCodes) {
        if (static_cast<int>(out.size()) == n) return out;
        out.emplace_back(c);
    }
    for (char a = 'A'; a <= 'Z' && static_cast<int>(out.size()) < n; ++a) {
        for (char b = 'A'; b <= 'Z' && static_cast<int>(out.size()) < n; ++b) {
            out.push_back(std::string{'X', a, b});
        }
    }
    if (static_cast<int>(out.size()) < n) throw InputError("too many synthetic countries requested");
    return out;
}

// Solves the two multilateral-resistance equations for one year by
// alternating updates; returns flows X_ij = Y_i E_j / Y * tau_ij / (a_i b_j).
std::vector<double> structural_flows(const std::vector<double>& tau, const std::vector<double>& Y,
                                     const std::vector<double>& E) {
    const std::size_t n = Y.size();
    double world = 0.0;
    for (double y : Y) world += y;
    std::vector<double> a(n, 1.0), b(n, 1.0);
    for (int it = 0; it < 100000; ++it) {
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += tau[i * n + j] * (E[j] / world) / b[j];
            change = std::max(change, std::abs(s / a[i] - 1.0));
            a[i] = s;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += tau[i * n + j] * (Y[i] / world) / a[i];
            change = std::max(change, std::abs(s / b[j] - 1.0));
            b[j] = s;
        }
        if (change < 1e-15) break;
    }
    std::vector<double> X(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            X[i * n + j] = Y[i] * E[j] / world * tau[i * n + j] / (a[i] * b[j]);
        }
    }
    return X;
}

}  // namespace

SynthWorld synth_world(const SynthConfig& cfg) {
    if (cfg.n_countries < 3) throw InputError("synth_world needs at least 3 countries");
    if (!(cfg.sigma > 1.0)) throw InputError("sigma must exceed 1");
    if (cfg.years.empty()) throw InputError("synth_world needs at least one year");
    if (!std::is_sorted(cfg.years.begin(), cfg.years.end()) ||
        std::adjacent_find(cfg.years.begin(), cfg.years.end()) != cfg.years.end()) {
        throw InputError("synthetic years must be strictly increasing");
    }
    if (cfg.noise_cv < 0.0) throw InputError("noise_cv must be >= 0");

    const auto given = cfg.codes.empty() ? default_codes(cfg.n_countries) : cfg.codes;
    if (static_cast<int>(given.size()) != cfg.n_countries) {
        throw InputError("number of codes does not match n_countries");
    }
    if (!cfg.size_scale.empty() && cfg.size_scale.size() != given.size()) {
        throw InputError("size_scale must have one entry per country");
    }
    std::vector<CountryCode> codes;
    for (const auto& c : given) codes.emplace_back(c);
    SynthWorld world;
    auto& panel = world.panel;
    panel.countries = CountryRegistry(codes);
    const std::size_t n = panel.countries.size();
    const std::size_t T = cfg.years.size();
    panel.years = cfg.years;
    panel.interval = 1;
    if (T >= 2) {
        panel.interval = cfg.years[1] - cfg.years[0];
        for (std::size_t t = 2; t < T; ++t) {
            if (cfg.years[t] - cfg.years[t - 1] != panel.interval) panel.interval = 0;
        }
    }
    std::vector<double> scale(n, 1.0);
    for (std::size_t k = 0; k < given.size() && !cfg.size_scale.empty(); ++k) {
        scale[panel.countries.index_of(given[k])] = cfg.size_scale[k];
    }

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Geography and covariates.
    std::vector<double> px(n), py(n);
    for (std::size_t i = 0; i < n; ++i) {
        px[i] = 10000.0 * unif(rng);
        py[i] = 10000.0 * unif(rng);
    }
    panel.covariates.assign(n * n, std::nullopt);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            GravityCovariates g;
            if (i == j) {
                g.log_dist = std::log(50.0 + 250.0 * unif(rng));
                g.lang = 1;
                panel.covariates[i * n + i] = g;
                continue;
            }
            double d = std::max(300.0, std::hypot(px[i] - px[j], py[i] - py[j]));
            g.log_dist = std::log(d);
            g.cntg = d < 1500.0 ? 1 : 0;
            g.lang = unif(rng) < 0.2 ? 1 : 0;
            g.clny = unif(rng) < 0.1 ? 1 : 0;
            panel.covariates[i * n + j] = g;
            panel.covariates[j * n + i] = g;
        }
    }
    // Small worlds can draw dummies that never switch on across borders, or
    // only ever together. Each dummy gets at least one pair of its own.
    if (n >= 3) {
        using Field = int GravityCovariates::*;
        const Field fields[] = {&GravityCovariates::cntg, &GravityCovariates::lang, &GravityCovariates::clny};
        auto blank = [&](std::size_t a, std::size_t b) {
            const auto& g = *panel.covariates[a * n + b];
            return !g.cntg && !g.lang && !g.clny;
        };
        for (int f = 0; f < 3; ++f) {
            bool alone = false;
            for (std::size_t a = 0; a < n && !alone; ++a) {
                for (std::size_t b = 0; b < n && !alone; ++b) {
                    if (a == b) continue;
                    const auto& g = *panel.covariates[a * n + b];
                    int others = 0;
                    for (int h = 0; h < 3; ++h) others += h != f ? g.*fields[h] : 0;
                    alone = g.*fields[f] && others == 0;
                }
            }
            for (std::size_t a = 0; a < n && !alone; ++a) {
                for (std::size_t b = a + 1; b < n && !alone; ++b) {
                    if (!blank(a, b)) continue;
                    (*panel.covariates[a * n + b]).*fields[f] = 1;
                    (*panel.covariates[b * n + a]).*fields[f] = 1;
                    alone = true;
                }
            }
        }
    }

    auto& truth = world.truth;
    truth.beta_fta = cfg.beta_fta;
    truth.sigma = cfg.sigma;
    truth.seed = cfg.seed;
    truth.noise_cv = cfg.noise_cv;
    truth.costs = cfg.costs;
    truth.log_cost.assign(n * n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j && !cfg.intra_national) continue;
            const auto& g = *panel.covariates[i * n + j];
            truth.log_cost[i * n + j] = cfg.costs.dist * g.log_dist + cfg.costs.cntg * g.cntg +
                                        cfg.costs.lang * g.lang + cfg.costs.clny * g.clny;
        }
    }

    // FTA membership, independent of costs and sizes.
    std::vector<int> fta_start(n * n, std::numeric_limits<int>::max());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double u = unif(rng);
            double v = unif(rng);
            if (u < cfg.fta_share) {
                std::size_t k = T >= 2 ? 1 + static_cast<std::size_t>(v * (T - 1)) : 0;
                k = std::min(k, T - 1);
                fta_start[i * n + j] = fta_start[j * n + i] = cfg.years[k];
            }
        }
    }
    for (const auto& f : cfg.planted_ftas) {
        auto i = panel.countries.index_of(f.a);
        auto j = panel.countries.index_of(f.b);
        if (i == j) throw InputError("planted FTA needs two distinct countries");
        fta_start[i * n + j] = fta_start[j * n + i] = f.start_year;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            for (int year : cfg.years) {
                if (year >= fta_start[i * n + j]) panel.fta_in_force.emplace(i, j, year);
            }
        }
    }

    // Endowments and expenditure shares.
    std::vector<double> level(n), growth(n), phi(n);
    for (std::size_t i = 0; i < n; ++i) {
        level[i] = 1000.0 * scale[i] * std::exp(normal(rng));
        growth[i] = 1.0 + 0.1 * unif(rng);
        phi[i] = std::exp(0.1 * normal(rng));
    }

    std::vector<bool> never_trade(n * n, false);
    if (cfg.zero_pair_share > 0.0) {
        std::vector<std::size_t> pairs;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) pairs.push_back(i * n + j);
            }
        }
        std::shuffle(pairs.begin(), pairs.end(), rng);
        auto k = static_cast<std::size_t>(std::llround(cfg.zero_pair_share * pairs.size()));
        for (std::size_t q = 0; q < std::min(k, pairs.size()); ++q) never_trade[pairs[q]] = true;
    }

    const double noise_sd = std::sqrt(std::log1p(cfg.noise_cv * cfg.noise_cv));
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> Y(n), E(n);
        double sum_y = 0.0, sum_phiy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            Y[i] = level[i] * std::pow(growth[i], static_cast<double>(t));
            sum_y += Y[i];
            sum_phiy += phi[i] * Y[i];
        }
        for (std::size_t i = 0; i < n; ++i) E[i] = phi[i] * Y[i] * sum_y / sum_phiy;

        std::vector<double> tau(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double lc = truth.log_cost[i * n + j];
                if (std::isnan(lc)) continue;
                int fta = (i != j && cfg.years[t] >= fta_start[i * n + j]) ? 1 : 0;
                tau[i * n + j] = std::exp(lc + cfg.beta_fta * fta);
            }
        }
        auto X = structural_flows(tau, Y, E);
        truth.output.push_back(Y);
        truth.expenditure.push_back(E);
        truth.clean_flows.push_back(X);

        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j && !cfg.intra_national) continue;
                double eps = normal(rng);
                TradeObservation o;
                o.exporter = i;
                o.importer = j;
                o.year = cfg.years[t];
                o.flow = X[i * n + j];
                if (noise_sd > 0.0) o.flow *= std::exp(noise_sd * eps - 0.5 * noise_sd * noise_sd);
                if (never_trade[i * n + j]) o.flow = 0.0;
                o.fta = panel.fta(i, j, o.year);
                panel.observations.push_back(o);
            }
        }
    }
    return world;
}

void write_truth(const GroundTruth& truth, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write " + file.string());
    out << "param,value\n";
    csv::write_row(out, {"beta_fta", csv::format_exact(truth.beta_fta)});
    csv::write_row(out, {"sigma", csv::format_exact(truth.sigma)});
    csv::write_row(out, {"seed", std::to_string(truth.seed)});
    csv::write_row(out, {"noise_cv", csv::format_exact(truth.noise_cv)});
    csv::write_row(out, {"cost_log_dist", csv::format_exact(truth.costs.dist)});
    csv::write_row(out, {"cost_cntg", csv::format_exact(truth.costs.cntg)});
    csv::write_row(out, {"cost_lang", csv::format_exact(truth.costs.lang)});
    csv::write_row(out, {"cost_clny", csv::format_exact(truth.costs.clny)});
}

}  // namespace geppml
