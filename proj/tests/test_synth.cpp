#include <doctest.h>

#include "geppml/error.hpp"
#include "geppml/synth.hpp"
#include "geppml/trade_costs.hpp"
#include "support.hpp"

using namespace geppml;

TEST_SUITE("synth") {
    TEST_CASE("same seed, same panel") {
        auto a = support::world(10, 1, 0.1);
        auto b = support::world(10, 1, 0.1);
        auto c = support::world(10, 2, 0.1);
        REQUIRE(a.panel.observations.size() == b.panel.observations.size());
        bool same = true, differs = false;
        for (std::size_t k = 0; k < a.panel.observations.size(); ++k) {
            same &= a.panel.observations[k].flow == b.panel.observations[k].flow;
            differs |= a.panel.observations[k].flow != c.panel.observations[k].flow;
        }
        CHECK(same);
        CHECK(differs);
        CHECK(a.panel.fta_in_force == b.panel.fta_in_force);
    }

    TEST_CASE("clean flows clear markets") {
        auto w = support::world(10, 4);
        const std::size_t n = 10;
        for (std::size_t t = 0; t < w.panel.years.size(); ++t) {
            const auto& X = w.truth.clean_flows[t];
            for (std::size_t i = 0; i < n; ++i) {
                double row = 0.0, col = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    row += X[i * n + j];
                    col += X[j * n + i];
                }
                CHECK(support::rel(row, w.truth.output[t][i]) < 1e-12);
                CHECK(support::rel(col, w.truth.expenditure[t][i]) < 1e-12);
            }
        }
    }

    TEST_CASE("zero coefficient leaves flows unrelated to membership") {
        SynthConfig cfg;
        cfg.beta_fta = 0.0;
        cfg.fta_share = 0.5;
        auto w = synth_world(cfg);
        auto fit = fit_baseline(w.panel, CountryCode("DEU"));
        CHECK(std::abs(fit.beta_fta()) < 1e-8);
    }

    TEST_CASE("explicit codes, sizes and planted agreements") {
        SynthConfig cfg;
        cfg.n_countries = 3;
        cfg.codes = {"USA", "CHL", "DEU"};
        cfg.size_scale = {10.0, 0.1, 1.0};
        cfg.fta_share = 0.0;
        cfg.planted_ftas = {{"CHL", "USA", 2004}};
        auto w = synth_world(cfg);
        const auto& p = w.panel;
        auto chl = p.countries.index_of("CHL"), usa = p.countries.index_of("USA"), deu = p.countries.index_of("DEU");
        CHECK(p.fta(chl, usa, 2000) == 0);
        CHECK(p.fta(usa, chl, 2004) == 1);
        CHECK(p.fta(chl, deu, 2008) == 0);
        CHECK(w.truth.output[0][usa] > w.truth.output[0][chl]);
        cfg.planted_ftas = {{"CHL", "CHL", 2004}};
        CHECK_THROWS_AS(synth_world(cfg), InputError);
    }

    TEST_CASE("zero pairs and no internal trade") {
        SynthConfig cfg;
        cfg.zero_pair_share = 0.2;
        cfg.intra_national = false;
        auto w = synth_world(cfg);
        std::size_t zeros = 0;
        for (const auto& o : w.panel.observations) {
            CHECK_FALSE(o.intra_national());
            zeros += o.flow == 0.0;
        }
        CHECK(zeros == 18 * 3);
    }
}
