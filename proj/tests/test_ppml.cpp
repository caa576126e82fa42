#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dummy_newton.hpp"
#include "geppml/error.hpp"
#include "geppml/ppml.hpp"
#include "geppml/report.hpp"
#include "geppml/trade_costs.hpp"
#include "support.hpp"

using namespace geppml;

namespace {

// Two-way FE Poisson data with one covariate and an optional offset.
PpmlProblem random_problem(std::uint64_t seed, int groups = 8, int per = 6, bool with_offset = false) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    PpmlProblem p;
    FeSpec a{"a", {}, groups, {}, 0}, b{"b", {}, per, {}, 0};
    Covariate x{"x", {}};
    std::vector<double> fa(groups), fb(per);
    for (auto& v : fa) v = nd(rng);
    for (auto& v : fb) v = nd(rng);
    for (int g = 0; g < groups; ++g) {
        for (int h = 0; h < per; ++h) {
            double xv = nd(rng);
            double off = with_offset ? 0.3 * nd(rng) : 0.0;
            double mu = std::exp(1.0 + 0.7 * xv + fa[g] + fb[h] + off);
            std::poisson_distribution<int> pd(mu * 5.0);
            p.y.push_back(pd(rng) / 5.0);
            x.values.push_back(xv);
            a.level_of.push_back(g);
            b.level_of.push_back(h);
            p.cluster.push_back(g);
            if (with_offset) p.offset.push_back(off);
        }
    }
    p.covariates = {x};
    p.fes = {a, b};
    return p;
}

double foc(const PpmlProblem& p, const PpmlFit& f) {
    return std::max(max_fe_score(p, f.fitted, f.used), max_covariate_score(p, f.fitted, f.used));
}

}  // namespace

TEST_SUITE("ppml") {
    TEST_CASE("constant response with one constant level") {
        PpmlProblem p;
        p.y.assign(12, 3.5);
        p.fes = {FeSpec{"const", std::vector<int>(12, 0), 1, {}, 0}};
        auto f = fit_ppml(p);
        for (double m : f.fitted) CHECK(m == doctest::Approx(3.5).epsilon(1e-12));
        PpmlProblem bare;
        bare.y.assign(5, 2.0);
        auto g = fit_ppml(bare);
        for (double m : g.fitted) CHECK(m == doctest::Approx(2.0).epsilon(1e-12));
    }

    TEST_CASE("noiseless synthetic panel recovers the planted coefficient") {
        auto w = support::world(10, 1);
        auto b = fit_baseline(w.panel, CountryCode("DEU"));
        CHECK(std::abs(b.beta_fta() - 0.5) < 1e-8);
        CHECK(foc(b.problem, b.fit) <= 1e-8);
        for (std::size_t k = 0; k < b.fit.fitted.size(); ++k) {
            if (b.fit.used[k]) CHECK(b.fit.fitted[k] > 0.0);
        }
    }

    TEST_CASE("agrees with the dummy-variable Newton solve") {
        for (std::uint64_t seed : {1, 2, 3}) {
            auto p = random_problem(seed);
            auto f = fit_ppml(p);
            auto o = oracle::dummy_newton(p);
            CHECK(std::abs(f.beta[0] - o.beta[0]) < 1e-8);
            double worst = 0.0;
            for (std::size_t k = 0; k < p.y.size(); ++k) worst = std::max(worst, support::rel(f.fitted[k], o.mu[k]));
            CHECK(worst < 1e-7);
        }
    }

    TEST_CASE("offset enters with coefficient one") {
        auto p = random_problem(11, 8, 6, true);
        auto f = fit_ppml(p);
        auto o = oracle::dummy_newton(p);
        CHECK(std::abs(f.beta[0] - o.beta[0]) < 1e-8);
        // Shifting the offset by a covariate multiple moves only that coefficient.
        auto q = p;
        for (std::size_t k = 0; k < q.y.size(); ++k) q.offset[k] += 0.25 * q.covariates[0].values[k];
        auto g = fit_ppml(q);
        CHECK(std::abs(g.beta[0] - (f.beta[0] - 0.25)) < 1e-8);
    }

    TEST_CASE("first-order conditions hold per level and covariate") {
        auto p = random_problem(5, 12, 9);
        auto f = fit_ppml(p);
        CHECK(max_fe_score(p, f.fitted, f.used) <= 1e-8);
        CHECK(max_covariate_score(p, f.fitted, f.used) <= 1e-8);
        CHECK(f.diagnostics.max_score <= 1e-8);
    }

    TEST_CASE("reference levels are pinned to zero") {
        auto p = random_problem(6);
        p.fes[0].reference = 3;
        p.fes[1].reference = 2;
        auto f = fit_ppml(p);
        CHECK(f.fe("a").values[3] == 0.0);
        CHECK(f.fe("b").values[2] == 0.0);
        // Reported parameters rebuild the fitted values.
        for (std::size_t k = 0; k < p.y.size(); ++k) {
            double eta = f.intercept + f.beta[0] * p.covariates[0].values[k] + f.fe("a").values[p.fes[0].level_of[k]] +
                         f.fe("b").values[p.fes[1].level_of[k]];
            CHECK(support::rel(std::exp(eta), f.fitted[k]) < 1e-10);
        }
    }

    TEST_CASE("all-zero levels are dropped with a warning") {
        auto p = random_problem(7);
        for (std::size_t k = 0; k < p.y.size(); ++k) {
            if (p.fes[0].level_of[k] == 2) p.y[k] = 0.0;
        }
        auto f = fit_ppml(p);
        CHECK(f.diagnostics.n_dropped == 6);
        REQUIRE(f.diagnostics.warnings.size() == 1);
        CHECK(f.diagnostics.warnings[0].find("'a'") != std::string::npos);
        CHECK_FALSE(f.fe("a").retained[2]);
        CHECK(std::isnan(f.fe("a").values[2]));
        for (std::size_t k = 0; k < p.y.size(); ++k) {
            if (p.fes[0].level_of[k] == 2) CHECK_FALSE(f.used[k]);
        }
        PpmlProblem zero;
        zero.y.assign(4, 0.0);
        CHECK_THROWS_AS(fit_ppml(zero), EstimationError);
    }

    TEST_CASE("collinear covariate is named") {
        auto p = random_problem(8);
        Covariate dup{"x_copy", p.covariates[0].values};
        for (auto& v : dup.values) v *= 2.0;
        p.covariates.push_back(dup);
        CHECK_THROWS_WITH_AS(fit_ppml(p), doctest::Contains("x_copy"), EstimationError);
        auto q = random_problem(8);
        Covariate level{"level", {}};
        for (int g : q.fes[0].level_of) level.values.push_back(g * 0.5);
        q.covariates.push_back(level);
        try {
            fit_ppml(q);
            FAIL("expected collinearity");
        } catch (const EstimationError& e) {
            CHECK(e.kind() == EstimationError::Kind::Collinearity);
            CHECK(std::string(e.what()).find("level") != std::string::npos);
        }
    }

    TEST_CASE("iteration limit reports the gradient") {
        auto p = random_problem(9);
        PpmlOptions o;
        o.max_iter = 1;
        try {
            fit_ppml(p, o);
            FAIL("expected non-convergence");
        } catch (const EstimationError& e) {
            CHECK(e.kind() == EstimationError::Kind::NonConvergence);
            CHECK(std::string(e.what()).find("gradient") != std::string::npos);
        }
    }

    TEST_CASE("bad inputs") {
        auto p = random_problem(10);
        p.y[0] = -1.0;
        CHECK_THROWS_AS(fit_ppml(p), EstimationError);
        auto q = random_problem(10);
        q.fes[0].level_of[0] = 99;
        CHECK_THROWS_AS(fit_ppml(q), EstimationError);
    }

    TEST_CASE("scaling the response leaves coefficients unchanged") {
        auto p = random_problem(12);
        auto f = fit_ppml(p);
        for (auto& y : p.y) y *= 1000.0;
        auto g = fit_ppml(p);
        CHECK(std::abs(f.beta[0] - g.beta[0]) < 1e-10);
        CHECK(std::abs(g.intercept - f.intercept - std::log(1000.0)) < 1e-8);
    }
}

TEST_SUITE("cluster") {
    TEST_CASE("singleton clusters give robust errors") {
        auto p = random_problem(20);
        auto f = fit_ppml(p);
        std::vector<int> own(p.y.size());
        std::iota(own.begin(), own.end(), 0);
        auto a = cluster_se(p, f, own);
        auto b = robust_se(p, f);
        CHECK(support::rel(a[0], b[0]) < 1e-12);
        CHECK_THROWS_AS(cluster_se(p, f, std::vector<int>(p.y.size(), 1)), EstimationError);
    }

    TEST_CASE("duplicated clusters keep the coefficient") {
        auto p = random_problem(21);
        auto f = fit_ppml(p);
        auto q = p;
        const std::size_t n = p.y.size();
        for (std::size_t k = 0; k < n; ++k) {
            q.y.push_back(p.y[k]);
            q.covariates[0].values.push_back(p.covariates[0].values[k]);
            q.fes[0].level_of.push_back(p.fes[0].level_of[k]);
            q.fes[1].level_of.push_back(p.fes[1].level_of[k]);
            q.cluster.push_back(p.cluster[k]);
        }
        auto g = fit_ppml(q);
        CHECK(std::abs(f.beta[0] - g.beta[0]) < 1e-10);
    }

    TEST_CASE("observation order does not matter") {
        auto p = random_problem(22);
        auto f = fit_ppml(p);
        std::vector<std::size_t> perm(p.y.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
        auto q = p;
        for (std::size_t k = 0; k < perm.size(); ++k) {
            q.y[k] = p.y[perm[k]];
            q.covariates[0].values[k] = p.covariates[0].values[perm[k]];
            q.fes[0].level_of[k] = p.fes[0].level_of[perm[k]];
            q.fes[1].level_of[k] = p.fes[1].level_of[perm[k]];
            q.cluster[k] = p.cluster[perm[k]];
        }
        auto g = fit_ppml(q);
        CHECK(std::abs(f.se_clustered[0] - g.se_clustered[0]) <= 1e-12);
        CHECK(std::abs(f.beta[0] - g.beta[0]) <= 1e-12);
    }
}

TEST_SUITE("percent_effect") {
    TEST_CASE("reported conversions") {
        CHECK(report::format_display(percent_effect(0.4383)) == "55.01");
        CHECK(report::format_display(percent_effect(0.2348)) == "26.47");
        CHECK(report::format_display(percent_effect(0.0995)) == "10.46");
        CHECK(percent_effect(0.0) == 0.0);
    }

    TEST_CASE("stars") {
        CHECK(significance_stars(0.001) == "***");
        CHECK(significance_stars(0.03) == "**");
        CHECK(significance_stars(0.07) == "*");
        CHECK(significance_stars(0.2).empty());
        CHECK(p_value(0.4383, 0.0987) < 0.01);
    }
}
