#include <doctest.h>

#include <sstream>

#include "geppml/country.hpp"
#include "geppml/csv.hpp"
#include "geppml/error.hpp"
#include "support.hpp"

using namespace geppml;

TEST_SUITE("country") {
    TEST_CASE("codes are three uppercase letters") {
        CHECK(CountryCode::valid("CHL"));
        CHECK_FALSE(CountryCode::valid("CH"));
        CHECK_FALSE(CountryCode::valid("CHLE"));
        CHECK_FALSE(CountryCode::valid("chl"));
        CHECK_FALSE(CountryCode::valid("C1L"));
        CHECK_THROWS_AS(CountryCode("usa"), InputError);
        CHECK(CountryCode("USA").str() == "USA");
    }

    TEST_CASE("registry is sorted and rejects duplicates") {
        CountryRegistry r({CountryCode("USA"), CountryCode("CHL"), CountryCode("DEU")});
        REQUIRE(r.size() == 3);
        CHECK(r[0].str() == "CHL");
        CHECK(r[2].str() == "USA");
        CHECK(r.index_of("DEU") == 1);
        CHECK_FALSE(r.find("JPN").has_value());
        CHECK_THROWS_WITH_AS(r.index_of("JPN"), doctest::Contains("JPN"), InputError);
        CHECK_THROWS_AS(CountryRegistry({CountryCode("CHL"), CountryCode("CHL")}), InputError);
    }
}

TEST_SUITE("csv") {
    TEST_CASE("header mismatch and malformed rows") {
        auto dir = support::scratch("csv");
        support::write_text(dir / "a.csv", "x,y\n1,2\n");
        CHECK_THROWS_AS(csv::read(dir / "a.csv", {"x", "z"}), InputError);
        support::write_text(dir / "b.csv", "x,y\n1,2\n3\n");
        CHECK_THROWS_WITH(csv::read(dir / "b.csv", {"x", "y"}), doctest::Contains(":3:"));
    }

    TEST_CASE("blank lines, CR and BOM are tolerated") {
        auto dir = support::scratch("csv_bom");
        support::write_text(dir / "a.csv", "\xEF\xBB\xBFx,y\r\n1,2\r\n\r\n3,4\r\n");
        auto t = csv::read(dir / "a.csv", {"x", "y"});
        REQUIRE(t.rows.size() == 2);
        CHECK(t.rows[1].fields[1] == "4");
        CHECK(t.rows[1].line == 4);
    }

    TEST_CASE("numbers round-trip exactly") {
        for (double v : {0.1, 1.0 / 3.0, 123456.789e10, 5e-324, -2.5}) {
            CHECK(csv::parse_double(csv::format_exact(v), "f", 1, "v") == v);
        }
        CHECK_THROWS_AS(csv::parse_double("1.5x", "f", 7, "v"), InputError);
        CHECK_THROWS_AS(csv::parse_long("2.5", "f", 7, "year"), InputError);
    }

    TEST_CASE("writer quotes only when needed") {
        std::ostringstream out;
        csv::write_row(out, {"a", "1,234", "say \"hi\""});
        CHECK(out.str() == "a,\"1,234\",\"say \"\"hi\"\"\"\n");
    }
}
