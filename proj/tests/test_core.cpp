#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bcv/csv.hpp"
#include "bcv/data.hpp"
#include "bcv/error.hpp"
#include "bcv/numeric.hpp"
#include "bcv/rng.hpp"
#include "helpers.hpp"

using namespace bcv;

TEST_SUITE("numeric")
{
    TEST_CASE("compensated sum recovers cancelled small terms")
    {
        const std::vector<double> xs{1e16, 1.0, -1e16, 1.0};
        CHECK(compensated_sum(xs) == 2.0);
        CHECK(compensated_mean(xs) == 0.5);
        CHECK(compensated_mean(std::vector<double>{}) == 0.0);
    }

    TEST_CASE("compensated dot")
    {
        const std::vector<double> a{1e8, 1.0, -1e8};
        const std::vector<double> b{1e8, 1.0, 1e8};
        CHECK(compensated_dot(a, b) == 1.0);
    }

    TEST_CASE("format_real round-trips")
    {
        for (double x : {0.1, 1.0 / 3.0, 2.5e-300, 123456789.125, -7.0, 0.30000000000000004}) {
            double back = 0.0;
            REQUIRE(parse_real(format_real(x), back));
            CHECK(back == x);
        }
        CHECK(format_real(0.0) == "0");
        CHECK(format_real(-0.0) == "0");
        CHECK(format_real(0.5) == "0.5");
        CHECK(format_sig(0.000123456, 3) == "0.000123");
    }

    TEST_CASE("parse_real accepts plain reals only")
    {
        double v = 0.0;
        CHECK(parse_real("3.25", v));
        CHECK(v == 3.25);
        CHECK(parse_real("+1e3", v));
        CHECK(v == 1000.0);
        CHECK(parse_real("-0.5", v));
        CHECK_FALSE(parse_real("", v));
        CHECK_FALSE(parse_real("+", v));
        CHECK_FALSE(parse_real("1,5", v));
        CHECK_FALSE(parse_real("3.0x", v));
        CHECK_FALSE(parse_real("nan", v));
        CHECK_FALSE(parse_real("inf", v));
        CHECK_FALSE(parse_real(" 1", v));
    }
}

TEST_SUITE("rng")
{
    TEST_CASE("SplitMix64 reference sequence")
    {
        SplitMix64 g(1234567);
        CHECK(g.next() == 6457827717110365317ULL);
        CHECK(g.next() == 3203168211198807973ULL);
        CHECK(g.next() == 9817491932198370423ULL);
    }

    TEST_CASE("PCG32 reference sequence")
    {
        Pcg32 g(42, 54);
        const std::uint32_t expect[] = {0xa15c02b7u, 0x7b47f409u, 0xba1d3330u, 0x83d2f293u, 0xbfa4784bu, 0xcbed606eu};
        for (auto e : expect)
            CHECK(g.next() == e);
    }

    TEST_CASE("derive_seed reference values")
    {
        CHECK(derive_seed(0, {}) == 16294208416658607535ULL);
        CHECK(derive_seed(42, {7}) == 1506751773655410801ULL);
        CHECK(derive_seed(42, {7, 9}) == 13924105818707383444ULL);
        CHECK(derive_seed(42, {7}) == derive_seed(42, {7}));
    }

    TEST_CASE("derive_seed is not symmetric in parent and word")
    {
        for (std::uint64_t s = 0; s < 50; ++s)
            for (std::uint64_t f = s + 1; f < 50; ++f)
                REQUIRE(derive_seed(s, {f}) != derive_seed(f, {s}));
        CHECK(derive_seed(3, {3}) != derive_seed(4, {4}));
    }

    TEST_CASE("derive_seed separates neighbouring words")
    {
        SplitMix64 parents(99);
        for (int i = 0; i < 10000; ++i) {
            const auto s = parents.next();
            REQUIRE(derive_seed(s, {0}) != derive_seed(s, {1}));
        }
    }

    TEST_CASE("derive_seed has no collisions over tree and fold index ranges")
    {
        std::set<std::uint64_t> trees;
        for (std::uint64_t t = 0; t < 100000; ++t)
            trees.insert(derive_seed(0xABCDEFULL, {t}));
        CHECK(trees.size() == 100000);
        std::set<std::uint64_t> folds;
        for (std::uint64_t s = 0; s < 100; ++s)
            for (std::uint64_t f = 0; f < 1000; ++f)
                folds.insert(derive_seed(s, {f}));
        CHECK(folds.size() == 100000);
    }

    TEST_CASE("derived seeds have uniform moments")
    {
        const int n = 200000;
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double u = static_cast<double>(derive_seed(7, {static_cast<std::uint64_t>(i)})) * 0x1.0p-64;
            sum += u;
            sum_sq += u * u;
        }
        const double mean = sum / n;
        const double var = sum_sq / n - mean * mean;
        CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
        CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
    }

    TEST_CASE("below stays in range and is roughly uniform")
    {
        Pcg32 g(5);
        std::vector<int> counts(7, 0);
        for (int i = 0; i < 70000; ++i) {
            const auto v = g.below(7);
            REQUIRE(v < 7);
            ++counts[v];
        }
        for (int c : counts)
            CHECK(std::abs(c - 10000) < 500);
    }

    TEST_CASE("uniform01 in [0, 1)")
    {
        Pcg32 g(11);
        for (int i = 0; i < 100000; ++i) {
            const double u = g.uniform01();
            REQUIRE(u >= 0.0);
            REQUIRE(u < 1.0);
        }
    }

    TEST_CASE("shuffle permutes")
    {
        std::vector<int> v(50);
        for (int i = 0; i < 50; ++i)
            v[i] = i;
        Pcg32 g(3);
        shuffle(std::span<int>(v), g);
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < 50; ++i)
            CHECK(sorted[i] == i);
        bool moved = false;
        for (int i = 0; i < 50; ++i)
            moved |= v[i] != i;
        CHECK(moved);
    }
}

TEST_SUITE("csv")
{
    TEST_CASE("quoted fields, doubled quotes, embedded separators and newlines")
    {
        const auto rows = csv::parse("a,b,c\r\n\"x,1\",\"he said \"\"hi\"\"\",\"two\nlines\"\n\n1,2,3");
        REQUIRE(rows.size() == 3);
        CHECK(rows[1][0] == "x,1");
        CHECK(rows[1][1] == "he said \"hi\"");
        CHECK(rows[1][2] == "two\nlines");
        CHECK(rows[2] == csv::Row{"1", "2", "3"});
    }

    TEST_CASE("BOM is skipped")
    {
        const auto rows = csv::parse("\xEF\xBB\xBFname,y\n1,2\n");
        REQUIRE(rows.size() == 2);
        CHECK(rows[0][0] == "name");
    }

    TEST_CASE("malformed quoting throws")
    {
        CHECK_THROWS_AS(csv::parse("a,b\n\"open,1\n"), Error);
        CHECK_THROWS_AS(csv::parse("a,b\nx\"y,1\n"), Error);
    }

    TEST_CASE("escape and write_row round-trip")
    {
        std::ostringstream os;
        csv::write_row(os, {"plain", "with,comma", "quote\"d", "line\nbreak", ""});
        const auto rows = csv::parse(os.str());
        REQUIRE(rows.size() == 1);
        CHECK(rows[0] == csv::Row{"plain", "with,comma", "quote\"d", "line\nbreak", ""});
        CHECK(csv::escape("simple") == "simple");
    }
}

TEST_SUITE("data")
{
    TEST_CASE("four-row classification table")
    {
        const auto ds = testutil::dataset_of({"a", "y"}, {{"1", "r"}, {"2", "r"}, {"3", "m"}, {"4", "m"}}, "y");
        CHECK(ds.n_rows() == 4);
        CHECK(ds.n_features() == 1);
        CHECK(ds.n_classes() == 2);
        CHECK(ds.classes == std::vector<std::string>{"m", "r"});
        CHECK(ds.target == std::vector<double>{1, 1, 0, 0});
        CHECK(ds.features[0].type == ColumnType::Numeric);
        CHECK(ds.dropped_rows == 0);
    }

    TEST_CASE("row with a missing cell is dropped and counted")
    {
        const auto ds = testutil::dataset_of({"a", "y"}, {{"1", "r"}, {"", "r"}, {"3", "m"}, {"4", "m"}}, "y");
        CHECK(ds.n_rows() == 3);
        CHECK(ds.dropped_rows == 1);
        const auto ds2 = testutil::dataset_of({"a", "y"}, {{"1", "r"}, {"NA", "r"}, {"3", "m"}, {" 4 ", "m"}}, "y");
        CHECK(ds2.n_rows() == 3);
        CHECK(ds2.x(2, 0) == 4.0);
    }

    TEST_CASE("type inference and categorical levels")
    {
        const auto ds = testutil::dataset_of({"num", "cat", "y"},
                                             {{"1.5", "red", "a"}, {"2", "blue", "b"}, {"-3e2", "red", "a"}}, "y");
        CHECK(ds.features[0].type == ColumnType::Numeric);
        CHECK(ds.features[1].type == ColumnType::Categorical);
        CHECK(ds.features[1].levels == std::vector<std::string>{"blue", "red"});
        CHECK(ds.x(0, 1) == 1.0);
        CHECK(ds.x(1, 1) == 0.0);
        CHECK(ds.x(2, 0) == -300.0);
    }

    TEST_CASE("schema override forces a numeric-looking column categorical")
    {
        LoadOptions o;
        o.target_column = "y";
        o.schema_overrides["code"] = ColumnType::Categorical;
        const auto ds = dataset_from_rows({"code", "y"}, {{"10", "a"}, {"2", "b"}, {"10", "b"}}, o);
        CHECK(ds.features[0].type == ColumnType::Categorical);
        CHECK(ds.features[0].levels == std::vector<std::string>{"10", "2"});
        o.schema_overrides = {{"nope", ColumnType::Numeric}};
        CHECK_THROWS_AS(dataset_from_rows({"code", "y"}, {{"1", "a"}, {"2", "b"}}, o), Error);
    }

    TEST_CASE("regression target")
    {
        const auto ds = testutil::dataset_of({"x", "t"}, {{"a", "1.5"}, {"b", "2.5"}, {"a", "0"}}, "t", Task::Regression);
        CHECK(ds.task == Task::Regression);
        CHECK(ds.target == std::vector<double>{1.5, 2.5, 0.0});
        CHECK_THROWS_AS(testutil::dataset_of({"x", "t"}, {{"1", "a"}, {"2", "b"}}, "t", Task::Regression), Error);
    }

    TEST_CASE("error cases")
    {
        CHECK_THROWS_AS(testutil::dataset_of({"a", "y"}, {{"1", "r"}, {"2", "m"}}, "zzz"), Error);
        CHECK_THROWS_AS(testutil::dataset_of({"a", "y"}, {{"1", "r"}, {"2", "r"}, {"3", "r"}}, "y"), Error);
        CHECK_THROWS_AS(testutil::dataset_of({"a", "y"}, {{"", "r"}, {"NA", "m"}}, "y"), Error);
        CHECK_THROWS_AS(testutil::dataset_of({"a", "y"}, {{"1", "r", "x"}, {"2", "m"}}, "y"), Error);
        LoadOptions missing_file;
        missing_file.target_column = "y";
        CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", missing_file), Error);
    }

    TEST_CASE("bundled WDBC subsample loads identically twice")
    {
        LoadOptions o;
        o.target_column = "diagnosis";
        const auto a = load_csv(testutil::data_path("wdbc400.csv"), o);
        const auto b = load_csv(testutil::data_path("wdbc400.csv"), o);
        CHECK(a.n_rows() == 400);
        CHECK(a.n_features() == 30);
        CHECK(a.classes == std::vector<std::string>{"B", "M"});
        CHECK(a == b);
        a.validate();
    }

    TEST_CASE("208 x 60 table of numeric readings")
    {
        bcv::Pcg32 g(208);
        csv::Row header;
        for (int j = 0; j < 60; ++j)
            header.push_back("f" + std::to_string(j));
        header.push_back("class");
        std::vector<csv::Row> rows;
        for (int i = 0; i < 208; ++i) {
            csv::Row r;
            for (int j = 0; j < 60; ++j)
                r.push_back(format_real(g.uniform01()));
            r.push_back(i % 2 ? "M" : "R");
            rows.push_back(r);
        }
        const auto ds = testutil::dataset_of(header, rows, "class");
        CHECK(ds.n_rows() == 208);
        CHECK(ds.n_features() == 60);
    }

    TEST_CASE("type inference does not depend on row order")
    {
        std::vector<csv::Row> rows{{"1", "x", "a"}, {"2", "3", "b"}, {"4", "y", "a"}, {"5", "6", "b"}};
        const auto a = testutil::dataset_of({"p", "q", "y"}, rows, "y");
        std::reverse(rows.begin(), rows.end());
        const auto b = testutil::dataset_of({"p", "q", "y"}, rows, "y");
        for (std::size_t j = 0; j < a.n_features(); ++j)
            CHECK(a.features[j].type == b.features[j].type);
    }
}
