#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "bcv/csv.hpp"
#include "bcv/error.hpp"
#include "bcv/numeric.hpp"
#include "bcv/report.hpp"
#include "bcv/simcheck.hpp"
#include "helpers.hpp"

using namespace bcv;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        path_ = fs::temp_directory_path() / ("bcv_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_toy_csv(const fs::path& p, std::size_t n, std::uint64_t seed)
{
    Pcg32 g(seed);
    std::ofstream out(p);
    out << "x0,x1,color,label\n";
    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = g.uniform01();
        const double x1 = g.uniform01();
        const char* color = g.below(2) ? "red" : "blue";
        const bool pos = (x0 + 0.4 * x1 > 0.7) != (g.uniform01() < 0.2);
        out << format_real(x0) << ',' << format_real(x1) << ',' << color << ',' << (pos ? "yes" : "no") << '\n';
    }
}

json small_config(const std::string& data_file)
{
    return json::parse(R"({
        "dataset": {"path": ")" + data_file + R"(", "target": "label"},
        "learner": {"kind": "random_forest", "fixed": {"num.trees": 5}},
        "grid": {"params": [{"name": "mtry", "values": [1, 2]},
                            {"name": "replace", "values": [true, false]}]},
        "designs": [{"type": "BCV", "cv_seeds": 2, "learner_seeds": 2},
                    {"type": "RCV", "reps": 4}],
        "seed": 11,
        "permutation": {"B": 99},
        "output": "out"
    })");
}

json forest_config()
{
    return json::parse(R"({
        "dataset": {"path": "data.csv", "target": "y"},
        "grid": {"params": [{"name": "mtry", "values": [5, 10, 20]},
                            {"name": "min.node.size", "values": [3, 5, 10, 15]},
                            {"name": "replace", "values": [true, false]},
                            {"name": "sample.fraction", "values": [0.5, 0.7, 0.9, 1.0]}],
                 "exclude": [{"replace": false, "sample.fraction": 1.0}]},
        "designs": [{"type": "BCV", "cv_seeds": 4, "learner_seeds": 4},
                    {"type": "BCV", "cv_seeds": 2, "learner_seeds": 2},
                    {"type": "RCV", "reps": 4}]
    })");
}

}  // namespace

TEST_SUITE("report")
{
    TEST_CASE("config parsing accepts the documented schema")
    {
        const auto c = parse_config(forest_config(), "/base");
        CHECK(c.dataset.path == "data.csv");
        CHECK(c.base_dir == fs::path("/base"));
        CHECK(c.grid.size() == 4);
        CHECK(c.exclude.size() == 1);
        CHECK(config_grid(c).size() == 84);
        CHECK(c.designs.size() == 3);
        CHECK(c.designs[0].cv_seed_count == 4);
        CHECK(c.designs[2].reps == 4);
        CHECK(c.strategy.k == 5);
        CHECK(c.permutation.permutations == 4999);
        CHECK(c.top_k == 2);
    }

    TEST_CASE("config round-trips through JSON")
    {
        auto doc = forest_config();
        doc["model"] = {{"random", {"CVseeds", "RFseeds", "replace:CVseeds"}}, {"fixed", {"mtry", "replace"}}};
        doc["permutation"] = {{"B", 199}, {"seed", 5}, {"tests", json::array({"mtry", json::array({"mtry", "replace"})})},
                             {"statistic", "SSE"}};
        doc["designs"][0]["cv_seeds"] = {3, 1, 4};
        doc["dataset"]["schema"] = {{"x", "categorical"}};
        doc["dataset"]["missing"] = {"?"};
        doc["loss"] = "misclassification";
        doc["strategy"] = {{"folds", 10}, {"sampling", "STS"}};
        const auto c = parse_config(doc);
        const auto again = parse_config(config_to_json(c));
        CHECK(config_to_json(again) == config_to_json(c));
        CHECK(again.designs[0].cv_seeds == std::vector<std::uint64_t>{3, 1, 4});
        CHECK(again.permutation.tests.size() == 2);
        CHECK(again.permutation.statistic == TestStatistic::SSE);
        CHECK(parse_config(forest_config()).permutation.statistic == TestStatistic::F);
        CHECK(again.strategy.sampling == Sampling::STS);
        CHECK(again.dataset.missing_tokens == std::vector<std::string>{"?"});
    }

    TEST_CASE("config errors name the offending key")
    {
        auto expect_error = [](json doc, const std::string& fragment) {
            try {
                parse_config(doc);
                FAIL("no error for " << fragment);
            } catch (const Error& e) {
                CHECK(std::string(e.what()).find(fragment) != std::string::npos);
            }
        };
        auto d = forest_config();
        d["colour"] = 1;
        expect_error(d, "colour");
        d = forest_config();
        d.erase("dataset");
        expect_error(d, "dataset");
        d = forest_config();
        d["designs"] = json::array();
        expect_error(d, "designs");
        d = forest_config();
        d["designs"][0]["type"] = "LOO";
        expect_error(d, "designs[0].type");
        d = forest_config();
        d["designs"][2]["learner_seeds"] = 2;
        expect_error(d, "designs[2]");
        d = forest_config();
        d["designs"][0].erase("learner_seeds");
        expect_error(d, "designs[0]");
        d = forest_config();
        d["grid"]["params"][0]["values"] = 5;
        expect_error(d, "grid.params[0]");
        d = forest_config();
        d["strategy"] = {{"folds", 1}};
        expect_error(d, "strategy.folds");
        d = forest_config();
        d["dataset"]["schema"] = {{"x", "text"}};
        expect_error(d, "dataset.schema.x");
        d = forest_config();
        d["permutation"] = {{"statistic", "t"}};
        expect_error(d, "statistic");
        d = forest_config();
        d["seed"] = -3;
        expect_error(d, "seed");
        CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
    }

    TEST_CASE("dry run echoes run counts")
    {
        const auto plan = dry_run(parse_config(forest_config()));
        CHECK(plan.settings == 84);
        REQUIRE(plan.designs.size() == 3);
        CHECK(plan.designs[0].runs == 1344);
        CHECK(plan.designs[0].model_fits == 6720);
        CHECK(plan.designs[1].runs == 336);
        CHECK(plan.designs[2].notation == "5-RCV SRS 4Rep");
        std::ostringstream os;
        print_dry_run(os, plan);
        CHECK(os.str() == "settings (M): 84\n"
                          "5-BCV SRS 4x4: 1344 runs (16 per setting, 6720 model fits)\n"
                          "5-BCV SRS 2x2: 336 runs (4 per setting, 1680 model fits)\n"
                          "5-RCV SRS 4Rep: 336 runs (4 per setting, 1680 model fits)\n"
                          "total runs: 2016\n");
    }

    TEST_CASE("drawn seeds of a smaller design prefix those of a larger one")
    {
        const auto c = parse_config(forest_config());
        const auto big = resolve_design(c, c.designs[0]);
        const auto small = resolve_design(c, c.designs[1]);
        CHECK(std::equal(small.cv_seeds.begin(), small.cv_seeds.end(), big.cv_seeds.begin()));
        CHECK(std::equal(small.learner_seeds.begin(), small.learner_seeds.end(), big.learner_seeds.begin()));
    }

    TEST_CASE("curve shapes")
    {
        std::vector<std::size_t> runs;
        for (auto [y, z] : curve_shapes(DesignKind::BCV, 4, 4))
            runs.push_back(y * z);
        CHECK(runs == std::vector<std::size_t>{4, 6, 8, 9, 12, 16});
        CHECK(curve_shapes(DesignKind::BCV, 4, 4).front() == std::pair<std::size_t, std::size_t>{2, 2});
        CHECK(curve_shapes(DesignKind::RCV, 4, 1).size() == 3);
        CHECK(curve_shapes(DesignKind::BCV_Nx0, 3, 1).front() == std::pair<std::size_t, std::size_t>{2, 1});
        CHECK(curve_shapes(DesignKind::BCV, 3, 1).back() == std::pair<std::size_t, std::size_t>{3, 1});
    }

    TEST_CASE("std.err curve over nested simulated tables")
    {
        SyntheticModel model;
        model.tau = linear_tau(6, 0.4);
        model.sigma_pi = 0.173;
        model.sigma_rho = 0.1;
        model.sigma_eps = 0.2;
        model.seed = 4;
        const auto big = simulate_table(model, SimShape::bcv(4, 4));
        const auto small = simulate_table(model, SimShape::bcv(2, 2));
        const auto rcv = simulate_table(model, SimShape::rcv(16));
        const auto curve = stderr_curve({small, big, rcv}, std::nullopt, true);
        REQUIRE(curve.families.size() == 2);
        CHECK(curve.families[0].family == "5-BCV SRS YxZ");
        CHECK(curve.families[1].family == "5-RCV SRS");
        REQUIRE(curve.families[0].points.size() == 6);
        for (std::size_t k = 1; k < curve.families[0].points.size(); ++k)
            CHECK(curve.families[0].points[k].runs > curve.families[0].points[k - 1].runs);
        const auto& last = curve.families[0].points.back();
        CHECK(last.shape == "5-BCV SRS 4x4");
        CHECK(last.std_err == doctest::Approx(*estimate_setting_means(big).mean_std_err()).epsilon(1e-12));
        double avg = 0.0;
        for (double s : last.per_setting)
            avg += s * s / 6.0;
        CHECK(std::sqrt(avg) == doctest::Approx(last.std_err).epsilon(1e-12));
        REQUIRE(curve.min_rcv.has_value());
        double lowest = 1e9;
        for (const auto& p : curve.families[1].points)
            lowest = std::min(lowest, p.std_err);
        CHECK(*curve.min_rcv == lowest);

        std::ostringstream os;
        write_stderr_curve_csv(os, curve);
        const auto rows = csv::parse(os.str());
        CHECK(rows[0] == csv::Row{"family", "shape", "runs", "std_err", "min_rcv_std_err"});
        CHECK(rows.size() == 1 + 6 + 15);
        std::ostringstream ps;
        write_stderr_curve_per_setting_csv(ps, curve);
        CHECK(csv::parse(ps.str()).size() == 1 + (6 + 15) * 6);

        auto other = model;
        other.seed = 5;
        CHECK_THROWS_AS(stderr_curve({simulate_table(other, SimShape::bcv(2, 2)), big}), Error);
    }

    TEST_CASE("model terms absent from a design are dropped")
    {
        const auto rcv = testutil::table_of_values(DesignKind::RCV, 2, 3, 1, testutil::uniform_values(6, 1));
        const auto nx0 = testutil::table_of_values(DesignKind::BCV_Nx0, 2, 3, 1, testutil::uniform_values(6, 1));
        const ModelSpec m{{"CVseeds", "RFseeds", "theta:CVseeds"}, {"theta"}};
        CHECK(model_for(m, rcv).random.empty());
        CHECK(model_for(m, nx0).random == std::vector<std::string>{"CVseeds", "theta:CVseeds"});
        CHECK(model_for(std::nullopt, nx0).fixed == std::vector<std::string>{"setting"});
    }

    TEST_CASE("end-to-end run writes the documented files deterministically")
    {
        TempDir tmp("e2e");
        write_toy_csv(tmp.path() / "toy.csv", 60, 3);
        auto doc = small_config("toy.csv");
        {
            std::ofstream(tmp.path() / "config.json") << doc.dump(2);
        }
        const auto config = load_config(tmp.path() / "config.json");
        RunControls one;
        one.out = tmp.path() / "run1";
        one.threads = 1u;
        const auto reports = run_report(config, one);
        REQUIRE(reports.size() == 2);
        CHECK(reports[0].directory == "01_5-BCV-SRS-2x2");
        CHECK(reports[1].directory == "02_5-RCV-SRS-4Rep");

        std::size_t anova_files = 0;
        for (const auto& e : fs::recursive_directory_iterator(tmp.path() / "run1"))
            anova_files += e.path().filename() == "anova.csv";
        CHECK(anova_files == 2);
        for (const char* f : {"stderr_curve.csv", "best_settings.csv", "run_manifest.json"})
            CHECK(fs::exists(tmp.path() / "run1" / f));
        CHECK_FALSE(fs::exists(tmp.path() / "run1" / "stderr_curve_per_setting.csv"));

        const auto best = csv::parse(slurp(tmp.path() / "run1" / "best_settings.csv"));
        CHECK(best.size() == 1 + 2 * 2);
        CHECK(best[0] == csv::Row{"design", "rank", "setting_index", "mtry", "replace", "mean_err", "std_err"});

        const auto table = read_err_table_csv(tmp.path() / "run1" / "01_5-BCV-SRS-2x2" / "err_table.csv");
        CHECK(table.size() == 16);
        // every reported number is recomputable from the error table alone
        const auto means = estimate_setting_means(table);
        const auto sm = csv::parse(slurp(tmp.path() / "run1" / "01_5-BCV-SRS-2x2" / "setting_means.csv"));
        for (std::size_t m = 0; m < 4; ++m) {
            CHECK(sm[m + 1][3] == format_real(means.means[m].mean));
            CHECK(sm[m + 1][4] == format_real(*means.means[m].std_err));
        }

        RunControls three = one;
        three.out = tmp.path() / "run3";
        three.threads = 3u;
        run_report(config, three);
        for (const auto& e : fs::recursive_directory_iterator(tmp.path() / "run1")) {
            if (e.path().extension() != ".csv")
                continue;
            const auto rel = fs::relative(e.path(), tmp.path() / "run1");
            CAPTURE(rel.string());
            CHECK(slurp(e.path()) == slurp(tmp.path() / "run3" / rel));
        }

        // the manifest is itself a valid configuration that reproduces the run
        const auto from_manifest = load_config(tmp.path() / "run1" / "run_manifest.json");
        RunControls again;
        again.out = tmp.path() / "run_manifest";
        again.threads = 2u;
        run_report(from_manifest, again);
        for (const auto& e : fs::recursive_directory_iterator(tmp.path() / "run1")) {
            if (e.path().extension() != ".csv")
                continue;
            const auto rel = fs::relative(e.path(), tmp.path() / "run1");
            CHECK(slurp(e.path()) == slurp(tmp.path() / "run_manifest" / rel));
        }
        const auto manifest = json::parse(slurp(tmp.path() / "run1" / "run_manifest.json"));
        CHECK(manifest.at("settings") == 4);
        CHECK(manifest.at("designs_run").size() == 2);
        CHECK(manifest.at("config").at("designs")[0].at("cv_seeds").size() == 2);
    }

    TEST_CASE("per-setting curve and overrides")
    {
        TempDir tmp("override");
        write_toy_csv(tmp.path() / "toy.csv", 40, 5);
        auto doc = small_config("toy.csv");
        doc["designs"] = json::array({json{{"type", "BCV_Nx0"}, {"cv_seeds", 3}}});
        auto config = parse_config(doc, tmp.path());
        RunControls c;
        c.out = tmp.path() / "o";
        c.threads = 1u;
        c.permutations = 0u;
        c.per_setting_curve = true;
        c.seed = 99u;
        const auto reports = run_report(config, c);
        CHECK_FALSE(reports[0].tests.has_value());
        CHECK(fs::exists(tmp.path() / "o" / "stderr_curve_per_setting.csv"));
        const auto anova = csv::parse(slurp(tmp.path() / "o" / "01_5-BCV-SRS-3x0" / "anova.csv"));
        CHECK(anova[1][0] == "CVseeds");
        CHECK(anova[1][4].empty());
        const auto manifest = json::parse(slurp(tmp.path() / "o" / "run_manifest.json"));
        CHECK(manifest.at("config").at("seed") == 99);
    }

    TEST_CASE("a failed run removes the files it created")
    {
        TempDir tmp("fail");
        write_toy_csv(tmp.path() / "toy.csv", 40, 7);
        const auto config = parse_config(small_config("toy.csv"), tmp.path());
        const auto out = tmp.path() / "partial";
        fs::create_directories(out / "stderr_curve.csv");  // a directory blocks the file write
        std::ofstream(out / "keep.txt") << "mine";
        RunControls c;
        c.out = out;
        c.threads = 1u;
        CHECK_THROWS_AS(run_report(config, c), Error);
        CHECK(fs::exists(out / "keep.txt"));
        CHECK(fs::exists(out / "stderr_curve.csv"));
        CHECK_FALSE(fs::exists(out / "01_5-BCV-SRS-2x2"));
        CHECK_FALSE(fs::exists(out / "02_5-RCV-SRS-4Rep"));

        auto bad = small_config("toy.csv");
        bad["grid"]["params"][0]["values"] = {1, 9};
        RunControls c2;
        c2.out = tmp.path() / "never";
        CHECK_THROWS_AS(run_report(parse_config(bad, tmp.path()), c2), Error);
        CHECK_FALSE(fs::exists(tmp.path() / "never"));

        auto missing = small_config("nope.csv");
        RunControls c3;
        c3.out = tmp.path() / "never2";
        CHECK_THROWS_AS(run_report(parse_config(missing, tmp.path()), c3), Error);
        CHECK_FALSE(fs::exists(tmp.path() / "never2"));
    }
}
