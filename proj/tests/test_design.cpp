#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "bcv/design.hpp"
#include "bcv/error.hpp"
#include "helpers.hpp"

using namespace bcv;

namespace {

SettingGrid forest_grid()
{
    return build_grid({{"mtry", {5.0, 10.0, 20.0}},
                       {"min.node.size", {3.0, 5.0, 10.0, 15.0}},
                       {"replace", {true, false}},
                       {"sample.fraction", {0.5, 0.7, 0.9, 1.0}}},
                      {exclude_when({{"replace", false}, {"sample.fraction", 1.0}})});
}

SettingGrid small_grid()
{
    return build_grid({{"mtry", {1.0, 2.0}}, {"min.node.size", {1.0, 6.0}}});
}

const LearnerSpec small_forest{"random_forest", {{"num.trees", 5.0}}};

void check_same_records(const ErrTable& x, const ErrTable& y)
{
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& a = x.records()[i];
        const auto& b = y.records()[i];
        CHECK(a.setting == b.setting);
        CHECK(a.a == b.a);
        CHECK(a.b == b.b);
        CHECK(a.cv_seed == b.cv_seed);
        CHECK(a.learner_seed == b.learner_seed);
        CHECK(a.err == b.err);
    }
}

}  // namespace

TEST_SUITE("design")
{
    TEST_CASE("notation and replication")
    {
        const auto p = testutil::plan_of(DesignKind::BCV, 4, 4);
        CHECK(p.notation() == "5-BCV SRS 4x4");
        CHECK(p.replication() == 16);
        auto nx0 = testutil::plan_of(DesignKind::BCV_Nx0, 4, 1);
        nx0.strategy.sampling = Sampling::STS;
        CHECK(nx0.notation() == "5-BCV STS 4x0");
        auto rcv = DesignPlan::rcv(16, 1, {10, Sampling::SRS});
        CHECK(rcv.notation() == "10-RCV SRS 16Rep");
        CHECK(rcv.n_second() == 1);
    }

    TEST_CASE("plan validation")
    {
        CHECK_THROWS_AS(DesignPlan::bcv({1, 1}, {2}, {}), Error);
        CHECK_THROWS_AS(DesignPlan::bcv({}, {2}, {}), Error);
        CHECK_THROWS_AS(DesignPlan::bcv({1}, {}, {}), Error);
        CHECK_THROWS_AS(DesignPlan::rcv(0, 1, {}), Error);
        CHECK_THROWS_AS(DesignPlan::bcv({1}, {2}, {1, Sampling::SRS}), Error);
    }

    TEST_CASE("4x4 over the 84-setting grid has 1344 cells")
    {
        const auto cells = plan_cells(forest_grid(), testutil::plan_of(DesignKind::BCV, 4, 4));
        CHECK(cells.size() == 1344);
        std::set<std::pair<std::uint64_t, std::uint64_t>> seed_pairs;
        for (const auto& c : cells)
            seed_pairs.insert({c.cv_seed, c.learner_seed});
        CHECK(seed_pairs.size() == 16);
    }

    TEST_CASE("drawn seed lists extend each other")
    {
        const auto a = draw_seeds(5, seed_tag::cv_seed_list, 2);
        const auto b = draw_seeds(5, seed_tag::cv_seed_list, 8);
        CHECK(std::equal(a.begin(), a.end(), b.begin()));
        CHECK(std::set<std::uint64_t>(b.begin(), b.end()).size() == 8);
        CHECK(draw_seeds(5, seed_tag::learner_seed_list, 2) != a);
    }

    TEST_CASE("RCV draws fresh seeds for every cell; shared mode only per repetition")
    {
        const auto grid = small_grid();
        const auto fresh = plan_cells(grid, DesignPlan::rcv(3, 9, {}));
        std::set<std::uint64_t> cv;
        std::set<std::uint64_t> lr;
        for (const auto& c : fresh) {
            cv.insert(c.cv_seed);
            lr.insert(c.learner_seed);
        }
        CHECK(cv.size() == fresh.size());
        CHECK(lr.size() == fresh.size());
        const auto shared = plan_cells(grid, DesignPlan::rcv(3, 9, {}, true));
        for (const auto& c : shared) {
            CHECK(c.cv_seed == shared[c.a].cv_seed);
            CHECK(c.learner_seed == shared[c.a].learner_seed);
        }
    }

    TEST_CASE("Nx0 blocks the partition and draws fresh learner seeds")
    {
        const auto cells = plan_cells(small_grid(), testutil::plan_of(DesignKind::BCV_Nx0, 3, 1));
        std::set<std::uint64_t> lr;
        for (const auto& c : cells) {
            CHECK(c.cv_seed == 1000 + c.a);
            lr.insert(c.learner_seed);
        }
        CHECK(lr.size() == cells.size());
    }

    TEST_CASE("blocked fits share partitions and training sets across settings")
    {
        const auto ds = testutil::toy_classification(50, 8);
        std::vector<FitTrace> trace;
        RunOptions opt;
        opt.trace = &trace;
        const auto plan = testutil::plan_of(DesignKind::BCV, 2, 3);
        const auto table = run_design(ds, small_grid(), plan, small_forest, LossKind::MisclassificationRate, opt);
        CHECK(trace.size() == 4 * 2 * 3 * 5);
        std::map<std::size_t, std::uint64_t> partition_of_a;
        std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> train_of;
        std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::uint64_t> seed_of;
        for (const auto& t : trace) {
            auto [p, new_p] = partition_of_a.emplace(t.a, t.partition_fingerprint);
            CHECK(p->second == t.partition_fingerprint);
            auto [q, new_q] = train_of.emplace(std::make_pair(t.a, t.fold), t.training_fingerprint);
            CHECK(q->second == t.training_fingerprint);
            auto [s, new_s] = seed_of.emplace(std::make_tuple(t.a, t.b, t.fold), t.fold_learner_seed);
            CHECK(s->second == t.fold_learner_seed);
            CHECK(t.fold_learner_seed == fold_seed(plan.learner_seeds[t.b], t.fold));
            (void)new_p;
            (void)new_q;
            (void)new_s;
        }
        CHECK(partition_of_a.size() == 2);
        CHECK(partition_of_a[0] != partition_of_a[1]);
    }

    TEST_CASE("results do not depend on the thread count")
    {
        const auto ds = testutil::toy_classification(45, 2);
        for (auto kind : {DesignKind::BCV, DesignKind::BCV_Nx0, DesignKind::RCV}) {
            const auto plan = testutil::plan_of(kind, 3, 2);
            const auto one = run_design(ds, small_grid(), plan, small_forest, LossKind::MisclassificationRate, {1});
            const auto four = run_design(ds, small_grid(), plan, small_forest, LossKind::MisclassificationRate, {4});
            check_same_records(one, four);
        }
    }

    TEST_CASE("setting errors survive a reordering of the grid")
    {
        const auto ds = testutil::toy_classification(45, 4);
        const auto grid = small_grid();
        const auto reordered = grid.reordered({3, 1, 0, 2});
        for (auto kind : {DesignKind::BCV, DesignKind::BCV_Nx0, DesignKind::RCV}) {
            const auto plan = testutil::plan_of(kind, 2, 2);
            const auto x = run_design(ds, grid, plan, small_forest, LossKind::MisclassificationRate);
            const auto y = run_design(ds, reordered, plan, small_forest, LossKind::MisclassificationRate);
            const std::vector<std::size_t> order{3, 1, 0, 2};
            for (std::size_t m = 0; m < 4; ++m)
                for (std::size_t a = 0; a < x.n_first(); ++a)
                    for (std::size_t b = 0; b < x.n_second(); ++b)
                        CHECK(y.err(m, a, b) == x.err(order[m], a, b));
        }
    }

    TEST_CASE("a smaller design is a subtable of a larger one")
    {
        const auto ds = testutil::toy_classification(40, 6);
        for (auto kind : {DesignKind::BCV, DesignKind::BCV_Nx0, DesignKind::RCV}) {
            const auto big = run_design(ds, small_grid(), testutil::plan_of(kind, 3, 3), small_forest,
                                        LossKind::MisclassificationRate);
            const auto small = run_design(ds, small_grid(), testutil::plan_of(kind, 2, 2), small_forest,
                                          LossKind::MisclassificationRate);
            check_same_records(big.subtable(2, kind == DesignKind::BCV ? 2 : 1), small);
        }
    }

    TEST_CASE("error table CSV round-trips")
    {
        const auto ds = testutil::toy_classification(30, 1);
        for (auto kind : {DesignKind::BCV, DesignKind::BCV_Nx0, DesignKind::RCV}) {
            const auto t = run_design(ds, small_grid(), testutil::plan_of(kind, 2, 2), small_forest,
                                      LossKind::MisclassificationRate);
            std::stringstream ss;
            write_err_table_csv(ss, t);
            const auto back = read_err_table_csv(ss);
            CHECK(back.kind() == kind);
            CHECK(back.grid().names() == t.grid().names());
            check_same_records(back, t);
            for (std::size_t m = 0; m < t.n_settings(); ++m)
                CHECK(back.grid()[m].values == t.grid()[m].values);
        }
    }

    TEST_CASE("error table CSV header")
    {
        const auto t = testutil::table_of_values(DesignKind::BCV, 1, 1, 1, {0.25});
        std::ostringstream os;
        write_err_table_csv(os, t);
        CHECK(os.str() == "setting_index,theta,cv_seed_index,learner_seed_index,cv_seed,learner_seed,err\n"
                          "0,0,0,0,1000,2000,0.25\n");
        std::istringstream bad("setting_index,theta,cv_seed_index,learner_seed_index,cv_seed,learner_seed,err\n"
                               "0,0,0,0,1000,2000,0.25\n0,0,0,1,1000,2001,0.5\n1,1,0,0,1000,2000,0.1\n");
        CHECK_THROWS_AS(read_err_table_csv(bad), Error);
    }

    TEST_CASE("constant learner gives the same error in every cell")
    {
        LoadOptions o;
        o.target_column = "diagnosis";
        const auto ds = load_csv(testutil::data_path("wdbc400.csv"), o);
        const auto t = run_design(ds, forest_grid(), testutil::plan_of(DesignKind::BCV, 4, 4),
                                  {"constant_majority", {}}, LossKind::MisclassificationRate, {2});
        REQUIRE(t.size() == 1344);
        for (const auto& r : t.records())
            CHECK(r.err == t.records()[0].err);
    }

    TEST_CASE("invalid tables and runs")
    {
        const auto grid = testutil::theta_grid(2);
        const auto plan = testutil::plan_of(DesignKind::BCV, 1, 1);
        CHECK_THROWS_AS(ErrTable(plan, grid, {{0, 0, 0, 1000, 2000, 0.1}}), Error);
        CHECK_THROWS_AS(ErrTable(plan, grid, {{0, 0, 0, 1000, 2000, 0.1}, {1, 0, 0, 1000, 2000, -0.1}}), Error);
        CHECK_THROWS_AS(ErrTable(plan, grid, {{1, 0, 0, 1000, 2000, 0.1}, {0, 0, 0, 1000, 2000, 0.1}}), Error);
        CHECK_THROWS_AS(ErrTable(plan, grid, {{0, 0, 0, 1000, 2000, 0.1}, {1, 0, 0, 1000, 2000, 1.5}},
                                 LossKind::MisclassificationRate),
                        Error);
        const auto ds = testutil::toy_classification(20, 1);
        CHECK_THROWS_AS(run_design(ds, small_grid(), plan, small_forest, LossKind::RMSE), Error);
        CHECK_THROWS_AS(run_design(ds, build_grid({{"mtry", {9.0}}}), plan, small_forest,
                                   LossKind::MisclassificationRate),
                        Error);
        const auto tiny = testutil::dataset_of({"x", "y"}, {{"1", "a"}, {"2", "b"}, {"3", "a"}}, "y");
        CHECK_THROWS_AS(run_design(tiny, small_grid(), plan, {"constant_majority", {}},
                                   LossKind::MisclassificationRate),
                        Error);
    }

    TEST_CASE("cell error pools out-of-fold predictions")
    {
        const auto ds = testutil::dataset_of({"x", "y"}, {{"1", "a"}, {"2", "a"}, {"3", "a"}, {"4", "b"}}, "y");
        const auto learner = make_learner({"constant_majority", {}}, ds);
        const auto p = partition_folds(ds, {2, Sampling::SRS}, 3);
        // no training set has more "b" rows than "a" rows, so every prediction is "a"
        CHECK(cell_error(ds, *learner, p, 1, LossKind::MisclassificationRate) == 0.25);
    }
}
