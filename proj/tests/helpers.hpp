#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bcv/csv.hpp"
#include "bcv/data.hpp"
#include "bcv/design.hpp"
#include "bcv/grid.hpp"
#include "bcv/numeric.hpp"
#include "bcv/rng.hpp"

namespace testutil {

inline bcv::SettingGrid theta_grid(std::size_t m)
{
    bcv::ParamAxis axis{"theta", {}};
    for (std::size_t i = 0; i < m; ++i)
        axis.values.emplace_back(static_cast<double>(i));
    return bcv::build_grid({axis});
}

inline bcv::DesignPlan plan_of(bcv::DesignKind kind, std::size_t a, std::size_t b)
{
    std::vector<std::uint64_t> cv;
    std::vector<std::uint64_t> lr;
    for (std::size_t i = 0; i < a; ++i)
        cv.push_back(1000 + i);
    for (std::size_t j = 0; j < b; ++j)
        lr.push_back(2000 + j);
    switch (kind) {
    case bcv::DesignKind::BCV: return bcv::DesignPlan::bcv(cv, lr, {});
    case bcv::DesignKind::BCV_Nx0: return bcv::DesignPlan::bcv_nx0(cv, 7, {});
    case bcv::DesignKind::RCV: return bcv::DesignPlan::rcv(a, 7, {});
    }
    return {};
}

/// Table over `grid` whose err at (m, a, b) is fn(m, a, b).
inline bcv::ErrTable table_from(const bcv::SettingGrid& grid, bcv::DesignKind kind, std::size_t a, std::size_t b,
                                const std::function<double(std::size_t, std::size_t, std::size_t)>& fn)
{
    const auto plan = plan_of(kind, a, kind == bcv::DesignKind::BCV ? b : 1);
    std::vector<bcv::ErrRecord> recs;
    for (const auto& c : bcv::plan_cells(grid, plan))
        recs.push_back({c.setting, c.a, c.b, c.cv_seed, c.learner_seed, fn(c.setting, c.a, c.b)});
    return bcv::ErrTable(plan, grid, std::move(recs));
}

/// Values listed in (m, a, b) order.
inline bcv::ErrTable table_of_values(bcv::DesignKind kind, std::size_t m, std::size_t a, std::size_t b,
                                     const std::vector<double>& values)
{
    const std::size_t bb = kind == bcv::DesignKind::BCV ? b : 1;
    return table_from(theta_grid(m), kind, a, bb,
                      [&](std::size_t mm, std::size_t aa, std::size_t b2) { return values.at((mm * a + aa) * bb + b2); });
}

/// Uniform draws in [lo, hi) from a seeded stream.
inline std::vector<double> uniform_values(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
    bcv::Pcg32 rng(seed);
    std::vector<double> v(n);
    for (auto& x : v)
        x = lo + (hi - lo) * rng.uniform01();
    return v;
}

inline bcv::Dataset dataset_of(const bcv::csv::Row& header, const std::vector<bcv::csv::Row>& rows,
                               const std::string& target, bcv::Task task = bcv::Task::Classification)
{
    bcv::LoadOptions o;
    o.target_column = target;
    o.task = task;
    return bcv::dataset_from_rows(header, rows, o, "test");
}

/// n rows, two numeric features and a binary label that depends on x0.
inline bcv::Dataset toy_classification(std::size_t n, std::uint64_t seed)
{
    bcv::Pcg32 rng(seed);
    std::vector<bcv::csv::Row> rows;
    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = rng.uniform01();
        const double x1 = rng.uniform01();
        const bool flip = rng.uniform01() < 0.15;
        const bool pos = (x0 + 0.3 * x1 > 0.6) != flip;
        rows.push_back({std::to_string(x0), std::to_string(x1), pos ? "yes" : "no"});
    }
    return dataset_of({"x0", "x1", "y"}, rows, "y");
}

/// Random small dataset with numeric and categorical features.
inline bcv::Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t p, bcv::Task task)
{
    bcv::Pcg32 g(seed);
    bcv::csv::Row header;
    std::vector<bool> cat(p);
    for (std::size_t j = 0; j < p; ++j) {
        header.push_back("f" + std::to_string(j));
        cat[j] = g.below(3) == 0;
    }
    header.push_back("y");
    std::vector<bcv::csv::Row> rows;
    for (std::size_t i = 0; i < n; ++i) {
        bcv::csv::Row r;
        double signal = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (cat[j]) {
                const auto level = g.below(4);
                r.push_back(std::string(1, static_cast<char>('a' + level)));
                signal += level == 1 ? 1.0 : 0.0;
            } else {
                // coarse values so ties between rows occur
                const double v = static_cast<double>(g.below(12)) / 4.0;
                r.push_back(bcv::format_real(v));
                signal += j % 2 ? v / 3.0 : -v / 5.0;
            }
        }
        if (task == bcv::Task::Classification) {
            const double u = signal + g.uniform01() * 1.5;
            r.push_back(u > 0.5 ? (u > 1.5 ? "c" : "b") : "a");
        } else {
            r.push_back(bcv::format_real(std::round((signal + g.uniform01()) * 8.0) / 8.0));
        }
        rows.push_back(r);
    }
    return dataset_of(header, rows, "y", task);
}

inline std::string data_path(const std::string& file)
{
    return std::string(BCV_TEST_DATA_DIR) + "/" + file;
}

}  // namespace testutil
