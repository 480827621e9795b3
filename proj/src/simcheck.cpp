#include "bcv/simcheck.hpp"

#include "bcv/anova.hpp"
#include "bcv/csv.hpp"
#include "bcv/error.hpp"
#include "bcv/numeric.hpp"
#include "bcv/parallel.hpp"
#include "bcv/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace bcv {

void SyntheticModel::validate() const
{
    if (tau.empty())
        throw Error("synthetic model: tau needs at least one setting");
    if (!std::isfinite(mu))
        throw Error("synthetic model: mu must be finite");
    CompensatedSum s;
    double scale = 0.0;
    for (double t : tau) {
        if (!std::isfinite(t))
            throw Error("synthetic model: tau must be finite");
        s.add(t);
        scale = std::max(scale, std::fabs(t));
    }
    if (std::fabs(s.value()) > 1e-12 * std::max(1.0, scale))
        throw Error("synthetic model: tau must sum to zero");
    for (double sd : {sigma_pi, sigma_rho, sigma_eps})
        if (!std::isfinite(sd) || sd < 0.0)
            throw Error("synthetic model: standard deviations must be finite and non-negative");
    if (!std::isfinite(cross))
        throw Error("synthetic model: cross coefficient must be finite");
}

std::vector<double> linear_tau(std::size_t m, double range)
{
    std::vector<double> tau(m, 0.0);
    if (m < 2)
        return tau;
    const double mid = static_cast<double>(m - 1) / 2.0;
    for (std::size_t i = 0; i < m; ++i)
        tau[i] = range * (static_cast<double>(i) - mid) / static_cast<double>(m - 1);
    return tau;
}

std::string SimShape::notation() const
{
    switch (kind) {
    case DesignKind::BCV:
        return "BCV " + std::to_string(n_first) + "x" + std::to_string(n_second);
    case DesignKind::BCV_Nx0:
        return "BCV " + std::to_string(n_first) + "x0";
    case DesignKind::RCV:
        return "RCV " + std::to_string(n_first) + "Rep";
    }
    return {};
}

namespace {

double draw(Pcg32& rng, NoiseKind kind, double sd)
{
    if (sd == 0.0) {
        rng.next();
        rng.next();
        return 0.0;
    }
    const double u1 = rng.uniform01();
    const double u2 = rng.uniform01();
    if (kind == NoiseKind::Uniform)
        return (2.0 * u1 - 1.0) * sd * std::numbers::sqrt3;
    return sd * std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double block_draw(std::uint64_t block_seed, std::uint64_t which, std::size_t index, NoiseKind kind, double sd)
{
    Pcg32 rng(derive_seed(block_seed, {which, static_cast<std::uint64_t>(index)}));
    return draw(rng, kind, sd);
}

SettingGrid synthetic_grid(std::size_t m)
{
    ParamAxis axis{"theta", {}};
    for (std::size_t i = 0; i < m; ++i)
        axis.values.emplace_back(static_cast<double>(i));
    return build_grid({std::move(axis)});
}

DesignPlan synthetic_plan(const SyntheticModel& model, const SimShape& shape)
{
    PartitionStrategy strategy;
    switch (shape.kind) {
    case DesignKind::BCV:
        return DesignPlan::bcv(draw_seeds(model.seed, seed_tag::cv_seed_list, shape.n_first),
                               draw_seeds(model.seed, seed_tag::learner_seed_list, shape.n_second), strategy);
    case DesignKind::BCV_Nx0:
        return DesignPlan::bcv_nx0(draw_seeds(model.seed, seed_tag::cv_seed_list, shape.n_first), model.seed,
                                   strategy);
    case DesignKind::RCV:
        return DesignPlan::rcv(shape.n_first, model.seed, strategy);
    }
    throw Error("simulate: unknown design");
}

}  // namespace

ErrTable simulate_table(const SyntheticModel& model, const SimShape& shape, std::uint64_t replicate, BlockDraw blocks)
{
    model.validate();
    if (shape.n_first < 1 || shape.n_second < 1)
        throw Error("simulate: shape needs at least one block on each axis");
    if (shape.kind != DesignKind::BCV && shape.n_second != 1)
        throw Error("simulate: only BCV has a second block axis");

    const SettingGrid grid = synthetic_grid(model.tau.size());
    const DesignPlan plan = synthetic_plan(model, shape);
    const auto cells = plan_cells(grid, plan);

    const std::uint64_t block_seed = blocks == BlockDraw::Held
                                         ? derive_seed(model.seed, {seed_tag::sim_blocks})
                                         : derive_seed(model.seed, {seed_tag::sim_blocks, 1, replicate});
    std::vector<double> pi(shape.n_first, 0.0);
    std::vector<double> rho(shape.n_second, 0.0);
    if (shape.kind != DesignKind::RCV)
        for (std::size_t i = 0; i < pi.size(); ++i)
            pi[i] = block_draw(block_seed, 0, i, model.noise, model.sigma_pi);
    if (shape.kind == DesignKind::BCV)
        for (std::size_t j = 0; j < rho.size(); ++j)
            rho[j] = block_draw(block_seed, 1, j, model.noise, model.sigma_rho);

    std::vector<ErrRecord> records;
    records.reserve(cells.size());
    for (const auto& c : cells) {
        Pcg32 rng(derive_seed(model.seed, {seed_tag::sim_noise, replicate, c.setting, c.a, c.b}));
        const double eps = draw(rng, model.noise, model.sigma_eps);
        double p = 0.0;
        double r = 0.0;
        switch (shape.kind) {
        case DesignKind::BCV:
            p = pi[c.a];
            r = rho[c.b];
            break;
        case DesignKind::BCV_Nx0:
            p = pi[c.a];
            r = draw(rng, model.noise, model.sigma_rho);
            break;
        case DesignKind::RCV:
            p = draw(rng, model.noise, model.sigma_pi);
            r = draw(rng, model.noise, model.sigma_rho);
            break;
        }
        const double tau = model.tau[c.setting];
        const double err = model.mu + p + r + tau + eps + model.cross * p * tau;
        if (err < 0.0)
            throw Error("simulate: negative error value; raise mu");
        records.push_back({c.setting, c.a, c.b, c.cv_seed, c.learner_seed, err});
    }
    return ErrTable(plan, grid, std::move(records), std::nullopt, "synthetic");
}

double formula_variance(const SyntheticModel& model, const SimShape& shape)
{
    const double vp = model.sigma_pi * model.sigma_pi;
    const double vr = model.sigma_rho * model.sigma_rho;
    const double ve = model.sigma_eps * model.sigma_eps;
    const double n = static_cast<double>(shape.replication());
    switch (shape.kind) {
    case DesignKind::BCV:
        return ve / n;
    case DesignKind::BCV_Nx0:
        return (vr + ve) / n;
    case DesignKind::RCV:
        return (vp + vr + ve) / n;
    }
    return 0.0;
}

std::vector<VarianceCheck> validate_variance_formulas(const SyntheticModel& model, const std::vector<SimShape>& shapes,
                                                      std::size_t n_reps, unsigned threads)
{
    if (n_reps < 1000)
        throw Error("variance check: need at least 1000 replications");
    model.validate();
    const std::size_t M = model.tau.size();
    std::vector<VarianceCheck> out;
    for (const auto& shape : shapes) {
        const std::size_t R = shape.replication();
        std::vector<double> means(n_reps * M);
        parallel_for(n_reps, threads, [&](std::size_t rep) {
            const ErrTable t = simulate_table(model, shape, rep, BlockDraw::Held);
            const auto& recs = t.records();
            for (std::size_t m = 0; m < M; ++m) {
                CompensatedSum s;
                for (std::size_t k = 0; k < R; ++k)
                    s.add(recs[m * R + k].err);
                means[rep * M + m] = s.value() / static_cast<double>(R);
            }
        });
        CompensatedSum var_sum;
        for (std::size_t m = 0; m < M; ++m) {
            CompensatedSum s;
            for (std::size_t rep = 0; rep < n_reps; ++rep)
                s.add(means[rep * M + m]);
            const double mean = s.value() / static_cast<double>(n_reps);
            CompensatedSum ss;
            for (std::size_t rep = 0; rep < n_reps; ++rep) {
                const double d = means[rep * M + m] - mean;
                ss.add(d * d);
            }
            var_sum.add(ss.value() / static_cast<double>(n_reps - 1));
        }
        VarianceCheck row;
        row.design = shape.notation();
        row.formula_var = formula_variance(model, shape);
        row.empirical_var = var_sum.value() / static_cast<double>(M);
        if (row.formula_var == 0.0)
            row.ratio = row.empirical_var == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
        else
            row.ratio = row.empirical_var / row.formula_var;
        row.pass = row.ratio >= 0.9 && row.ratio <= 1.1;
        out.push_back(row);
    }
    return out;
}

void write_variance_csv(std::ostream& os, const std::vector<VarianceCheck>& rows)
{
    csv::write_row(os, {"design", "formula_var", "empirical_var", "ratio", "pass"});
    for (const auto& r : rows)
        csv::write_row(os, {r.design, format_real(r.formula_var), format_real(r.empirical_var), format_real(r.ratio),
                            r.pass ? "true" : "false"});
}

PairedComparison compare_stderr(const SyntheticModel& model, const SimShape& first, const SimShape& second,
                                std::size_t pairs, unsigned threads)
{
    std::vector<char> lower(pairs, 0);
    parallel_for(pairs, threads, [&](std::size_t rep) {
        const auto a = estimate_setting_means(simulate_table(model, first, rep)).mean_std_err();
        const auto b = estimate_setting_means(simulate_table(model, second, rep)).mean_std_err();
        if (!a || !b)
            throw Error("stderr comparison: both designs need replication");
        lower[rep] = *a < *b;
    });
    PairedComparison out;
    out.pairs = pairs;
    for (char c : lower)
        out.first_lower += c ? 1 : 0;
    return out;
}

}  // namespace bcv
