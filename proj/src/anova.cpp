#include "bcv/anova.hpp"

#include "bcv/error.hpp"
#include "bcv/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>

namespace bcv {

ModelSpec ModelSpec::default_for(const ErrTable& table)
{
    ModelSpec spec;
    switch (table.kind()) {
    case DesignKind::BCV:
        spec.random = {"CVseeds", "RFseeds"};
        break;
    case DesignKind::BCV_Nx0:
        spec.random = {"CVseeds"};
        break;
    case DesignKind::RCV:
        break;
    }
    spec.fixed = {"setting"};
    return spec;
}

const TermFit* AnovaResult::find_term(const std::string& name) const noexcept
{
    for (const auto& t : terms)
        if (t.name == name)
            return &t;
    return nullptr;
}

const TermFit& AnovaResult::term(const std::string& name) const
{
    if (const TermFit* t = find_term(name))
        return *t;
    throw Error("anova: model has no term '" + name + "'");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// An indicator column whose norm shrinks below this fraction after
// orthogonalization is linearly dependent on earlier columns.
constexpr double kRankTol = 1e-8;

struct FactorRef {
    enum class Kind { CV, Learner, Setting, Hyper } kind;
    std::size_t axis = 0;
    std::string name;
};

struct TermPlan {
    std::string name;
    TermKind kind;
    std::vector<FactorRef> factors;
    std::size_t declared = 0;
    int order = 0;
};

std::vector<std::string> split_term(const std::string& term)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = term.find(':', start);
        parts.push_back(term.substr(start, pos - start));
        if (pos == std::string::npos)
            break;
        start = pos + 1;
    }
    return parts;
}

FactorRef resolve_factor(const std::string& name, const ErrTable& table)
{
    if (name == "CVseeds") {
        if (table.kind() == DesignKind::RCV)
            throw Error("anova: term 'CVseeds' is absent from an RCV table");
        return {FactorRef::Kind::CV, 0, name};
    }
    if (name == "RFseeds") {
        if (table.kind() != DesignKind::BCV)
            throw Error("anova: term 'RFseeds' needs a design blocked on learner seeds");
        return {FactorRef::Kind::Learner, 0, name};
    }
    if (name == "setting")
        return {FactorRef::Kind::Setting, 0, name};
    const auto& names = table.grid().names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
        throw Error("anova: unknown factor '" + name + "'");
    return {FactorRef::Kind::Hyper, static_cast<std::size_t>(it - names.begin()), name};
}

std::vector<TermPlan> plan_terms(const ErrTable& table, const ModelSpec& model)
{
    if (table.kind() == DesignKind::RCV && !model.random.empty())
        throw Error("anova: random terms are confounded with the residual in an RCV table");

    std::vector<TermPlan> plans;
    std::vector<std::vector<std::string>> seen;
    auto add = [&](const std::string& name, TermKind kind) {
        TermPlan p{name, kind, {}, plans.size(), 0};
        auto parts = split_term(name);
        for (const auto& part : parts)
            p.factors.push_back(resolve_factor(part, table));
        auto sorted = parts;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw Error("anova: term '" + name + "' repeats a factor");
        if (std::find(seen.begin(), seen.end(), sorted) != seen.end())
            throw Error("anova: term '" + name + "' listed twice");
        seen.push_back(sorted);

        bool has_block = false;
        bool has_setting = false;
        for (const auto& f : p.factors) {
            has_block |= f.kind == FactorRef::Kind::CV || f.kind == FactorRef::Kind::Learner;
            has_setting |= f.kind == FactorRef::Kind::Setting;
        }
        if (has_setting && p.factors.size() > 1)
            throw Error("anova: 'setting' cannot appear in an interaction");
        if (kind == TermKind::Random && !has_block)
            throw Error("anova: random term '" + name + "' must involve CVseeds or RFseeds");
        if (kind == TermKind::Fixed && has_block)
            throw Error("anova: fixed term '" + name + "' involves a block factor; declare it random");
        p.order = has_setting ? 1000 : static_cast<int>(p.factors.size());
        plans.push_back(std::move(p));
    };
    for (const auto& t : model.random)
        add(t, TermKind::Random);
    for (const auto& t : model.fixed)
        add(t, TermKind::Fixed);

    std::stable_sort(plans.begin(), plans.end(), [](const TermPlan& x, const TermPlan& y) {
        if (x.order != y.order)
            return x.order < y.order;
        if (x.kind != y.kind)
            return x.kind == TermKind::Random;
        return x.declared < y.declared;
    });
    return plans;
}

std::size_t level_of(const FactorRef& f, const ErrTable& table, std::size_t m, std::size_t a, std::size_t b)
{
    switch (f.kind) {
    case FactorRef::Kind::CV: return a;
    case FactorRef::Kind::Learner: return b;
    case FactorRef::Kind::Setting: return m;
    case FactorRef::Kind::Hyper: return table.grid()[m].levels[f.axis];
    }
    return 0;
}

std::string level_label(const FactorRef& f, const ErrTable& table, std::size_t level)
{
    if (f.kind == FactorRef::Kind::Hyper)
        return render(table.grid().axes()[f.axis].values[level]);
    return std::to_string(level);
}

// Orthogonal (unnormalized) vector with its squared norm. Projecting with
// (u.v)/(u.u) keeps balanced layouts with dyadic cell shares exact.
struct OrthoVec {
    const std::vector<double>* u;
    double uu;
};

void orthogonalize(std::vector<double>& v, const std::vector<OrthoVec>& basis)
{
    // two passes of modified Gram-Schmidt
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& b : basis) {
            const double c = compensated_dot(*b.u, v) / b.uu;
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] -= c * (*b.u)[i];
        }
}

double norm(const std::vector<double>& v)
{
    return std::sqrt(compensated_dot(v, v));
}

}  // namespace

AnovaResult fit_anova(const ErrTable& table, const ModelSpec& model)
{
    table.validate();
    const auto plans = plan_terms(table, model);

    AnovaResult res;
    res.model = model;
    res.kind = table.kind();
    res.n_settings = table.n_settings();
    res.n_first = table.n_first();
    res.n_second = table.n_second();
    res.observed = table.values();

    const std::size_t n = res.observed.size();
    const std::size_t A = table.n_first();
    const std::size_t B = table.n_second();
    res.grand_mean = compensated_mean(res.observed);

    std::vector<double> centered(n);
    for (std::size_t i = 0; i < n; ++i)
        centered[i] = res.observed[i] - res.grand_mean;

    std::deque<std::vector<double>> ortho;  // stable addresses
    ortho.emplace_back(n, 1.0);
    std::vector<OrthoVec> all_basis{{&ortho.back(), static_cast<double>(n)}};
    std::vector<double> residual = centered;
    std::size_t model_df = 0;

    res.terms.reserve(plans.size());
    for (const auto& plan : plans) {
        TermFit t;
        t.name = plan.name;
        t.kind = plan.kind;
        for (const auto& f : plan.factors)
            t.factors.push_back(f.name);

        // cells = distinct level tuples, numbered in tuple order
        std::vector<std::vector<std::size_t>> tuple_of(n);
        std::map<std::vector<std::size_t>, std::size_t> cell_id;
        for (std::size_t m = 0; m < table.n_settings(); ++m)
            for (std::size_t a = 0; a < A; ++a)
                for (std::size_t b = 0; b < B; ++b) {
                    std::vector<std::size_t> tuple;
                    for (const auto& f : plan.factors)
                        tuple.push_back(level_of(f, table, m, a, b));
                    cell_id.emplace(tuple, 0);
                    tuple_of[table.index(m, a, b)] = std::move(tuple);
                }
        std::size_t next_id = 0;
        for (auto& [tuple, id] : cell_id) {
            id = next_id++;
            std::string label;
            for (std::size_t k = 0; k < tuple.size(); ++k) {
                if (k)
                    label += ':';
                label += level_label(plan.factors[k], table, tuple[k]);
            }
            t.level_labels.push_back(std::move(label));
        }
        const std::size_t n_cells = cell_id.size();
        std::vector<std::size_t> cell_of(n);
        t.replication.assign(n_cells, 0);
        for (std::size_t i = 0; i < n; ++i) {
            cell_of[i] = cell_id.at(tuple_of[i]);
            ++t.replication[cell_of[i]];
        }

        t.component.assign(n, 0.0);
        CompensatedSum sse;
        for (std::size_t c = 0; c < n_cells; ++c) {
            std::vector<double> v(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                if (cell_of[i] == c)
                    v[i] = 1.0;
            const double before = norm(v);
            orthogonalize(v, all_basis);
            const double after = norm(v);
            if (after <= kRankTol * before)
                continue;
            const double uu = compensated_dot(v, v);
            const double uy = compensated_dot(v, centered);
            const double coef = uy / uu;
            sse.add(uy * coef);
            for (std::size_t i = 0; i < n; ++i)
                t.component[i] += coef * v[i];
            std::vector<double> q = v;
            for (double& x : q)
                x /= after;
            t.basis.push_back(std::move(q));
            ortho.push_back(std::move(v));
            all_basis.push_back({&ortho.back(), uu});
        }
        for (std::size_t i = 0; i < n; ++i)
            residual[i] -= t.component[i];
        t.df = t.basis.size();
        t.sse = sse.value();
        t.mse = t.df > 0 ? t.sse / static_cast<double>(t.df) : kNaN;
        model_df += t.df;

        std::vector<CompensatedSum> cell_sum(n_cells);
        for (std::size_t i = 0; i < n; ++i)
            cell_sum[cell_of[i]].add(t.component[i]);
        t.effects.resize(n_cells);
        for (std::size_t c = 0; c < n_cells; ++c)
            t.effects[c] = cell_sum[c].value() / static_cast<double>(t.replication[c]);

        res.terms.push_back(std::move(t));
    }

    res.fitted.resize(n);
    res.residuals = std::move(residual);
    for (std::size_t i = 0; i < n; ++i)
        res.fitted[i] = res.observed[i] - res.residuals[i];

    res.total_df = n - 1;
    res.total_sse = compensated_dot(centered, centered);
    res.residual_df = res.total_df - model_df;
    res.residual_sse = compensated_dot(res.residuals, res.residuals);
    res.residual_mse = res.residual_df > 0 ? res.residual_sse / static_cast<double>(res.residual_df) : kNaN;
    return res;
}

std::optional<double> SettingMeans::mean_std_err() const
{
    if (means.empty() || !means.front().std_err)
        return std::nullopt;
    CompensatedSum s;
    for (const auto& m : means)
        s.add(*m.std_err);
    return s.value() / static_cast<double>(means.size());
}

SettingMeans estimate_setting_means(const ErrTable& table, const AnovaResult& fit)
{
    const std::size_t R = table.replication();
    SettingMeans out;
    out.replication = R;
    out.residual_mse = fit.residual_mse;
    std::optional<double> se;
    if (R > 1) {
        if (fit.residual_df == 0)
            throw Error("setting means: the fitted model leaves no residual degrees of freedom");
        se = std::sqrt(fit.residual_mse / static_cast<double>(R));
    }
    const auto& recs = table.records();
    for (std::size_t m = 0; m < table.n_settings(); ++m) {
        CompensatedSum s;
        for (std::size_t k = 0; k < R; ++k)
            s.add(recs[m * R + k].err);
        out.means.push_back({m, s.value() / static_cast<double>(R), se});
    }
    return out;
}

SettingMeans estimate_setting_means(const ErrTable& table)
{
    return estimate_setting_means(table, fit_anova(table));
}

std::vector<std::size_t> rank_settings(const SettingMeans& means)
{
    std::vector<std::size_t> pos(means.means.size());
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    std::stable_sort(pos.begin(), pos.end(), [&](std::size_t x, std::size_t y) {
        const auto& a = means.means[x];
        const auto& b = means.means[y];
        if (a.mean != b.mean)
            return a.mean < b.mean;
        return a.setting < b.setting;
    });
    std::vector<std::size_t> order;
    order.reserve(pos.size());
    for (std::size_t p : pos)
        order.push_back(means.means[p].setting);
    return order;
}

}  // namespace bcv
