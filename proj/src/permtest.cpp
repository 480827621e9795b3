#include "bcv/permtest.hpp"

#include "bcv/csv.hpp"
#include "bcv/error.hpp"
#include "bcv/numeric.hpp"
#include "bcv/parallel.hpp"
#include "bcv/rng.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace bcv {

std::vector<double> block_residuals(const AnovaResult& fit)
{
    std::vector<double> r = fit.observed;
    for (const auto& t : fit.terms) {
        if (t.kind != TermKind::Random)
            continue;
        for (std::size_t i = 0; i < r.size(); ++i)
            r[i] -= t.component[i];
    }
    return r;
}

std::string to_string(TestStatistic statistic)
{
    switch (statistic) {
    case TestStatistic::SSE: return "SSE";
    case TestStatistic::MSE: return "MSE";
    case TestStatistic::F: return "F";
    }
    return "?";
}

TestStatistic parse_statistic(std::string_view text)
{
    if (text == "SSE")
        return TestStatistic::SSE;
    if (text == "MSE")
        return TestStatistic::MSE;
    if (text == "F")
        return TestStatistic::F;
    throw Error("unknown test statistic '" + std::string(text) + "' (expected SSE, MSE or F)");
}

const TermTest* PermutationResult::find(const std::string& label) const noexcept
{
    for (const auto& t : tests)
        if (t.label == label)
            return &t;
    return nullptr;
}

namespace {

// Relative slack when comparing a permuted statistic against the observed
// one, so the identity permutation always counts.
constexpr double kTieTol = 1e-12;

double projected_ss(const std::vector<const std::vector<double>*>& basis, const std::vector<double>& v)
{
    CompensatedSum s;
    for (const auto* q : basis) {
        const double c = compensated_dot(*q, v);
        s.add(c * c);
    }
    return s.value();
}

// Term mean square over the residual mean square of the full refit. The
// centered total is permutation invariant, so the residual is that total
// minus the projections on every model term.
class FRatio {
public:
    FRatio(const AnovaResult& fit, const std::vector<double>& v, std::size_t df)
        : df_(static_cast<double>(df)), residual_df_(static_cast<double>(fit.residual_df))
    {
        for (const auto& t : fit.terms)
            for (const auto& q : t.basis)
                model_.push_back(&q);
        const double mean = compensated_mean(v);
        CompensatedSum s;
        for (double x : v)
            s.add((x - mean) * (x - mean));
        centered_ = s.value();
    }

    double operator()(double term_ss, const std::vector<double>& w) const
    {
        const double residual = std::max(centered_ - projected_ss(model_, w), 1e-15 * centered_);
        return (term_ss / df_) / (residual / residual_df_);
    }

private:
    std::vector<const std::vector<double>*> model_;
    double df_;
    double residual_df_;
    double centered_ = 0.0;
};

bool degenerate(const std::vector<double>& v)
{
    const double mean = compensated_mean(v);
    CompensatedSum centered;
    CompensatedSum raw;
    for (double x : v) {
        centered.add((x - mean) * (x - mean));
        raw.add(x * x);
    }
    return centered.value() <= 1e-20 * raw.value();
}

}  // namespace

PermutationResult permutation_test(const AnovaResult& fit, const PermutationPlan& plan)
{
    if (plan.permutations < 1)
        throw Error("permutation test: need at least one permutation");
    if (fit.residual_df == 0)
        throw Error("permutation test: the fitted model leaves no residual degrees of freedom");

    std::vector<std::vector<std::string>> tests = plan.tests;
    if (tests.empty())
        for (const auto& t : fit.terms)
            tests.push_back({t.name});

    const std::vector<double> block_r = block_residuals(fit);
    const std::size_t n = fit.observed.size();
    const std::size_t B = plan.permutations;

    PermutationResult out;
    out.permutations = B;
    out.statistic = plan.statistic;

    for (std::size_t ti = 0; ti < tests.size(); ++ti) {
        const auto& names = tests[ti];
        if (names.empty())
            throw Error("permutation test: empty test");
        TermTest tt;
        tt.terms = names;
        tt.permutations = B;
        std::vector<const std::vector<double>*> basis;
        bool any_random = false;
        for (std::size_t k = 0; k < names.size(); ++k) {
            const TermFit& t = fit.term(names[k]);
            if (k)
                tt.label += '+';
            tt.label += t.name;
            tt.df += t.df;
            any_random |= t.kind == TermKind::Random;
            for (const auto& q : t.basis)
                basis.push_back(&q);
        }

        std::vector<double> v;
        if (any_random) {
            v.assign(n, fit.grand_mean);
            for (std::size_t i = 0; i < n; ++i)
                v[i] += fit.residuals[i];
            for (const auto& name : names) {
                const auto& comp = fit.term(name).component;
                for (std::size_t i = 0; i < n; ++i)
                    v[i] += comp[i];
            }
        } else {
            v = block_r;
        }

        if (tt.df == 0 || degenerate(v)) {
            tt.count_ge = B;
            tt.p_value = 1.0;
            out.tests.push_back(std::move(tt));
            continue;
        }
        const FRatio ratio(fit, v, tt.df);
        auto statistic = [&](const std::vector<double>& w) {
            const double ss = projected_ss(basis, w);
            switch (plan.statistic) {
            case TestStatistic::SSE: return ss;
            case TestStatistic::MSE: return ss / static_cast<double>(tt.df);
            case TestStatistic::F: return ratio(ss, w);
            }
            return ss;
        };
        tt.observed = statistic(v);

        std::vector<double> stats(B);
        parallel_for(B, plan.threads, [&](std::size_t b) {
            Pcg32 rng(derive_seed(plan.seed, {seed_tag::permutation, static_cast<std::uint64_t>(ti),
                                              static_cast<std::uint64_t>(b)}));
            std::vector<double> w = v;
            shuffle(std::span<double>(w), rng);
            stats[b] = statistic(w);
        });

        const double threshold = tt.observed - kTieTol * std::fabs(tt.observed);
        CompensatedSum sum;
        double mx = 0.0;
        for (double s : stats) {
            sum.add(s);
            mx = std::max(mx, s);
            if (s >= threshold)
                ++tt.count_ge;
        }
        tt.permuted_mean = sum.value() / static_cast<double>(B);
        tt.permuted_max = mx;
        tt.p_value = static_cast<double>(1 + tt.count_ge) / static_cast<double>(B + 1);
        out.tests.push_back(std::move(tt));
    }
    return out;
}

std::string render_p_value(const TermTest& test)
{
    if (test.count_ge == 0)
        return "<1/" + std::to_string(test.permutations + 1);
    return format_sig(test.p_value, 4);
}

namespace {

std::string real_or_empty(double x)
{
    return std::isnan(x) ? std::string() : format_real(x);
}

}  // namespace

void write_anova_csv(std::ostream& os, const AnovaResult& fit, const PermutationResult* tests)
{
    csv::write_row(os, {"term", "df", "SSE", "MSE", "p_value"});
    auto p_for = [&](const std::string& name) -> std::string {
        if (!tests)
            return {};
        const TermTest* t = tests->find(name);
        return t ? render_p_value(*t) : std::string();
    };
    auto term_row = [&](const TermFit& t) {
        csv::write_row(os, {t.name, std::to_string(t.df), format_real(t.sse), real_or_empty(t.mse), p_for(t.name)});
    };

    std::size_t random_df = 0;
    CompensatedSum random_sse;
    bool any_random = false;
    for (const auto& t : fit.terms)
        if (t.kind == TermKind::Random) {
            term_row(t);
            any_random = true;
            random_df += t.df;
            random_sse.add(t.sse);
        }
    if (any_random) {
        const double mse = random_df > 0 ? random_sse.value() / static_cast<double>(random_df) : std::nan("");
        csv::write_row(os, {"Total", std::to_string(random_df), format_real(random_sse.value()), real_or_empty(mse), ""});
    }
    for (const auto& t : fit.terms)
        if (t.kind == TermKind::Fixed)
            term_row(t);
    csv::write_row(os, {"Residuals", std::to_string(fit.residual_df), format_real(fit.residual_sse),
                        real_or_empty(fit.residual_mse), ""});
}

}  // namespace bcv
