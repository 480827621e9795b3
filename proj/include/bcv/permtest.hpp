#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bcv/anova.hpp"

namespace bcv {

/// Observations with every random-term component removed. For a model with
/// only CVseeds and RFseeds this is Err - pi_i - rho_j, which equals the
/// setting mean plus the residual when the fixed part is the setting term.
/// Tables without random terms are returned unchanged.
std::vector<double> block_residuals(const AnovaResult& fit);

/// SSE and MSE: the tested term's sum or mean square on the permuted vector.
/// F: that mean square over the residual mean square of the full model
/// refitted to the permuted vector. Permuting all cells gives the vector
/// components along the block and other model terms; the refit removes them
/// from the denominator, which keeps F calibrated where SSE is not.
enum class TestStatistic { SSE, MSE, F };

std::string to_string(TestStatistic statistic);
TestStatistic parse_statistic(std::string_view text);

struct PermutationPlan {
    /// Each entry is one test; several names form a joint test on the sum of
    /// their SSEs. Empty means one test per model term.
    std::vector<std::vector<std::string>> tests;
    std::size_t permutations = 4999;
    std::uint64_t seed = 0;
    TestStatistic statistic = TestStatistic::F;
    unsigned threads = 1;
};

struct TermTest {
    std::vector<std::string> terms;
    std::string label;  // terms joined by '+'
    std::size_t df = 0;
    double observed = 0.0;
    double permuted_mean = 0.0;
    double permuted_max = 0.0;
    std::size_t count_ge = 0;
    std::size_t permutations = 0;
    double p_value = 1.0;
};

struct PermutationResult {
    std::vector<TermTest> tests;
    std::size_t permutations = 0;
    TestStatistic statistic = TestStatistic::F;

    const TermTest* find(const std::string& label) const noexcept;
};

/// Kennedy-style permutation test. Fixed terms: the statistic is computed on
/// the block residuals, which are permuted over all cells. Random terms: the
/// observations are first reduced to the tested term plus the residual, then
/// permuted. The statistic is recomputed from the term's projection basis on
/// every permuted vector. p = (1 + #{permuted >= observed}) / (B + 1).
PermutationResult permutation_test(const AnovaResult& fit, const PermutationPlan& plan);

/// "<1/(B+1)" at the smallest attainable p, else the value with 4 significant
/// digits.
std::string render_p_value(const TermTest& test);

/// ANOVA table with columns term, df, SSE, MSE, p_value. Rows: random terms,
/// their "Total", fixed terms, "Residuals". Single-term tests fill p_value.
void write_anova_csv(std::ostream& os, const AnovaResult& fit, const PermutationResult* tests = nullptr);

}  // namespace bcv
