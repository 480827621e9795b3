#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bcv/design.hpp"

namespace bcv {

enum class TermKind { Random, Fixed };

/// Terms of the mixed-effects model fitted to an error table.
///
/// A term is a factor or a ':'-joined interaction of factors. Factors are
/// "CVseeds" (CV block), "RFseeds" (learner block), "setting" (the aggregate
/// setting effect) and the grid's hyperparameter names. Random terms must
/// contain a block factor; fixed terms must not. "setting" only appears
/// alone. RCV tables admit no random terms.
struct ModelSpec {
    std::vector<std::string> random;
    std::vector<std::string> fixed;

    /// Blocks present in the table plus the setting term.
    static ModelSpec default_for(const ErrTable& table);
};

struct TermFit {
    std::string name;
    TermKind kind = TermKind::Fixed;
    std::vector<std::string> factors;
    std::size_t df = 0;
    double sse = 0.0;
    double mse = 0.0;  // NaN when df == 0
    /// One entry per cell (distinct level combination), labels joined by ':'.
    std::vector<std::string> level_labels;
    std::vector<double> effects;
    std::vector<std::size_t> replication;
    /// Fitted contribution of the term at every observation.
    std::vector<double> component;
    /// Orthonormal basis of the term's column space after removing the
    /// intercept and every earlier term, one vector per degree of freedom.
    std::vector<std::vector<double>> basis;
};

/// Sequential (orthogonal) decomposition of an error table. Effects obey
/// zero-sum constraints: in a balanced layout each main-effect level estimate
/// equals level mean minus grand mean, and interaction estimates equal cell
/// mean minus contained main effects minus grand mean. For grids with
/// excluded combinations the hyperparameter terms are fitted in order by
/// least squares, so the zero-sum constraints hold weighted by replication.
struct AnovaResult {
    ModelSpec model;
    DesignKind kind = DesignKind::BCV;
    std::size_t n_settings = 0;
    std::size_t n_first = 0;
    std::size_t n_second = 0;

    double grand_mean = 0.0;
    std::vector<TermFit> terms;  // fit order: random before fixed within each order
    std::vector<double> observed;
    std::vector<double> fitted;
    std::vector<double> residuals;
    std::size_t residual_df = 0;
    double residual_sse = 0.0;
    double residual_mse = 0.0;  // NaN when residual_df == 0
    std::size_t total_df = 0;
    double total_sse = 0.0;

    /// Throws if the model has no such term.
    const TermFit& term(const std::string& name) const;
    const TermFit* find_term(const std::string& name) const noexcept;
};

AnovaResult fit_anova(const ErrTable& table, const ModelSpec& model);
inline AnovaResult fit_anova(const ErrTable& table) { return fit_anova(table, ModelSpec::default_for(table)); }

struct SettingMean {
    std::size_t setting = 0;
    double mean = 0.0;
    /// sqrt(residual MSE / R); empty when R == 1.
    std::optional<double> std_err;
};

struct SettingMeans {
    std::vector<SettingMean> means;
    std::size_t replication = 0;
    double residual_mse = 0.0;

    /// Standard error averaged over settings; empty when undefined.
    std::optional<double> mean_std_err() const;
};

/// Per-setting mean over the replication axis with its standard error,
/// taken from `fit`'s residual mean square. For blocked designs that
/// estimates the higher-order remainder variance; for RCV it absorbs the
/// partition and learner variance as well.
SettingMeans estimate_setting_means(const ErrTable& table, const AnovaResult& fit);
SettingMeans estimate_setting_means(const ErrTable& table);

/// Setting indices by ascending mean; equal means keep index order.
std::vector<std::size_t> rank_settings(const SettingMeans& means);

}  // namespace bcv
