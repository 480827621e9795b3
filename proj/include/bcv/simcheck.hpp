#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bcv/design.hpp"

namespace bcv {

enum class NoiseKind { Gaussian, Uniform };

/// Err = mu + pi + rho + tau_m + eps with zero-mean random terms of the
/// given standard deviations. `cross` adds cross * pi_i * tau_m to every
/// cell, a structured remainder for robustness checks.
struct SyntheticModel {
    double mu = 10.0;
    std::vector<double> tau;
    double sigma_pi = 0.0;
    double sigma_rho = 0.0;
    double sigma_eps = 0.0;
    NoiseKind noise = NoiseKind::Gaussian;
    std::uint64_t seed = 0;
    double cross = 0.0;

    /// Throws unless tau sums to 0 within 1e-12 and every sigma is finite
    /// and non-negative.
    void validate() const;
};

/// Evenly spaced zero-sum effects spanning [-range/2, range/2].
std::vector<double> linear_tau(std::size_t m, double range);

struct SimShape {
    DesignKind kind = DesignKind::BCV;
    std::size_t n_first = 1;
    std::size_t n_second = 1;

    static SimShape bcv(std::size_t n_p, std::size_t n_r) { return {DesignKind::BCV, n_p, n_r}; }
    static SimShape nx0(std::size_t n_p) { return {DesignKind::BCV_Nx0, n_p, 1}; }
    static SimShape rcv(std::size_t n) { return {DesignKind::RCV, n, 1}; }
    std::size_t replication() const noexcept { return n_first * n_second; }
    std::string notation() const;
};

/// Redraw: every replicate draws new block effects. Held: block effects are
/// drawn once per model seed and shared by all replicates, so only the
/// unblocked terms vary between replicates.
enum class BlockDraw { Redraw, Held };

/// One synthetic error table. BCV draws pi_i and rho_j once per table and
/// reuses them for every setting; BCV_Nx0 blocks pi only and draws rho per
/// cell; RCV draws pi, rho and eps fresh for every cell. Every draw comes
/// from a stream keyed by its coordinates, so a smaller shape is a subtable
/// of a larger one with the same seed and replicate. Throws if a simulated
/// value is negative.
ErrTable simulate_table(const SyntheticModel& model, const SimShape& shape, std::uint64_t replicate = 0,
                        BlockDraw blocks = BlockDraw::Redraw);

/// Variance of a setting mean implied by the model, conditional on held
/// blocks: sigma_eps^2/(N_P N_R) for BCV, (sigma_rho^2 + sigma_eps^2)/N_P for
/// BCV_Nx0 and (sigma_pi^2 + sigma_rho^2 + sigma_eps^2)/N for RCV.
double formula_variance(const SyntheticModel& model, const SimShape& shape);

struct VarianceCheck {
    std::string design;
    double formula_var = 0.0;
    double empirical_var = 0.0;
    double ratio = 0.0;  // empirical / formula, 1 when both are 0
    bool pass = false;
};

/// Empirical variance of the setting means over `n_reps` simulated tables
/// with held blocks, averaged over settings, against formula_variance.
/// Passes when the ratio lies in [0.9, 1.1]. Requires n_reps >= 1000.
std::vector<VarianceCheck> validate_variance_formulas(const SyntheticModel& model, const std::vector<SimShape>& shapes,
                                                      std::size_t n_reps, unsigned threads = 1);

void write_variance_csv(std::ostream& os, const std::vector<VarianceCheck>& rows);

struct PairedComparison {
    std::size_t pairs = 0;
    std::size_t first_lower = 0;  // replicates where the first design's std.err is lower
    double fraction() const noexcept { return pairs ? static_cast<double>(first_lower) / static_cast<double>(pairs) : 0.0; }
};

/// Simulates both shapes from the same replicate seed and compares the mean
/// std.err of the setting means from the default ANOVA fit.
PairedComparison compare_stderr(const SyntheticModel& model, const SimShape& first, const SimShape& second,
                                std::size_t pairs, unsigned threads = 1);

}  // namespace bcv
