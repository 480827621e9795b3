#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bcv/data.hpp"

namespace bcv {

/// SRS: simple random subsampling. STS: stratified on the class label, or on
/// k quantile bins of the target for regression.
enum class Sampling { SRS, STS };

std::string to_string(Sampling sampling);
Sampling parse_sampling(std::string_view text);

struct PartitionStrategy {
    std::size_t k = 5;
    Sampling sampling = Sampling::SRS;

    bool operator==(const PartitionStrategy&) const = default;
};

struct FoldPartition {
    std::vector<std::uint32_t> fold_of;
    std::uint64_t cv_seed = 0;
    PartitionStrategy strategy;

    std::size_t n_folds() const noexcept { return strategy.k; }
    std::vector<std::size_t> fold_sizes() const;
    /// Row indices in `fold`, ascending.
    std::vector<std::size_t> test_rows(std::size_t fold) const;
    /// Row indices outside `fold`, ascending.
    std::vector<std::size_t> train_rows(std::size_t fold) const;

    bool operator==(const FoldPartition&) const = default;
};

/// Stratum of each row under `strategy` (all zeros for SRS).
std::vector<std::uint32_t> strata_for(const Dataset& dataset, const PartitionStrategy& strategy);

/// Seeded K-fold assignment of n rows given per-row strata.
///
/// SRS shuffles the row indices and cuts them into k contiguous chunks, the
/// first n mod k chunks one element longer. STS shuffles each stratum, then
/// deals strata in ascending order round-robin over folds starting at a
/// seed-drawn offset, continuing the deal across strata. Both keep fold sizes
/// within 1 of each other; STS also keeps per-stratum fold counts within 1.
std::vector<std::uint32_t> assign_folds(std::span<const std::uint32_t> strata, std::size_t k,
                                        Sampling sampling, std::uint64_t cv_seed);

FoldPartition partition_folds(const Dataset& dataset, const PartitionStrategy& strategy,
                              std::uint64_t cv_seed);

/// Audit dump: header `instance_index,fold`, one row per instance.
void write_partition_csv(std::ostream& os, const FoldPartition& partition);

}  // namespace bcv
