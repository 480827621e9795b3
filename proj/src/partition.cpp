#include "bcv/partition.hpp"

#include "bcv/error.hpp"
#include "bcv/rng.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace bcv {

std::string to_string(Sampling sampling)
{
    return sampling == Sampling::SRS ? "SRS" : "STS";
}

Sampling parse_sampling(std::string_view text)
{
    if (text == "SRS" || text == "srs")
        return Sampling::SRS;
    if (text == "STS" || text == "sts")
        return Sampling::STS;
    throw Error("unknown sampling '" + std::string(text) + "' (expected SRS or STS)");
}

std::vector<std::size_t> FoldPartition::fold_sizes() const
{
    std::vector<std::size_t> sizes(strategy.k, 0);
    for (auto f : fold_of)
        ++sizes[f];
    return sizes;
}

std::vector<std::size_t> FoldPartition::test_rows(std::size_t fold) const
{
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold)
            rows.push_back(i);
    return rows;
}

std::vector<std::size_t> FoldPartition::train_rows(std::size_t fold) const
{
    std::vector<std::size_t> rows;
    rows.reserve(fold_of.size());
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold)
            rows.push_back(i);
    return rows;
}

namespace {

// Chunk index of position p when n positions are cut into k near-equal
// chunks, the first n mod k chunks holding one extra element.
std::uint32_t chunk_of(std::size_t p, std::size_t n, std::size_t k)
{
    const std::size_t q = n / k;
    const std::size_t r = n % k;
    const std::size_t big = r * (q + 1);
    if (p < big)
        return static_cast<std::uint32_t>(p / (q + 1));
    return static_cast<std::uint32_t>(r + (p - big) / q);
}

}  // namespace

std::vector<std::uint32_t> strata_for(const Dataset& dataset, const PartitionStrategy& strategy)
{
    const std::size_t n = dataset.n_rows();
    std::vector<std::uint32_t> strata(n, 0);
    if (strategy.sampling == Sampling::SRS)
        return strata;
    if (dataset.task == Task::Classification) {
        for (std::size_t i = 0; i < n; ++i)
            strata[i] = static_cast<std::uint32_t>(dataset.target[i]);
        return strata;
    }
    // Regression: k quantile bins of the target, ties broken by row index.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dataset.target[a] < dataset.target[b]; });
    const std::size_t bins = std::min(strategy.k, n);
    for (std::size_t rank = 0; rank < n; ++rank)
        strata[order[rank]] = chunk_of(rank, n, bins);
    return strata;
}

std::vector<std::uint32_t> assign_folds(std::span<const std::uint32_t> strata, std::size_t k,
                                        Sampling sampling, std::uint64_t cv_seed)
{
    const std::size_t n = strata.size();
    if (k < 2)
        throw Error("partition: need at least 2 folds, got " + std::to_string(k));
    if (k > n)
        throw Error("partition: " + std::to_string(k) + " folds exceed " + std::to_string(n) + " instances");

    Pcg32 rng = make_stream(cv_seed, {seed_tag::partition});
    std::vector<std::uint32_t> fold_of(n, 0);

    if (sampling == Sampling::SRS) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        shuffle(std::span(idx), rng);
        for (std::size_t p = 0; p < n; ++p)
            fold_of[idx[p]] = chunk_of(p, n, k);
        return fold_of;
    }

    const std::uint32_t n_strata = n == 0 ? 0 : *std::max_element(strata.begin(), strata.end()) + 1;
    std::vector<std::vector<std::size_t>> members(n_strata);
    for (std::size_t i = 0; i < n; ++i)
        members[strata[i]].push_back(i);
    for (auto& m : members)
        shuffle(std::span(m), rng);

    std::size_t deal = rng.below(static_cast<std::uint32_t>(k));
    for (const auto& m : members)
        for (std::size_t i : m)
            fold_of[i] = static_cast<std::uint32_t>(deal++ % k);
    return fold_of;
}

FoldPartition partition_folds(const Dataset& dataset, const PartitionStrategy& strategy,
                              std::uint64_t cv_seed)
{
    const auto strata = strata_for(dataset, strategy);
    FoldPartition p;
    p.fold_of = assign_folds(strata, strategy.k, strategy.sampling, cv_seed);
    p.cv_seed = cv_seed;
    p.strategy = strategy;
    return p;
}

void write_partition_csv(std::ostream& os, const FoldPartition& partition)
{
    os << "instance_index,fold\n";
    for (std::size_t i = 0; i < partition.fold_of.size(); ++i)
        os << i << ',' << partition.fold_of[i] << '\n';
}

}  // namespace bcv
