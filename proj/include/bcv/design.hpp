#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bcv/data.hpp"
#include "bcv/grid.hpp"
#include "bcv/learner.hpp"
#include "bcv/partition.hpp"
#include "bcv/rng.hpp"

namespace bcv {

/// BCV: CV seeds crossed with learner seeds, both blocked.
/// BCV_Nx0: CV seeds blocked, learner seed drawn fresh for every cell.
/// RCV: repetitions with CV and learner seeds drawn fresh for every cell.
enum class DesignKind { BCV, BCV_Nx0, RCV };

struct DesignPlan {
    DesignKind kind = DesignKind::BCV;
    std::vector<std::uint64_t> cv_seeds;
    std::vector<std::uint64_t> learner_seeds;
    std::size_t n_reps = 0;
    std::uint64_t master_seed = 0;
    PartitionStrategy strategy;
    /// RCV only: one partition and learner seed per repetition, shared by all
    /// settings, instead of fresh seeds for every cell.
    bool rcv_shared_within_rep = false;

    static DesignPlan bcv(std::vector<std::uint64_t> cv_seeds, std::vector<std::uint64_t> learner_seeds,
                          PartitionStrategy strategy);
    static DesignPlan bcv_nx0(std::vector<std::uint64_t> cv_seeds, std::uint64_t master_seed,
                              PartitionStrategy strategy);
    static DesignPlan rcv(std::size_t n_reps, std::uint64_t master_seed, PartitionStrategy strategy,
                          bool shared_within_rep = false);

    void validate() const;

    /// "5-BCV SRS 4x4", "5-BCV STS 4x0" or "10-RCV SRS 16Rep".
    std::string notation() const;
    /// Length of the first replication axis: CV seeds, or repetitions for RCV.
    std::size_t n_first() const noexcept;
    /// Length of the second axis: learner seeds for BCV, else 1.
    std::size_t n_second() const noexcept;
    /// Runs per setting (N_P * N_R, or N).
    std::size_t replication() const noexcept { return n_first() * n_second(); }
};

std::string to_string(DesignKind kind);

/// `count` distinct seeds drawn from a master seed; a longer list extends a
/// shorter one drawn with the same (master, tag).
std::vector<std::uint64_t> draw_seeds(std::uint64_t master, std::uint64_t tag, std::size_t count);

/// Order-independent identity of a setting: a hash of its names and values.
std::uint64_t setting_key(const SettingGrid& grid, std::size_t m);

/// Seeds for one cell of the design. Index a is the CV block (or RCV
/// repetition), b the learner block (0 unless BCV).
struct CellPlan {
    std::size_t setting = 0;
    std::size_t a = 0;
    std::size_t b = 0;
    std::uint64_t cv_seed = 0;
    std::uint64_t learner_seed = 0;
};

/// All cells in (setting, a, b) order.
std::vector<CellPlan> plan_cells(const SettingGrid& grid, const DesignPlan& plan);

/// Learner seed used for the model fitted with `fold` held out.
inline std::uint64_t fold_seed(std::uint64_t learner_seed, std::size_t fold) noexcept
{
    return derive_seed(learner_seed, {static_cast<std::uint64_t>(fold)});
}

struct ErrRecord {
    std::size_t setting = 0;
    std::size_t a = 0;
    std::size_t b = 0;
    std::uint64_t cv_seed = 0;
    std::uint64_t learner_seed = 0;
    double err = 0.0;
};

/// Complete, balanced long-format table of CV errors, ordered by
/// (setting, a, b).
class ErrTable {
public:
    ErrTable() = default;
    ErrTable(DesignPlan plan, SettingGrid grid, std::vector<ErrRecord> records,
             std::optional<LossKind> loss = std::nullopt, std::string dataset_name = {});

    const DesignPlan& plan() const noexcept { return plan_; }
    const SettingGrid& grid() const noexcept { return grid_; }
    const std::vector<ErrRecord>& records() const noexcept { return records_; }
    std::optional<LossKind> loss() const noexcept { return loss_; }
    const std::string& dataset_name() const noexcept { return dataset_name_; }

    DesignKind kind() const noexcept { return plan_.kind; }
    std::size_t n_settings() const noexcept { return grid_.size(); }
    std::size_t n_first() const noexcept { return plan_.n_first(); }
    std::size_t n_second() const noexcept { return plan_.n_second(); }
    std::size_t replication() const noexcept { return plan_.replication(); }
    std::size_t size() const noexcept { return records_.size(); }

    std::size_t index(std::size_t m, std::size_t a, std::size_t b) const noexcept
    {
        return (m * n_first() + a) * n_second() + b;
    }
    double err(std::size_t m, std::size_t a, std::size_t b) const { return records_.at(index(m, a, b)).err; }
    std::vector<double> values() const;

    /// Table restricted to the first n_first x n_second blocks (or first
    /// n_first repetitions). Equals running the design with the truncated
    /// seed lists.
    ErrTable subtable(std::size_t n_first, std::size_t n_second = 1) const;

    /// Throws unless complete, balanced, correctly ordered and in range.
    void validate() const;

private:
    DesignPlan plan_;
    SettingGrid grid_;
    std::vector<ErrRecord> records_;
    std::optional<LossKind> loss_;
    std::string dataset_name_;
};

/// Optional record of every model fit made by run_design.
struct FitTrace {
    std::size_t setting = 0;
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t fold = 0;
    std::uint64_t fold_learner_seed = 0;
    std::uint64_t partition_fingerprint = 0;
    std::uint64_t training_fingerprint = 0;
};

struct RunOptions {
    unsigned threads = 1;
    std::vector<FitTrace>* trace = nullptr;
};

/// Computes the error of one cell: for each fold, train on the other folds
/// with fold_seed(learner_seed, fold), predict the held-out fold, then apply
/// `loss` once to the pooled out-of-fold predictions.
double cell_error(const Dataset& dataset, const Learner& learner, const FoldPartition& partition,
                  std::uint64_t learner_seed, LossKind loss);

/// Runs every cell of `plan` over `grid`. `base` holds the learner kind and
/// fixed hyperparameters; each setting's values override them. BCV builds one
/// partition per CV seed and reuses it for every setting and learner seed.
/// Any failing cell aborts the run. The result does not depend on
/// options.threads.
ErrTable run_design(const Dataset& dataset, const SettingGrid& grid, const DesignPlan& plan, const LearnerSpec& base,
                    LossKind loss, const RunOptions& options = {});

/// CSV columns: setting_index, one column per hyperparameter, then
/// cv_seed_index, learner_seed_index (or rep for RCV), cv_seed,
/// learner_seed, err.
void write_err_table_csv(std::ostream& os, const ErrTable& table);
ErrTable read_err_table_csv(std::istream& is);
ErrTable read_err_table_csv(const std::filesystem::path& path);

}  // namespace bcv
