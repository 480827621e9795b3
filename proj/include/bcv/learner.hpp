#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bcv/data.hpp"
#include "bcv/param.hpp"

namespace bcv {

/// Learner kind plus hyperparameters. Keys must be recognized by the kind.
struct LearnerSpec {
    std::string kind;
    ParamMap params;
};

/// Feature layout a model was trained on; predict() rejects other layouts.
struct Schema {
    Task task = Task::Classification;
    std::vector<ColumnType> column_types;
    std::size_t n_classes = 0;

    static Schema of(const Dataset& dataset);
    bool operator==(const Schema&) const = default;
};

/// Hash of a training row set; identical row lists give identical values.
std::uint64_t fingerprint_rows(std::span<const std::size_t> rows) noexcept;

class TrainedModel {
public:
    TrainedModel(Schema schema, std::uint64_t learner_seed, std::uint64_t fingerprint)
        : schema_(std::move(schema)), learner_seed_(learner_seed), fingerprint_(fingerprint)
    {
    }
    virtual ~TrainedModel() = default;

    /// Class codes (classification) or reals (regression), one per query row.
    std::vector<double> predict(const Dataset& dataset, std::span<const std::size_t> rows) const;

    std::uint64_t learner_seed() const noexcept { return learner_seed_; }
    std::uint64_t training_fingerprint() const noexcept { return fingerprint_; }
    const Schema& schema() const noexcept { return schema_; }

protected:
    virtual void predict_rows(const Dataset& dataset, std::span<const std::size_t> rows,
                              std::span<double> out) const = 0;

private:
    Schema schema_;
    std::uint64_t learner_seed_;
    std::uint64_t fingerprint_;
};

class Learner {
public:
    virtual ~Learner() = default;

    /// Deterministic in (hyperparameters, dataset, rows, learner_seed).
    virtual std::unique_ptr<TrainedModel> train(const Dataset& dataset, std::span<const std::size_t> rows,
                                                std::uint64_t learner_seed) const = 0;
};

/// Builds a learner and validates its hyperparameters against the dataset.
/// Kinds: "random_forest" and "constant_majority" (majority class or mean;
/// a no-skill baseline that accepts and ignores the forest's hyperparameters
/// so it can run over the same grid).
std::unique_ptr<Learner> make_learner(const LearnerSpec& spec, const Dataset& dataset,
                                      unsigned tree_threads = 1);

/// Hyperparameter names a kind accepts; throws for unknown kinds.
std::vector<std::string> recognized_params(const std::string& kind);

/// Majority vote over class codes; ties go to the smallest code.
double majority_vote(std::span<const double> votes, std::size_t n_classes);

enum class LossKind { MisclassificationRate, RMSE, MAE };

std::string to_string(LossKind loss);
LossKind parse_loss(std::string_view text);
LossKind default_loss(Task task) noexcept;
/// Throws if the loss does not apply to the task.
void check_loss_for_task(LossKind loss, Task task);

double compute_loss(LossKind loss, std::span<const double> predictions, std::span<const double> truth);

}  // namespace bcv
