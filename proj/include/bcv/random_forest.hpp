#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bcv/learner.hpp"
#include "bcv/rng.hpp"

namespace bcv {

/// Random forest hyperparameters. Config names: mtry, min.node.size, replace,
/// sample.fraction, num.trees.
struct RfHyperparams {
    std::size_t mtry = 1;
    std::size_t min_node_size = 1;
    bool replace = true;
    double sample_fraction = 1.0;
    std::size_t num_trees = 500;

    /// Unset keys fall back to: mtry = floor(sqrt(p)) for classification or
    /// max(1, floor(p/3)) for regression, min.node.size = 1 (classification)
    /// or 5 (regression), replace = T, sample.fraction = 1 with replacement
    /// or 0.632 without, num.trees = 500.
    static RfHyperparams from_params(const ParamMap& params, const Dataset& dataset);
    void validate(std::size_t n_features) const;
};

/// Binary CART node. Numeric splits send x <= threshold left; categorical
/// splits send x == threshold (a level code) left.
struct TreeNode {
    std::int32_t feature = -1;
    bool categorical = false;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
    std::uint32_t n_samples = 0;
    /// Gini impurity times node size (classification) or sum of squared
    /// deviations (regression).
    double impurity = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const Dataset& dataset, std::size_t row) const noexcept;
    std::size_t depth() const;
};

/// Grows one tree on `sample` (row indices, repeats allowed) drawing the
/// per-node candidate features from `rng`.
///
/// Split rules: candidate features are min(mtry, p) distinct indices drawn
/// without replacement at each node and scanned in ascending order. Numeric
/// thresholds are midpoints between consecutive distinct values; categorical
/// splits are one level versus the rest. The best split maximizes impurity
/// decrease (Gini or variance); ties keep the lowest feature, then the lowest
/// threshold. A node becomes a leaf when it is pure, has fewer than
/// min_node_size samples, or no candidate strictly lowers impurity.
Tree grow_tree(const Dataset& dataset, std::span<const std::size_t> sample, const RfHyperparams& hp,
               Pcg32& rng);

class RandomForestModel final : public TrainedModel {
public:
    RandomForestModel(Schema schema, std::uint64_t learner_seed, std::uint64_t fingerprint,
                      std::vector<Tree> trees);

    const std::vector<Tree>& trees() const noexcept { return trees_; }

protected:
    void predict_rows(const Dataset& dataset, std::span<const std::size_t> rows,
                      std::span<double> out) const override;

private:
    std::vector<Tree> trees_;
};

class RandomForest final : public Learner {
public:
    explicit RandomForest(RfHyperparams hp, unsigned tree_threads = 1) : hp_(hp), tree_threads_(tree_threads) {}

    /// Tree t is grown from Pcg32(derive_seed(learner_seed, {t})); the
    /// subsample of round(sample_fraction * |rows|) instances comes from the
    /// same stream. Results do not depend on tree_threads.
    std::unique_ptr<TrainedModel> train(const Dataset& dataset, std::span<const std::size_t> rows,
                                        std::uint64_t learner_seed) const override;

    const RfHyperparams& hyperparams() const noexcept { return hp_; }

private:
    RfHyperparams hp_;
    unsigned tree_threads_;
};

}  // namespace bcv
