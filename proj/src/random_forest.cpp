#include "bcv/random_forest.hpp"

#include "bcv/error.hpp"
#include "bcv/numeric.hpp"
#include "bcv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bcv {

RfHyperparams RfHyperparams::from_params(const ParamMap& params, const Dataset& dataset)
{
    RfHyperparams hp;
    const std::size_t p = dataset.n_features();
    const bool cls = dataset.task == Task::Classification;
    hp.mtry = cls ? static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p))))
                  : std::max<std::size_t>(1, p / 3);
    hp.mtry = std::max<std::size_t>(1, hp.mtry);
    hp.min_node_size = cls ? 1 : 5;

    auto positive_int = [&](const char* key) -> std::size_t {
        const long long v = as_integer(params.at(key), key);
        if (v < 1)
            throw Error(std::string("hyperparameter '") + key + "' must be >= 1");
        return static_cast<std::size_t>(v);
    };
    if (params.contains("mtry"))
        hp.mtry = positive_int("mtry");
    if (params.contains("min.node.size"))
        hp.min_node_size = positive_int("min.node.size");
    if (params.contains("num.trees"))
        hp.num_trees = positive_int("num.trees");
    if (params.contains("replace"))
        hp.replace = as_bool(params.at("replace"), "replace");
    if (params.contains("sample.fraction"))
        hp.sample_fraction = as_real(params.at("sample.fraction"), "sample.fraction");
    else
        hp.sample_fraction = hp.replace ? 1.0 : 0.632;
    return hp;
}

void RfHyperparams::validate(std::size_t n_features) const
{
    if (mtry < 1 || mtry > n_features)
        throw Error("mtry = " + std::to_string(mtry) + " must lie in [1, " + std::to_string(n_features) + "]");
    if (min_node_size < 1)
        throw Error("min.node.size must be >= 1");
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
        throw Error("sample.fraction = " + format_real(sample_fraction) + " must lie in (0, 1]");
    if (num_trees < 1)
        throw Error("num.trees must be >= 1");
}

double Tree::predict(const Dataset& dataset, std::size_t row) const noexcept
{
    std::int32_t i = 0;
    for (;;) {
        const TreeNode& node = nodes[static_cast<std::size_t>(i)];
        if (node.is_leaf())
            return node.value;
        const double x = dataset.x(row, static_cast<std::size_t>(node.feature));
        const bool go_left = node.categorical ? x == node.threshold : x <= node.threshold;
        i = go_left ? node.left : node.right;
    }
}

std::size_t Tree::depth() const
{
    if (nodes.empty())
        return 0;
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

namespace {

__extension__ typedef unsigned __int128 u128;

// Relative tolerance on regression impurity decrease, scaled by node SSE.
constexpr double kRegressionTol = 1e-10;

// Weighted Gini criterion as an exact fraction:
//   sum_c cL^2 / nL + sum_c cR^2 / nR = (SL*nR + SR*nL) / (nL*nR).
// Larger is better; it exceeds sum_c c^2 / n exactly when Gini drops.
struct GiniScore {
    u128 num = 0;
    u128 den = 1;

    bool beats(const GiniScore& o) const noexcept { return num * o.den > o.num * den; }
};

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    bool categorical = false;
    double threshold = 0.0;
    GiniScore gini;
    double gain = 0.0;
};

double midpoint(double a, double b) noexcept
{
    const double mid = a + (b - a) / 2.0;
    return (mid >= a && mid < b) ? mid : a;
}

class TreeBuilder {
public:
    TreeBuilder(const Dataset& ds, const RfHyperparams& hp, Pcg32& rng)
        : ds_(ds), hp_(hp), rng_(rng), cls_(ds.task == Task::Classification), n_classes_(ds.n_classes()),
          features_(ds.n_features())
    {
        std::iota(features_.begin(), features_.end(), std::size_t{0});
        counts_.resize(n_classes_);
        left_counts_.resize(n_classes_);
    }

    Tree build(std::span<const std::size_t> sample)
    {
        samples_.assign(sample.begin(), sample.end());
        tree_.nodes.clear();
        tree_.nodes.emplace_back();
        struct Pending {
            std::size_t begin, end, node;
        };
        std::vector<Pending> stack{{0, samples_.size(), 0}};
        while (!stack.empty()) {
            const Pending job = stack.back();
            stack.pop_back();
            const auto split_at = process(job.begin, job.end, job.node);
            if (split_at == 0)
                continue;
            const std::size_t mid = split_at;
            auto& node = tree_.nodes[job.node];
            node.left = static_cast<std::int32_t>(tree_.nodes.size());
            node.right = node.left + 1;
            tree_.nodes.emplace_back();
            tree_.nodes.emplace_back();
            const std::size_t left = static_cast<std::size_t>(tree_.nodes[job.node].left);
            stack.push_back({mid, job.end, left + 1});
            stack.push_back({job.begin, mid, left});
        }
        return std::move(tree_);
    }

private:
    // Fills node stats and, if split, partitions samples_ and returns the
    // first index of the right child; returns 0 for a leaf.
    std::size_t process(std::size_t begin, std::size_t end, std::size_t node_index)
    {
        const std::size_t n = end - begin;
        const std::span<const std::size_t> rows(samples_.data() + begin, n);
        bool pure = false;
        double value = 0.0;
        double impurity = 0.0;
        std::uint64_t sum_sq = 0;
        double mean = 0.0;

        if (cls_) {
            std::fill(counts_.begin(), counts_.end(), 0);
            for (std::size_t r : rows)
                ++counts_[static_cast<std::size_t>(ds_.target[r])];
            std::size_t best = 0;
            for (std::size_t c = 0; c < n_classes_; ++c) {
                sum_sq += counts_[c] * counts_[c];
                if (counts_[c] > counts_[best])
                    best = c;
            }
            value = static_cast<double>(best);
            pure = counts_[best] == n;
            impurity = static_cast<double>(n) - static_cast<double>(sum_sq) / static_cast<double>(n);
        } else {
            CompensatedSum s;
            double lo = ds_.target[rows[0]];
            double hi = lo;
            for (std::size_t r : rows) {
                const double y = ds_.target[r];
                s.add(y);
                lo = std::min(lo, y);
                hi = std::max(hi, y);
            }
            mean = s.value() / static_cast<double>(n);
            value = mean;
            pure = lo == hi;
            CompensatedSum sse;
            for (std::size_t r : rows) {
                const double d = ds_.target[r] - mean;
                sse.add(d * d);
            }
            impurity = pure ? 0.0 : sse.value();
        }

        TreeNode& node = tree_.nodes[node_index];
        node.value = value;
        node.n_samples = static_cast<std::uint32_t>(n);
        node.impurity = impurity;
        if (pure || n < hp_.min_node_size || n < 2)
            return 0;

        // Candidate features: partial Fisher-Yates, then ascending order.
        const std::size_t p = features_.size();
        const std::size_t m = std::min(hp_.mtry, p);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = i + rng_.below(static_cast<std::uint32_t>(p - i));
            std::swap(features_[i], features_[j]);
        }
        candidates_.assign(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(m));
        std::sort(candidates_.begin(), candidates_.end());

        SplitChoice best;
        if (cls_) {
            best.gini = GiniScore{u128(sum_sq), u128(n)};  // parent criterion: must be beaten
        }
        const double gain_floor = kRegressionTol * impurity;
        for (std::size_t f : candidates_) {
            if (ds_.features[f].type == ColumnType::Numeric)
                scan_numeric(rows, f, mean, gain_floor, best);
            else
                scan_categorical(rows, f, mean, gain_floor, best);
        }
        if (!best.found)
            return 0;

        node.feature = static_cast<std::int32_t>(best.feature);
        node.categorical = best.categorical;
        node.threshold = best.threshold;

        const auto& col = ds_.features[best.feature].values;
        auto goes_left = [&](std::size_t r) {
            return best.categorical ? col[r] == best.threshold : col[r] <= best.threshold;
        };
        const auto first = samples_.begin() + static_cast<std::ptrdiff_t>(begin);
        const auto last = samples_.begin() + static_cast<std::ptrdiff_t>(end);
        const auto mid = std::stable_partition(first, last, goes_left);
        return static_cast<std::size_t>(mid - samples_.begin());
    }

    void consider(SplitChoice& best, std::size_t f, bool categorical, double threshold, const GiniScore& score)
    {
        if (score.beats(best.gini)) {
            best.found = true;
            best.feature = f;
            best.categorical = categorical;
            best.threshold = threshold;
            best.gini = score;
        }
    }

    void consider(SplitChoice& best, std::size_t f, bool categorical, double threshold, double gain,
                  double gain_floor)
    {
        const double bar = best.found ? best.gain + gain_floor : gain_floor;
        if (gain > bar) {
            best.found = true;
            best.feature = f;
            best.categorical = categorical;
            best.threshold = threshold;
            best.gain = gain;
        }
    }

    void scan_numeric(std::span<const std::size_t> rows, std::size_t f, double mean, double gain_floor,
                      SplitChoice& best)
    {
        const auto& col = ds_.features[f].values;
        const std::size_t n = rows.size();
        pairs_.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            pairs_[i] = {col[rows[i]], ds_.target[rows[i]]};
        std::sort(pairs_.begin(), pairs_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        if (pairs_.front().first == pairs_.back().first)
            return;

        if (cls_) {
            std::fill(left_counts_.begin(), left_counts_.end(), 0);
            std::uint64_t sl = 0;
            std::uint64_t sr = 0;
            for (std::size_t c = 0; c < n_classes_; ++c)
                sr += counts_[c] * counts_[c];
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const auto c = static_cast<std::size_t>(pairs_[i].second);
                const std::uint64_t cl = left_counts_[c]++;
                const std::uint64_t cr = counts_[c] - cl;
                sl += 2 * cl + 1;
                sr -= 2 * cr - 1;
                if (pairs_[i].first == pairs_[i + 1].first)
                    continue;
                const std::uint64_t nl = i + 1;
                const std::uint64_t nr = n - nl;
                const GiniScore score{u128(sl) * nr + u128(sr) * nl, u128(nl) * nr};
                consider(best, f, false, midpoint(pairs_[i].first, pairs_[i + 1].first), score);
            }
        } else {
            double left_sum = 0.0;
            const double dn = static_cast<double>(n);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += pairs_[i].second - mean;
                if (pairs_[i].first == pairs_[i + 1].first)
                    continue;
                const double nl = static_cast<double>(i + 1);
                const double gain = dn * left_sum * left_sum / (nl * (dn - nl));
                consider(best, f, false, midpoint(pairs_[i].first, pairs_[i + 1].first), gain, gain_floor);
            }
        }
    }

    void scan_categorical(std::span<const std::size_t> rows, std::size_t f, double mean, double gain_floor,
                          SplitChoice& best)
    {
        const auto& column = ds_.features[f];
        const std::size_t n_levels = column.levels.size();
        const std::size_t n = rows.size();
        level_n_.assign(n_levels, 0);
        if (cls_) {
            level_counts_.assign(n_levels * n_classes_, 0);
            for (std::size_t r : rows) {
                const auto l = static_cast<std::size_t>(column.values[r]);
                ++level_n_[l];
                ++level_counts_[l * n_classes_ + static_cast<std::size_t>(ds_.target[r])];
            }
            for (std::size_t l = 0; l < n_levels; ++l) {
                const std::uint64_t nl = level_n_[l];
                if (nl == 0 || nl == n)
                    continue;
                std::uint64_t sl = 0;
                std::uint64_t sr = 0;
                for (std::size_t c = 0; c < n_classes_; ++c) {
                    const std::uint64_t cl = level_counts_[l * n_classes_ + c];
                    const std::uint64_t cr = counts_[c] - cl;
                    sl += cl * cl;
                    sr += cr * cr;
                }
                const std::uint64_t nr = n - nl;
                const GiniScore score{u128(sl) * nr + u128(sr) * nl, u128(nl) * nr};
                consider(best, f, true, static_cast<double>(l), score);
            }
        } else {
            level_sum_.assign(n_levels, 0.0);
            for (std::size_t r : rows) {
                const auto l = static_cast<std::size_t>(column.values[r]);
                ++level_n_[l];
                level_sum_[l] += ds_.target[r] - mean;
            }
            const double dn = static_cast<double>(n);
            for (std::size_t l = 0; l < n_levels; ++l) {
                if (level_n_[l] == 0 || level_n_[l] == n)
                    continue;
                const double nl = static_cast<double>(level_n_[l]);
                const double gain = dn * level_sum_[l] * level_sum_[l] / (nl * (dn - nl));
                consider(best, f, true, static_cast<double>(l), gain, gain_floor);
            }
        }
    }

    const Dataset& ds_;
    const RfHyperparams& hp_;
    Pcg32& rng_;
    bool cls_;
    std::size_t n_classes_;
    std::vector<std::size_t> features_;
    std::vector<std::size_t> candidates_;
    std::vector<std::size_t> samples_;
    std::vector<std::uint64_t> counts_;
    std::vector<std::uint64_t> left_counts_;
    std::vector<std::uint64_t> level_n_;
    std::vector<std::uint64_t> level_counts_;
    std::vector<double> level_sum_;
    std::vector<std::pair<double, double>> pairs_;
    Tree tree_;
};

}  // namespace

Tree grow_tree(const Dataset& dataset, std::span<const std::size_t> sample, const RfHyperparams& hp, Pcg32& rng)
{
    if (sample.empty())
        throw Error("grow_tree: empty sample");
    TreeBuilder builder(dataset, hp, rng);
    return builder.build(sample);
}

RandomForestModel::RandomForestModel(Schema schema, std::uint64_t learner_seed, std::uint64_t fingerprint,
                                     std::vector<Tree> trees)
    : TrainedModel(std::move(schema), learner_seed, fingerprint), trees_(std::move(trees))
{
}

void RandomForestModel::predict_rows(const Dataset& dataset, std::span<const std::size_t> rows,
                                     std::span<double> out) const
{
    std::vector<double> votes(trees_.size());
    const bool cls = schema().task == Task::Classification;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t t = 0; t < trees_.size(); ++t)
            votes[t] = trees_[t].predict(dataset, rows[i]);
        out[i] = cls ? majority_vote(votes, schema().n_classes) : compensated_mean(votes);
    }
}

std::unique_ptr<TrainedModel> RandomForest::train(const Dataset& dataset, std::span<const std::size_t> rows,
                                                  std::uint64_t learner_seed) const
{
    if (rows.empty())
        throw Error("train: empty training set");
    hp_.validate(dataset.n_features());
    const std::size_t n_rows = rows.size();
    const auto n_sample = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(hp_.sample_fraction * static_cast<double>(n_rows))));

    std::vector<Tree> trees(hp_.num_trees);
    parallel_for(hp_.num_trees, tree_threads_, [&](std::size_t t) {
        Pcg32 rng(derive_seed(learner_seed, {static_cast<std::uint64_t>(t)}));
        std::vector<std::size_t> sample;
        sample.reserve(n_sample);
        if (hp_.replace) {
            for (std::size_t s = 0; s < n_sample; ++s)
                sample.push_back(rows[rng.below(static_cast<std::uint32_t>(n_rows))]);
        } else {
            std::vector<std::size_t> pool(rows.begin(), rows.end());
            for (std::size_t s = 0; s < n_sample; ++s) {
                const std::size_t j = s + rng.below(static_cast<std::uint32_t>(n_rows - s));
                std::swap(pool[s], pool[j]);
                sample.push_back(pool[s]);
            }
        }
        trees[t] = grow_tree(dataset, sample, hp_, rng);
    });
    return std::make_unique<RandomForestModel>(Schema::of(dataset), learner_seed, fingerprint_rows(rows),
                                               std::move(trees));
}

}  // namespace bcv
