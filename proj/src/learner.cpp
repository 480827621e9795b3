#include "bcv/learner.hpp"

#include "bcv/error.hpp"
#include "bcv/numeric.hpp"
#include "bcv/random_forest.hpp"
#include "bcv/rng.hpp"

#include <algorithm>
#include <cmath>

namespace bcv {

Schema Schema::of(const Dataset& dataset)
{
    Schema s;
    s.task = dataset.task;
    s.column_types.reserve(dataset.n_features());
    for (const auto& c : dataset.features)
        s.column_types.push_back(c.type);
    s.n_classes = dataset.n_classes();
    return s;
}

std::uint64_t fingerprint_rows(std::span<const std::size_t> rows) noexcept
{
    std::uint64_t h = derive_seed(rows.size(), {});
    for (std::size_t r : rows)
        h = derive_seed(h, {static_cast<std::uint64_t>(r)});
    return h;
}

std::vector<double> TrainedModel::predict(const Dataset& dataset, std::span<const std::size_t> rows) const
{
    if (Schema::of(dataset) != schema_)
        throw Error("predict: dataset schema differs from the training schema");
    for (std::size_t r : rows)
        if (r >= dataset.n_rows())
            throw Error("predict: row index " + std::to_string(r) + " out of range");
    std::vector<double> out(rows.size());
    predict_rows(dataset, rows, out);
    return out;
}

double majority_vote(std::span<const double> votes, std::size_t n_classes)
{
    std::vector<std::size_t> counts(n_classes, 0);
    for (double v : votes)
        ++counts.at(static_cast<std::size_t>(v));
    // max_element returns the first maximum, i.e. the smallest code
    return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

namespace {

class ConstantModel final : public TrainedModel {
public:
    ConstantModel(Schema schema, std::uint64_t seed, std::uint64_t fp, double value)
        : TrainedModel(std::move(schema), seed, fp), value_(value)
    {
    }

protected:
    void predict_rows(const Dataset&, std::span<const std::size_t>, std::span<double> out) const override
    {
        std::fill(out.begin(), out.end(), value_);
    }

private:
    double value_;
};

class ConstantMajority final : public Learner {
public:
    std::unique_ptr<TrainedModel> train(const Dataset& dataset, std::span<const std::size_t> rows,
                                        std::uint64_t learner_seed) const override
    {
        if (rows.empty())
            throw Error("train: empty training set");
        double value = 0.0;
        if (dataset.task == Task::Classification) {
            std::vector<double> labels;
            labels.reserve(rows.size());
            for (std::size_t r : rows)
                labels.push_back(dataset.target[r]);
            value = majority_vote(labels, dataset.n_classes());
        } else {
            CompensatedSum s;
            for (std::size_t r : rows)
                s.add(dataset.target[r]);
            value = s.value() / static_cast<double>(rows.size());
        }
        return std::make_unique<ConstantModel>(Schema::of(dataset), learner_seed, fingerprint_rows(rows), value);
    }
};

}  // namespace

std::vector<std::string> recognized_params(const std::string& kind)
{
    if (kind == "random_forest")
        return {"mtry", "min.node.size", "replace", "sample.fraction", "num.trees"};
    if (kind == "constant_majority")
        return {"mtry", "min.node.size", "replace", "sample.fraction", "num.trees"};
    throw Error("unknown learner kind '" + kind + "'");
}

std::unique_ptr<Learner> make_learner(const LearnerSpec& spec, const Dataset& dataset, unsigned tree_threads)
{
    const auto known = recognized_params(spec.kind);
    for (const auto& [name, value] : spec.params) {
        (void)value;
        if (std::find(known.begin(), known.end(), name) == known.end())
            throw Error("learner '" + spec.kind + "' does not recognize hyperparameter '" + name + "'");
    }
    if (spec.kind == "random_forest") {
        auto hp = RfHyperparams::from_params(spec.params, dataset);
        hp.validate(dataset.n_features());
        return std::make_unique<RandomForest>(hp, tree_threads);
    }
    return std::make_unique<ConstantMajority>();
}

std::string to_string(LossKind loss)
{
    switch (loss) {
    case LossKind::MisclassificationRate: return "misclassification";
    case LossKind::RMSE: return "rmse";
    case LossKind::MAE: return "mae";
    }
    return "?";
}

LossKind parse_loss(std::string_view text)
{
    if (text == "misclassification" || text == "misclassification_rate")
        return LossKind::MisclassificationRate;
    if (text == "rmse" || text == "RMSE")
        return LossKind::RMSE;
    if (text == "mae" || text == "MAE")
        return LossKind::MAE;
    throw Error("unknown loss '" + std::string(text) + "'");
}

LossKind default_loss(Task task) noexcept
{
    return task == Task::Classification ? LossKind::MisclassificationRate : LossKind::RMSE;
}

void check_loss_for_task(LossKind loss, Task task)
{
    const bool ok = (loss == LossKind::MisclassificationRate) == (task == Task::Classification);
    if (!ok)
        throw Error("loss '" + to_string(loss) + "' does not apply to " + to_string(task));
}

double compute_loss(LossKind loss, std::span<const double> predictions, std::span<const double> truth)
{
    if (predictions.size() != truth.size())
        throw Error("compute_loss: " + std::to_string(predictions.size()) + " predictions for "
                    + std::to_string(truth.size()) + " targets");
    if (predictions.empty())
        throw Error("compute_loss: empty input");
    const auto n = static_cast<double>(predictions.size());
    CompensatedSum s;
    switch (loss) {
    case LossKind::MisclassificationRate: {
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < truth.size(); ++i)
            wrong += predictions[i] != truth[i];
        return static_cast<double>(wrong) / n;
    }
    case LossKind::RMSE:
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const double d = predictions[i] - truth[i];
            s.add(d * d);
        }
        return std::sqrt(s.value() / n);
    case LossKind::MAE:
        for (std::size_t i = 0; i < truth.size(); ++i)
            s.add(std::fabs(predictions[i] - truth[i]));
        return s.value() / n;
    }
    return 0.0;
}

}  // namespace bcv
