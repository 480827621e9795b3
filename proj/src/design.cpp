#include "bcv/design.hpp"

#include "bcv/csv.hpp"
#include "bcv/error.hpp"
#include "bcv/numeric.hpp"
#include "bcv/parallel.hpp"
#include "bcv/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace bcv {

DesignPlan DesignPlan::bcv(std::vector<std::uint64_t> cv_seeds, std::vector<std::uint64_t> learner_seeds,
                           PartitionStrategy strategy)
{
    DesignPlan p;
    p.kind = DesignKind::BCV;
    p.cv_seeds = std::move(cv_seeds);
    p.learner_seeds = std::move(learner_seeds);
    p.strategy = strategy;
    p.validate();
    return p;
}

DesignPlan DesignPlan::bcv_nx0(std::vector<std::uint64_t> cv_seeds, std::uint64_t master_seed,
                               PartitionStrategy strategy)
{
    DesignPlan p;
    p.kind = DesignKind::BCV_Nx0;
    p.cv_seeds = std::move(cv_seeds);
    p.master_seed = master_seed;
    p.strategy = strategy;
    p.validate();
    return p;
}

DesignPlan DesignPlan::rcv(std::size_t n_reps, std::uint64_t master_seed, PartitionStrategy strategy,
                           bool shared_within_rep)
{
    DesignPlan p;
    p.kind = DesignKind::RCV;
    p.n_reps = n_reps;
    p.master_seed = master_seed;
    p.strategy = strategy;
    p.rcv_shared_within_rep = shared_within_rep;
    p.validate();
    return p;
}

namespace {

void check_seed_list(const std::vector<std::uint64_t>& seeds, const char* what)
{
    if (seeds.empty())
        throw Error(std::string("design: ") + what + " list is empty");
    std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size())
        throw Error(std::string("design: ") + what + " list contains duplicates");
}

}  // namespace

void DesignPlan::validate() const
{
    if (strategy.k < 2)
        throw Error("design: need at least 2 folds");
    switch (kind) {
    case DesignKind::BCV:
        check_seed_list(cv_seeds, "CV seed");
        check_seed_list(learner_seeds, "learner seed");
        break;
    case DesignKind::BCV_Nx0:
        check_seed_list(cv_seeds, "CV seed");
        break;
    case DesignKind::RCV:
        if (n_reps < 1)
            throw Error("design: RCV needs at least one repetition");
        break;
    }
}

std::string DesignPlan::notation() const
{
    std::string s = std::to_string(strategy.k) + "-";
    switch (kind) {
    case DesignKind::BCV:
        return s + "BCV " + to_string(strategy.sampling) + " " + std::to_string(cv_seeds.size()) + "x"
             + std::to_string(learner_seeds.size());
    case DesignKind::BCV_Nx0:
        return s + "BCV " + to_string(strategy.sampling) + " " + std::to_string(cv_seeds.size()) + "x0";
    case DesignKind::RCV:
        return s + "RCV " + to_string(strategy.sampling) + " " + std::to_string(n_reps) + "Rep";
    }
    return s;
}

std::size_t DesignPlan::n_first() const noexcept
{
    return kind == DesignKind::RCV ? n_reps : cv_seeds.size();
}

std::size_t DesignPlan::n_second() const noexcept
{
    return kind == DesignKind::BCV ? learner_seeds.size() : 1;
}

std::string to_string(DesignKind kind)
{
    switch (kind) {
    case DesignKind::BCV: return "BCV";
    case DesignKind::BCV_Nx0: return "BCV_Nx0";
    case DesignKind::RCV: return "RCV";
    }
    return "?";
}

std::vector<std::uint64_t> draw_seeds(std::uint64_t master, std::uint64_t tag, std::size_t count)
{
    std::vector<std::uint64_t> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = derive_seed(master, {tag, static_cast<std::uint64_t>(i)});
    return out;
}

std::uint64_t setting_key(const SettingGrid& grid, std::size_t m)
{
    std::uint64_t h = 0x53455454ULL;
    auto absorb = [&h](std::string_view text) {
        h = derive_seed(h, {text.size()});
        for (std::size_t i = 0; i < text.size(); i += 8) {
            std::uint64_t w = 0;
            for (std::size_t k = i; k < std::min(text.size(), i + 8); ++k)
                w = (w << 8) | static_cast<unsigned char>(text[k]);
            h = derive_seed(h, {w});
        }
    };
    const auto& axes = grid.axes();
    const Setting& s = grid[m];
    for (std::size_t a = 0; a < axes.size(); ++a) {
        absorb(axes[a].name);
        absorb(render(s.values[a]));
    }
    return h;
}

std::vector<CellPlan> plan_cells(const SettingGrid& grid, const DesignPlan& plan)
{
    plan.validate();
    const std::size_t M = grid.size();
    const std::size_t A = plan.n_first();
    const std::size_t B = plan.n_second();
    std::vector<CellPlan> cells;
    cells.reserve(M * A * B);
    for (std::size_t m = 0; m < M; ++m) {
        const std::uint64_t key = setting_key(grid, m);
        for (std::size_t a = 0; a < A; ++a) {
            for (std::size_t b = 0; b < B; ++b) {
                CellPlan c{m, a, b, 0, 0};
                switch (plan.kind) {
                case DesignKind::BCV:
                    c.cv_seed = plan.cv_seeds[a];
                    c.learner_seed = plan.learner_seeds[b];
                    break;
                case DesignKind::BCV_Nx0:
                    c.cv_seed = plan.cv_seeds[a];
                    c.learner_seed = derive_seed(plan.master_seed, {seed_tag::nx0_learner, a, key});
                    break;
                case DesignKind::RCV:
                    if (plan.rcv_shared_within_rep) {
                        c.cv_seed = derive_seed(plan.master_seed, {seed_tag::rcv_cv, a});
                        c.learner_seed = derive_seed(plan.master_seed, {seed_tag::rcv_learner, a});
                    } else {
                        c.cv_seed = derive_seed(plan.master_seed, {seed_tag::rcv_cv, a, key});
                        c.learner_seed = derive_seed(plan.master_seed, {seed_tag::rcv_learner, a, key});
                    }
                    break;
                }
                cells.push_back(c);
            }
        }
    }
    return cells;
}

ErrTable::ErrTable(DesignPlan plan, SettingGrid grid, std::vector<ErrRecord> records, std::optional<LossKind> loss,
                   std::string dataset_name)
    : plan_(std::move(plan)), grid_(std::move(grid)), records_(std::move(records)), loss_(loss),
      dataset_name_(std::move(dataset_name))
{
    validate();
}

std::vector<double> ErrTable::values() const
{
    std::vector<double> v;
    v.reserve(records_.size());
    for (const auto& r : records_)
        v.push_back(r.err);
    return v;
}

void ErrTable::validate() const
{
    plan_.validate();
    const std::size_t M = n_settings();
    const std::size_t A = n_first();
    const std::size_t B = n_second();
    if (M == 0)
        throw Error("error table: empty grid");
    if (records_.size() != M * A * B)
        throw Error("error table: unbalanced, expected " + std::to_string(M * A * B) + " records, have "
                    + std::to_string(records_.size()));
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t a = 0; a < A; ++a)
            for (std::size_t b = 0; b < B; ++b) {
                const auto& r = records_[index(m, a, b)];
                if (r.setting != m || r.a != a || r.b != b)
                    throw Error("error table: records are not in (setting, block) order");
                if (!std::isfinite(r.err) || r.err < 0.0)
                    throw Error("error table: negative or non-finite error at setting " + std::to_string(m));
                if (loss_ == LossKind::MisclassificationRate && r.err > 1.0)
                    throw Error("error table: misclassification rate above 1");
            }
}

ErrTable ErrTable::subtable(std::size_t n_first_keep, std::size_t n_second_keep) const
{
    if (n_first_keep < 1 || n_first_keep > n_first() || n_second_keep < 1 || n_second_keep > n_second())
        throw Error("subtable: requested shape exceeds the table");
    DesignPlan p = plan_;
    if (p.kind == DesignKind::RCV) {
        p.n_reps = n_first_keep;
    } else {
        p.cv_seeds.resize(n_first_keep);
        if (p.kind == DesignKind::BCV)
            p.learner_seeds.resize(n_second_keep);
    }
    std::vector<ErrRecord> out;
    out.reserve(n_settings() * n_first_keep * n_second_keep);
    for (std::size_t m = 0; m < n_settings(); ++m)
        for (std::size_t a = 0; a < n_first_keep; ++a)
            for (std::size_t b = 0; b < n_second_keep; ++b)
                out.push_back(records_[index(m, a, b)]);
    return ErrTable(std::move(p), grid_, std::move(out), loss_, dataset_name_);
}

namespace {

struct PreparedPartition {
    FoldPartition partition;
    std::uint64_t fingerprint = 0;
    std::vector<std::vector<std::size_t>> train;
    std::vector<std::vector<std::size_t>> test;
};

PreparedPartition prepare(const Dataset& dataset, const PartitionStrategy& strategy, std::uint64_t cv_seed)
{
    PreparedPartition p;
    p.partition = partition_folds(dataset, strategy, cv_seed);
    std::vector<std::size_t> folds(p.partition.fold_of.begin(), p.partition.fold_of.end());
    p.fingerprint = fingerprint_rows(folds);
    for (std::size_t f = 0; f < strategy.k; ++f) {
        p.train.push_back(p.partition.train_rows(f));
        p.test.push_back(p.partition.test_rows(f));
    }
    return p;
}

double pooled_error(const Dataset& dataset, const Learner& learner, const PreparedPartition& prepared,
                    std::uint64_t learner_seed, LossKind loss, std::vector<FitTrace>* trace)
{
    std::vector<double> pooled(dataset.n_rows(), 0.0);
    for (std::size_t f = 0; f < prepared.train.size(); ++f) {
        const std::uint64_t seed = fold_seed(learner_seed, f);
        const auto model = learner.train(dataset, prepared.train[f], seed);
        const auto pred = model->predict(dataset, prepared.test[f]);
        for (std::size_t i = 0; i < pred.size(); ++i)
            pooled[prepared.test[f][i]] = pred[i];
        if (trace)
            trace->push_back({0, 0, 0, f, seed, prepared.fingerprint, model->training_fingerprint()});
    }
    return compute_loss(loss, pooled, dataset.target);
}

}  // namespace

double cell_error(const Dataset& dataset, const Learner& learner, const FoldPartition& partition,
                  std::uint64_t learner_seed, LossKind loss)
{
    PreparedPartition p;
    p.partition = partition;
    for (std::size_t f = 0; f < partition.n_folds(); ++f) {
        p.train.push_back(partition.train_rows(f));
        p.test.push_back(partition.test_rows(f));
    }
    return pooled_error(dataset, learner, p, learner_seed, loss, nullptr);
}

ErrTable run_design(const Dataset& dataset, const SettingGrid& grid, const DesignPlan& plan, const LearnerSpec& base,
                    LossKind loss, const RunOptions& options)
{
    plan.validate();
    check_loss_for_task(loss, dataset.task);
    if (plan.strategy.k > dataset.n_rows())
        throw Error("design: " + std::to_string(plan.strategy.k) + " folds exceed "
                    + std::to_string(dataset.n_rows()) + " instances");

    std::vector<std::unique_ptr<Learner>> learners;
    learners.reserve(grid.size());
    for (std::size_t m = 0; m < grid.size(); ++m) {
        LearnerSpec spec = base;
        for (auto& [name, value] : grid.params(m))
            spec.params[name] = value;
        try {
            learners.push_back(make_learner(spec, dataset));
        } catch (const Error& e) {
            throw Error("setting " + std::to_string(m) + ": " + e.what());
        }
    }

    const auto cells = plan_cells(grid, plan);

    std::vector<PreparedPartition> blocked;
    if (plan.kind != DesignKind::RCV)
        for (std::uint64_t s : plan.cv_seeds)
            blocked.push_back(prepare(dataset, plan.strategy, s));

    std::vector<ErrRecord> records(cells.size());
    std::vector<std::vector<FitTrace>> traces(options.trace ? cells.size() : 0);
    parallel_for(cells.size(), options.threads, [&](std::size_t c) {
        const CellPlan& cell = cells[c];
        std::vector<FitTrace>* trace = options.trace ? &traces[c] : nullptr;
        double err = 0.0;
        if (plan.kind == DesignKind::RCV) {
            const auto prepared = prepare(dataset, plan.strategy, cell.cv_seed);
            err = pooled_error(dataset, *learners[cell.setting], prepared, cell.learner_seed, loss, trace);
        } else {
            err = pooled_error(dataset, *learners[cell.setting], blocked[cell.a], cell.learner_seed, loss, trace);
        }
        if (trace)
            for (auto& t : *trace) {
                t.setting = cell.setting;
                t.a = cell.a;
                t.b = cell.b;
            }
        records[c] = {cell.setting, cell.a, cell.b, cell.cv_seed, cell.learner_seed, err};
    });

    if (options.trace)
        for (auto& t : traces)
            options.trace->insert(options.trace->end(), t.begin(), t.end());
    return ErrTable(plan, grid, std::move(records), loss, dataset.name);
}

void write_err_table_csv(std::ostream& os, const ErrTable& table)
{
    const bool rcv = table.kind() == DesignKind::RCV;
    csv::Row header{"setting_index"};
    for (const auto& name : table.grid().names())
        header.push_back(name);
    if (rcv) {
        header.push_back("rep");
    } else {
        header.push_back("cv_seed_index");
        header.push_back("learner_seed_index");
    }
    header.insert(header.end(), {"cv_seed", "learner_seed", "err"});
    csv::write_row(os, header);

    for (const auto& r : table.records()) {
        csv::Row row{std::to_string(r.setting)};
        for (const auto& v : table.grid()[r.setting].values)
            row.push_back(render(v));
        row.push_back(std::to_string(r.a));
        if (!rcv)
            row.push_back(std::to_string(r.b));
        row.push_back(std::to_string(r.cv_seed));
        row.push_back(std::to_string(r.learner_seed));
        row.push_back(format_real(r.err));
        csv::write_row(os, row);
    }
}

namespace {

ParamValue parse_param(const std::string& text)
{
    if (text == "T")
        return true;
    if (text == "F")
        return false;
    double d = 0;
    if (parse_real(text, d))
        return d;
    return text;
}

template <class T>
T parse_unsigned(const std::string& text, const char* what)
{
    T v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw Error(std::string("error table csv: bad ") + what + " '" + text + "'");
    return v;
}

}  // namespace

ErrTable read_err_table_csv(std::istream& is)
{
    std::ostringstream buf;
    buf << is.rdbuf();
    auto rows = csv::parse(buf.str());
    if (rows.empty())
        throw Error("error table csv: empty");
    const csv::Row header = rows.front();
    rows.erase(rows.begin());

    const auto find = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto rep_col = find("rep");
    const auto cv_idx_col = find("cv_seed_index");
    const auto lr_idx_col = find("learner_seed_index");
    const auto cv_col = find("cv_seed");
    const auto lr_col = find("learner_seed");
    const auto err_col = find("err");
    if (header.empty() || header[0] != "setting_index" || !cv_col || !lr_col || !err_col
        || !(rep_col || (cv_idx_col && lr_idx_col)))
        throw Error("error table csv: unrecognized header");
    const bool rcv = rep_col.has_value();
    const std::size_t first_block_col = rcv ? *rep_col : *cv_idx_col;
    const std::size_t n_params = first_block_col - 1;

    struct Parsed {
        ErrRecord rec;
        std::vector<std::string> params;
    };
    std::vector<Parsed> parsed;
    std::size_t M = 0, A = 0, B = 0;
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw Error("error table csv: ragged row");
        Parsed p;
        p.rec.setting = parse_unsigned<std::size_t>(row[0], "setting_index");
        p.rec.a = parse_unsigned<std::size_t>(row[first_block_col], "block index");
        p.rec.b = rcv ? 0 : parse_unsigned<std::size_t>(row[*lr_idx_col], "learner_seed_index");
        p.rec.cv_seed = parse_unsigned<std::uint64_t>(row[*cv_col], "cv_seed");
        p.rec.learner_seed = parse_unsigned<std::uint64_t>(row[*lr_col], "learner_seed");
        if (!parse_real(row[*err_col], p.rec.err))
            throw Error("error table csv: bad err '" + row[*err_col] + "'");
        p.params.assign(row.begin() + 1, row.begin() + 1 + static_cast<std::ptrdiff_t>(n_params));
        M = std::max(M, p.rec.setting + 1);
        A = std::max(A, p.rec.a + 1);
        B = std::max(B, p.rec.b + 1);
        parsed.push_back(std::move(p));
    }
    if (parsed.size() != M * A * B)
        throw Error("error table csv: table is not complete and balanced");
    std::sort(parsed.begin(), parsed.end(), [](const Parsed& x, const Parsed& y) {
        return std::tie(x.rec.setting, x.rec.a, x.rec.b) < std::tie(y.rec.setting, y.rec.a, y.rec.b);
    });

    std::vector<ParamAxis> axes(n_params);
    for (std::size_t p = 0; p < n_params; ++p)
        axes[p].name = header[1 + p];
    std::vector<Setting> settings(M);
    for (std::size_t m = 0; m < M; ++m) {
        const auto& first = parsed[m * A * B];
        if (first.rec.setting != m)
            throw Error("error table csv: missing setting " + std::to_string(m));
        settings[m].index = m;
        for (std::size_t p = 0; p < n_params; ++p) {
            const ParamValue v = parse_param(first.params[p]);
            auto& vals = axes[p].values;
            auto it = std::find(vals.begin(), vals.end(), v);
            if (it == vals.end())
                it = vals.insert(vals.end(), v);
            settings[m].levels.push_back(static_cast<std::size_t>(it - vals.begin()));
            settings[m].values.push_back(v);
        }
    }

    DesignPlan plan;
    if (rcv) {
        plan.kind = DesignKind::RCV;
        plan.n_reps = A;
    } else {
        for (std::size_t a = 0; a < A; ++a)
            plan.cv_seeds.push_back(parsed[a * B].rec.cv_seed);
        bool fresh_learner = B == 1 && M > 1;
        if (fresh_learner) {
            fresh_learner = false;
            for (std::size_t m = 1; m < M && !fresh_learner; ++m)
                fresh_learner = parsed[m * A].rec.learner_seed != parsed[0].rec.learner_seed;
        }
        if (fresh_learner) {
            plan.kind = DesignKind::BCV_Nx0;
        } else {
            plan.kind = DesignKind::BCV;
            for (std::size_t b = 0; b < B; ++b)
                plan.learner_seeds.push_back(parsed[b].rec.learner_seed);
        }
    }

    std::vector<ErrRecord> records;
    records.reserve(parsed.size());
    for (auto& p : parsed)
        records.push_back(p.rec);
    return ErrTable(std::move(plan), SettingGrid(std::move(axes), std::move(settings)), std::move(records));
}

ErrTable read_err_table_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path.string() + "'");
    return read_err_table_csv(in);
}

}  // namespace bcv
