#include "bcv/report.hpp"

#include "bcv/csv.hpp"
#include "bcv/error.hpp"
#include "bcv/numeric.hpp"
#include "bcv/parallel.hpp"
#include "bcv/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

namespace bcv {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what)
{
    throw Error("config: " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object())
        fail(where, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            fail(where, "unknown key '" + key + "'");
    }
}

std::string get_string(const json& j, const std::string& where)
{
    if (!j.is_string())
        fail(where, "expected a string");
    return j.get<std::string>();
}

std::uint64_t get_u64(const json& j, const std::string& where)
{
    if (j.is_number_unsigned())
        return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(j.get<std::int64_t>());
    fail(where, "expected a non-negative integer");
}

std::size_t get_size(const json& j, const std::string& where)
{
    return static_cast<std::size_t>(get_u64(j, where));
}

bool get_bool(const json& j, const std::string& where)
{
    if (!j.is_boolean())
        fail(where, "expected true or false");
    return j.get<bool>();
}

ParamValue get_param(const json& j, const std::string& where)
{
    if (j.is_boolean())
        return j.get<bool>();
    if (j.is_number())
        return j.get<double>();
    if (j.is_string())
        return j.get<std::string>();
    fail(where, "expected a boolean, number or string");
}

json param_json(const ParamValue& v)
{
    return std::visit([](const auto& x) { return json(x); }, v);
}

ParamMap get_param_map(const json& j, const std::string& where)
{
    if (!j.is_object())
        fail(where, "expected an object");
    ParamMap out;
    for (const auto& [key, value] : j.items())
        out[key] = get_param(value, where + "." + key);
    return out;
}

json param_map_json(const ParamMap& m)
{
    json out = json::object();
    for (const auto& [k, v] : m)
        out[k] = param_json(v);
    return out;
}

std::vector<std::string> get_strings(const json& j, const std::string& where)
{
    if (!j.is_array())
        fail(where, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j)
        out.push_back(get_string(e, where));
    return out;
}

DesignKind parse_design_kind(const std::string& text, const std::string& where)
{
    if (text == "BCV")
        return DesignKind::BCV;
    if (text == "BCV_Nx0")
        return DesignKind::BCV_Nx0;
    if (text == "RCV")
        return DesignKind::RCV;
    fail(where, "unknown design type '" + text + "' (BCV, BCV_Nx0 or RCV)");
}

void read_seeds(const json& j, const std::string& where, std::vector<std::uint64_t>& list, std::size_t& count)
{
    if (j.is_array()) {
        for (const auto& e : j)
            list.push_back(get_u64(e, where));
        count = list.size();
    } else {
        count = get_size(j, where);
    }
}

json seeds_json(const std::vector<std::uint64_t>& list, std::size_t count)
{
    if (!list.empty())
        return json(list);
    return json(count);
}

}  // namespace

void RunConfig::validate() const
{
    if (dataset.path.empty())
        fail("dataset.path", "required");
    if (dataset.target.empty())
        fail("dataset.target", "required");
    if (designs.empty())
        fail("designs", "at least one design is required");
    if (grid.empty())
        fail("grid.params", "at least one hyperparameter is required");
    if (strategy.k < 2)
        fail("strategy.folds", "need at least 2 folds");
    if (top_k < 1)
        fail("top_k", "must be at least 1");
    for (std::size_t i = 0; i < designs.size(); ++i) {
        const auto& d = designs[i];
        const std::string where = "designs[" + std::to_string(i) + "]";
        switch (d.kind) {
        case DesignKind::BCV:
            if (d.cv_seed_count < 1 || d.learner_seed_count < 1)
                fail(where, "BCV needs cv_seeds and learner_seeds");
            break;
        case DesignKind::BCV_Nx0:
            if (d.cv_seed_count < 1)
                fail(where, "BCV_Nx0 needs cv_seeds");
            break;
        case DesignKind::RCV:
            if (d.reps < 1)
                fail(where, "RCV needs reps");
            break;
        }
    }
}

RunConfig parse_config(const json& input, const std::filesystem::path& base_dir)
{
    const json& doc = input.is_object() && input.contains("config") && input.contains("designs_run") ? input.at("config")
                                                                                                     : input;
    check_keys(doc, "config", {"dataset", "loss", "learner", "grid", "strategy", "designs", "seed", "model",
                               "permutation", "top_k", "output", "threads"});
    RunConfig c;
    c.base_dir = base_dir;

    if (!doc.contains("dataset"))
        fail("dataset", "required");
    const json& ds = doc.at("dataset");
    check_keys(ds, "dataset", {"path", "target", "task", "schema", "missing"});
    if (ds.contains("path"))
        c.dataset.path = get_string(ds.at("path"), "dataset.path");
    if (ds.contains("target"))
        c.dataset.target = get_string(ds.at("target"), "dataset.target");
    if (ds.contains("task"))
        c.dataset.task = parse_task(get_string(ds.at("task"), "dataset.task"));
    if (ds.contains("schema")) {
        const json& s = ds.at("schema");
        if (!s.is_object())
            fail("dataset.schema", "expected an object");
        for (const auto& [col, type] : s.items()) {
            const std::string t = get_string(type, "dataset.schema." + col);
            if (t == "numeric")
                c.dataset.schema[col] = ColumnType::Numeric;
            else if (t == "categorical")
                c.dataset.schema[col] = ColumnType::Categorical;
            else
                fail("dataset.schema." + col, "expected 'numeric' or 'categorical'");
        }
    }
    if (ds.contains("missing"))
        c.dataset.missing_tokens = get_strings(ds.at("missing"), "dataset.missing");

    if (doc.contains("loss"))
        c.loss = parse_loss(get_string(doc.at("loss"), "loss"));

    if (doc.contains("learner")) {
        const json& l = doc.at("learner");
        check_keys(l, "learner", {"kind", "fixed"});
        if (l.contains("kind"))
            c.learner.kind = get_string(l.at("kind"), "learner.kind");
        if (l.contains("fixed"))
            c.learner.params = get_param_map(l.at("fixed"), "learner.fixed");
    }

    if (!doc.contains("grid"))
        fail("grid", "required");
    const json& g = doc.at("grid");
    check_keys(g, "grid", {"params", "exclude"});
    if (!g.contains("params") || !g.at("params").is_array())
        fail("grid.params", "expected an array");
    for (std::size_t i = 0; i < g.at("params").size(); ++i) {
        const json& p = g.at("params")[i];
        const std::string where = "grid.params[" + std::to_string(i) + "]";
        check_keys(p, where, {"name", "values"});
        if (!p.contains("name") || !p.contains("values") || !p.at("values").is_array())
            fail(where, "needs a name and an array of values");
        ParamAxis axis{get_string(p.at("name"), where + ".name"), {}};
        for (const auto& v : p.at("values"))
            axis.values.push_back(get_param(v, where + ".values"));
        c.grid.push_back(std::move(axis));
    }
    if (g.contains("exclude")) {
        if (!g.at("exclude").is_array())
            fail("grid.exclude", "expected an array");
        for (const auto& e : g.at("exclude"))
            c.exclude.push_back(get_param_map(e, "grid.exclude"));
    }

    if (doc.contains("strategy")) {
        const json& s = doc.at("strategy");
        check_keys(s, "strategy", {"folds", "sampling"});
        if (s.contains("folds"))
            c.strategy.k = get_size(s.at("folds"), "strategy.folds");
        if (s.contains("sampling"))
            c.strategy.sampling = parse_sampling(get_string(s.at("sampling"), "strategy.sampling"));
    }

    if (!doc.contains("designs") || !doc.at("designs").is_array())
        fail("designs", "expected an array");
    for (std::size_t i = 0; i < doc.at("designs").size(); ++i) {
        const json& d = doc.at("designs")[i];
        const std::string where = "designs[" + std::to_string(i) + "]";
        check_keys(d, where, {"type", "cv_seeds", "learner_seeds", "reps", "rcv_shared_within_rep"});
        DesignConfig dc;
        if (!d.contains("type"))
            fail(where, "type is required");
        dc.kind = parse_design_kind(get_string(d.at("type"), where + ".type"), where + ".type");
        if (d.contains("cv_seeds"))
            read_seeds(d.at("cv_seeds"), where + ".cv_seeds", dc.cv_seeds, dc.cv_seed_count);
        if (d.contains("learner_seeds"))
            read_seeds(d.at("learner_seeds"), where + ".learner_seeds", dc.learner_seeds, dc.learner_seed_count);
        if (d.contains("reps"))
            dc.reps = get_size(d.at("reps"), where + ".reps");
        if (d.contains("rcv_shared_within_rep"))
            dc.rcv_shared_within_rep = get_bool(d.at("rcv_shared_within_rep"), where + ".rcv_shared_within_rep");
        if (dc.kind != DesignKind::BCV && d.contains("learner_seeds"))
            fail(where, "learner_seeds apply to BCV only");
        if (dc.kind == DesignKind::RCV && d.contains("cv_seeds"))
            fail(where, "RCV draws its own seeds; use reps");
        if (dc.kind != DesignKind::RCV && (d.contains("reps") || d.contains("rcv_shared_within_rep")))
            fail(where, "reps apply to RCV only");
        c.designs.push_back(std::move(dc));
    }

    if (doc.contains("seed"))
        c.seed = get_u64(doc.at("seed"), "seed");

    if (doc.contains("model")) {
        const json& m = doc.at("model");
        check_keys(m, "model", {"random", "fixed"});
        ModelSpec spec;
        if (m.contains("random"))
            spec.random = get_strings(m.at("random"), "model.random");
        if (m.contains("fixed"))
            spec.fixed = get_strings(m.at("fixed"), "model.fixed");
        c.model = std::move(spec);
    }

    if (doc.contains("permutation")) {
        const json& p = doc.at("permutation");
        check_keys(p, "permutation", {"B", "seed", "tests", "statistic"});
        if (p.contains("B"))
            c.permutation.permutations = get_size(p.at("B"), "permutation.B");
        if (p.contains("seed"))
            c.permutation.seed = get_u64(p.at("seed"), "permutation.seed");
        if (p.contains("statistic"))
            c.permutation.statistic = parse_statistic(get_string(p.at("statistic"), "permutation.statistic"));
        if (p.contains("tests")) {
            if (!p.at("tests").is_array())
                fail("permutation.tests", "expected an array");
            for (const auto& t : p.at("tests")) {
                if (t.is_string())
                    c.permutation.tests.push_back({t.get<std::string>()});
                else
                    c.permutation.tests.push_back(get_strings(t, "permutation.tests"));
            }
        }
    }

    if (doc.contains("top_k"))
        c.top_k = get_size(doc.at("top_k"), "top_k");
    if (doc.contains("output"))
        c.output = get_string(doc.at("output"), "output");
    if (doc.contains("threads"))
        c.threads = static_cast<unsigned>(get_size(doc.at("threads"), "threads"));

    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("config: cannot open '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("config: '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

json config_to_json(const RunConfig& c)
{
    json doc;
    json ds;
    ds["path"] = c.dataset.path;
    ds["target"] = c.dataset.target;
    ds["task"] = to_string(c.dataset.task);
    json schema = json::object();
    for (const auto& [col, type] : c.dataset.schema)
        schema[col] = type == ColumnType::Numeric ? "numeric" : "categorical";
    ds["schema"] = schema;
    ds["missing"] = c.dataset.missing_tokens;
    doc["dataset"] = ds;
    if (c.loss)
        doc["loss"] = to_string(*c.loss);
    doc["learner"] = {{"kind", c.learner.kind}, {"fixed", param_map_json(c.learner.params)}};

    json params = json::array();
    for (const auto& axis : c.grid) {
        json values = json::array();
        for (const auto& v : axis.values)
            values.push_back(param_json(v));
        params.push_back({{"name", axis.name}, {"values", values}});
    }
    json exclude = json::array();
    for (const auto& e : c.exclude)
        exclude.push_back(param_map_json(e));
    doc["grid"] = {{"params", params}, {"exclude", exclude}};
    doc["strategy"] = {{"folds", c.strategy.k}, {"sampling", to_string(c.strategy.sampling)}};

    json designs = json::array();
    for (const auto& d : c.designs) {
        json dj;
        dj["type"] = to_string(d.kind);
        if (d.kind == DesignKind::RCV) {
            dj["reps"] = d.reps;
            dj["rcv_shared_within_rep"] = d.rcv_shared_within_rep;
        } else {
            dj["cv_seeds"] = seeds_json(d.cv_seeds, d.cv_seed_count);
            if (d.kind == DesignKind::BCV)
                dj["learner_seeds"] = seeds_json(d.learner_seeds, d.learner_seed_count);
        }
        designs.push_back(dj);
    }
    doc["designs"] = designs;
    doc["seed"] = c.seed;
    if (c.model)
        doc["model"] = {{"random", c.model->random}, {"fixed", c.model->fixed}};
    json perm;
    perm["B"] = c.permutation.permutations;
    if (c.permutation.seed)
        perm["seed"] = *c.permutation.seed;
    perm["tests"] = c.permutation.tests;
    perm["statistic"] = to_string(c.permutation.statistic);
    doc["permutation"] = perm;
    doc["top_k"] = c.top_k;
    doc["output"] = c.output;
    doc["threads"] = c.threads;
    return doc;
}

SettingGrid config_grid(const RunConfig& config)
{
    std::vector<Exclusion> exclusions;
    for (const auto& e : config.exclude)
        exclusions.push_back(exclude_when(e));
    return build_grid(config.grid, exclusions);
}

DesignPlan resolve_design(const RunConfig& config, const DesignConfig& d)
{
    auto seeds = [&](const std::vector<std::uint64_t>& list, std::size_t count, std::uint64_t tag) {
        return list.empty() ? draw_seeds(config.seed, tag, count) : list;
    };
    switch (d.kind) {
    case DesignKind::BCV:
        return DesignPlan::bcv(seeds(d.cv_seeds, d.cv_seed_count, seed_tag::cv_seed_list),
                               seeds(d.learner_seeds, d.learner_seed_count, seed_tag::learner_seed_list),
                               config.strategy);
    case DesignKind::BCV_Nx0:
        return DesignPlan::bcv_nx0(seeds(d.cv_seeds, d.cv_seed_count, seed_tag::cv_seed_list), config.seed,
                                   config.strategy);
    case DesignKind::RCV:
        return DesignPlan::rcv(d.reps, config.seed, config.strategy, d.rcv_shared_within_rep);
    }
    throw Error("design: unknown kind");
}

namespace {

bool term_fits(const std::string& term, DesignKind kind)
{
    std::size_t start = 0;
    for (;;) {
        const auto pos = term.find(':', start);
        const std::string f = term.substr(start, pos - start);
        if (f == "RFseeds" && kind != DesignKind::BCV)
            return false;
        if (f == "CVseeds" && kind == DesignKind::RCV)
            return false;
        if (pos == std::string::npos)
            return true;
        start = pos + 1;
    }
}

}  // namespace

ModelSpec model_for(const std::optional<ModelSpec>& model, const ErrTable& table)
{
    if (!model)
        return ModelSpec::default_for(table);
    ModelSpec out;
    out.fixed = model->fixed;
    if (table.kind() != DesignKind::RCV)
        for (const auto& t : model->random)
            if (term_fits(t, table.kind()))
                out.random.push_back(t);
    return out;
}

DryRun dry_run(const RunConfig& config)
{
    config.validate();
    const SettingGrid grid = config_grid(config);
    DryRun out;
    out.settings = grid.size();
    for (const auto& d : config.designs) {
        const DesignPlan plan = resolve_design(config, d);
        DryRunDesign row;
        row.notation = plan.notation();
        row.runs_per_setting = plan.replication();
        row.runs = grid.size() * plan.replication();
        row.model_fits = row.runs * config.strategy.k;
        out.designs.push_back(row);
    }
    return out;
}

void print_dry_run(std::ostream& os, const DryRun& plan)
{
    os << "settings (M): " << plan.settings << '\n';
    std::size_t total = 0;
    for (const auto& d : plan.designs) {
        os << d.notation << ": " << d.runs << " runs (" << d.runs_per_setting << " per setting, " << d.model_fits
           << " model fits)\n";
        total += d.runs;
    }
    os << "total runs: " << total << '\n';
}

std::vector<std::pair<std::size_t, std::size_t>> curve_shapes(DesignKind kind, std::size_t n_first,
                                                              std::size_t n_second)
{
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    if (kind == DesignKind::BCV && n_second >= 2) {
        for (std::size_t z = 2; z <= n_second; ++z)
            for (std::size_t y = z; y <= std::min(n_first, z + 2); ++y)
                shapes.emplace_back(y, z);
        std::stable_sort(shapes.begin(), shapes.end(),
                         [](const auto& a, const auto& b) { return a.first * a.second < b.first * b.second; });
        std::vector<std::pair<std::size_t, std::size_t>> unique;
        for (const auto& s : shapes)
            if (unique.empty() || unique.back().first * unique.back().second < s.first * s.second)
                unique.push_back(s);
        return unique;
    }
    for (std::size_t y = 2; y <= n_first; ++y)
        shapes.emplace_back(y, kind == DesignKind::BCV ? n_second : 1);
    return shapes;
}

namespace {

std::string family_of(const DesignPlan& plan)
{
    const std::string head = std::to_string(plan.strategy.k) + "-";
    const std::string samp = to_string(plan.strategy.sampling);
    switch (plan.kind) {
    case DesignKind::BCV: return head + "BCV " + samp + " YxZ";
    case DesignKind::BCV_Nx0: return head + "BCV " + samp + " Nx0";
    case DesignKind::RCV: return head + "RCV " + samp + (plan.rcv_shared_within_rep ? " shared" : "");
    }
    return head;
}

bool same_records(const ErrTable& a, const ErrTable& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a.records()[i];
        const auto& y = b.records()[i];
        if (x.setting != y.setting || x.a != y.a || x.b != y.b || x.cv_seed != y.cv_seed
            || x.learner_seed != y.learner_seed || x.err != y.err)
            return false;
    }
    return true;
}

}  // namespace

StdErrCurve stderr_curve(const std::vector<ErrTable>& tables, const std::optional<ModelSpec>& model, bool per_setting)
{
    std::vector<std::string> order;
    std::map<std::string, std::vector<const ErrTable*>> groups;
    for (const auto& t : tables) {
        const std::string fam = family_of(t.plan());
        if (!groups.count(fam))
            order.push_back(fam);
        groups[fam].push_back(&t);
    }

    StdErrCurve curve;
    for (const auto& fam : order) {
        auto members = groups[fam];
        std::stable_sort(members.begin(), members.end(),
                         [](const ErrTable* a, const ErrTable* b) { return a->size() < b->size(); });
        const ErrTable& big = *members.back();
        for (const ErrTable* t : members) {
            if (t == &big)
                continue;
            if (t->n_first() > big.n_first() || t->n_second() > big.n_second() || t->n_settings() != big.n_settings()
                || !same_records(*t, big.subtable(t->n_first(), t->n_second())))
                throw Error("stderr curve: " + t->plan().notation() + " is not nested in " + big.plan().notation());
        }

        CurveFamily family;
        family.family = fam;
        family.kind = big.kind();
        for (const auto& [y, z] : curve_shapes(big.kind(), big.n_first(), big.n_second())) {
            const ErrTable sub = big.subtable(y, z);
            const AnovaResult fit = fit_anova(sub, model_for(model, sub));
            const SettingMeans means = estimate_setting_means(sub, fit);
            CurvePoint p;
            p.shape = sub.plan().notation();
            p.runs = sub.replication();
            p.std_err = means.mean_std_err().value_or(0.0);
            if (per_setting) {
                const std::size_t M = sub.n_settings();
                const std::size_t R = sub.replication();
                std::vector<CompensatedSum> ss(M);
                CompensatedSum total;
                for (std::size_t m = 0; m < M; ++m)
                    for (std::size_t k = 0; k < R; ++k) {
                        const double e = fit.residuals[m * R + k];
                        ss[m].add(e * e);
                        total.add(e * e);
                    }
                for (std::size_t m = 0; m < M; ++m) {
                    const double share = total.value() > 0.0 ? ss[m].value() * static_cast<double>(M) / total.value() : 1.0;
                    p.per_setting.push_back(std::sqrt(fit.residual_mse * share / static_cast<double>(R)));
                }
            }
            family.points.push_back(std::move(p));
        }
        if (family.kind == DesignKind::RCV)
            for (const auto& p : family.points)
                curve.min_rcv = curve.min_rcv ? std::min(*curve.min_rcv, p.std_err) : p.std_err;
        curve.families.push_back(std::move(family));
    }
    return curve;
}

void write_stderr_curve_csv(std::ostream& os, const StdErrCurve& curve)
{
    csv::write_row(os, {"family", "shape", "runs", "std_err", "min_rcv_std_err"});
    const std::string ref = curve.min_rcv ? format_real(*curve.min_rcv) : std::string();
    for (const auto& f : curve.families)
        for (const auto& p : f.points)
            csv::write_row(os, {f.family, p.shape, std::to_string(p.runs), format_real(p.std_err), ref});
}

void write_stderr_curve_per_setting_csv(std::ostream& os, const StdErrCurve& curve)
{
    csv::write_row(os, {"family", "shape", "runs", "setting_index", "std_err"});
    for (const auto& f : curve.families)
        for (const auto& p : f.points)
            for (std::size_t m = 0; m < p.per_setting.size(); ++m)
                csv::write_row(os, {f.family, p.shape, std::to_string(p.runs), std::to_string(m),
                                    format_real(p.per_setting[m])});
}

void write_setting_means_csv(std::ostream& os, const ErrTable& table, const SettingMeans& means)
{
    const auto& grid = table.grid();
    csv::Row header{"setting_index"};
    for (const auto& n : grid.names())
        header.push_back(n);
    header.insert(header.end(), {"mean_err", "std_err", "rank"});
    csv::write_row(os, header);

    const auto order = rank_settings(means);
    std::vector<std::size_t> rank(order.size());
    for (std::size_t r = 0; r < order.size(); ++r)
        rank[order[r]] = r + 1;
    for (const auto& m : means.means) {
        csv::Row row{std::to_string(m.setting)};
        for (const auto& v : grid[m.setting].values)
            row.push_back(render(v));
        row.push_back(format_real(m.mean));
        row.push_back(m.std_err ? format_real(*m.std_err) : std::string());
        row.push_back(std::to_string(rank[m.setting]));
        csv::write_row(os, row);
    }
}

void write_best_settings_csv(std::ostream& os, const std::vector<DesignReport>& reports, std::size_t top_k)
{
    if (reports.empty())
        return;
    const auto names = reports.front().table.grid().names();
    csv::Row header{"design", "rank", "setting_index"};
    header.insert(header.end(), names.begin(), names.end());
    header.insert(header.end(), {"mean_err", "std_err"});
    csv::write_row(os, header);
    for (const auto& r : reports) {
        const auto order = rank_settings(r.means);
        for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
            const auto& m = r.means.means[order[k]];
            csv::Row row{r.notation, std::to_string(k + 1), std::to_string(m.setting)};
            for (const auto& v : r.table.grid()[m.setting].values)
                row.push_back(render(v));
            row.push_back(format_real(m.mean));
            row.push_back(m.std_err ? format_real(*m.std_err) : std::string());
            csv::write_row(os, row);
        }
    }
}

RunConfig apply_controls(RunConfig config, const RunControls& controls)
{
    if (controls.out)
        config.output = controls.out->string();
    if (controls.threads)
        config.threads = *controls.threads;
    if (controls.seed)
        config.seed = *controls.seed;
    if (controls.permutations)
        config.permutation.permutations = *controls.permutations;
    config.validate();
    return config;
}

namespace {

std::string directory_name(std::size_t index, const std::string& notation)
{
    std::string s = std::to_string(index + 1);
    if (s.size() < 2)
        s.insert(0, "0");
    s += '_';
    for (char ch : notation)
        s += ch == ' ' ? '-' : ch;
    return s;
}

// Tracks files and directories created by a run so a failure can undo them.
class OutputGuard {
public:
    explicit OutputGuard(std::filesystem::path root) : root_(std::move(root))
    {
        if (!std::filesystem::exists(root_)) {
            std::filesystem::create_directories(root_);
            created_root_ = true;
        }
    }
    OutputGuard(const OutputGuard&) = delete;
    OutputGuard& operator=(const OutputGuard&) = delete;
    ~OutputGuard()
    {
        if (committed_)
            return;
        std::error_code ec;
        if (created_root_) {
            std::filesystem::remove_all(root_, ec);
            return;
        }
        for (auto it = created_.rbegin(); it != created_.rend(); ++it)
            std::filesystem::remove_all(*it, ec);
    }

    std::filesystem::path directory(const std::string& name)
    {
        const auto p = root_ / name;
        if (!std::filesystem::exists(p)) {
            std::filesystem::create_directories(p);
            created_.push_back(p);
        }
        return p;
    }

    template <class Fn>
    void write(const std::filesystem::path& path, Fn&& fn)
    {
        const bool existed = std::filesystem::exists(path);
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw Error("cannot write '" + path.string() + "'");
        if (!existed)
            created_.push_back(path);
        fn(out);
        out.flush();
        if (!out)
            throw Error("failed writing '" + path.string() + "'");
    }

    void commit() noexcept { committed_ = true; }

private:
    std::filesystem::path root_;
    bool created_root_ = false;
    bool committed_ = false;
    std::vector<std::filesystem::path> created_;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::vector<std::string>> tests_for(const PermutationConfig& perm, const AnovaResult& fit)
{
    if (perm.tests.empty())
        return {};
    std::vector<std::vector<std::string>> out;
    for (const auto& t : perm.tests)
        if (std::all_of(t.begin(), t.end(), [&](const std::string& n) { return fit.find_term(n) != nullptr; }))
            out.push_back(t);
    return out;
}

}  // namespace

std::vector<DesignReport> run_report(const RunConfig& input, const RunControls& controls)
{
    const auto t_start = std::chrono::steady_clock::now();
    const RunConfig config = apply_controls(input, controls);
    std::ostream* log = controls.log;
    const unsigned threads = resolve_threads(config.threads);

    std::filesystem::path data_path = config.dataset.path;
    if (data_path.is_relative() && !config.base_dir.empty())
        data_path = config.base_dir / data_path;
    LoadOptions lo;
    lo.target_column = config.dataset.target;
    lo.task = config.dataset.task;
    lo.schema_overrides = config.dataset.schema;
    lo.missing_tokens = config.dataset.missing_tokens;
    const Dataset dataset = load_csv(data_path, lo);
    const LossKind loss = config.loss.value_or(default_loss(dataset.task));
    check_loss_for_task(loss, dataset.task);
    const SettingGrid grid = config_grid(config);
    // validates every setting before any output exists
    for (std::size_t m = 0; m < grid.size(); ++m) {
        LearnerSpec spec = config.learner;
        for (const auto& [k, v] : grid.params(m))
            spec.params[k] = v;
        (void)make_learner(spec, dataset);
    }

    std::vector<DesignPlan> plans;
    for (const auto& d : config.designs)
        plans.push_back(resolve_design(config, d));

    OutputGuard guard(config.output);
    const std::filesystem::path root = config.output;

    std::vector<DesignReport> reports;
    json designs_run = json::array();
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const DesignPlan& plan = plans[i];
        const auto t0 = std::chrono::steady_clock::now();
        if (log)
            *log << "[" << (i + 1) << "/" << plans.size() << "] " << plan.notation() << ": "
                 << grid.size() * plan.replication() << " runs\n";
        DesignReport rep;
        rep.notation = plan.notation();
        rep.directory = directory_name(i, rep.notation);
        rep.table = run_design(dataset, grid, plan, config.learner, loss, {threads, nullptr});
        rep.fit = fit_anova(rep.table, model_for(config.model, rep.table));
        if (rep.table.replication() > 1 && rep.fit.residual_df == 0)
            throw Error(rep.notation + ": the model leaves no residual degrees of freedom");
        rep.means = estimate_setting_means(rep.table, rep.fit);
        if (config.permutation.permutations > 0 && rep.fit.residual_df > 0) {
            PermutationPlan pp;
            pp.tests = tests_for(config.permutation, rep.fit);
            pp.permutations = config.permutation.permutations;
            pp.seed = config.permutation.seed ? *config.permutation.seed
                                              : derive_seed(config.seed, {seed_tag::permutation, i});
            pp.statistic = config.permutation.statistic;
            pp.threads = threads;
            // skipped when none of the requested terms exist in this design
            if (config.permutation.tests.empty() || !pp.tests.empty())
                rep.tests = permutation_test(rep.fit, pp);
        }
        rep.seconds = seconds_since(t0);

        const auto dir = guard.directory(rep.directory);
        guard.write(dir / "err_table.csv", [&](std::ostream& os) { write_err_table_csv(os, rep.table); });
        guard.write(dir / "anova.csv",
                    [&](std::ostream& os) { write_anova_csv(os, rep.fit, rep.tests ? &*rep.tests : nullptr); });
        guard.write(dir / "setting_means.csv",
                    [&](std::ostream& os) { write_setting_means_csv(os, rep.table, rep.means); });

        json dj;
        dj["notation"] = rep.notation;
        dj["directory"] = rep.directory;
        dj["type"] = to_string(plan.kind);
        dj["cv_seeds"] = plan.cv_seeds;
        dj["learner_seeds"] = plan.learner_seeds;
        dj["reps"] = plan.n_reps;
        dj["master_seed"] = plan.master_seed;
        dj["records"] = rep.table.size();
        dj["model"] = {{"random", rep.fit.model.random}, {"fixed", rep.fit.model.fixed}};
        if (rep.tests)
            dj["permutations"] = rep.tests->permutations;
        dj["seconds"] = rep.seconds;
        designs_run.push_back(dj);
        reports.push_back(std::move(rep));
        if (log)
            *log << "    done in " << format_sig(reports.back().seconds, 4) << " s\n";
    }

    std::vector<ErrTable> tables;
    for (const auto& r : reports)
        tables.push_back(r.table);
    const StdErrCurve curve = stderr_curve(tables, config.model, controls.per_setting_curve);
    guard.write(root / "stderr_curve.csv", [&](std::ostream& os) { write_stderr_curve_csv(os, curve); });
    if (controls.per_setting_curve)
        guard.write(root / "stderr_curve_per_setting.csv",
                    [&](std::ostream& os) { write_stderr_curve_per_setting_csv(os, curve); });
    guard.write(root / "best_settings.csv",
                [&](std::ostream& os) { write_best_settings_csv(os, reports, config.top_k); });

    // The manifest's config lists every seed and an absolute dataset path,
    // so it can be passed back as --config.
    RunConfig resolved = config;
    resolved.dataset.path = std::filesystem::absolute(data_path).lexically_normal().string();
    resolved.base_dir.clear();
    for (std::size_t i = 0; i < plans.size(); ++i) {
        auto& d = resolved.designs[i];
        if (d.kind != DesignKind::RCV) {
            d.cv_seeds = plans[i].cv_seeds;
            d.cv_seed_count = d.cv_seeds.size();
        }
        if (d.kind == DesignKind::BCV) {
            d.learner_seeds = plans[i].learner_seeds;
            d.learner_seed_count = d.learner_seeds.size();
        }
    }
    json manifest;
    manifest["tool"] = "bcv";
    manifest["version"] = "1.0.0";
    manifest["config"] = config_to_json(resolved);
    manifest["dataset"] = {{"name", dataset.name},
                           {"rows", dataset.n_rows()},
                           {"dropped_rows", dataset.dropped_rows},
                           {"features", dataset.n_features()},
                           {"task", to_string(dataset.task)},
                           {"classes", dataset.classes}};
    manifest["loss"] = to_string(loss);
    manifest["settings"] = grid.size();
    manifest["threads"] = threads;
    manifest["designs_run"] = designs_run;
    manifest["stderr_aggregation"] = "mean over settings of sqrt(residual MSE / runs per setting)";
    manifest["seconds"] = seconds_since(t_start);
    guard.write(root / "run_manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });

    guard.commit();
    return reports;
}

}  // namespace bcv
