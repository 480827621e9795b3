#include "bcv/data.hpp"

#include "bcv/error.hpp"
#include "bcv/numeric.hpp"

#include <algorithm>
#include <set>

namespace bcv {

std::string to_string(Task task)
{
    return task == Task::Classification ? "classification" : "regression";
}

Task parse_task(std::string_view text)
{
    if (text == "classification")
        return Task::Classification;
    if (text == "regression")
        return Task::Regression;
    throw Error("unknown task '" + std::string(text) + "' (expected classification or regression)");
}

void Dataset::validate() const
{
    const std::size_t n = n_rows();
    if (n < 2)
        throw Error("dataset '" + name + "': need at least 2 rows, have " + std::to_string(n));
    if (features.empty())
        throw Error("dataset '" + name + "': no feature columns");
    for (const auto& col : features) {
        if (col.values.size() != n)
            throw Error("dataset '" + name + "': column '" + col.name + "' has wrong length");
        if (col.type == ColumnType::Categorical) {
            for (double v : col.values)
                if (v < 0 || v >= static_cast<double>(col.levels.size()))
                    throw Error("dataset '" + name + "': column '" + col.name + "' has a bad level code");
        }
    }
    if (task == Task::Classification) {
        if (classes.size() < 2)
            throw Error("dataset '" + name + "': classification target needs at least 2 labels");
        std::vector<std::size_t> counts(classes.size(), 0);
        for (double y : target) {
            if (y < 0 || y >= static_cast<double>(classes.size()))
                throw Error("dataset '" + name + "': bad class code in target");
            ++counts[static_cast<std::size_t>(y)];
        }
        if (std::find(counts.begin(), counts.end(), 0u) != counts.end())
            throw Error("dataset '" + name + "': a declared class has no instances");
    }
}

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    return s;
}

bool is_missing(std::string_view cell, const std::vector<std::string>& tokens)
{
    const auto t = trim(cell);
    return std::find(tokens.begin(), tokens.end(), t) != tokens.end();
}

Column build_column(const std::string& name, std::vector<std::string_view> cells,
                    const LoadOptions& options)
{
    Column col;
    col.name = name;

    bool numeric = true;
    std::vector<double> parsed(cells.size());
    for (std::size_t r = 0; r < cells.size() && numeric; ++r)
        numeric = parse_real(cells[r], parsed[r]);

    if (auto it = options.schema_overrides.find(name); it != options.schema_overrides.end()) {
        if (it->second == ColumnType::Numeric && !numeric)
            throw Error("column '" + name + "' declared numeric but contains non-numeric cells");
        numeric = it->second == ColumnType::Numeric;
    }

    if (numeric) {
        col.type = ColumnType::Numeric;
        col.values = std::move(parsed);
        return col;
    }

    col.type = ColumnType::Categorical;
    std::set<std::string_view> uniq(cells.begin(), cells.end());
    col.levels.assign(uniq.begin(), uniq.end());
    col.values.reserve(cells.size());
    for (auto c : cells) {
        const auto pos = std::lower_bound(col.levels.begin(), col.levels.end(), c);
        col.values.push_back(static_cast<double>(pos - col.levels.begin()));
    }
    return col;
}

}  // namespace

Dataset dataset_from_rows(const csv::Row& header, const std::vector<csv::Row>& rows,
                          const LoadOptions& options, std::string name)
{
    if (header.empty())
        throw Error("csv: missing header row");
    const auto target_it = std::find(header.begin(), header.end(), options.target_column);
    if (target_it == header.end())
        throw Error("target column '" + options.target_column + "' not found in header");
    const std::size_t target_col = static_cast<std::size_t>(target_it - header.begin());
    for (const auto& [col, type] : options.schema_overrides) {
        (void)type;
        if (std::find(header.begin(), header.end(), col) == header.end())
            throw Error("schema override names unknown column '" + col + "'");
    }

    std::vector<const csv::Row*> kept;
    kept.reserve(rows.size());
    std::size_t dropped = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw Error("csv: data row " + std::to_string(r + 1) + " has " + std::to_string(row.size())
                        + " fields, header has " + std::to_string(header.size()));
        const bool missing = std::any_of(row.begin(), row.end(),
                                         [&](const std::string& c) { return is_missing(c, options.missing_tokens); });
        if (missing)
            ++dropped;
        else
            kept.push_back(&row);
    }
    if (kept.empty())
        throw Error("no usable rows (" + std::to_string(dropped) + " dropped for missing values)");

    Dataset ds;
    ds.name = std::move(name);
    ds.task = options.task;
    ds.target_name = options.target_column;
    ds.dropped_rows = dropped;

    auto cells_of = [&](std::size_t c) {
        std::vector<std::string_view> cells;
        cells.reserve(kept.size());
        for (const auto* row : kept)
            cells.push_back(trim((*row)[c]));
        return cells;
    };

    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == target_col)
            continue;
        ds.features.push_back(build_column(header[c], cells_of(c), options));
    }

    const auto target_cells = cells_of(target_col);
    if (options.task == Task::Regression) {
        ds.target.reserve(target_cells.size());
        for (auto cell : target_cells) {
            double v = 0;
            if (!parse_real(cell, v))
                throw Error("regression target '" + options.target_column + "' has non-numeric cell '"
                            + std::string(cell) + "'");
            ds.target.push_back(v);
        }
    } else {
        std::set<std::string_view> uniq(target_cells.begin(), target_cells.end());
        ds.classes.assign(uniq.begin(), uniq.end());
        if (ds.classes.size() < 2)
            throw Error("classification target '" + options.target_column + "' has fewer than 2 labels");
        for (auto cell : target_cells) {
            const auto pos = std::lower_bound(ds.classes.begin(), ds.classes.end(), cell);
            ds.target.push_back(static_cast<double>(pos - ds.classes.begin()));
        }
    }

    ds.validate();
    return ds;
}

Dataset load_csv(const std::filesystem::path& path, const LoadOptions& options)
{
    auto rows = csv::read_file(path);
    if (rows.empty())
        throw Error("csv: '" + path.string() + "' is empty");
    csv::Row header = std::move(rows.front());
    rows.erase(rows.begin());
    return dataset_from_rows(header, rows, options, path.stem().string());
}

}  // namespace bcv
