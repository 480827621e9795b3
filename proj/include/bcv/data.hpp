#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bcv/csv.hpp"

namespace bcv {

enum class Task { Classification, Regression };
enum class ColumnType { Numeric, Categorical };

std::string to_string(Task task);
Task parse_task(std::string_view text);

/// One feature column. Categorical cells are stored as level codes (indices
/// into `levels`, which are sorted by byte order) so every feature reads as a
/// double.
struct Column {
    std::string name;
    ColumnType type = ColumnType::Numeric;
    std::vector<double> values;
    std::vector<std::string> levels;

    bool operator==(const Column&) const = default;
};

/// Feature table plus target. Classification targets hold class codes into
/// `classes` (sorted by byte order; code order is the tie-break order used by
/// the learners). Immutable once loaded.
struct Dataset {
    std::string name;
    Task task = Task::Classification;
    std::vector<Column> features;
    std::string target_name;
    std::vector<double> target;
    std::vector<std::string> classes;
    std::size_t dropped_rows = 0;

    std::size_t n_rows() const noexcept { return target.size(); }
    std::size_t n_features() const noexcept { return features.size(); }
    std::size_t n_classes() const noexcept { return classes.size(); }
    double x(std::size_t row, std::size_t col) const noexcept { return features[col].values[row]; }

    /// Throws bcv::Error if any structural invariant is broken.
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

struct LoadOptions {
    std::string target_column;
    Task task = Task::Classification;
    std::map<std::string, ColumnType> schema_overrides;
    /// Cells equal to one of these (after trimming blanks) count as missing.
    std::vector<std::string> missing_tokens{"", "NA"};
};

/// Builds a Dataset from a header and data rows. Rows containing a missing
/// cell are dropped and counted in `dropped_rows`.
Dataset dataset_from_rows(const csv::Row& header, const std::vector<csv::Row>& rows,
                          const LoadOptions& options, std::string name = {});

Dataset load_csv(const std::filesystem::path& path, const LoadOptions& options);

}  // namespace bcv
