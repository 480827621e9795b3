#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcv/anova.hpp"
#include "bcv/data.hpp"
#include "bcv/design.hpp"
#include "bcv/grid.hpp"
#include "bcv/learner.hpp"
#include "bcv/permtest.hpp"

namespace bcv {

struct DatasetConfig {
    std::string path;
    std::string target;
    Task task = Task::Classification;
    std::map<std::string, ColumnType> schema;
    std::vector<std::string> missing_tokens{"", "NA"};
};

/// Seeds are either listed or drawn from the master seed (count only).
struct DesignConfig {
    DesignKind kind = DesignKind::BCV;
    std::vector<std::uint64_t> cv_seeds;
    std::size_t cv_seed_count = 0;
    std::vector<std::uint64_t> learner_seeds;
    std::size_t learner_seed_count = 0;
    std::size_t reps = 0;
    bool rcv_shared_within_rep = false;
};

struct PermutationConfig {
    std::size_t permutations = 4999;  // 0 disables the tests
    std::optional<std::uint64_t> seed;
    std::vector<std::vector<std::string>> tests;
    TestStatistic statistic = TestStatistic::F;
};

struct RunConfig {
    DatasetConfig dataset;
    std::optional<LossKind> loss;
    LearnerSpec learner{"random_forest", {}};
    std::vector<ParamAxis> grid;
    std::vector<ParamMap> exclude;
    PartitionStrategy strategy;
    std::vector<DesignConfig> designs;
    std::uint64_t seed = 0;
    std::optional<ModelSpec> model;
    PermutationConfig permutation;
    std::size_t top_k = 2;
    std::string output = "bcv_out";
    unsigned threads = 0;
    /// Relative dataset paths resolve against this directory.
    std::filesystem::path base_dir;

    void validate() const;
};

/// Parses the JSON run configuration. A run manifest is accepted too: its
/// "config" member is used. Throws bcv::Error with the offending key.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
/// JSON form that parse_config reads back to the same configuration.
nlohmann::json config_to_json(const RunConfig& config);

SettingGrid config_grid(const RunConfig& config);
/// Seed lists drawn or copied, ready for run_design.
DesignPlan resolve_design(const RunConfig& config, const DesignConfig& design);
/// Config model (or the default) with random terms that reference a block
/// the design lacks dropped.
ModelSpec model_for(const std::optional<ModelSpec>& model, const ErrTable& table);

struct DryRunDesign {
    std::string notation;
    std::size_t runs_per_setting = 0;
    std::size_t runs = 0;
    std::size_t model_fits = 0;
};

struct DryRun {
    std::size_t settings = 0;
    std::vector<DryRunDesign> designs;
};

DryRun dry_run(const RunConfig& config);
void print_dry_run(std::ostream& os, const DryRun& plan);

struct CurvePoint {
    std::string shape;
    std::size_t runs = 0;
    double std_err = 0.0;
    /// Per-setting values, filled when requested.
    std::vector<double> per_setting;
};

struct CurveFamily {
    std::string family;
    DesignKind kind = DesignKind::BCV;
    std::vector<CurvePoint> points;
};

struct StdErrCurve {
    std::vector<CurveFamily> families;
    std::optional<double> min_rcv;
};

/// Nested shapes evaluated for a table: for BCV every Y x Z with
/// Z <= Y <= Z + 2 (Z >= 2), which for 4x4 gives 2x2, 3x2, 4x2, 3x3, 4x3,
/// 4x4; Y x 1 shapes when there is a single learner seed; N = 2.. for
/// BCV_Nx0 and RCV. Shapes with fewer than 2 runs are skipped.
std::vector<std::pair<std::size_t, std::size_t>> curve_shapes(DesignKind kind, std::size_t n_first,
                                                              std::size_t n_second);

/// Std.err of the setting means at every nested shape, averaged over
/// settings. Tables of the same family must be nested (the smaller one a
/// subtable of the larger); the largest one is used. The per-setting value
/// scales the residual mean square by each setting's share of the squared
/// residuals.
StdErrCurve stderr_curve(const std::vector<ErrTable>& tables, const std::optional<ModelSpec>& model = std::nullopt,
                         bool per_setting = false);

void write_stderr_curve_csv(std::ostream& os, const StdErrCurve& curve);
void write_stderr_curve_per_setting_csv(std::ostream& os, const StdErrCurve& curve);

/// Per-setting mean, std.err and rank.
void write_setting_means_csv(std::ostream& os, const ErrTable& table, const SettingMeans& means);

struct DesignReport {
    std::string notation;
    std::string directory;
    ErrTable table;
    AnovaResult fit;
    SettingMeans means;
    std::optional<PermutationResult> tests;
    double seconds = 0.0;
};

/// Top-K settings of each design: design, rank, setting_index,
/// hyperparameters, mean_err, std_err.
void write_best_settings_csv(std::ostream& os, const std::vector<DesignReport>& reports, std::size_t top_k);

struct RunControls {
    std::optional<std::filesystem::path> out;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> permutations;
    bool per_setting_curve = false;
    std::ostream* log = nullptr;
};

/// Applies command-line overrides to a configuration.
RunConfig apply_controls(RunConfig config, const RunControls& controls);

/// Runs every design and writes, under the output directory:
///   run_manifest.json, best_settings.csv, stderr_curve.csv and, per design,
///   NN_<notation>/{err_table,anova,setting_means}.csv.
/// Files created by a failed run are removed before the error propagates.
std::vector<DesignReport> run_report(const RunConfig& config, const RunControls& controls = {});

}  // namespace bcv
