#pragma once

// Scoring, uniform random hyperparameter search, model comparison reports and
// submission files.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pfcast/gbt.hpp"
#include "pfcast/ingest.hpp"
#include "pfcast/panel.hpp"

namespace pfcast {

/// sqrt(mean((p - t)^2)). Throws ValidationError on empty or mismatched input.
double rmse(std::span<const double> predictions, std::span<const double> targets);

/// RMSE of predicting mean(targets) for every row.
double mean_baseline_rmse(std::span<const double> targets);

struct Dimension {
  enum class Kind { grid, uniform, integer };

  std::string name;
  Kind kind = Kind::grid;
  std::vector<double> values;  // grid
  double lo = 0.0;             // uniform / integer, inclusive
  double hi = 0.0;

  static Dimension grid(std::string name, std::vector<double> values);
  static Dimension uniform(std::string name, double lo, double hi);
  static Dimension integer(std::string name, int lo, int hi);

  void validate() const;
};

struct SearchSpace {
  std::vector<Dimension> dims;
  int n_samples = 60;
  std::uint64_t seed = 0;

  void validate() const;
  /// eta in [0.01, 0.3], max_depth in {3..10}, min_child_weight in [1, 50],
  /// lambda and alpha in [0, 1].
  static SearchSpace gbt_default();
  /// `{"n_samples":..,"seed":..,"dims":{"eta":[lo,hi] | {"grid":[..]} | {"int":[lo,hi]}}}`;
  /// a missing `dims` keeps the GBT default dimensions.
  static SearchSpace from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

using ParamPoint = std::vector<std::pair<std::string, double>>;

/// `n_samples` independent draws in trial order, reproducible from the seed.
std::vector<ParamPoint> draw_samples(const SearchSpace& space);

struct TrialScore {
  double train_rmse = 0.0;
  double val_rmse = 0.0;
};

struct Trial {
  int index = 0;
  ParamPoint params;
  double train_rmse = kMissing;
  double val_rmse = kMissing;
  double seconds = 0.0;
  std::string error;

  bool ok() const noexcept { return error.empty(); }
};

struct SearchResult {
  std::vector<Trial> trials;  // in trial order
  std::size_t best = 0;

  const Trial& winner() const { return trials.at(best); }
};

using TrialFn = std::function<TrialScore(const ParamPoint&)>;

/// Scores every draw (up to `jobs` at once). Failing trials are logged and
/// skipped; the winner has the lowest validation RMSE, earliest trial on
/// ties. Throws NumericError when every trial fails.
SearchResult random_search(const SearchSpace& space, const TrialFn& score, int jobs = 1);

/// `trial,<param>...,train_rmse,val_rmse,seconds`; failed trials leave the
/// RMSE fields empty.
std::string trial_log_csv(const SearchResult& result);

/// Overrides GBT fields by name. Throws ValidationError for unknown names or
/// invalid results.
gbt::GbtParams apply_params(gbt::GbtParams base, const ParamPoint& point);

struct RunReport {
  std::string model;
  double train_rmse = kMissing;
  double val_rmse = kMissing;
  double test_rmse = kMissing;  // only when test labels exist
  nlohmann::json params = nlohmann::json::object();
  double wall_seconds = 0.0;
  std::string error;

  bool ok() const noexcept { return error.empty(); }
};

inline constexpr std::string_view kGbtName = "XGBoost-style GBT";
inline constexpr std::string_view kLstmName = "LSTM";
inline constexpr std::string_view kArimaName = "ARIMA";

struct ModelRunner {
  std::string name;
  std::function<RunReport()> run;
};

/// Runs each model, recording failures in place of throwing, and returns the
/// reports sorted by validation RMSE (failures last, then roster order).
std::vector<RunReport> compare_models(std::span<const ModelRunner> runners);

/// Fixed-width text table with a `status` column.
std::string render_table(std::span<const RunReport> reports);
/// `model,train_rmse,val_rmse,test_rmse`.
std::string report_csv(std::span<const RunReport> reports);

/// `ID,item_cnt_month` in test-file order with values clipped to [0, 20].
/// Throws DataError listing the IDs that have no prediction.
std::string submission_csv(std::span<const TestRow> test_ids, const std::map<RowKey, double>& predictions,
                           ClipRange clip = {});
void write_submission(std::span<const TestRow> test_ids, const std::map<RowKey, double>& predictions,
                      const std::filesystem::path& path, ClipRange clip = {});

struct SubmissionRow {
  long long id = 0;
  double item_cnt_month = 0.0;
};
/// Throws SchemaError unless the header is exactly `ID,item_cnt_month`.
std::vector<SubmissionRow> parse_submission(std::string_view content, std::string_view source = "submission.csv");

}  // namespace pfcast
