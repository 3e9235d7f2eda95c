#pragma once

// End-to-end stages over on-disk caches. Every stage verifies the checksums
// recorded by its upstream stage and refuses stale inputs.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfcast/arima.hpp"
#include "pfcast/config.hpp"
#include "pfcast/eval.hpp"
#include "pfcast/features.hpp"
#include "pfcast/gbt.hpp"
#include "pfcast/ingest.hpp"
#include "pfcast/panel.hpp"
#include "pfcast/seqnet.hpp"

namespace pfcast {

inline constexpr const char* kRawFiles[] = {"sales_train.csv", "items.csv", "item_categories.csv", "shops.csv",
                                            "test.csv"};

struct RawData {
  SalesData sales;
  CatalogTables catalog;
  std::vector<TestRow> test_ids;
};

/// Throws IoError naming the first missing file.
RawData load_raw(const std::filesystem::path& data_dir);

/// Monthly grid with the test month extended by every test pair.
/// `has_test_labels` is true when the raw data already has sales in the test
/// month.
struct PreparedGrid {
  PanelGrid grid;
  bool has_test_labels = false;
};
PreparedGrid prepare_grid(const RawData& raw, const SplitSpec& split, ClipRange clip, CleaningReport* report);

/// Exclusive advisory lock on `<dir>/.lock`, released on destruction.
class CacheLock {
 public:
  explicit CacheLock(const std::filesystem::path& dir);
  ~CacheLock();
  CacheLock(const CacheLock&) = delete;
  CacheLock& operator=(const CacheLock&) = delete;

 private:
  int fd_ = -1;
};

struct IngestSummary {
  CleaningReport report;
  std::size_t grid_cells = 0;
  bool has_test_labels = false;
};

struct Prediction {
  std::vector<double> values;  // clipped, aligned with the partition's rows
  std::vector<double> targets;
  std::vector<RowKey> keys;
};

enum class Partition { train, validation, test };
Partition parse_partition(const std::string& s);

enum class Model { gbt, arima, lstm, mean };
Model parse_model(const std::string& s, bool allow_mean);
std::string model_label(Model m);

struct TuneSummary {
  SearchResult search;
  gbt::GbtParams best;
};

class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  const RunConfig& config() const noexcept { return config_; }

  IngestSummary ingest();
  /// Returns the column manifest.
  std::vector<std::string> features();

  RunReport train_gbt();
  RunReport train_arima();
  RunReport train_lstm();

  /// Writes the submission for `model` from its trained artifact (ARIMA is
  /// refitted from the grid cache). Returns the path written.
  std::filesystem::path predict(Model model);
  double evaluate(Model model, Partition part);
  TuneSummary tune();
  std::vector<RunReport> compare();

  /// Clipped predictions per partition, from a trained artifact.
  Partitioned<Prediction> predictions(Model model);
  bool has_test_labels();

 private:
  struct Loaded;
  Loaded& loaded_grid();
  Loaded& loaded_features();

  RunReport report_from(const std::string& name, const Partitioned<Prediction>& p, double seconds,
                        nlohmann::json params);
  void upsert_report(const RunReport& r);

  Partitioned<Prediction> gbt_predictions(const gbt::GbtModel& m);
  Partitioned<Prediction> arima_predictions(const arima::ArimaRun& run);
  Partitioned<Prediction> lstm_predictions(const seqnet::SeqNetModel& m);
  Partitioned<SequenceSet> lstm_sequences();

  RunConfig config_;
  std::shared_ptr<Loaded> state_;
};

}  // namespace pfcast
