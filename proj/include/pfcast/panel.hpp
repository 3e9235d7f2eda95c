#pragma once

// Shared data model: raw transactions, catalog, the monthly panel grid, the
// feature matrix and the date-block split.

#include <compare>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pfcast {

/// Missing-value sentinel. Distinct from 0, which is a legitimate sales value.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;
  auto operator<=>(const Date&) const = default;
};

struct SalesRecord {
  Date date;
  int date_block = 0;
  int shop_id = 0;
  int item_id = 0;
  double item_price = 0.0;
  double item_cnt_day = 0.0;
};

struct CatalogTables {
  std::map<int, int> item_category;  // item_id -> item_category_id
  std::set<int> categories;
  std::set<int> shops;

  /// Throws ValidationError for unknown items.
  int category_of(int item_id) const;
};

struct RowKey {
  int shop_id = 0;
  int item_id = 0;
  auto operator<=>(const RowKey&) const = default;
};

struct PanelCell {
  int date_block = 0;
  int shop_id = 0;
  int item_id = 0;
  double item_cnt_month = 0.0;
  double revenue = 0.0;
};

/// Dense month x (shop, item) grid. Cells are kept sorted by
/// (date_block, shop_id, item_id) and each key occurs exactly once.
class PanelGrid {
 public:
  PanelGrid() = default;
  explicit PanelGrid(std::vector<PanelCell> cells);

  std::span<const PanelCell> cells() const noexcept { return cells_; }
  std::span<const PanelCell> block(int date_block) const;
  const PanelCell* find(int date_block, int shop_id, int item_id) const;

  bool empty() const noexcept { return cells_.empty(); }
  std::size_t size() const noexcept { return cells_.size(); }
  int min_block() const noexcept { return min_block_; }
  int max_block() const noexcept { return max_block_; }

 private:
  std::vector<PanelCell> cells_;
  std::vector<std::size_t> block_start_;  // indexed by block - min_block_, size = n_blocks + 1
  int min_block_ = 0;
  int max_block_ = -1;
};

/// Column-major numeric features plus target, block and key per row.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::vector<std::string> names, std::vector<std::vector<double>> columns,
                std::vector<double> target, std::vector<int> date_block, std::vector<RowKey> row_keys);

  std::size_t n_rows() const noexcept { return target_.size(); }
  std::size_t n_features() const noexcept { return names_.size(); }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }
  std::span<const double> column(std::size_t j) const { return columns_[j]; }
  double value(std::size_t row, std::size_t feature) const { return columns_[feature][row]; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  std::span<const double> target() const noexcept { return target_; }
  std::span<const int> date_block() const noexcept { return date_block_; }
  std::span<const RowKey> row_keys() const noexcept { return row_keys_; }

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
  /// Same rows, different target vector (used by leakage checks).
  FeatureMatrix with_target(std::vector<double> target) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::vector<double> target_;
  std::vector<int> date_block_;
  std::vector<RowKey> row_keys_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-row sequence inputs for the recurrent model: a window of dynamic
/// features (oldest month first) and a static vector stored once per row.
struct SequenceSet {
  std::size_t window = 0;
  std::vector<std::string> dynamic_names;
  std::vector<std::string> static_names;
  std::vector<double> dynamic;  // n x window x n_dynamic
  std::vector<double> statics;  // n x n_static
  std::vector<double> target;
  std::vector<int> date_block;
  std::vector<RowKey> row_keys;

  std::size_t size() const noexcept { return target.size(); }
  std::size_t n_dynamic() const noexcept { return dynamic_names.size(); }
  std::size_t n_static() const noexcept { return static_names.size(); }
  std::span<const double> dynamic_of(std::size_t i) const {
    const std::size_t w = window * n_dynamic();
    return std::span<const double>(dynamic).subspan(i * w, w);
  }
  std::span<const double> static_of(std::size_t i) const {
    return std::span<const double>(statics).subspan(i * n_static(), n_static());
  }
  SequenceSet select_rows(std::span<const std::size_t> rows) const;
};

struct SplitSpec {
  int train_first = 0;
  int train_last = 32;
  int validation_block = 33;
  int test_block = 34;

  /// Throws ValidationError unless train_first <= train_last < validation < test.
  void validate() const;
};

template <typename T>
struct Partitioned {
  T train;
  T validation;
  T test;
};

/// Row indices per partition, in original order. Rows outside every
/// partition are dropped.
Partitioned<std::vector<std::size_t>> partition_rows(std::span<const int> date_block, const SplitSpec& split);

/// Throws ValidationError on an invalid spec or an empty partition.
Partitioned<FeatureMatrix> split_rows(const FeatureMatrix& m, const SplitSpec& split);
Partitioned<SequenceSet> split_rows(const SequenceSet& s, const SplitSpec& split);

/// min(hi, max(lo, x)).
double clip_target(double x, double lo, double hi) noexcept;

}  // namespace pfcast
