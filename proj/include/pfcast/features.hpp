#pragma once

// Monthly aggregates, lags, lag differences, new-item flags, price features,
// one-hot and training-mean encodings, assembled into a FeatureMatrix.
//
// No contemporaneous aggregate is ever emitted as a feature: every
// time-varying quantity enters a row only through a lag (k >= 1 months back).

#include <algorithm>
#include <cstdint>
#include <tuple>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pfcast/panel.hpp"

namespace pfcast {

struct FeatureSpec {
  std::vector<int> lag_offsets{1, 2, 3, 12};
  std::vector<std::pair<int, int>> trend_pairs{{1, 2}, {2, 3}, {1, 12}};
  std::vector<std::string> onehot_fields{"month", "year", "item_category_id", "shop_id"};
  std::vector<std::string> encodings{"shop_id", "shop_id_category"};
  int burn_in_blocks = 12;

  void validate() const;
  /// Keys mirror the field names. When `trend_pairs` is absent the default
  /// pairs are kept only if both members are configured lag offsets.
  static FeatureSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Per-(key, block) values. Keys are up to two integer ids. Lookups for
/// blocks inside [first_block, last_block] and absent keys return
/// `absent_value` (0 for additive aggregates, missing for prices); blocks
/// outside that range return the missing sentinel.
class AggregateTable {
 public:
  AggregateTable() = default;
  AggregateTable(std::string name, std::vector<std::string> key_fields, double absent_value, int first_block,
                 int last_block);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& key_fields() const noexcept { return key_fields_; }
  int first_block() const noexcept { return first_block_; }
  int last_block() const noexcept { return last_block_; }

  double at(int block, int k1, int k2 = 0) const;
  bool contains(int block, int k1, int k2 = 0) const;
  void set(int block, int k1, int k2, double v);
  void add(int block, int k1, int k2, double v);
  std::size_t size() const noexcept { return values_.size(); }

  /// Visits entries in ascending (block, k1, k2) order.
  template <typename F>
  void for_each(F&& f) const {
    std::vector<std::uint64_t> keys;
    keys.reserve(values_.size());
    for (const auto& [k, v] : values_) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (auto k : keys) {
      auto [b, k1, k2] = unpack(k);
      f(b, k1, k2, values_.at(k));
    }
  }

  static std::uint64_t pack(int block, int k1, int k2);
  static std::tuple<int, int, int> unpack(std::uint64_t key);

 private:
  std::string name_;
  std::vector<std::string> key_fields_;
  double absent_value_ = 0.0;
  int first_block_ = 0;
  int last_block_ = -1;
  std::unordered_map<std::uint64_t, double> values_;
};

AggregateTable agg_revenue_by_shop(const PanelGrid& grid);
AggregateTable agg_revenue_by_shop_category(const PanelGrid& grid, const CatalogTables& catalog);

struct CountTables {
  AggregateTable by_shop;
  AggregateTable by_shop_category;
  AggregateTable by_item;
  AggregateTable cumulative_by_item;
};
CountTables agg_counts(const PanelGrid& grid, const CatalogTables& catalog);

/// flag(item, b) = 1 iff cumulative(item, b-1) == 0 and the monthly count at
/// b is > 1.
AggregateTable flag_new_items(const AggregateTable& cumulative_by_item);

struct PriceTables {
  AggregateTable weighted_mean_by_item;
  AggregateTable mean_by_item;
  AggregateTable mean_by_item_shop;  // keys (item_id, shop_id)
};
PriceTables price_features(std::span<const SalesRecord> records, const PanelGrid& grid);

/// Training-only target mean per key level. For a row in block b the mean
/// covers training blocks strictly before b, so rows inside the training
/// range never see their own month; rows at or after the validation block see
/// the full training range. Unseen levels get the global mean of the same
/// blocks.
class MeanEncoding {
 public:
  enum class Key { shop_id, item_id, item_category, shop_id_category };

  MeanEncoding(const PanelGrid& grid, const CatalogTables& catalog, Key key, const SplitSpec& split);

  std::string column_name() const;
  Key key() const noexcept { return key_; }
  double value(int block, int k1, int k2 = 0) const;
  /// Level for a row; k2 is only used by shop_id_category.
  std::pair<int, int> level_of(const RowKey& row, int category) const;

  static Key parse_key(const std::string& s);

 private:
  struct Prefix {
    std::vector<double> sum;
    std::vector<double> count;
  };
  double mean_before(const Prefix& p, int block) const;

  Key key_;
  int first_ = 0;
  int last_ = -1;
  std::unordered_map<std::uint64_t, Prefix> levels_;
  Prefix global_;
};

/// Lag of `table` at offset k for a row in `block` with key (k1, k2).
inline double lag_value(const AggregateTable& table, int block, int offset, int k1, int k2 = 0) {
  return table.at(block - offset, k1, k2);
}

/// One lag column per offset: column[r] = table(block_r - k, key_r).
struct KeyedRows {
  std::span<const int> blocks;
  std::vector<std::pair<int, int>> keys;
};
std::vector<std::vector<double>> lag_join(const AggregateTable& table, const KeyedRows& rows,
                                          std::span<const int> offsets);

/// lag_j - lag_k with missing propagation.
std::vector<double> trend_column(std::span<const double> lag_j, std::span<const double> lag_k);

/// One-hot levels per field, learned from training-block grid cells.
struct OneHotLevels {
  std::vector<std::pair<std::string, std::vector<int>>> fields;
};
OneHotLevels onehot_levels(const PanelGrid& grid, const CatalogTables& catalog, std::span<const std::string> fields,
                           const SplitSpec& split);
/// Value of a field for a row; throws ValidationError for unknown fields.
int onehot_field_value(const std::string& field, int block, const RowKey& key, int category);

/// Builds every feature table once and assembles matrices or sequence sets
/// from them. The grid, catalog and records must outlive the builder.
class FeatureBuilder {
 public:
  struct LagBase {
    std::string name;
    const AggregateTable* table = nullptr;
    enum class Key { shop_item, shop, shop_category, item, item_shop } key = Key::shop_item;
    bool trends = true;
  };

  FeatureBuilder(const PanelGrid& grid, const CatalogTables& catalog, std::span<const SalesRecord> records,
                 FeatureSpec spec, SplitSpec split);

  FeatureMatrix assemble() const;
  /// Dynamic inputs are the count, revenue and price bases over the
  /// `window` months before each row (missing -> 0); static inputs are
  /// the one-hot indicators and mean encodings.
  SequenceSet sequences(int window) const;

  const std::vector<LagBase>& bases() const noexcept { return bases_; }
  const AggregateTable& target_table() const noexcept { return target_; }
  const std::vector<MeanEncoding>& encodings() const noexcept { return encodings_; }
  const OneHotLevels& onehot() const noexcept { return onehot_; }
  const FeatureSpec& spec() const noexcept { return spec_; }
  /// Grid cells that become rows (block >= burn-in), in grid order.
  const std::vector<const PanelCell*>& rows() const noexcept { return rows_; }

 private:
  std::pair<int, int> key_of(const LagBase& base, const PanelCell& c) const;

  const PanelGrid& grid_;
  const CatalogTables& catalog_;
  FeatureSpec spec_;
  SplitSpec split_;

  AggregateTable target_;
  AggregateTable revenue_shop_;
  AggregateTable revenue_shop_category_;
  CountTables counts_;
  AggregateTable new_items_;
  PriceTables prices_;
  std::vector<LagBase> bases_;
  std::vector<MeanEncoding> encodings_;
  OneHotLevels onehot_;
  std::vector<const PanelCell*> rows_;
  std::vector<int> row_category_;
};

FeatureMatrix assemble(const PanelGrid& grid, const CatalogTables& catalog, std::span<const SalesRecord> records,
                       const FeatureSpec& spec, const SplitSpec& split);

/// Cache layout: feature names, then `target,date_block` and the `shop_id`,
/// `item_id` key columns unless they are already feature columns. Missing
/// values are empty fields.
std::string matrix_to_csv(const FeatureMatrix& m);
FeatureMatrix matrix_from_csv(std::string_view content, std::string_view source = "features.csv");

}  // namespace pfcast
