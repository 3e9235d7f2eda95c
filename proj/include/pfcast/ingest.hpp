#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "pfcast/panel.hpp"

namespace pfcast {

struct CleaningReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t rows_dropped = 0;
  std::size_t values_imputed = 0;
  std::size_t clip_events = 0;
};

struct SalesData {
  std::vector<SalesRecord> records;
  CleaningReport report;
};

struct ClipRange {
  double lo = 0.0;
  double hi = 20.0;
};

struct TestRow {
  long long id = 0;
  int shop_id = 0;
  int item_id = 0;
};

/// Parses `date,date_block_num,shop_id,item_id,item_price,item_cnt_day`.
/// Malformed rows are dropped. A negative price is replaced by the median of
/// the other prices seen for the same (shop, item); with no such sibling the
/// row is dropped.
SalesData parse_sales(std::string_view content, std::string_view source = "sales_train.csv");
SalesData load_sales(const std::filesystem::path& path);

CatalogTables parse_catalog(std::string_view items_csv, std::string_view categories_csv, std::string_view shops_csv);
CatalogTables load_catalog(const std::filesystem::path& items, const std::filesystem::path& categories,
                           const std::filesystem::path& shops);

std::vector<TestRow> parse_test_ids(std::string_view content, std::string_view source = "test.csv");
std::vector<TestRow> load_test_ids(const std::filesystem::path& path);

/// Aggregates daily records into monthly cells. Each block's universe is the
/// cross product of shops and items seen in that block; unsold pairs get 0.
/// item_cnt_month is the clipped monthly sum. Clip events are added to
/// `report` when given.
PanelGrid build_grid(std::span<const SalesRecord> records, const CatalogTables& catalog, ClipRange clip,
                     CleaningReport* report = nullptr);

/// Adds zero cells for `pairs` in `block` (existing cells are kept).
PanelGrid with_block_pairs(const PanelGrid& grid, int block, std::span<const RowKey> pairs);

/// Cache layout: `date_block,shop_id,item_id,item_cnt_month,revenue`.
std::string grid_to_csv(const PanelGrid& grid);
PanelGrid grid_from_csv(std::string_view content, std::string_view source = "grid.csv");

struct MonthlyRevenue {
  int date_block = 0;
  double revenue = 0.0;
  double item_cnt = 0.0;
};
std::vector<MonthlyRevenue> revenue_by_month(const PanelGrid& grid);

}  // namespace pfcast
