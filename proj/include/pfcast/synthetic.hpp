#pragma once

// Seeded synthetic retail panel with a known autoregressive, shop and
// seasonal structure, written in the same raw-file layout as the real data.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pfcast/ingest.hpp"
#include "pfcast/panel.hpp"

namespace pfcast {

struct SyntheticSpec {
  int n_months = 24;
  int n_shops = 20;
  int n_items = 50;
  int n_categories = 5;
  std::uint64_t seed = 0;
  double ar_coef = 0.6;
  double base_level = 1.0;
  double shop_effect_max = 3.0;
  double season_amplitude = 1.5;
  double noise_sd = 1.0;
  /// Fraction of transactions written with price -1.
  double bad_price_rate = 0.002;
};

struct SyntheticData {
  std::vector<SalesRecord> records;
  CatalogTables catalog;
  std::vector<TestRow> test_ids;  // every (shop, item) pair of the last month
  /// Monthly totals as generated: index [block][shop * n_items + item].
  std::vector<std::vector<double>> monthly;
  std::vector<double> shop_effect;
};

/// y(b) = clamp(round(ar * y(b-1) + base + shop_effect + amp * sin(2 pi m / 12) + noise), 0, 20)
/// with m = b mod 12. Each monthly total is spread over 1-4 daily transactions.
SyntheticData generate(const SyntheticSpec& spec);

/// Writes sales_train.csv, items.csv, item_categories.csv, shops.csv and
/// test.csv into `dir`.
void write_dataset(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace pfcast
