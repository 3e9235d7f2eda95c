#pragma once

// Naive recomputation of feature values straight from grid cells and raw
// records. Deliberately slow and independent of the library's aggregate
// tables.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <span>
#include <string>

#include "pfcast/panel.hpp"

namespace oracle {

using pfcast::kMissing;

struct Row {
  int block = 0;
  int shop = 0;
  int item = 0;
  int category = 0;
};

inline double cell_sum(const pfcast::PanelGrid& g, const pfcast::CatalogTables& cat, int block,
                       std::optional<int> shop, std::optional<int> item, std::optional<int> category,
                       bool revenue = false) {
  double s = 0.0;
  for (const auto& c : g.cells()) {
    if (c.date_block != block) continue;
    if (shop && c.shop_id != *shop) continue;
    if (item && c.item_id != *item) continue;
    if (category && cat.category_of(c.item_id) != *category) continue;
    s += revenue ? c.revenue : c.item_cnt_month;
  }
  return s;
}

inline double item_cumulative(const pfcast::PanelGrid& g, int block, int item) {
  double s = 0.0;
  for (const auto& c : g.cells()) {
    if (c.date_block <= block && c.item_id == item) s += c.item_cnt_month;
  }
  return s;
}

inline double price_stat(std::span<const pfcast::SalesRecord> records, int block, int item, std::optional<int> shop,
                         bool weighted) {
  double pq = 0, q = 0, p = 0, n = 0;
  for (const auto& r : records) {
    if (r.date_block != block || r.item_id != item) continue;
    if (shop && r.shop_id != *shop) continue;
    const double qq = r.item_cnt_day > 0 ? r.item_cnt_day : 0.0;
    pq += r.item_price * qq;
    q += qq;
    p += r.item_price;
    n += 1;
  }
  if (n == 0) return kMissing;
  if (weighted && q > 0) return pq / q;
  return p / n;
}

/// Value of base quantity `base` for row `r` evaluated at block t.
inline double base_value(const std::string& base, const pfcast::PanelGrid& g, const pfcast::CatalogTables& cat,
                         std::span<const pfcast::SalesRecord> records, const Row& r, int t) {
  if (t < g.min_block() || t > g.max_block()) return kMissing;
  if (base == "target_item") return cell_sum(g, cat, t, r.shop, r.item, std::nullopt);
  if (base == "target_shop") return cell_sum(g, cat, t, r.shop, std::nullopt, std::nullopt);
  if (base == "target_category") return cell_sum(g, cat, t, r.shop, std::nullopt, r.category);
  if (base == "target_item_total") return cell_sum(g, cat, t, std::nullopt, r.item, std::nullopt);
  if (base == "target_item_cum") return item_cumulative(g, t, r.item);
  if (base == "new_item") {
    const double prev = t - 1 < 0 ? 0.0 : item_cumulative(g, t - 1, r.item);
    const double now = cell_sum(g, cat, t, std::nullopt, r.item, std::nullopt);
    return (prev == 0.0 && now > 1.0) ? 1.0 : 0.0;
  }
  if (base == "revenue_shop") return cell_sum(g, cat, t, r.shop, std::nullopt, std::nullopt, true);
  if (base == "revenue_shop_category") return cell_sum(g, cat, t, r.shop, std::nullopt, r.category, true);
  if (base == "price_weighted_mean") return price_stat(records, t, r.item, std::nullopt, true);
  if (base == "target_price_mean") return price_stat(records, t, r.item, std::nullopt, false);
  if (base == "price_shop_mean") return price_stat(records, t, r.item, r.shop, false);
  throw std::runtime_error("oracle: unknown base " + base);
}

/// Mean target of a key level over training blocks [first, min(block - 1, last)],
/// falling back to the global mean of the same blocks.
inline double mean_encoding(const std::string& column, const pfcast::PanelGrid& g, const pfcast::CatalogTables& cat,
                            const pfcast::SplitSpec& split, const Row& r) {
  const int hi = std::min(r.block - 1, split.train_last);
  double s = 0, n = 0, gs = 0, gn = 0;
  for (const auto& c : g.cells()) {
    if (c.date_block < split.train_first || c.date_block > hi) continue;
    gs += c.item_cnt_month;
    gn += 1;
    const bool match = column == "enc_shop_id"            ? c.shop_id == r.shop
                       : column == "enc_shop_id_category" ? (c.shop_id == r.shop && cat.category_of(c.item_id) == r.category)
                       : column == "enc_item_id"          ? c.item_id == r.item
                                                          : cat.category_of(c.item_id) == r.category;
    if (match) {
      s += c.item_cnt_month;
      n += 1;
    }
  }
  if (n > 0) return s / n;
  return gn > 0 ? gs / gn : kMissing;
}

/// Recomputes any assembled column for one row; nullopt for column kinds the
/// oracle does not cover.
inline std::optional<double> feature(const std::string& name, const pfcast::PanelGrid& g,
                                     const pfcast::CatalogTables& cat, std::span<const pfcast::SalesRecord> records,
                                     const pfcast::SplitSpec& split, const Row& r) {
  if (name == "date_block_num") return r.block;
  if (name == "month") return r.block % 12;
  if (name == "year") return r.block / 12;
  if (name == "shop_id") return r.shop;
  if (name == "item_id") return r.item;
  if (name == "item_category") return r.category;
  if (name.rfind("enc_", 0) == 0) return mean_encoding(name, g, cat, split, r);
  if (auto p = name.find("_lag_"); p != std::string::npos) {
    const int k = std::stoi(name.substr(p + 5));
    return base_value(name.substr(0, p), g, cat, records, r, r.block - k);
  }
  if (auto p = name.find("_trend_"); p != std::string::npos) {
    const auto rest = name.substr(p + 7);
    const auto u = rest.find('_');
    const int j = std::stoi(rest.substr(0, u)), k = std::stoi(rest.substr(u + 1));
    const auto base = name.substr(0, p);
    const double a = base_value(base, g, cat, records, r, r.block - j);
    const double b = base_value(base, g, cat, records, r, r.block - k);
    return (std::isnan(a) || std::isnan(b)) ? kMissing : a - b;
  }
  for (const char* field : {"month", "year", "item_category_id", "shop_id"}) {
    const std::string prefix = std::string(field) + "_";
    if (name.rfind(prefix, 0) == 0) {
      const int level = std::stoi(name.substr(prefix.size()));
      const std::string f(field);
      const int v = f == "month" ? r.block % 12 : f == "year" ? r.block / 12 : f == "shop_id" ? r.shop : r.category;
      return v == level ? 1.0 : 0.0;
    }
  }
  return std::nullopt;
}

/// Equality with NaN == NaN and a relative tolerance for summed doubles.
inline bool same(double a, double b, double rel = 1e-12) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace oracle
