#include "pfcast/features.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "pfcast/csv.hpp"
#include "pfcast/error.hpp"

namespace pfcast {

// ---------------------------------------------------------------- FeatureSpec

void FeatureSpec::validate() const {
  std::set<int> lags;
  for (int k : lag_offsets) {
    if (k < 1) throw ValidationError("feature spec: lag offsets must be >= 1");
    if (!lags.insert(k).second) throw ValidationError("feature spec: duplicate lag offset " + std::to_string(k));
  }
  for (auto [j, k] : trend_pairs) {
    if (!lags.contains(j) || !lags.contains(k)) {
      throw ValidationError("feature spec: trend pair (" + std::to_string(j) + "," + std::to_string(k) +
                            ") uses an unconfigured lag");
    }
    if (j == k) throw ValidationError("feature spec: trend pair with equal lags");
  }
  for (const auto& f : onehot_fields) {
    if (f != "month" && f != "year" && f != "item_category_id" && f != "shop_id") {
      throw ValidationError("feature spec: unknown one-hot field '" + f + "'");
    }
  }
  for (const auto& e : encodings) MeanEncoding::parse_key(e);
  if (burn_in_blocks < 0) throw ValidationError("feature spec: burn_in_blocks must be >= 0");
}

FeatureSpec FeatureSpec::from_json(const nlohmann::json& j) {
  FeatureSpec s;
  try {
    if (j.contains("lag_offsets")) s.lag_offsets = j.at("lag_offsets").get<std::vector<int>>();
    if (j.contains("trend_pairs")) {
      s.trend_pairs.clear();
      for (const auto& p : j.at("trend_pairs")) s.trend_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    } else {
      std::erase_if(s.trend_pairs, [&](const auto& p) {
        auto has = [&](int k) { return std::find(s.lag_offsets.begin(), s.lag_offsets.end(), k) != s.lag_offsets.end(); };
        return !has(p.first) || !has(p.second);
      });
    }
    if (j.contains("onehot_fields")) s.onehot_fields = j.at("onehot_fields").get<std::vector<std::string>>();
    if (j.contains("encodings")) s.encodings = j.at("encodings").get<std::vector<std::string>>();
    if (j.contains("burn_in_blocks")) s.burn_in_blocks = j.at("burn_in_blocks").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("feature spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json FeatureSpec::to_json() const {
  nlohmann::json pairs = nlohmann::json::array();
  for (auto [j, k] : trend_pairs) pairs.push_back({j, k});
  return {{"lag_offsets", lag_offsets},
          {"trend_pairs", pairs},
          {"onehot_fields", onehot_fields},
          {"encodings", encodings},
          {"burn_in_blocks", burn_in_blocks}};
}

// ------------------------------------------------------------ AggregateTable

AggregateTable::AggregateTable(std::string name, std::vector<std::string> key_fields, double absent_value,
                               int first_block, int last_block)
    : name_(std::move(name)),
      key_fields_(std::move(key_fields)),
      absent_value_(absent_value),
      first_block_(first_block),
      last_block_(last_block) {}

std::uint64_t AggregateTable::pack(int block, int k1, int k2) {
  constexpr int kMaxId = (1 << 24) - 1;
  if (block < 0 || block > 0xFFFF || k1 < 0 || k1 > kMaxId || k2 < 0 || k2 > kMaxId) {
    throw ValidationError("aggregate key out of range (block " + std::to_string(block) + ", ids " +
                          std::to_string(k1) + "," + std::to_string(k2) + ")");
  }
  return (static_cast<std::uint64_t>(block) << 48) | (static_cast<std::uint64_t>(k1) << 24) |
         static_cast<std::uint64_t>(k2);
}

std::tuple<int, int, int> AggregateTable::unpack(std::uint64_t key) {
  return {static_cast<int>(key >> 48), static_cast<int>((key >> 24) & 0xFFFFFF), static_cast<int>(key & 0xFFFFFF)};
}

double AggregateTable::at(int block, int k1, int k2) const {
  if (block < first_block_ || block > last_block_) return kMissing;
  auto it = values_.find(pack(block, k1, k2));
  return it == values_.end() ? absent_value_ : it->second;
}

bool AggregateTable::contains(int block, int k1, int k2) const {
  if (block < 0) return false;
  return values_.contains(pack(block, k1, k2));
}

void AggregateTable::set(int block, int k1, int k2, double v) { values_[pack(block, k1, k2)] = v; }
void AggregateTable::add(int block, int k1, int k2, double v) { values_[pack(block, k1, k2)] += v; }

// ---------------------------------------------------------------- aggregates

AggregateTable agg_revenue_by_shop(const PanelGrid& grid) {
  AggregateTable t("revenue_shop", {"shop_id"}, 0.0, grid.min_block(), grid.max_block());
  for (const auto& c : grid.cells()) t.add(c.date_block, c.shop_id, 0, c.revenue);
  return t;
}

AggregateTable agg_revenue_by_shop_category(const PanelGrid& grid, const CatalogTables& catalog) {
  AggregateTable t("revenue_shop_category", {"shop_id", "item_category_id"}, 0.0, grid.min_block(),
                   grid.max_block());
  for (const auto& c : grid.cells()) t.add(c.date_block, c.shop_id, catalog.category_of(c.item_id), c.revenue);
  return t;
}

CountTables agg_counts(const PanelGrid& grid, const CatalogTables& catalog) {
  const int lo = grid.min_block(), hi = grid.max_block();
  CountTables out{AggregateTable("target_shop", {"shop_id"}, 0.0, lo, hi),
                  AggregateTable("target_category", {"shop_id", "item_category_id"}, 0.0, lo, hi),
                  AggregateTable("target_item_total", {"item_id"}, 0.0, lo, hi),
                  AggregateTable("target_item_cum", {"item_id"}, 0.0, lo, hi)};
  std::map<int, std::map<int, double>> monthly_by_item;  // item -> block -> count
  for (const auto& c : grid.cells()) {
    out.by_shop.add(c.date_block, c.shop_id, 0, c.item_cnt_month);
    out.by_shop_category.add(c.date_block, c.shop_id, catalog.category_of(c.item_id), c.item_cnt_month);
    out.by_item.add(c.date_block, c.item_id, 0, c.item_cnt_month);
    monthly_by_item[c.item_id][c.date_block] += c.item_cnt_month;
  }
  // Dense from the item's first appearance so absent keys really mean "never sold yet".
  for (const auto& [item, months] : monthly_by_item) {
    double cum = 0.0;
    for (int b = months.begin()->first; b <= hi; ++b) {
      auto it = months.find(b);
      if (it != months.end()) cum += it->second;
      out.cumulative_by_item.set(b, item, 0, cum);
    }
  }
  return out;
}

AggregateTable flag_new_items(const AggregateTable& cumulative_by_item) {
  AggregateTable t("new_item", {"item_id"}, 0.0, cumulative_by_item.first_block(), cumulative_by_item.last_block());
  cumulative_by_item.for_each([&](int block, int item, int, double cum) {
    double prev = cumulative_by_item.at(block - 1, item);
    if (is_missing(prev)) prev = 0.0;
    const double monthly = cum - prev;
    t.set(block, item, 0, (prev == 0.0 && monthly > 1.0) ? 1.0 : 0.0);
  });
  return t;
}

PriceTables price_features(std::span<const SalesRecord> records, const PanelGrid& grid) {
  const int lo = grid.min_block(), hi = grid.max_block();
  struct Acc {
    double pq = 0, q = 0, p = 0, n = 0;
  };
  std::map<std::pair<int, int>, Acc> by_item;                 // (block, item)
  std::map<std::tuple<int, int, int>, Acc> by_item_shop;      // (block, item, shop)
  for (const auto& r : records) {
    const double q = std::max(0.0, r.item_cnt_day);
    auto& a = by_item[{r.date_block, r.item_id}];
    a.pq += r.item_price * q;
    a.q += q;
    a.p += r.item_price;
    a.n += 1;
    auto& s = by_item_shop[{r.date_block, r.item_id, r.shop_id}];
    s.p += r.item_price;
    s.n += 1;
  }
  PriceTables out{AggregateTable("price_weighted_mean", {"item_id"}, kMissing, lo, hi),
                  AggregateTable("target_price_mean", {"item_id"}, kMissing, lo, hi),
                  AggregateTable("price_shop_mean", {"item_id", "shop_id"}, kMissing, lo, hi)};
  for (const auto& [k, a] : by_item) {
    const double mean = a.p / a.n;
    out.weighted_mean_by_item.set(k.first, k.second, 0, a.q > 0 ? a.pq / a.q : mean);
    out.mean_by_item.set(k.first, k.second, 0, mean);
  }
  for (const auto& [k, a] : by_item_shop) {
    out.mean_by_item_shop.set(std::get<0>(k), std::get<1>(k), std::get<2>(k), a.p / a.n);
  }
  return out;
}

// -------------------------------------------------------------- MeanEncoding

MeanEncoding::Key MeanEncoding::parse_key(const std::string& s) {
  if (s == "shop_id") return Key::shop_id;
  if (s == "item_id") return Key::item_id;
  if (s == "item_category" || s == "item_category_id") return Key::item_category;
  if (s == "shop_id_category") return Key::shop_id_category;
  throw ValidationError("unknown mean-encoding key '" + s + "'");
}

std::string MeanEncoding::column_name() const {
  switch (key_) {
    case Key::shop_id: return "enc_shop_id";
    case Key::item_id: return "enc_item_id";
    case Key::item_category: return "enc_item_category";
    case Key::shop_id_category: return "enc_shop_id_category";
  }
  return {};
}

std::pair<int, int> MeanEncoding::level_of(const RowKey& row, int category) const {
  switch (key_) {
    case Key::shop_id: return {row.shop_id, 0};
    case Key::item_id: return {row.item_id, 0};
    case Key::item_category: return {category, 0};
    case Key::shop_id_category: return {row.shop_id, category};
  }
  return {0, 0};
}

MeanEncoding::MeanEncoding(const PanelGrid& grid, const CatalogTables& catalog, Key key, const SplitSpec& split)
    : key_(key), first_(split.train_first), last_(split.train_last) {
  split.validate();
  const auto n = static_cast<std::size_t>(last_ - first_ + 1);
  auto fresh = [n] { return Prefix{std::vector<double>(n + 1, 0.0), std::vector<double>(n + 1, 0.0)}; };
  global_ = fresh();
  std::size_t seen = 0;
  for (int b = first_; b <= last_; ++b) {
    const auto bi = static_cast<std::size_t>(b - first_) + 1;
    for (const auto& c : grid.block(b)) {
      auto [k1, k2] = level_of(RowKey{c.shop_id, c.item_id}, catalog.category_of(c.item_id));
      auto [it, inserted] = levels_.try_emplace(AggregateTable::pack(0, k1, k2));
      if (inserted) it->second = fresh();
      it->second.sum[bi] += c.item_cnt_month;
      it->second.count[bi] += 1;
      global_.sum[bi] += c.item_cnt_month;
      global_.count[bi] += 1;
      ++seen;
    }
  }
  if (seen == 0) throw ValidationError("mean encoding: empty training partition");
  auto accumulate = [](Prefix& p) {
    for (std::size_t i = 1; i < p.sum.size(); ++i) {
      p.sum[i] += p.sum[i - 1];
      p.count[i] += p.count[i - 1];
    }
  };
  for (auto& [k, p] : levels_) accumulate(p);
  accumulate(global_);
}

double MeanEncoding::mean_before(const Prefix& p, int block) const {
  const int cutoff = std::min(block, last_ + 1);
  const auto idx = static_cast<std::size_t>(std::clamp(cutoff - first_, 0, last_ - first_ + 1));
  return p.count[idx] > 0 ? p.sum[idx] / p.count[idx] : kMissing;
}

double MeanEncoding::value(int block, int k1, int k2) const {
  auto it = levels_.find(AggregateTable::pack(0, k1, k2));
  if (it != levels_.end()) {
    const double v = mean_before(it->second, block);
    if (!is_missing(v)) return v;
  }
  return mean_before(global_, block);
}

// ---------------------------------------------------------- lags and trends

std::vector<std::vector<double>> lag_join(const AggregateTable& table, const KeyedRows& rows,
                                          std::span<const int> offsets) {
  std::vector<std::vector<double>> cols(offsets.size(), std::vector<double>(rows.blocks.size()));
  for (std::size_t j = 0; j < offsets.size(); ++j) {
    for (std::size_t r = 0; r < rows.blocks.size(); ++r) {
      cols[j][r] = lag_value(table, rows.blocks[r], offsets[j], rows.keys[r].first, rows.keys[r].second);
    }
  }
  return cols;
}

std::vector<double> trend_column(std::span<const double> lag_j, std::span<const double> lag_k) {
  std::vector<double> out(lag_j.size());
  for (std::size_t r = 0; r < lag_j.size(); ++r) {
    out[r] = (is_missing(lag_j[r]) || is_missing(lag_k[r])) ? kMissing : lag_j[r] - lag_k[r];
  }
  return out;
}

// ------------------------------------------------------------------- one-hot

int onehot_field_value(const std::string& field, int block, const RowKey& key, int category) {
  if (field == "month") return block % 12;
  if (field == "year") return block / 12;
  if (field == "item_category_id") return category;
  if (field == "shop_id") return key.shop_id;
  throw ValidationError("unknown one-hot field '" + field + "'");
}

OneHotLevels onehot_levels(const PanelGrid& grid, const CatalogTables& catalog, std::span<const std::string> fields,
                           const SplitSpec& split) {
  OneHotLevels out;
  for (const auto& f : fields) {
    std::set<int> levels;
    for (int b = split.train_first; b <= split.train_last; ++b) {
      for (const auto& c : grid.block(b)) {
        levels.insert(onehot_field_value(f, b, RowKey{c.shop_id, c.item_id}, catalog.category_of(c.item_id)));
      }
    }
    out.fields.emplace_back(f, std::vector<int>(levels.begin(), levels.end()));
  }
  return out;
}

// ----------------------------------------------------------- FeatureBuilder

FeatureBuilder::FeatureBuilder(const PanelGrid& grid, const CatalogTables& catalog,
                               std::span<const SalesRecord> records, FeatureSpec spec, SplitSpec split)
    : grid_(grid), catalog_(catalog), spec_(std::move(spec)), split_(split) {
  spec_.validate();
  split_.validate();
  if (grid_.empty()) throw ValidationError("feature assembly: empty grid");

  target_ = AggregateTable("target_item", {"shop_id", "item_id"}, 0.0, grid.min_block(), grid.max_block());
  for (const auto& c : grid.cells()) target_.set(c.date_block, c.shop_id, c.item_id, c.item_cnt_month);
  revenue_shop_ = agg_revenue_by_shop(grid);
  revenue_shop_category_ = agg_revenue_by_shop_category(grid, catalog);
  counts_ = agg_counts(grid, catalog);
  new_items_ = flag_new_items(counts_.cumulative_by_item);
  prices_ = price_features(records, grid);

  using K = LagBase::Key;
  bases_ = {
      {"target_item", &target_, K::shop_item, true},
      {"target_shop", &counts_.by_shop, K::shop, true},
      {"target_category", &counts_.by_shop_category, K::shop_category, true},
      {"target_item_total", &counts_.by_item, K::item, true},
      {"target_item_cum", &counts_.cumulative_by_item, K::item, true},
      {"new_item", &new_items_, K::item, false},
      {"revenue_shop", &revenue_shop_, K::shop, true},
      {"revenue_shop_category", &revenue_shop_category_, K::shop_category, true},
      {"price_weighted_mean", &prices_.weighted_mean_by_item, K::item, true},
      {"target_price_mean", &prices_.mean_by_item, K::item, true},
      {"price_shop_mean", &prices_.mean_by_item_shop, K::item_shop, true},
  };

  for (const auto& e : spec_.encodings) {
    encodings_.emplace_back(grid, catalog, MeanEncoding::parse_key(e), split_);
  }
  onehot_ = onehot_levels(grid, catalog, spec_.onehot_fields, split_);

  for (const auto& c : grid.cells()) {
    if (c.date_block < spec_.burn_in_blocks) continue;
    rows_.push_back(&c);
    row_category_.push_back(catalog.category_of(c.item_id));
  }
}

std::pair<int, int> FeatureBuilder::key_of(const LagBase& base, const PanelCell& c) const {
  using K = LagBase::Key;
  switch (base.key) {
    case K::shop_item: return {c.shop_id, c.item_id};
    case K::shop: return {c.shop_id, 0};
    case K::shop_category: return {c.shop_id, catalog_.category_of(c.item_id)};
    case K::item: return {c.item_id, 0};
    case K::item_shop: return {c.item_id, c.shop_id};
  }
  return {0, 0};
}

FeatureMatrix FeatureBuilder::assemble() const {
  const std::size_t n = rows_.size();
  std::vector<int> blocks(n);
  std::vector<RowKey> keys(n);
  std::vector<double> target(n);
  for (std::size_t r = 0; r < n; ++r) {
    blocks[r] = rows_[r]->date_block;
    keys[r] = RowKey{rows_[r]->shop_id, rows_[r]->item_id};
    target[r] = rows_[r]->item_cnt_month;
  }

  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  auto push = [&](std::string name, std::vector<double> col) {
    names.push_back(std::move(name));
    cols.push_back(std::move(col));
  };

  {
    std::vector<double> db(n), month(n), year(n), shop(n), item(n), cat(n);
    for (std::size_t r = 0; r < n; ++r) {
      db[r] = blocks[r];
      month[r] = blocks[r] % 12;
      year[r] = blocks[r] / 12;
      shop[r] = keys[r].shop_id;
      item[r] = keys[r].item_id;
      cat[r] = row_category_[r];
    }
    push("date_block_num", std::move(db));
    push("month", std::move(month));
    push("year", std::move(year));
    push("shop_id", std::move(shop));
    push("item_id", std::move(item));
    push("item_category", std::move(cat));
  }

  // Lag and trend columns, one independent job per base.
  std::vector<std::vector<std::pair<std::string, std::vector<double>>>> per_base(bases_.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t bi = 0; bi < bases_.size(); ++bi) {
    const auto& base = bases_[bi];
    KeyedRows kr{blocks, {}};
    kr.keys.reserve(n);
    for (const auto* c : rows_) kr.keys.push_back(key_of(base, *c));
    auto lags = lag_join(*base.table, kr, spec_.lag_offsets);
    auto& out = per_base[bi];
    for (std::size_t j = 0; j < spec_.lag_offsets.size(); ++j) {
      out.emplace_back(base.name + "_lag_" + std::to_string(spec_.lag_offsets[j]), lags[j]);
    }
    if (!base.trends) continue;
    auto lag_col = [&](int k) -> const std::vector<double>& {
      auto it = std::find(spec_.lag_offsets.begin(), spec_.lag_offsets.end(), k);
      return lags[static_cast<std::size_t>(it - spec_.lag_offsets.begin())];
    };
    for (auto [j, k] : spec_.trend_pairs) {
      out.emplace_back(base.name + "_trend_" + std::to_string(j) + "_" + std::to_string(k),
                       trend_column(lag_col(j), lag_col(k)));
    }
  }
  for (auto& cols_of_base : per_base) {
    for (auto& [name, col] : cols_of_base) push(std::move(name), std::move(col));
  }

  for (const auto& enc : encodings_) {
    std::vector<double> col(n);
    for (std::size_t r = 0; r < n; ++r) {
      auto [k1, k2] = enc.level_of(keys[r], row_category_[r]);
      col[r] = enc.value(blocks[r], k1, k2);
    }
    push(enc.column_name(), std::move(col));
  }

  for (const auto& [field, levels] : onehot_.fields) {
    std::vector<int> value(n);
    for (std::size_t r = 0; r < n; ++r) value[r] = onehot_field_value(field, blocks[r], keys[r], row_category_[r]);
    for (int level : levels) {
      std::vector<double> col(n);
      for (std::size_t r = 0; r < n; ++r) col[r] = value[r] == level ? 1.0 : 0.0;
      push(field + "_" + std::to_string(level), std::move(col));
    }
  }

  return FeatureMatrix(std::move(names), std::move(cols), std::move(target), std::move(blocks), std::move(keys));
}

SequenceSet FeatureBuilder::sequences(int window) const {
  if (window < 1) throw ValidationError("sequence window must be >= 1");
  static const std::vector<std::string> dynamic_bases{"target_item",       "target_shop",  "target_category",
                                                      "target_item_total", "revenue_shop", "target_price_mean"};
  std::vector<const LagBase*> dyn;
  for (const auto& name : dynamic_bases) {
    auto it = std::find_if(bases_.begin(), bases_.end(), [&](const LagBase& b) { return b.name == name; });
    dyn.push_back(&*it);
  }

  SequenceSet s;
  s.window = static_cast<std::size_t>(window);
  s.dynamic_names = dynamic_bases;
  for (const auto& enc : encodings_) s.static_names.push_back(enc.column_name());
  for (const auto& [field, levels] : onehot_.fields) {
    for (int level : levels) s.static_names.push_back(field + "_" + std::to_string(level));
  }

  const std::size_t n = rows_.size(), d = dyn.size(), ns = s.static_names.size();
  s.dynamic.assign(n * s.window * d, 0.0);
  s.statics.assign(n * ns, 0.0);
  s.target.resize(n);
  s.date_block.resize(n);
  s.row_keys.resize(n);

#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < n; ++r) {
    const PanelCell& c = *rows_[r];
    const RowKey key{c.shop_id, c.item_id};
    s.target[r] = c.item_cnt_month;
    s.date_block[r] = c.date_block;
    s.row_keys[r] = key;
    double* dst = s.dynamic.data() + r * s.window * d;
    for (std::size_t t = 0; t < s.window; ++t) {
      const int offset = window - static_cast<int>(t);  // oldest first
      for (std::size_t f = 0; f < d; ++f) {
        auto [k1, k2] = key_of(*dyn[f], c);
        const double v = lag_value(*dyn[f]->table, c.date_block, offset, k1, k2);
        dst[t * d + f] = is_missing(v) ? 0.0 : v;
      }
    }
    double* st = s.statics.data() + r * ns;
    std::size_t j = 0;
    for (const auto& enc : encodings_) {
      auto [k1, k2] = enc.level_of(key, row_category_[r]);
      const double v = enc.value(c.date_block, k1, k2);
      st[j++] = is_missing(v) ? 0.0 : v;
    }
    for (const auto& [field, levels] : onehot_.fields) {
      const int value = onehot_field_value(field, c.date_block, key, row_category_[r]);
      for (int level : levels) st[j++] = value == level ? 1.0 : 0.0;
    }
  }
  return s;
}

FeatureMatrix assemble(const PanelGrid& grid, const CatalogTables& catalog, std::span<const SalesRecord> records,
                       const FeatureSpec& spec, const SplitSpec& split) {
  return FeatureBuilder(grid, catalog, records, spec, split).assemble();
}

// --------------------------------------------------------------------- cache

std::string matrix_to_csv(const FeatureMatrix& m) {
  const auto& names = m.feature_names();
  const bool shop_is_feature = m.index_of("shop_id").has_value();
  const bool item_is_feature = m.index_of("item_id").has_value();
  std::string out;
  for (const auto& n : names) {
    out += n;
    out += ',';
  }
  out += "target,date_block";
  if (!shop_is_feature) out += ",shop_id";
  if (!item_is_feature) out += ",item_id";
  out += '\n';
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      append_double(out, m.value(r, j));
      out += ',';
    }
    append_double(out, m.target()[r]);
    out += ',';
    out += std::to_string(m.date_block()[r]);
    if (!shop_is_feature) out += "," + std::to_string(m.row_keys()[r].shop_id);
    if (!item_is_feature) out += "," + std::to_string(m.row_keys()[r].item_id);
    out += '\n';
  }
  return out;
}

FeatureMatrix matrix_from_csv(std::string_view content, std::string_view source) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  std::vector<double> target;
  std::vector<int> blocks;
  std::vector<RowKey> keys;
  std::optional<CsvHeader> header;
  std::size_t c_target = 0, c_block = 0, c_shop = 0, c_item = 0, width = 0;

  for_each_csv_record(content, [&](std::span<const std::string> f, std::size_t line) {
    if (!header) {
      header.emplace(f, std::string(source));
      c_target = header->require("target");
      c_block = header->require("date_block");
      c_shop = header->require("shop_id");
      c_item = header->require("item_id");
      names.assign(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(c_target));
      cols.resize(names.size());
      width = f.size();
      return;
    }
    auto bad = [&] { return SchemaError(std::string(source) + ":" + std::to_string(line) + ": malformed row"); };
    if (f.size() != width) throw bad();
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (f[j].empty()) {
        cols[j].push_back(kMissing);
      } else if (auto v = parse_double(f[j])) {
        cols[j].push_back(*v);
      } else {
        throw bad();
      }
    }
    auto t = parse_double(f[c_target]);
    auto b = parse_int(f[c_block]);
    auto s = parse_int(f[c_shop]);
    auto i = parse_int(f[c_item]);
    if (!t || !b || !s || !i) throw bad();
    target.push_back(*t);
    blocks.push_back(static_cast<int>(*b));
    keys.push_back(RowKey{static_cast<int>(*s), static_cast<int>(*i)});
  });
  if (!header) throw SchemaError(std::string(source) + ": empty file, header expected");
  return FeatureMatrix(std::move(names), std::move(cols), std::move(target), std::move(blocks), std::move(keys));
}

}  // namespace pfcast
