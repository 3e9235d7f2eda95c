#include "pfcast/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "pfcast/csv.hpp"
#include "pfcast/error.hpp"

namespace pfcast {

namespace {

std::optional<Date> parse_date(std::string_view s) {
  // dd.mm.yyyy
  auto p1 = s.find('.');
  auto p2 = s.rfind('.');
  if (p1 == std::string_view::npos || p2 == p1) return std::nullopt;
  auto d = parse_int(s.substr(0, p1));
  auto m = parse_int(s.substr(p1 + 1, p2 - p1 - 1));
  auto y = parse_int(s.substr(p2 + 1));
  if (!d || !m || !y || *d < 1 || *d > 31 || *m < 1 || *m > 12) return std::nullopt;
  return Date{static_cast<int>(*y), static_cast<int>(*m), static_cast<int>(*d)};
}

std::optional<int> parse_id(std::string_view s) {
  auto v = parse_int(s);
  if (!v || *v < 0 || *v > std::numeric_limits<int>::max()) return std::nullopt;
  return static_cast<int>(*v);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SalesData parse_sales(std::string_view content, std::string_view source) {
  SalesData out;
  std::optional<CsvHeader> header;
  std::size_t c_date = 0, c_block = 0, c_shop = 0, c_item = 0, c_price = 0, c_cnt = 0, width = 0;
  std::vector<std::size_t> negative_price_rows;

  for_each_csv_record(content, [&](std::span<const std::string> f, std::size_t) {
    if (!header) {
      header.emplace(f, std::string(source));
      c_date = header->require("date");
      c_block = header->require("date_block_num");
      c_shop = header->require("shop_id");
      c_item = header->require("item_id");
      c_price = header->require("item_price");
      c_cnt = header->require("item_cnt_day");
      width = f.size();
      return;
    }
    ++out.report.rows_read;
    if (f.size() != width) {
      ++out.report.rows_dropped;
      return;
    }
    auto date = parse_date(f[c_date]);
    auto block = parse_id(f[c_block]);
    auto shop = parse_id(f[c_shop]);
    auto item = parse_id(f[c_item]);
    auto price = parse_double(f[c_price]);
    auto cnt = parse_double(f[c_cnt]);
    if (!date || !block || !shop || !item || !price || !cnt || !std::isfinite(*price) || !std::isfinite(*cnt)) {
      ++out.report.rows_dropped;
      return;
    }
    if (*price < 0) negative_price_rows.push_back(out.records.size());
    out.records.push_back(SalesRecord{*date, *block, *shop, *item, *price, *cnt});
  });
  if (!header) throw SchemaError(std::string(source) + ": empty file, header expected");

  if (!negative_price_rows.empty()) {
    std::map<std::pair<int, int>, std::vector<double>> siblings;
    for (const auto& r : out.records) {
      if (r.item_price >= 0) siblings[{r.shop_id, r.item_id}].push_back(r.item_price);
    }
    std::vector<bool> drop(out.records.size(), false);
    for (auto i : negative_price_rows) {
      auto& r = out.records[i];
      auto it = siblings.find({r.shop_id, r.item_id});
      if (it == siblings.end()) {
        drop[i] = true;
        ++out.report.rows_dropped;
      } else {
        r.item_price = median(it->second);
        ++out.report.values_imputed;
      }
    }
    std::size_t w = 0;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
      if (!drop[i]) out.records[w++] = out.records[i];
    }
    out.records.resize(w);
  }
  out.report.rows_kept = out.records.size();
  return out;
}

SalesData load_sales(const std::filesystem::path& path) { return parse_sales(read_file(path), path.string()); }

CatalogTables parse_catalog(std::string_view items_csv, std::string_view categories_csv, std::string_view shops_csv) {
  CatalogTables cat;

  auto read_ids = [](std::string_view content, std::string_view source, std::string_view column, auto&& sink) {
    std::optional<CsvHeader> header;
    std::size_t col = 0;
    for_each_csv_record(content, [&](std::span<const std::string> f, std::size_t line) {
      if (!header) {
        header.emplace(f, std::string(source));
        col = header->require(column);
        return;
      }
      auto id = col < f.size() ? parse_id(f[col]) : std::nullopt;
      if (!id) throw SchemaError(std::string(source) + ":" + std::to_string(line) + ": bad " + std::string(column));
      sink(*id, f, *header, line);
    });
  };

  read_ids(categories_csv, "item_categories.csv", "item_category_id",
           [&](int id, auto&&, auto&&, std::size_t) { cat.categories.insert(id); });
  read_ids(shops_csv, "shops.csv", "shop_id", [&](int id, auto&&, auto&&, std::size_t) { cat.shops.insert(id); });

  std::vector<int> dangling;
  read_ids(items_csv, "items.csv", "item_id",
           [&](int item, std::span<const std::string> f, const CsvHeader& h, std::size_t line) {
             const auto c = h.require("item_category_id");
             auto category = c < f.size() ? parse_id(f[c]) : std::nullopt;
             if (!category) throw SchemaError("items.csv:" + std::to_string(line) + ": bad item_category_id");
             if (!cat.categories.contains(*category)) dangling.push_back(item);
             cat.item_category[item] = *category;
           });
  if (!dangling.empty()) {
    std::string ids;
    for (auto id : dangling) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    throw DataError("items.csv: items reference undefined categories: " + ids);
  }
  return cat;
}

CatalogTables load_catalog(const std::filesystem::path& items, const std::filesystem::path& categories,
                           const std::filesystem::path& shops) {
  return parse_catalog(read_file(items), read_file(categories), read_file(shops));
}

std::vector<TestRow> parse_test_ids(std::string_view content, std::string_view source) {
  std::vector<TestRow> rows;
  std::optional<CsvHeader> header;
  std::size_t c_id = 0, c_shop = 0, c_item = 0;
  for_each_csv_record(content, [&](std::span<const std::string> f, std::size_t line) {
    if (!header) {
      header.emplace(f, std::string(source));
      c_id = header->require("ID");
      c_shop = header->require("shop_id");
      c_item = header->require("item_id");
      return;
    }
    const auto need = std::max({c_id, c_shop, c_item});
    auto id = need < f.size() ? parse_int(f[c_id]) : std::nullopt;
    auto shop = need < f.size() ? parse_id(f[c_shop]) : std::nullopt;
    auto item = need < f.size() ? parse_id(f[c_item]) : std::nullopt;
    if (!id || !shop || !item) throw SchemaError(std::string(source) + ":" + std::to_string(line) + ": malformed row");
    rows.push_back(TestRow{*id, *shop, *item});
  });
  if (!header) throw SchemaError(std::string(source) + ": empty file, header expected");
  return rows;
}

std::vector<TestRow> load_test_ids(const std::filesystem::path& path) {
  return parse_test_ids(read_file(path), path.string());
}

PanelGrid build_grid(std::span<const SalesRecord> records, const CatalogTables& catalog, ClipRange clip,
                     CleaningReport* report) {
  std::vector<int> unknown_items;
  for (const auto& r : records) {
    if (!catalog.item_category.contains(r.item_id)) unknown_items.push_back(r.item_id);
  }
  if (!unknown_items.empty()) {
    std::sort(unknown_items.begin(), unknown_items.end());
    unknown_items.erase(std::unique(unknown_items.begin(), unknown_items.end()), unknown_items.end());
    std::string ids;
    for (auto id : unknown_items) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    throw ValidationError("sales reference items missing from the catalog: " + ids);
  }
  if (records.empty()) return PanelGrid{};

  // Sort a copy by key so each block is a contiguous run.
  std::vector<SalesRecord> sorted(records.begin(), records.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const SalesRecord& a, const SalesRecord& b) {
    return std::tie(a.date_block, a.shop_id, a.item_id) < std::tie(b.date_block, b.shop_id, b.item_id);
  });
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // per block [begin, end)
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].date_block == sorted[i].date_block) ++j;
    runs.emplace_back(i, j);
    i = j;
  }

  std::vector<std::vector<PanelCell>> per_block(runs.size());
  std::vector<std::size_t> clipped(runs.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto [begin, end] = runs[r];
    std::vector<int> shops, items;
    std::map<std::pair<int, int>, std::pair<double, double>> sums;  // (count, revenue)
    for (std::size_t i = begin; i < end; ++i) {
      const auto& rec = sorted[i];
      shops.push_back(rec.shop_id);
      items.push_back(rec.item_id);
      auto& s = sums[{rec.shop_id, rec.item_id}];
      s.first += rec.item_cnt_day;
      s.second += rec.item_price * rec.item_cnt_day;
    }
    std::sort(shops.begin(), shops.end());
    shops.erase(std::unique(shops.begin(), shops.end()), shops.end());
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    const int block = sorted[begin].date_block;
    auto& cells = per_block[r];
    cells.reserve(shops.size() * items.size());
    auto it = sums.begin();
    for (int shop : shops) {
      for (int item : items) {
        PanelCell c{block, shop, item, 0.0, 0.0};
        if (it != sums.end() && it->first == std::pair{shop, item}) {
          const double raw = it->second.first;
          c.item_cnt_month = clip_target(raw, clip.lo, clip.hi);
          if (c.item_cnt_month != raw) ++clipped[r];
          c.revenue = it->second.second;
          ++it;
        }
        cells.push_back(c);
      }
    }
  }

  std::vector<PanelCell> cells;
  for (auto& b : per_block) cells.insert(cells.end(), b.begin(), b.end());
  if (report) {
    for (auto c : clipped) report->clip_events += c;
  }
  return PanelGrid(std::move(cells));
}

PanelGrid with_block_pairs(const PanelGrid& grid, int block, std::span<const RowKey> pairs) {
  std::vector<PanelCell> cells(grid.cells().begin(), grid.cells().end());
  std::set<RowKey> added;
  for (const auto& k : pairs) {
    if (grid.find(block, k.shop_id, k.item_id) || !added.insert(k).second) continue;
    cells.push_back(PanelCell{block, k.shop_id, k.item_id, 0.0, 0.0});
  }
  return PanelGrid(std::move(cells));
}

std::string grid_to_csv(const PanelGrid& grid) {
  std::string out = "date_block,shop_id,item_id,item_cnt_month,revenue\n";
  out.reserve(out.size() + grid.size() * 32);
  for (const auto& c : grid.cells()) {
    out += std::to_string(c.date_block);
    out += ',';
    out += std::to_string(c.shop_id);
    out += ',';
    out += std::to_string(c.item_id);
    out += ',';
    append_double(out, c.item_cnt_month);
    out += ',';
    append_double(out, c.revenue);
    out += '\n';
  }
  return out;
}

PanelGrid grid_from_csv(std::string_view content, std::string_view source) {
  std::vector<PanelCell> cells;
  std::optional<CsvHeader> header;
  std::size_t cb = 0, cs = 0, ci = 0, cc = 0, cr = 0;
  for_each_csv_record(content, [&](std::span<const std::string> f, std::size_t line) {
    if (!header) {
      header.emplace(f, std::string(source));
      cb = header->require("date_block");
      cs = header->require("shop_id");
      ci = header->require("item_id");
      cc = header->require("item_cnt_month");
      cr = header->require("revenue");
      return;
    }
    const auto need = std::max({cb, cs, ci, cc, cr});
    auto b = need < f.size() ? parse_id(f[cb]) : std::nullopt;
    auto s = need < f.size() ? parse_id(f[cs]) : std::nullopt;
    auto i = need < f.size() ? parse_id(f[ci]) : std::nullopt;
    auto c = need < f.size() ? parse_double(f[cc]) : std::nullopt;
    auto r = need < f.size() ? parse_double(f[cr]) : std::nullopt;
    if (!b || !s || !i || !c || !r) throw SchemaError(std::string(source) + ":" + std::to_string(line) + ": malformed row");
    cells.push_back(PanelCell{*b, *s, *i, *c, *r});
  });
  if (!header) throw SchemaError(std::string(source) + ": empty file, header expected");
  return PanelGrid(std::move(cells));
}

std::vector<MonthlyRevenue> revenue_by_month(const PanelGrid& grid) {
  std::vector<MonthlyRevenue> out;
  for (int b = grid.min_block(); b <= grid.max_block(); ++b) {
    MonthlyRevenue m{b, 0.0, 0.0};
    for (const auto& c : grid.block(b)) {
      m.revenue += c.revenue;
      m.item_cnt += c.item_cnt_month;
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace pfcast
