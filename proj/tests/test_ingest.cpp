#include <filesystem>
#include <map>
#include <random>

#include "doctest.h"
#include "pfcast/csv.hpp"
#include "pfcast/error.hpp"
#include "pfcast/ingest.hpp"

using namespace pfcast;

namespace {

const char* kHeader = "date,date_block_num,shop_id,item_id,item_price,item_cnt_day\n";

CatalogTables catalog_for(std::initializer_list<std::pair<int, int>> items) {
  CatalogTables c;
  for (auto [item, cat] : items) {
    c.item_category[item] = cat;
    c.categories.insert(cat);
  }
  return c;
}

SalesRecord rec(int block, int shop, int item, double price, double cnt) {
  return SalesRecord{Date{2013, block % 12 + 1, 1}, block, shop, item, price, cnt};
}

}  // namespace

TEST_CASE("negative price takes the sibling median") {
  const std::string csv = std::string(kHeader) +
                          "02.01.2013,0,5,7,10,1\n"
                          "03.01.2013,0,5,7,20,1\n"
                          "04.01.2013,0,5,7,30,1\n"
                          "05.01.2013,0,5,7,-1,1\n";
  const auto data = parse_sales(csv);
  REQUIRE(data.records.size() == 4);
  CHECK(data.records[3].item_price == 20.0);
  CHECK(data.report.values_imputed == 1);
  CHECK(data.report.rows_dropped == 0);
}

TEST_CASE("negative price without siblings drops the row") {
  const std::string csv = std::string(kHeader) + "05.01.2013,0,5,7,-1,1\n06.01.2013,0,5,8,3,1\n";
  const auto data = parse_sales(csv);
  CHECK(data.records.size() == 1);
  CHECK(data.report.rows_dropped == 1);
  CHECK(data.report.rows_read == data.report.rows_kept + data.report.rows_dropped);
}

TEST_CASE("well-formed row passes through") {
  const auto data = parse_sales(std::string(kHeader) + "02.01.2013,0,59,22154,999.5,-1\n");
  REQUIRE(data.records.size() == 1);
  const auto& r = data.records[0];
  CHECK(r.date == Date{2013, 1, 2});
  CHECK(r.date_block == 0);
  CHECK(r.shop_id == 59);
  CHECK(r.item_id == 22154);
  CHECK(r.item_price == 999.5);
  CHECK(r.item_cnt_day == -1.0);
  CHECK(data.report.rows_dropped == 0);
}

TEST_CASE("malformed rows are dropped and counted") {
  const std::string csv = std::string(kHeader) +
                          "02.01.2013,0,1,2,5,1\n"
                          "xx.01.2013,0,1,2,5,1\n"
                          "02.01.2013,0,1,2,abc,1\n"
                          "02.01.2013,0,1\n";
  const auto data = parse_sales(csv);
  CHECK(data.records.size() == 1);
  CHECK(data.report.rows_read == 4);
  CHECK(data.report.rows_dropped == 3);
}

TEST_CASE("missing header column names the column") {
  const std::string csv = "date,date_block_num,shop_id,item_id,item_price\n02.01.2013,0,1,2,5\n";
  CHECK_THROWS_WITH_AS(parse_sales(csv), doctest::Contains("item_cnt_day"), SchemaError);
}

TEST_CASE("unreadable file is an I/O error") {
  CHECK_THROWS_AS(load_sales("/nonexistent/sales_train.csv"), IoError);
}

TEST_CASE("catalog parsing") {
  const auto c = parse_catalog("item_name,item_id,item_category_id\n\"Box, large\",32,40\n",
                               "item_category_name,item_category_id\nGames,40\n", "shop_name,shop_id\nA,1\n");
  CHECK(c.item_category.at(32) == 40);
  CHECK(c.shops.contains(1));

  CHECK_THROWS_WITH_AS(parse_catalog("item_name,item_id,item_category_id\nx,32,99\n",
                                     "item_category_name,item_category_id\nGames,40\n", "shop_name,shop_id\n"),
                       doctest::Contains("32"), DataError);

  const auto empty = parse_catalog("item_name,item_id,item_category_id\n",
                                   "item_category_name,item_category_id\nGames,40\n", "shop_name,shop_id\n");
  CHECK(empty.item_category.empty());
}

TEST_CASE("test id parsing") {
  const auto rows = parse_test_ids("ID,shop_id,item_id\n0,5,5037\n1,5,5320\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].id == 1);
  CHECK(rows[1].item_id == 5320);
}

TEST_CASE("build_grid sums, clips and zero-fills") {
  const auto cat = catalog_for({{1, 0}, {2, 0}, {3, 0}});
  SUBCASE("sum") {
    const std::vector<SalesRecord> r{rec(0, 1, 1, 2.0, 3), rec(0, 1, 1, 2.0, 4)};
    const auto g = build_grid(r, cat, {});
    CHECK(g.find(0, 1, 1)->item_cnt_month == 7);
    CHECK(g.find(0, 1, 1)->revenue == 14.0);
  }
  SUBCASE("clip") {
    const std::vector<SalesRecord> r{rec(0, 1, 1, 1.0, 15), rec(0, 1, 1, 1.0, 10)};
    CleaningReport report;
    const auto g = build_grid(r, cat, {0, 20}, &report);
    CHECK(g.find(0, 1, 1)->item_cnt_month == 20);
    CHECK(report.clip_events == 1);
  }
  SUBCASE("zero fill within the block universe") {
    // shop 1 sells item 2, shop 2 sells item 3: universe is {1,2} x {2,3}
    const std::vector<SalesRecord> r{rec(5, 1, 2, 1.0, 1), rec(5, 2, 3, 1.0, 2)};
    const auto g = build_grid(r, cat, {});
    CHECK(g.size() == 4);
    REQUIRE(g.find(5, 1, 3) != nullptr);
    CHECK(g.find(5, 1, 3)->item_cnt_month == 0);
    CHECK(g.find(5, 1, 1) == nullptr);
  }
  SUBCASE("returns floor at zero") {
    const std::vector<SalesRecord> r{rec(0, 1, 1, 1.0, -2)};
    CHECK(build_grid(r, cat, {}).find(0, 1, 1)->item_cnt_month == 0);
  }
  SUBCASE("unknown item") {
    const std::vector<SalesRecord> r{rec(0, 1, 99, 1.0, 1)};
    CHECK_THROWS_AS(build_grid(r, cat, {}), ValidationError);
  }
}

TEST_CASE("grid conserves daily counts before clipping") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> shop(0, 4), item(0, 9), block(0, 5), cnt(-1, 4);
  CatalogTables cat;
  for (int i = 0; i < 10; ++i) cat.item_category[i] = i % 3;
  std::vector<SalesRecord> records;
  for (int i = 0; i < 2000; ++i) records.push_back(rec(block(rng), shop(rng), item(rng), 1.0, cnt(rng)));
  const auto g = build_grid(records, cat, {-1e9, 1e9});
  std::map<int, double> from_records, from_grid;
  for (const auto& r : records) from_records[r.date_block] += r.item_cnt_day;
  for (const auto& c : g.cells()) from_grid[c.date_block] += c.item_cnt_month;
  CHECK(from_records == from_grid);
  for (const auto& c : g.cells()) {
    // universe: shop and item each seen in this block
    bool shop_seen = false, item_seen = false;
    for (const auto& r : records) {
      if (r.date_block != c.date_block) continue;
      shop_seen = shop_seen || r.shop_id == c.shop_id;
      item_seen = item_seen || r.item_id == c.item_id;
    }
    CHECK((shop_seen && item_seen));
  }
}

TEST_CASE("grid cache round-trips and is deterministic") {
  const auto cat = catalog_for({{1, 0}, {2, 1}});
  const std::vector<SalesRecord> r{rec(0, 1, 1, 0.1, 3), rec(1, 2, 2, 1.0 / 3.0, 4), rec(1, 1, 2, 7.25, 1)};
  const auto g = build_grid(r, cat, {});
  const auto csv = grid_to_csv(g);
  CHECK(csv.rfind("date_block,shop_id,item_id,item_cnt_month,revenue\n", 0) == 0);
  CHECK(grid_to_csv(build_grid(r, cat, {})) == csv);
  const auto back = grid_from_csv(csv);
  CHECK(grid_to_csv(back) == csv);
  CHECK(back.find(1, 2, 2)->revenue == g.find(1, 2, 2)->revenue);
}

TEST_CASE("with_block_pairs adds zero cells and keeps existing ones") {
  const auto cat = catalog_for({{1, 0}, {2, 0}});
  const auto g = build_grid(std::vector<SalesRecord>{rec(3, 1, 1, 1.0, 4)}, cat, {});
  const std::vector<RowKey> pairs{{1, 1}, {7, 2}};
  const auto e = with_block_pairs(g, 3, pairs);
  CHECK(e.find(3, 1, 1)->item_cnt_month == 4);
  CHECK(e.find(3, 7, 2)->item_cnt_month == 0);
}

TEST_CASE("csv quoting and number helpers") {
  std::vector<std::vector<std::string>> rows;
  for_each_csv_record("\xEF\xBB\xBF" "a,b\r\n\"x, \"\"y\"\"\",2\n\n",
                      [&](std::span<const std::string> f, std::size_t) { rows.emplace_back(f.begin(), f.end()); });
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][0] == "a");
  CHECK(rows[1][0] == "x, \"y\"");
  CHECK(parse_int("5.0") == 5);
  CHECK_FALSE(parse_int("5.5").has_value());
  CHECK(format_double(kMissing).empty());
  CHECK(*parse_double(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("monthly revenue report") {
  const auto cat = catalog_for({{1, 0}});
  const auto g = build_grid(std::vector<SalesRecord>{rec(0, 1, 1, 2.0, 3), rec(1, 1, 1, 1.0, 1)}, cat, {});
  const auto m = revenue_by_month(g);
  REQUIRE(m.size() == 2);
  CHECK(m[0].revenue == 6.0);
  CHECK(m[1].item_cnt == 1.0);
}
