#include "pfcast/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "pfcast/csv.hpp"
#include "pfcast/error.hpp"

namespace pfcast {

namespace {

constexpr int kWarmupMonths = 12;

std::string format_date(int day, int block) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%02d.%02d.%04d", day, block % 12 + 1, 2013 + block / 12);
  return buf;
}

}  // namespace

SyntheticData generate(const SyntheticSpec& spec) {
  if (spec.n_months < 1 || spec.n_shops < 1 || spec.n_items < 1 || spec.n_categories < 1) {
    throw ValidationError("synthetic: sizes must be >= 1");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.noise_sd);

  SyntheticData out;
  for (int c = 0; c < spec.n_categories; ++c) out.catalog.categories.insert(c);
  for (int s = 0; s < spec.n_shops; ++s) out.catalog.shops.insert(s);
  for (int i = 0; i < spec.n_items; ++i) out.catalog.item_category[i] = i % spec.n_categories;

  out.shop_effect.resize(static_cast<std::size_t>(spec.n_shops));
  for (auto& e : out.shop_effect) e = spec.shop_effect_max * unit(rng);
  std::vector<double> base_price(static_cast<std::size_t>(spec.n_items));
  for (auto& p : base_price) p = std::round(100.0 * (50.0 + 1950.0 * unit(rng))) / 100.0;

  const std::size_t n_pairs = static_cast<std::size_t>(spec.n_shops) * static_cast<std::size_t>(spec.n_items);
  std::vector<double> y(n_pairs, 0.0);
  auto step = [&](int block) {
    const double season = spec.season_amplitude * std::sin(2.0 * std::numbers::pi * ((block % 12 + 12) % 12) / 12.0);
    for (std::size_t k = 0; k < n_pairs; ++k) {
      const double shop = out.shop_effect[k / static_cast<std::size_t>(spec.n_items)];
      const double v = spec.ar_coef * y[k] + spec.base_level + shop + season + noise(rng);
      y[k] = std::clamp(std::round(v), 0.0, 20.0);
    }
  };
  for (int b = -kWarmupMonths; b < 0; ++b) step(b);

  std::uniform_int_distribution<int> day_of(1, 28);
  std::normal_distribution<double> price_noise(0.0, 0.05);
  for (int b = 0; b < spec.n_months; ++b) {
    step(b);
    out.monthly.push_back(y);
    for (int s = 0; s < spec.n_shops; ++s) {
      for (int i = 0; i < spec.n_items; ++i) {
        const auto total = static_cast<int>(y[static_cast<std::size_t>(s) * static_cast<std::size_t>(spec.n_items) +
                                              static_cast<std::size_t>(i)]);
        if (total == 0) continue;
        const int n_tx = std::min(total, std::uniform_int_distribution<int>(1, 4)(rng));
        std::vector<int> counts(static_cast<std::size_t>(n_tx), 1);
        for (int u = n_tx; u < total; ++u) {
          counts[std::uniform_int_distribution<std::size_t>(0, counts.size() - 1)(rng)] += 1;
        }
        for (int c : counts) {
          double price = std::round(100.0 * base_price[static_cast<std::size_t>(i)] * (1.0 + price_noise(rng))) / 100.0;
          if (unit(rng) < spec.bad_price_rate) price = -1.0;
          const int day = day_of(rng);
          out.records.push_back(SalesRecord{Date{2013 + b / 12, b % 12 + 1, day}, b, s, i, price,
                                            static_cast<double>(c)});
        }
      }
    }
  }

  long long id = 0;
  for (int s = 0; s < spec.n_shops; ++s) {
    for (int i = 0; i < spec.n_items; ++i) out.test_ids.push_back(TestRow{id++, s, i});
  }
  return out;
}

void write_dataset(const SyntheticData& data, const std::filesystem::path& dir) {
  std::string sales = "date,date_block_num,shop_id,item_id,item_price,item_cnt_day\n";
  for (const auto& r : data.records) {
    sales += format_date(r.date.day, r.date_block);
    sales += ',' + std::to_string(r.date_block) + ',' + std::to_string(r.shop_id) + ',' + std::to_string(r.item_id) +
             ',';
    append_double(sales, r.item_price);
    sales += ',';
    append_double(sales, r.item_cnt_day);
    sales += '\n';
  }
  std::string items = "item_name,item_id,item_category_id\n";
  for (const auto& [item, cat] : data.catalog.item_category) {
    items += "\"Item " + std::to_string(item) + ", boxed\"," + std::to_string(item) + ',' + std::to_string(cat) + '\n';
  }
  std::string cats = "item_category_name,item_category_id\n";
  for (int c : data.catalog.categories) cats += "Category " + std::to_string(c) + ',' + std::to_string(c) + '\n';
  std::string shops = "shop_name,shop_id\n";
  for (int s : data.catalog.shops) shops += "Shop " + std::to_string(s) + ',' + std::to_string(s) + '\n';
  std::string test = "ID,shop_id,item_id\n";
  for (const auto& t : data.test_ids) {
    test += std::to_string(t.id) + ',' + std::to_string(t.shop_id) + ',' + std::to_string(t.item_id) + '\n';
  }
  write_file(dir / "sales_train.csv", sales);
  write_file(dir / "items.csv", items);
  write_file(dir / "item_categories.csv", cats);
  write_file(dir / "shops.csv", shops);
  write_file(dir / "test.csv", test);
}

}  // namespace pfcast
