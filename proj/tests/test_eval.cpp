#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "gbt_data.hpp"
#include "pfcast/error.hpp"
#include "pfcast/eval.hpp"

using namespace pfcast;

namespace {

double value_of(const ParamPoint& p, const std::string& name) {
  for (const auto& [k, v] : p) {
    if (k == name) return v;
  }
  throw std::out_of_range(name);
}

RunReport report(std::string_view name, double val) {
  RunReport r;
  r.model = std::string(name);
  r.train_rmse = val / 2;
  r.val_rmse = val;
  return r;
}

}  // namespace

TEST_CASE("rmse examples") {
  const std::vector<double> t{1, 1}, p{0, 2};
  CHECK(rmse(t, t) == 0);
  CHECK(rmse(p, t) == 1.0);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(rmse(p, std::vector<double>{1}), ValidationError);
}

TEST_CASE("the mean is the best constant predictor") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 20);
  std::vector<double> t(57);
  for (auto& v : t) v = u(rng);
  double mean = 0;
  for (double v : t) mean += v / static_cast<double>(t.size());
  const double best = mean_baseline_rmse(t);
  CHECK(best == doctest::Approx(rmse(std::vector<double>(t.size(), mean), t)).epsilon(1e-14));
  for (double c = 0; c <= 20; c += 0.05) CHECK(rmse(std::vector<double>(t.size(), c), t) >= best - 1e-12);
}

TEST_CASE("rmse symmetry and translation invariance") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> a(13), b(13), a2(13), b2(13);
    for (auto& v : a) v = z(rng);
    for (auto& v : b) v = z(rng);
    const double shift = z(rng);
    for (std::size_t k = 0; k < 13; ++k) {
      a2[k] = a[k] + shift;
      b2[k] = b[k] + shift;
    }
    CHECK(rmse(a, b) == rmse(b, a));
    CHECK(rmse(a2, b2) == doctest::Approx(rmse(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("search space draws") {
  auto space = SearchSpace::gbt_default();
  space.n_samples = 200;
  space.seed = 4;
  const auto a = draw_samples(space), b = draw_samples(space);
  CHECK(a == b);
  REQUIRE(a.size() == 200);
  for (const auto& p : a) {
    CHECK(value_of(p, "eta") >= 0.01);
    CHECK(value_of(p, "eta") <= 0.3);
    const double d = value_of(p, "max_depth");
    CHECK(d == std::round(d));
    CHECK(d >= 3);
    CHECK(d <= 10);
  }
  const auto j = SearchSpace::from_json({{"n_samples", 3}, {"dims", {{"eta", {{"grid", {0.1, 0.2}}}}, {"max_depth", {{"int", {2, 4}}}}, {"lambda", {0.0, 1.0}}}}});
  CHECK(j.n_samples == 3);
  CHECK(j.dims.size() == 3);
  CHECK(SearchSpace::from_json(j.to_json()).to_json() == j.to_json());
  CHECK_THROWS_AS(SearchSpace::from_json({{"dims", {{"eta", {0.5, 0.1}}}}}), ValidationError);
}

TEST_CASE("random search: singleton, determinism, winner") {
  SearchSpace one;
  one.dims = {Dimension::grid("eta", {0.2})};
  one.n_samples = 1;
  const auto r = random_search(one, [](const ParamPoint& p) { return TrialScore{0, value_of(p, "eta")}; });
  CHECK(value_of(r.winner().params, "eta") == 0.2);

  SearchSpace space;
  space.dims = {Dimension::uniform("x", -1, 1), Dimension::integer("k", 0, 3)};
  space.n_samples = 25;
  space.seed = 11;
  const auto f = [](const ParamPoint& p) {
    const double x = value_of(p, "x");
    return TrialScore{0, (x - 0.3) * (x - 0.3) + value_of(p, "k")};
  };
  const auto a = random_search(space, f, 2), b = random_search(space, f, 1);
  CHECK(a.best == b.best);
  CHECK(trial_log_csv(a).size() > 0);
  REQUIRE(a.trials.size() == 25);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].params == b.trials[i].params);
    CHECK(a.trials[i].val_rmse == b.trials[i].val_rmse);
    CHECK(a.winner().val_rmse <= a.trials[i].val_rmse);
  }
}

TEST_CASE("random search: ties keep the earliest trial, failures are skipped") {
  SearchSpace space;
  space.dims = {Dimension::integer("k", 0, 5)};
  space.n_samples = 12;
  const auto r = random_search(space, [](const ParamPoint& p) {
    if (value_of(p, "k") == 0) throw NumericError("boom");
    return TrialScore{0, 1.0};
  });
  for (std::size_t i = 0; i < r.trials.size(); ++i) {
    if (r.trials[i].ok()) {
      CHECK(r.best == i);
      break;
    }
  }
  CHECK_THROWS_AS(random_search(space, [](const ParamPoint&) -> TrialScore { throw NumericError("x"); }), NumericError);
}

TEST_CASE("random search finds the planted optimum") {
  const auto x = testdata::matrix({{0, 0, 1, 1}}, {0, 0, 2, 2});
  gbt::GbtParams base;
  base.lambda = base.alpha = base.gamma = 0;
  base.min_child_weight = 0;
  base.base_score = 0;
  SearchSpace space;
  space.dims = {Dimension::grid("eta", {1.0, 0.0001}), Dimension::grid("max_depth", {1}),
                Dimension::grid("n_rounds", {1})};
  space.n_samples = 8;
  space.seed = 1;
  const auto r = random_search(space, [&](const ParamPoint& p) {
    const auto fit = gbt::fit(x, apply_params(base, p));
    const double e = rmse(gbt::predict(fit.model, x), x.target());
    return TrialScore{e, e};
  });
  std::set<double> seen;
  for (const auto& t : r.trials) seen.insert(value_of(t.params, "eta"));
  CHECK(seen.size() == 2);
  CHECK(value_of(r.winner().params, "eta") == 1.0);
  CHECK(r.winner().val_rmse <= 1e-15);
}

TEST_CASE("apply_params") {
  const auto p = apply_params({}, {{"eta", 0.2}, {"max_depth", 4}, {"lambda", 0.5}, {"n_rounds", 7}});
  CHECK(p.eta == 0.2);
  CHECK(p.max_depth == 4);
  CHECK(p.lambda == 0.5);
  CHECK(p.n_rounds == 7);
  CHECK_THROWS_AS(apply_params({}, {{"learning_rate", 0.1}}), ValidationError);
  CHECK_THROWS_AS(apply_params({}, {{"eta", 2.0}}), ValidationError);
}

TEST_CASE("compare: roster, ordering, failures") {
  const std::vector<ModelRunner> runners{
      {std::string(kGbtName), [] { return report(kGbtName, 0.8); }},
      {std::string(kLstmName), []() -> RunReport { throw NumericError("diverged"); }},
      {std::string(kArimaName), [] { return report(kArimaName, 0.5); }},
  };
  const auto reports = compare_models(runners);
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].model == kArimaName);
  CHECK(reports[1].model == kGbtName);
  CHECK(reports[2].model == kLstmName);
  CHECK_FALSE(reports[2].ok());
  CHECK(reports[2].error.find("diverged") != std::string::npos);
  const auto table = render_table(reports);
  for (auto n : {kGbtName, kLstmName, kArimaName}) CHECK(table.find(n) != std::string::npos);
  CHECK(table.find("status") != std::string::npos);
  const auto csv = report_csv(reports);
  CHECK(csv.rfind("model,train_rmse,val_rmse,test_rmse\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("all-zero predictor scores the root mean square of the targets") {
  const std::vector<double> t{1, 3, 0, 2};
  CHECK(rmse(std::vector<double>(4, 0.0), t) == doctest::Approx(std::sqrt((1 + 9 + 0 + 4) / 4.0)).epsilon(1e-15));
}

TEST_CASE("submission file") {
  const std::vector<TestRow> ids{{0, 5, 1}, {1, 5, 2}, {2, 6, 1}};
  const std::map<RowKey, double> pred{{{5, 1}, 31.2}, {{5, 2}, -0.4}, {{6, 1}, 1.5}};
  const auto csv = submission_csv(ids, pred);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("ID,item_cnt_month\n", 0) == 0);
  const auto rows = parse_submission(csv);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].item_cnt_month == 20);
  CHECK(rows[1].item_cnt_month == 0);
  CHECK(rows[2].item_cnt_month == 1.5);
  CHECK(rows[2].id == 2);

  const std::map<RowKey, double> partial{{{5, 1}, 1.0}};
  try {
    (void)submission_csv(ids, partial);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find('1') != std::string::npos);
  }
  CHECK_THROWS_AS(parse_submission("id,item_cnt_month\n0,1\n"), SchemaError);
}

TEST_CASE("submission values round-trip to full precision") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 25);
  std::vector<TestRow> ids;
  std::map<RowKey, double> pred;
  for (int i = 0; i < 300; ++i) {
    ids.push_back({i, i % 7, i});
    pred[{i % 7, i}] = u(rng);
  }
  const auto rows = parse_submission(submission_csv(ids, pred));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].item_cnt_month == clip_target(pred[{ids[i].shop_id, ids[i].item_id}], 0, 20));
  }
}
