#include <algorithm>
#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "../tools/cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "pfcast/csv.hpp"
#include "pfcast/eval.hpp"
#include "pfcast/features.hpp"
#include "pfcast/ingest.hpp"

namespace fs = std::filesystem;
using namespace pfcast;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result pf(std::vector<std::string> args, const std::map<std::string, std::string>& env = {}) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err, env);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// A small synthetic dataset shared by all cases, with fast model settings.
struct Workspace {
  fs::path dir;
  std::string config;
  std::vector<std::string> fast{"--set", "gbt.n_rounds=8", "--set", "lstm.epochs=1", "--set", "lstm.hidden_lstm=4",
                                "--set", "lstm.hidden_static=2", "--set", "lstm.hidden_merge=4",
                                "--set", "lstm.batch_size=32"};

  Workspace() {
    dir = fs::temp_directory_path() / ("pfcast_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    const auto r = pf({"synth", "--out", dir.string(), "--months", "16", "--shops", "4", "--items", "10"});
    REQUIRE(r.code == 0);
    config = (dir / "config.json").string();
  }
  ~Workspace() { fs::remove_all(dir); }

  Result cmd(std::vector<std::string> args, std::vector<std::string> extra = {}) const {
    std::vector<std::string> full{"--config", config};
    full.insert(full.end(), fast.begin(), fast.end());
    full.insert(full.end(), extra.begin(), extra.end());
    full.insert(full.end(), args.begin(), args.end());
    return pf(full);
  }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("ingest writes the grid cache and is reproducible") {
  auto& w = ws();
  const auto a = w.cmd({"ingest"});
  REQUIRE(a.code == 0);
  CHECK(a.out.find("grid cells") != std::string::npos);
  const auto first = read_file(w.dir / "cache" / "grid.csv");
  REQUIRE(w.cmd({"ingest"}).code == 0);
  CHECK(read_file(w.dir / "cache" / "grid.csv") == first);
  CHECK(fs::exists(w.dir / "cache" / "grid.meta.json"));
}

TEST_CASE("features: manifest and lag configuration") {
  auto& w = ws();
  REQUIRE(w.cmd({"ingest"}).code == 0);
  auto r = w.cmd({"features"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("target_item_lag_1\n") != std::string::npos);
  CHECK(r.out.find("target_item_lag_12\n") != std::string::npos);

  r = w.cmd({"features"}, {"--set", "features.lag_offsets=[1]", "--set", "features.trend_pairs=[]"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("_lag_12") == std::string::npos);
  CHECK(r.out.find("target_item_lag_1\n") != std::string::npos);

  REQUIRE(w.cmd({"features"}).code == 0);
  const auto m = matrix_from_csv(read_file(w.dir / "cache" / "features.csv"));
  CHECK(*std::min_element(m.date_block().begin(), m.date_block().end()) == 12);
}

TEST_CASE("train, evaluate and predict") {
  auto& w = ws();
  REQUIRE(w.cmd({"ingest"}).code == 0);
  REQUIRE(w.cmd({"features"}).code == 0);

  auto r = w.cmd({"train", "gbt"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(w.dir / "out" / "gbt_model.json"));
  CHECK(r.out.find("top features by split count") != std::string::npos);

  r = w.cmd({"train", "arima"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(w.dir / "out" / "arima_diagnostics.csv"));
  CHECK(r.out.find("fallback rate") != std::string::npos);

  r = w.cmd({"train", "lstm"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(w.dir / "out" / "lstm_model.json"));

  CHECK(w.cmd({"train", "forest"}).code == 1);

  r = w.cmd({"evaluate", "--model", "mean", "--split", "validation"});
  REQUIRE(r.code == 0);
  const auto grid = grid_from_csv(read_file(w.dir / "cache" / "grid.csv"));
  std::vector<double> t;
  for (const auto& c : grid.block(14)) t.push_back(c.item_cnt_month);
  std::ostringstream expect;
  expect << std::fixed;
  expect.precision(6);
  expect << mean_baseline_rmse(t);
  CHECK(r.out.find(expect.str()) != std::string::npos);

  r = w.cmd({"evaluate", "--model", "gbt", "--split", "validation"});
  CHECK(r.code == 0);
  CHECK(w.cmd({"evaluate", "--model", "gbt", "--split", "holdout"}).code == 1);

  r = w.cmd({"predict", "--model", "gbt"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = parse_submission(read_file(w.dir / "out" / "submission.csv"));
  CHECK(rows.size() == 40);
  for (const auto& row : rows) {
    CHECK(row.item_cnt_month >= 0);
    CHECK(row.item_cnt_month <= 20);
  }
}

TEST_CASE("tune writes one trial row per sample") {
  auto& w = ws();
  REQUIRE(w.cmd({"ingest"}).code == 0);
  REQUIRE(w.cmd({"features"}).code == 0);
  const auto log = w.dir / "trials_test.csv";
  const auto r = w.cmd({"tune"}, {"--set", "tuner.n_samples=3", "--set", "tuner.trial_log=" + log.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto csv = read_file(log);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("trial,", 0) == 0);
  CHECK(fs::exists(w.dir / "out" / "best_params.json"));
}

TEST_CASE("compare prints the three models sorted by validation RMSE") {
  auto& w = ws();
  REQUIRE(w.cmd({"ingest"}).code == 0);
  REQUIRE(w.cmd({"features"}).code == 0);
  const auto r = w.cmd({"compare"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (auto n : {kGbtName, kLstmName, kArimaName}) CHECK(r.out.find(n) != std::string::npos);
  const auto csv = read_file(w.dir / "out" / "report.csv");
  std::vector<std::string> header;
  std::vector<double> vals;
  for_each_csv_record(csv, [&](std::span<const std::string> f, std::size_t line) {
    if (line == 1) {
      header.assign(f.begin(), f.end());
    } else {
      vals.push_back(*parse_double(f[2]));
    }
  });
  CHECK(header == std::vector<std::string>{"model", "train_rmse", "val_rmse", "test_rmse"});
  CHECK(std::is_sorted(vals.begin(), vals.end()));
  CHECK(vals.size() == 3);
}

TEST_CASE("stale caches are refused") {
  auto& w = ws();
  REQUIRE(w.cmd({"ingest"}).code == 0);
  REQUIRE(w.cmd({"features"}).code == 0);
  REQUIRE(w.cmd({"ingest"}, {"--set", "clip.hi=5"}).code == 0);
  const auto r = w.cmd({"train", "gbt"}, {"--set", "clip.hi=5"});
  CHECK(r.code == 2);
  CHECK(r.err.find("stale cache") != std::string::npos);
  REQUIRE(w.cmd({"ingest"}).code == 0);
}

TEST_CASE("configuration sources") {
  auto& w = ws();
  REQUIRE(w.cmd({"ingest"}).code == 0);
  // environment overrides apply, and --set wins over the environment
  auto r = pf({"--config", w.config, "features"}, {{"PF_FEATURES__LAG_OFFSETS", "[1]"}, {"PF_FEATURES__TREND_PAIRS", "[]"}});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("_lag_12") == std::string::npos);
  r = pf({"--config", w.config, "--set", "features.lag_offsets=[1,12]", "features"},
         {{"PF_FEATURES__LAG_OFFSETS", "[1]"}, {"PF_FEATURES__TREND_PAIRS", "[]"}});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("target_item_lag_12") != std::string::npos);
  CHECK(pf({"--config", w.config, "--set", "gbt.bogus=1", "features"}).code == 2);
  CHECK(pf({"--config", w.config, "--set", "gbt.eta=7", "features"}).code == 2);
}

TEST_CASE("exit codes and error messages") {
  CHECK(pf({}).code == 1);
  CHECK(pf({"frobnicate"}).code == 1);
  CHECK(pf({"--config", "/nonexistent/config.json", "ingest"}).code == 2);

  const auto dir = fs::temp_directory_path() / ("pfcast_cli_missing_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  REQUIRE(pf({"synth", "--out", dir.string(), "--months", "16", "--shops", "2", "--items", "4"}).code == 0);
  fs::remove(dir / "sales_train.csv");
  const auto r = pf({"--config", (dir / "config.json").string(), "ingest"});
  CHECK(r.code == 2);
  CHECK(r.err.find("sales_train.csv") != std::string::npos);
  fs::remove_all(dir);
}
