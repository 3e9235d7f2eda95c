#include "pfcast/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "pfcast/csv.hpp"
#include "pfcast/error.hpp"

namespace pfcast {

namespace fs = std::filesystem;

namespace {

constexpr const char* kGridFile = "grid.csv";
constexpr const char* kGridMeta = "grid.meta.json";
constexpr const char* kFeatureFile = "features.csv";
constexpr const char* kFeatureMeta = "features.meta.json";

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nlohmann::json split_json(const SplitSpec& s) {
  return {{"train_first", s.train_first},
          {"train_last", s.train_last},
          {"validation_block", s.validation_block},
          {"test_block", s.test_block}};
}

nlohmann::json read_meta(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) {
    throw DataError("no " + stage + " cache at " + path.parent_path().string() + "; run `pfcast " + stage +
                    "` first");
  }
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw DataError(path.string() + " is corrupt; re-run `pfcast " + stage + "`");
  }
  return j;
}

[[noreturn]] void stale(const std::string& what, const std::string& stage) {
  throw DataError("stale cache: " + what + "; re-run `pfcast " + stage + "`");
}

nlohmann::json report_json(const CleaningReport& r) {
  return {{"rows_read", r.rows_read},
          {"rows_kept", r.rows_kept},
          {"rows_dropped", r.rows_dropped},
          {"values_imputed", r.values_imputed},
          {"clip_events", r.clip_events}};
}

Prediction clipped(std::vector<double> values, std::vector<double> targets, std::vector<RowKey> keys, ClipRange clip) {
  for (double& v : values) v = clip_target(v, clip.lo, clip.hi);
  return {std::move(values), std::move(targets), std::move(keys)};
}

}  // namespace

// ------------------------------------------------------------------ raw data

RawData load_raw(const fs::path& data_dir) {
  for (const char* f : kRawFiles) {
    if (!fs::exists(data_dir / f)) throw IoError("missing input file " + (data_dir / f).string());
  }
  RawData raw;
  raw.catalog = load_catalog(data_dir / "items.csv", data_dir / "item_categories.csv", data_dir / "shops.csv");
  raw.sales = load_sales(data_dir / "sales_train.csv");
  raw.test_ids = load_test_ids(data_dir / "test.csv");
  return raw;
}

PreparedGrid prepare_grid(const RawData& raw, const SplitSpec& split, ClipRange clip, CleaningReport* report) {
  split.validate();
  std::vector<SalesRecord> kept;
  kept.reserve(raw.sales.records.size());
  bool labels = false;
  for (const auto& r : raw.sales.records) {
    if (r.date_block > split.test_block) continue;
    labels = labels || r.date_block == split.test_block;
    kept.push_back(r);
  }
  PreparedGrid out;
  out.has_test_labels = labels;
  std::vector<RowKey> pairs;
  pairs.reserve(raw.test_ids.size());
  for (const auto& t : raw.test_ids) {
    raw.catalog.category_of(t.item_id);
    pairs.push_back(RowKey{t.shop_id, t.item_id});
  }
  out.grid = with_block_pairs(build_grid(kept, raw.catalog, clip, report), split.test_block, pairs);
  return out;
}

CacheLock::CacheLock(const fs::path& dir) {
  fs::create_directories(dir);
  const auto path = dir / ".lock";
  fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
  if (fd_ < 0) throw IoError("cannot open lock file " + path.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw IoError("cache directory " + dir.string() + " is in use by another pfcast process");
  }
}

CacheLock::~CacheLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

Partition parse_partition(const std::string& s) {
  if (s == "train") return Partition::train;
  if (s == "validation" || s == "val") return Partition::validation;
  if (s == "test") return Partition::test;
  throw UsageError("unknown partition '" + s + "' (expected train, validation or test)");
}

Model parse_model(const std::string& s, bool allow_mean) {
  if (s == "gbt") return Model::gbt;
  if (s == "arima") return Model::arima;
  if (s == "lstm") return Model::lstm;
  if (allow_mean && s == "mean") return Model::mean;
  throw UsageError("unknown model '" + s + "' (expected gbt, arima, lstm" + (allow_mean ? ", mean)" : ")"));
}

std::string model_label(Model m) {
  switch (m) {
    case Model::gbt:
      return std::string(kGbtName);
    case Model::arima:
      return std::string(kArimaName);
    case Model::lstm:
      return std::string(kLstmName);
    case Model::mean:
      return "mean baseline";
  }
  return "";
}

// ------------------------------------------------------------------ pipeline

struct Pipeline::Loaded {
  bool grid_ready = false;
  RawData raw;
  PanelGrid grid;
  bool has_test_labels = false;
  std::string grid_checksum;
  std::unique_ptr<FeatureBuilder> builder;

  bool features_ready = false;
  FeatureMatrix matrix;
};

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)), state_(std::make_shared<Loaded>()) {
  config_.validate();
}

IngestSummary Pipeline::ingest() {
  const auto& c = config_;
  RawData raw = load_raw(c.paths.data_dir);
  CleaningReport report = raw.sales.report;
  auto prepared = prepare_grid(raw, c.split, c.clip, &report);

  CacheLock lock(c.paths.cache_dir);
  const auto grid_csv = grid_to_csv(prepared.grid);
  write_file(c.paths.cache_dir / kGridFile, grid_csv);
  nlohmann::json inputs;
  for (const char* f : kRawFiles) inputs[f] = file_checksum(c.paths.data_dir / f);
  nlohmann::json meta{{"inputs", inputs},
                      {"grid_checksum", to_hex(fnv1a64(grid_csv))},
                      {"has_test_labels", prepared.has_test_labels},
                      {"split", split_json(c.split)},
                      {"clip", {{"lo", c.clip.lo}, {"hi", c.clip.hi}}},
                      {"report", report_json(report)}};
  write_file(c.paths.cache_dir / kGridMeta, meta.dump(2) + "\n");
  state_ = std::make_shared<Loaded>();
  return {report, prepared.grid.size(), prepared.has_test_labels};
}

Pipeline::Loaded& Pipeline::loaded_grid() {
  auto& st = *state_;
  if (st.grid_ready) return st;
  const auto& c = config_;
  const auto meta = read_meta(c.paths.cache_dir / kGridMeta, "ingest");
  for (const char* f : kRawFiles) {
    const auto path = c.paths.data_dir / f;
    if (!fs::exists(path)) throw IoError("missing input file " + path.string());
    if (meta.value("inputs", nlohmann::json::object()).value(f, "") != file_checksum(path)) {
      stale(path.string() + " changed since the grid was built", "ingest");
    }
  }
  if (meta.value("split", nlohmann::json()) != split_json(c.split) ||
      meta.value("clip", nlohmann::json()) != nlohmann::json{{"lo", c.clip.lo}, {"hi", c.clip.hi}}) {
    stale("split or clip settings differ from the grid cache", "ingest");
  }
  const auto grid_path = c.paths.cache_dir / kGridFile;
  const auto content = read_file(grid_path);
  st.grid_checksum = to_hex(fnv1a64(content));
  if (meta.value("grid_checksum", "") != st.grid_checksum) stale(grid_path.string() + " was modified", "ingest");

  st.raw = load_raw(c.paths.data_dir);
  st.grid = grid_from_csv(content, grid_path.string());
  st.has_test_labels = meta.value("has_test_labels", false);
  st.builder = std::make_unique<FeatureBuilder>(st.grid, st.raw.catalog, st.raw.sales.records, c.features, c.split);
  st.grid_ready = true;
  return st;
}

std::vector<std::string> Pipeline::features() {
  auto& st = loaded_grid();
  const auto& c = config_;
  FeatureMatrix m = st.builder->assemble();
  CacheLock lock(c.paths.cache_dir);
  const auto csv = matrix_to_csv(m);
  write_file(c.paths.cache_dir / kFeatureFile, csv);
  nlohmann::json meta{{"grid_checksum", st.grid_checksum},
                      {"features_checksum", to_hex(fnv1a64(csv))},
                      {"features", c.features.to_json()},
                      {"split", split_json(c.split)},
                      {"rows", m.n_rows()}};
  write_file(c.paths.cache_dir / kFeatureMeta, meta.dump(2) + "\n");
  st.matrix = std::move(m);
  st.features_ready = true;
  return st.matrix.feature_names();
}

Pipeline::Loaded& Pipeline::loaded_features() {
  auto& st = loaded_grid();
  if (st.features_ready) return st;
  const auto& c = config_;
  const auto meta = read_meta(c.paths.cache_dir / kFeatureMeta, "features");
  if (meta.value("grid_checksum", "") != st.grid_checksum) stale("the grid cache changed after features were built", "features");
  if (meta.value("features", nlohmann::json()) != c.features.to_json() ||
      meta.value("split", nlohmann::json()) != split_json(c.split)) {
    stale("feature or split settings differ from the feature cache", "features");
  }
  const auto path = c.paths.cache_dir / kFeatureFile;
  const auto content = read_file(path);
  if (meta.value("features_checksum", "") != to_hex(fnv1a64(content))) stale(path.string() + " was modified", "features");
  st.matrix = matrix_from_csv(content, path.string());
  st.features_ready = true;
  return st;
}

bool Pipeline::has_test_labels() { return loaded_grid().has_test_labels; }

RunReport Pipeline::report_from(const std::string& name, const Partitioned<Prediction>& p, double seconds,
                                nlohmann::json params) {
  RunReport r;
  r.model = name;
  r.train_rmse = rmse(p.train.values, p.train.targets);
  r.val_rmse = rmse(p.validation.values, p.validation.targets);
  if (loaded_grid().has_test_labels) r.test_rmse = rmse(p.test.values, p.test.targets);
  r.wall_seconds = seconds;
  r.params = std::move(params);
  return r;
}

void Pipeline::upsert_report(const RunReport& r) {
  const auto path = config_.paths.output_dir / "report.csv";
  std::map<std::string, std::string> rows;
  if (fs::exists(path)) {
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty()) rows[line.substr(0, line.find(','))] = line;
    }
  }
  const RunReport one[] = {r};
  auto csv = report_csv(one);
  rows[r.model] = csv.substr(csv.find('\n') + 1, csv.size() - csv.find('\n') - 2);
  std::string out = "model,train_rmse,val_rmse,test_rmse\n";
  for (auto name : {kGbtName, kLstmName, kArimaName}) {
    auto it = rows.find(std::string(name));
    if (it != rows.end()) out += it->second + "\n";
  }
  write_file(path, out);
}

// ---------------------------------------------------------------- GBT

Partitioned<Prediction> Pipeline::gbt_predictions(const gbt::GbtModel& m) {
  auto& st = loaded_features();
  const auto parts = split_rows(st.matrix, config_.split);
  auto one = [&](const FeatureMatrix& x) {
    auto t = x.target();
    auto k = x.row_keys();
    return clipped(gbt::predict(m, x), {t.begin(), t.end()}, {k.begin(), k.end()}, config_.clip);
  };
  return {one(parts.train), one(parts.validation), one(parts.test)};
}

RunReport Pipeline::train_gbt() {
  const auto t0 = std::chrono::steady_clock::now();
  auto& st = loaded_features();
  const auto parts = split_rows(st.matrix, config_.split);
  auto fit = gbt::fit(parts.train, config_.gbt, &parts.validation);
  write_file(config_.paths.output_dir / "gbt_model.json", gbt::to_json(fit.model).dump() + "\n");
  auto params = config_.gbt.to_json();
  nlohmann::json top = nlohmann::json::array();
  for (const auto& [name, count] : gbt::importance(fit.model)) {
    if (top.size() == 10) break;
    top.push_back({name, count});
  }
  params["importance_top"] = top;
  auto r = report_from(std::string(kGbtName), gbt_predictions(fit.model), seconds_since(t0), params);
  upsert_report(r);
  return r;
}

// ---------------------------------------------------------------- ARIMA

Partitioned<Prediction> Pipeline::arima_predictions(const arima::ArimaRun& run) {
  auto& st = loaded_grid();
  const auto& split = config_.split;
  Partitioned<Prediction> out;
  for (const auto& c : st.grid.cells()) {
    if (c.date_block < config_.features.burn_in_blocks) continue;
    Prediction* p = nullptr;
    if (c.date_block >= split.train_first && c.date_block <= split.train_last) {
      p = &out.train;
    } else if (c.date_block == split.validation_block) {
      p = &out.validation;
    } else if (c.date_block == split.test_block) {
      p = &out.test;
    } else {
      continue;
    }
    const RowKey key{c.shop_id, c.item_id};
    p->values.push_back(clip_target(run.predict(c.date_block, key), config_.clip.lo, config_.clip.hi));
    p->targets.push_back(c.item_cnt_month);
    p->keys.push_back(key);
  }
  return out;
}

RunReport Pipeline::train_arima() {
  const auto t0 = std::chrono::steady_clock::now();
  auto& st = loaded_grid();
  const auto run = arima::fit_all(st.grid, config_.arima, config_.split);
  write_file(config_.paths.output_dir / "arima_diagnostics.csv", arima::diagnostics_csv(run));
  nlohmann::json params{{"p", config_.arima.p},
                        {"d", config_.arima.d},
                        {"q", config_.arima.q},
                        {"series", run.series.size()},
                        {"fallback_count", run.fallback_count},
                        {"fallback_rate", run.fallback_rate()}};
  write_file(config_.paths.output_dir / "arima_summary.json", params.dump(2) + "\n");
  auto r = report_from(std::string(kArimaName), arima_predictions(run), seconds_since(t0), params);
  upsert_report(r);
  return r;
}

// ---------------------------------------------------------------- LSTM

Partitioned<SequenceSet> Pipeline::lstm_sequences() {
  auto& st = loaded_grid();
  return split_rows(st.builder->sequences(config_.lstm.window), config_.split);
}

Partitioned<Prediction> Pipeline::lstm_predictions(const seqnet::SeqNetModel& m) {
  const auto parts = lstm_sequences();
  auto one = [&](const SequenceSet& s) {
    return clipped(seqnet::predict(m, s), s.target, s.row_keys, config_.clip);
  };
  return {one(parts.train), one(parts.validation), one(parts.test)};
}

RunReport Pipeline::train_lstm() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto parts = lstm_sequences();
  auto result = seqnet::train(parts.train, parts.validation, config_.lstm);
  auto j = seqnet::to_json(result.model, config_.lstm);
  j["dynamic_names"] = parts.train.dynamic_names;
  j["static_names"] = parts.train.static_names;
  write_file(config_.paths.output_dir / "lstm_model.json", j.dump() + "\n");
  auto params = config_.lstm.to_json();
  params["epoch_val_rmse"] = result.log.val_rmse;
  auto r = report_from(std::string(kLstmName), lstm_predictions(result.model), seconds_since(t0), params);
  upsert_report(r);
  return r;
}

// ------------------------------------------------------- artifacts & scoring

Partitioned<Prediction> Pipeline::predictions(Model model) {
  const auto& out = config_.paths.output_dir;
  auto load_json = [&](const char* file, const char* trainer) {
    const auto path = out / file;
    if (!fs::exists(path)) throw DataError("no trained model at " + path.string() + "; run `pfcast train " + trainer + "`");
    auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw SchemaError(path.string() + ": invalid JSON");
    return j;
  };
  switch (model) {
    case Model::gbt:
      return gbt_predictions(gbt::model_from_json(load_json("gbt_model.json", "gbt")));
    case Model::arima:
      return arima_predictions(arima::fit_all(loaded_grid().grid, config_.arima, config_.split));
    case Model::lstm: {
      const auto j = load_json("lstm_model.json", "lstm");
      const auto m = seqnet::model_from_json(j);
      const auto parts = lstm_sequences();
      if (j.value("dynamic_names", nlohmann::json()) != nlohmann::json(parts.train.dynamic_names) ||
          j.value("static_names", nlohmann::json()) != nlohmann::json(parts.train.static_names)) {
        throw SchemaError("lstm_model.json was trained on different inputs; re-run `pfcast train lstm`");
      }
      return lstm_predictions(m);
    }
    case Model::mean: {
      Partitioned<Prediction> p;
      auto& st = loaded_grid();
      for (const auto& c : st.grid.cells()) {
        if (c.date_block < config_.features.burn_in_blocks) continue;
        Prediction* dst = c.date_block == config_.split.validation_block ? &p.validation
                          : c.date_block == config_.split.test_block     ? &p.test
                          : (c.date_block >= config_.split.train_first && c.date_block <= config_.split.train_last)
                              ? &p.train
                              : nullptr;
        if (!dst) continue;
        dst->targets.push_back(c.item_cnt_month);
        dst->keys.push_back(RowKey{c.shop_id, c.item_id});
      }
      for (auto* dst : {&p.train, &p.validation, &p.test}) {
        const double mean = dst->targets.empty() ? 0.0
                                                 : std::accumulate(dst->targets.begin(), dst->targets.end(), 0.0) /
                                                       static_cast<double>(dst->targets.size());
        dst->values.assign(dst->targets.size(), mean);
      }
      return p;
    }
  }
  throw UsageError("unknown model");
}

fs::path Pipeline::predict(Model model) {
  if (model == Model::mean) throw UsageError("predict needs a trained model (gbt, arima or lstm)");
  const auto p = predictions(model);
  std::map<RowKey, double> by_key;
  for (std::size_t i = 0; i < p.test.keys.size(); ++i) by_key[p.test.keys[i]] = p.test.values[i];
  const auto path = config_.paths.output_dir / "submission.csv";
  write_submission(loaded_grid().raw.test_ids, by_key, path, config_.clip);
  return path;
}

double Pipeline::evaluate(Model model, Partition part) {
  if (part == Partition::test && !has_test_labels()) {
    throw DataError("the test month has no sales in the raw data, so there are no labels to score");
  }
  const auto p = predictions(model);
  const auto& chosen = part == Partition::train ? p.train : part == Partition::validation ? p.validation : p.test;
  return rmse(chosen.values, chosen.targets);
}

TuneSummary Pipeline::tune() {
  auto& st = loaded_features();
  const auto parts = split_rows(st.matrix, config_.split);
  const auto base = config_.gbt;
  const auto clip = config_.clip;
  auto score = [&](const ParamPoint& point) {
    const auto params = apply_params(base, point);
    const auto fit = gbt::fit(parts.train, params, &parts.validation);
    const auto& ev = fit.log.eval_rmse;
    const auto best = static_cast<std::size_t>(std::min_element(ev.begin(), ev.end()) - ev.begin());
    const auto model = gbt::truncated(fit.model, best + 1);
    auto scored = [&](const FeatureMatrix& x) {
      auto v = gbt::predict(model, x);
      for (double& y : v) y = clip_target(y, clip.lo, clip.hi);
      return rmse(v, x.target());
    };
    return TrialScore{scored(parts.train), scored(parts.validation)};
  };
  TuneSummary out;
  out.search = random_search(config_.tuner.space, score, std::max(1, config_.jobs));

  // Re-fit the winner to recover its best round count.
  const auto winner = apply_params(base, out.search.winner().params);
  const auto fit = gbt::fit(parts.train, winner, &parts.validation);
  const auto& ev = fit.log.eval_rmse;
  out.best = winner;
  out.best.n_rounds = static_cast<int>(std::min_element(ev.begin(), ev.end()) - ev.begin()) + 1;

  write_file(config_.trial_log_path(), trial_log_csv(out.search));
  nlohmann::json best{{"gbt", out.best.to_json()}};
  best["gbt"].erase("seed");
  write_file(config_.paths.output_dir / "best_params.json", best.dump(2) + "\n");
  return out;
}

std::vector<RunReport> Pipeline::compare() {
  const ModelRunner runners[] = {{std::string(kGbtName), [&] { return train_gbt(); }},
                                 {std::string(kLstmName), [&] { return train_lstm(); }},
                                 {std::string(kArimaName), [&] { return train_arima(); }}};
  auto reports = compare_models(runners);
  write_file(config_.paths.output_dir / "report.csv", report_csv(reports));
  return reports;
}

}  // namespace pfcast
