#include "pfcast/eval.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "pfcast/csv.hpp"
#include "pfcast/error.hpp"

namespace pfcast {

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) {
    throw ValidationError("rmse: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(targets.size()) + " targets");
  }
  if (predictions.empty()) throw ValidationError("rmse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(predictions.size()));
}

double mean_baseline_rmse(std::span<const double> targets) {
  if (targets.empty()) throw ValidationError("rmse: empty input");
  const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
  const std::vector<double> p(targets.size(), mean);
  return rmse(p, targets);
}

// ---------------------------------------------------------------- search

Dimension Dimension::grid(std::string name, std::vector<double> values) {
  Dimension d;
  d.name = std::move(name);
  d.kind = Kind::grid;
  d.values = std::move(values);
  return d;
}

Dimension Dimension::uniform(std::string name, double lo, double hi) {
  Dimension d;
  d.name = std::move(name);
  d.kind = Kind::uniform;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Dimension Dimension::integer(std::string name, int lo, int hi) {
  Dimension d;
  d.name = std::move(name);
  d.kind = Kind::integer;
  d.lo = lo;
  d.hi = hi;
  return d;
}

void Dimension::validate() const {
  if (name.empty()) throw ValidationError("search space: unnamed dimension");
  switch (kind) {
    case Kind::grid:
      if (values.empty()) throw ValidationError("search space: empty grid for " + name);
      for (double v : values) {
        if (!std::isfinite(v)) throw ValidationError("search space: non-finite grid value for " + name);
      }
      break;
    case Kind::uniform:
    case Kind::integer:
      if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
        throw ValidationError("search space: empty range for " + name);
      }
      if (kind == Kind::integer && std::ceil(lo) > std::floor(hi)) {
        throw ValidationError("search space: no integers in range for " + name);
      }
      break;
  }
}

void SearchSpace::validate() const {
  if (n_samples < 1) throw ValidationError("search space: n_samples must be >= 1");
  if (dims.empty()) throw ValidationError("search space: no dimensions");
  for (std::size_t i = 0; i < dims.size(); ++i) {
    dims[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (dims[j].name == dims[i].name) throw ValidationError("search space: duplicate dimension " + dims[i].name);
    }
  }
}

SearchSpace SearchSpace::gbt_default() {
  SearchSpace s;
  s.dims = {Dimension::uniform("eta", 0.01, 0.3), Dimension::integer("max_depth", 3, 10),
            Dimension::uniform("min_child_weight", 1.0, 50.0), Dimension::uniform("lambda", 0.0, 1.0),
            Dimension::uniform("alpha", 0.0, 1.0)};
  return s;
}

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
  SearchSpace s = gbt_default();
  try {
    if (j.contains("n_samples")) s.n_samples = j.at("n_samples").get<int>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("dims")) {
      s.dims.clear();
      for (const auto& [name, v] : j.at("dims").items()) {
        if (v.is_array()) {
          const auto r = v.get<std::vector<double>>();
          if (r.size() != 2) throw ValidationError("search space: range for " + name + " needs [lo, hi]");
          s.dims.push_back(Dimension::uniform(name, r[0], r[1]));
        } else if (v.contains("grid")) {
          s.dims.push_back(Dimension::grid(name, v.at("grid").get<std::vector<double>>()));
        } else if (v.contains("int")) {
          const auto r = v.at("int").get<std::vector<int>>();
          if (r.size() != 2) throw ValidationError("search space: int range for " + name + " needs [lo, hi]");
          s.dims.push_back(Dimension::integer(name, r[0], r[1]));
        } else {
          throw ValidationError("search space: cannot read dimension " + name);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("search space: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json SearchSpace::to_json() const {
  nlohmann::json dj = nlohmann::json::object();
  for (const auto& d : dims) {
    switch (d.kind) {
      case Dimension::Kind::grid:
        dj[d.name] = {{"grid", d.values}};
        break;
      case Dimension::Kind::uniform:
        dj[d.name] = {d.lo, d.hi};
        break;
      case Dimension::Kind::integer:
        dj[d.name] = {{"int", {static_cast<int>(d.lo), static_cast<int>(d.hi)}}};
        break;
    }
  }
  return {{"n_samples", n_samples}, {"seed", seed}, {"dims", dj}};
}

std::vector<ParamPoint> draw_samples(const SearchSpace& space) {
  space.validate();
  std::mt19937_64 rng(space.seed);
  std::vector<ParamPoint> out;
  out.reserve(static_cast<std::size_t>(space.n_samples));
  for (int t = 0; t < space.n_samples; ++t) {
    ParamPoint p;
    for (const auto& d : space.dims) {
      double v = 0.0;
      switch (d.kind) {
        case Dimension::Kind::grid: {
          std::uniform_int_distribution<std::size_t> u(0, d.values.size() - 1);
          v = d.values[u(rng)];
          break;
        }
        case Dimension::Kind::uniform: {
          std::uniform_real_distribution<double> u(d.lo, d.hi);
          v = d.lo == d.hi ? d.lo : u(rng);
          break;
        }
        case Dimension::Kind::integer: {
          std::uniform_int_distribution<long long> u(static_cast<long long>(std::ceil(d.lo)),
                                                     static_cast<long long>(std::floor(d.hi)));
          v = static_cast<double>(u(rng));
          break;
        }
      }
      p.emplace_back(d.name, v);
    }
    out.push_back(std::move(p));
  }
  return out;
}

SearchResult random_search(const SearchSpace& space, const TrialFn& score, int jobs) {
  const auto draws = draw_samples(space);
  SearchResult result;
  result.trials.resize(draws.size());
  const int n = static_cast<int>(draws.size());
  const int threads = std::max(1, jobs);

#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
  for (int t = 0; t < n; ++t) {
    auto& trial = result.trials[static_cast<std::size_t>(t)];
    trial.index = t;
    trial.params = draws[static_cast<std::size_t>(t)];
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto s = score(trial.params);
      if (!std::isfinite(s.val_rmse)) throw NumericError("non-finite validation RMSE");
      trial.train_rmse = s.train_rmse;
      trial.val_rmse = s.val_rmse;
    } catch (const std::exception& e) {
      trial.error = e.what();
    }
    trial.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  bool found = false;
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    const auto& t = result.trials[i];
    if (!t.ok()) continue;
    if (!found || t.val_rmse < result.trials[result.best].val_rmse) {
      result.best = i;
      found = true;
    }
  }
  if (!found) {
    throw NumericError("tune: all " + std::to_string(n) + " trials failed; first error: " + result.trials[0].error);
  }
  return result;
}

std::string trial_log_csv(const SearchResult& result) {
  std::string out = "trial";
  if (!result.trials.empty()) {
    for (const auto& [name, v] : result.trials[0].params) out += "," + name;
  }
  out += ",train_rmse,val_rmse,seconds\n";
  for (const auto& t : result.trials) {
    out += std::to_string(t.index);
    for (const auto& [name, v] : t.params) {
      out += ',';
      append_double(out, v);
    }
    out += ',';
    if (t.ok()) append_double(out, t.train_rmse);
    out += ',';
    if (t.ok()) append_double(out, t.val_rmse);
    out += ',';
    append_double(out, t.seconds);
    out += '\n';
  }
  return out;
}

gbt::GbtParams apply_params(gbt::GbtParams p, const ParamPoint& point) {
  for (const auto& [name, v] : point) {
    if (name == "eta") {
      p.eta = v;
    } else if (name == "max_depth") {
      p.max_depth = static_cast<int>(std::lround(v));
    } else if (name == "min_child_weight") {
      p.min_child_weight = v;
    } else if (name == "lambda") {
      p.lambda = v;
    } else if (name == "alpha") {
      p.alpha = v;
    } else if (name == "gamma") {
      p.gamma = v;
    } else if (name == "n_rounds") {
      p.n_rounds = static_cast<int>(std::lround(v));
    } else {
      throw ValidationError("tune: unknown GBT parameter '" + name + "'");
    }
  }
  p.validate();
  return p;
}

// -------------------------------------------------------------- reports

std::vector<RunReport> compare_models(std::span<const ModelRunner> runners) {
  std::vector<RunReport> out;
  for (const auto& r : runners) {
    const auto start = std::chrono::steady_clock::now();
    RunReport rep;
    try {
      rep = r.run();
    } catch (const std::exception& e) {
      rep = RunReport{};
      rep.error = e.what();
    }
    rep.model = r.name;
    if (rep.wall_seconds == 0.0) {
      rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    out.push_back(std::move(rep));
  }
  std::stable_sort(out.begin(), out.end(), [](const RunReport& a, const RunReport& b) {
    if (a.ok() != b.ok()) return a.ok();
    if (!a.ok()) return false;
    return a.val_rmse < b.val_rmse;
  });
  return out;
}

namespace {

std::string cell(double v) {
  if (is_missing(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string render_table(std::span<const RunReport> reports) {
  std::vector<std::array<std::string, 6>> rows;
  rows.push_back({"model", "train_rmse", "val_rmse", "test_rmse", "seconds", "status"});
  for (const auto& r : reports) {
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.2f", r.wall_seconds);
    rows.push_back({r.model, cell(r.train_rmse), cell(r.val_rmse), cell(r.test_rmse), secs,
                    r.ok() ? "ok" : "FAILED: " + r.error});
  }
  std::array<std::size_t, 6> width{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < 6; ++c) {
      const auto& s = row[c];
      if (c == 0) {
        out += s + std::string(width[c] - s.size(), ' ');
      } else if (c < 5) {
        out += "  " + std::string(width[c] - s.size(), ' ') + s;
      } else {
        out += "  " + s;
      }
    }
    out += '\n';
  }
  return out;
}

std::string report_csv(std::span<const RunReport> reports) {
  std::string out = "model,train_rmse,val_rmse,test_rmse\n";
  for (const auto& r : reports) {
    out += r.model;
    for (double v : {r.train_rmse, r.val_rmse, r.test_rmse}) {
      out += ',';
      append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

// ----------------------------------------------------------- submission

std::string submission_csv(std::span<const TestRow> test_ids, const std::map<RowKey, double>& predictions,
                           ClipRange clip) {
  std::string out = "ID,item_cnt_month\n";
  std::vector<long long> missing;
  for (const auto& t : test_ids) {
    auto it = predictions.find(RowKey{t.shop_id, t.item_id});
    if (it == predictions.end() || is_missing(it->second)) {
      missing.push_back(t.id);
      continue;
    }
    out += std::to_string(t.id);
    out += ',';
    append_double(out, clip_target(it->second, clip.lo, clip.hi));
    out += '\n';
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) ids += (i ? " " : "") + std::to_string(missing[i]);
    if (missing.size() > 20) ids += " ...";
    throw DataError("submission: " + std::to_string(missing.size()) + " test rows have no prediction (IDs " + ids +
                    ")");
  }
  return out;
}

void write_submission(std::span<const TestRow> test_ids, const std::map<RowKey, double>& predictions,
                      const std::filesystem::path& path, ClipRange clip) {
  write_file(path, submission_csv(test_ids, predictions, clip));
}

std::vector<SubmissionRow> parse_submission(std::string_view content, std::string_view source) {
  std::vector<SubmissionRow> out;
  bool header = true;
  for_each_csv_record(content, [&](std::span<const std::string> f, std::size_t line) {
    if (header) {
      if (f.size() != 2 || f[0] != "ID" || f[1] != "item_cnt_month") {
        throw SchemaError(std::string(source) + ": header must be exactly ID,item_cnt_month");
      }
      header = false;
      return;
    }
    const auto id = f.size() == 2 ? parse_int(f[0]) : std::nullopt;
    const auto v = f.size() == 2 ? parse_double(f[1]) : std::nullopt;
    if (!id || !v) throw SchemaError(std::string(source) + ":" + std::to_string(line) + ": malformed row");
    out.push_back({*id, *v});
  });
  if (header) throw SchemaError(std::string(source) + ": empty file");
  return out;
}

}  // namespace pfcast
