#include "pfcast/config.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "pfcast/csv.hpp"
#include "pfcast/error.hpp"

extern char** environ;

namespace pfcast {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw ValidationError("config: unknown key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t global, std::string_view component) noexcept {
  std::uint64_t z = global ^ fnv1a64(component);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  reject_unknown(j, {"paths", "features", "split", "clip", "gbt", "arima", "lstm", "tuner", "seed", "jobs"}, "");
  try {
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      reject_unknown(p, {"data_dir", "cache_dir", "output_dir"}, "paths");
      if (p.contains("data_dir")) c.paths.data_dir = p.at("data_dir").get<std::string>();
      if (p.contains("cache_dir")) c.paths.cache_dir = p.at("cache_dir").get<std::string>();
      if (p.contains("output_dir")) c.paths.output_dir = p.at("output_dir").get<std::string>();
    }
    if (j.contains("features")) {
      reject_unknown(j.at("features"), {"lag_offsets", "trend_pairs", "onehot_fields", "encodings", "burn_in_blocks"},
                     "features");
      c.features = FeatureSpec::from_json(j.at("features"));
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      reject_unknown(s, {"train_first", "train_last", "validation_block", "test_block"}, "split");
      if (s.contains("train_first")) c.split.train_first = s.at("train_first").get<int>();
      if (s.contains("train_last")) c.split.train_last = s.at("train_last").get<int>();
      if (s.contains("validation_block")) c.split.validation_block = s.at("validation_block").get<int>();
      if (s.contains("test_block")) c.split.test_block = s.at("test_block").get<int>();
    }
    if (j.contains("clip")) {
      const auto& s = j.at("clip");
      reject_unknown(s, {"lo", "hi"}, "clip");
      if (s.contains("lo")) c.clip.lo = s.at("lo").get<double>();
      if (s.contains("hi")) c.clip.hi = s.at("hi").get<double>();
    }
    if (j.contains("gbt")) {
      reject_unknown(j.at("gbt"),
                     {"eta", "max_depth", "min_child_weight", "lambda", "alpha", "n_rounds", "gamma", "seed",
                      "base_score"},
                     "gbt");
      c.gbt = gbt::GbtParams::from_json(j.at("gbt"));
    }
    if (j.contains("arima")) {
      const auto& a = j.at("arima");
      reject_unknown(a, {"p", "d", "q"}, "arima");
      if (a.contains("p")) c.arima.p = a.at("p").get<int>();
      if (a.contains("d")) c.arima.d = a.at("d").get<int>();
      if (a.contains("q")) c.arima.q = a.at("q").get<int>();
    }
    if (j.contains("lstm")) {
      reject_unknown(j.at("lstm"),
                     {"hidden_lstm", "hidden_static", "hidden_merge", "l2_lambda", "batch_size", "epochs", "adam",
                      "seed", "window"},
                     "lstm");
      c.lstm = seqnet::SeqNetParams::from_json(j.at("lstm"));
    }
    if (j.contains("tuner")) {
      const auto& t = j.at("tuner");
      reject_unknown(t, {"n_samples", "seed", "dims", "trial_log"}, "tuner");
      c.tuner.space = SearchSpace::from_json(t);
      if (t.contains("trial_log")) c.tuner.trial_log = t.at("trial_log").get<std::string>();
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

nlohmann::json RunConfig::to_json() const {
  auto tuner_j = tuner.space.to_json();
  if (!tuner.trial_log.empty()) tuner_j["trial_log"] = tuner.trial_log.string();
  return {{"paths",
           {{"data_dir", paths.data_dir.string()},
            {"cache_dir", paths.cache_dir.string()},
            {"output_dir", paths.output_dir.string()}}},
          {"features", features.to_json()},
          {"split",
           {{"train_first", split.train_first},
            {"train_last", split.train_last},
            {"validation_block", split.validation_block},
            {"test_block", split.test_block}}},
          {"clip", {{"lo", clip.lo}, {"hi", clip.hi}}},
          {"gbt", gbt.to_json()},
          {"arima", {{"p", arima.p}, {"d", arima.d}, {"q", arima.q}}},
          {"lstm", lstm.to_json()},
          {"tuner", tuner_j},
          {"seed", seed},
          {"jobs", jobs}};
}

void RunConfig::validate() const {
  split.validate();
  features.validate();
  gbt.validate();
  lstm.validate();
  tuner.space.validate();
  if (arima.p < 0 || arima.d < 0 || arima.q < 0) throw ValidationError("config: arima orders must be >= 0");
  if (!(clip.lo <= clip.hi)) throw ValidationError("config: clip.lo must be <= clip.hi");
  if (jobs < 0) throw ValidationError("config: jobs must be >= 0");
  if (features.burn_in_blocks > split.train_last) {
    throw ValidationError("config: features.burn_in_blocks leaves no training months");
  }
}

std::filesystem::path RunConfig::trial_log_path() const {
  return tuner.trial_log.empty() ? paths.output_dir / "trials.csv" : tuner.trial_log;
}

std::map<std::string, std::string> pf_environment() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    if (!kv.starts_with("PF_")) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  return out;
}

void set_path(nlohmann::json& doc, std::string_view dotted_path, std::string_view value) {
  if (dotted_path.empty()) throw UsageError("override with empty key");
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_path.find('.', start);
    const std::string key(dotted_path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (key.empty()) throw UsageError("override key '" + std::string(dotted_path) + "' has an empty segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw UsageError("override key '" + std::string(dotted_path) + "' descends into a value");
      *node = nlohmann::json::object();
    }
    node = &(*node)[key];
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  auto parsed = nlohmann::json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? nlohmann::json(std::string(value)) : parsed;
}

RunConfig load_config(const ConfigSources& src) {
  nlohmann::json doc = nlohmann::json::object();
  if (src.file) {
    const auto text = read_file(*src.file);
    doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw SchemaError(src.file->string() + ": not a JSON object");
    }
  }
  for (const auto& [name, value] : src.env) {
    if (!name.starts_with("PF_")) continue;
    std::string key;
    std::string_view rest = std::string_view(name).substr(3);
    for (std::size_t i = 0; i < rest.size(); ++i) {
      if (rest.substr(i, 2) == "__") {
        key += '.';
        ++i;
      } else {
        key += static_cast<char>(std::tolower(static_cast<unsigned char>(rest[i])));
      }
    }
    set_path(doc, key, value);
  }
  for (const auto& s : src.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    set_path(doc, std::string_view(s).substr(0, eq), std::string_view(s).substr(eq + 1));
  }
  if (src.seed) doc["seed"] = *src.seed;
  if (src.jobs) doc["jobs"] = *src.jobs;

  RunConfig c = RunConfig::from_json(doc);
  if (src.file) {
    const auto base = src.file->parent_path();
    for (auto* path : {&c.paths.data_dir, &c.paths.cache_dir, &c.paths.output_dir, &c.tuner.trial_log}) {
      if (!path->empty() && path->is_relative()) *path = base / *path;
    }
  }
  c.gbt.seed = derive_seed(c.seed, "gbt");
  c.lstm.seed = derive_seed(c.seed, "lstm");
  c.tuner.space.seed = derive_seed(c.seed, "tuner");
  c.validate();
  return c;
}

}  // namespace pfcast
