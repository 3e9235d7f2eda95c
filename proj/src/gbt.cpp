#include "pfcast/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pfcast/error.hpp"

namespace pfcast::gbt {

void GbtParams::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("gbt: eta must be in (0, 1]");
  if (max_depth < 1) throw ValidationError("gbt: max_depth must be >= 1");
  if (!(min_child_weight >= 0.0)) throw ValidationError("gbt: min_child_weight must be >= 0");
  if (!(lambda >= 0.0)) throw ValidationError("gbt: lambda must be >= 0");
  if (!(alpha >= 0.0)) throw ValidationError("gbt: alpha must be >= 0");
  if (n_rounds < 1) throw ValidationError("gbt: n_rounds must be >= 1");
  if (!(gamma >= 0.0)) throw ValidationError("gbt: gamma must be >= 0");
}

nlohmann::json GbtParams::to_json() const {
  nlohmann::json j{{"eta", eta},       {"max_depth", max_depth}, {"min_child_weight", min_child_weight},
                   {"lambda", lambda}, {"alpha", alpha},         {"n_rounds", n_rounds},
                   {"gamma", gamma},   {"seed", seed}};
  if (!is_missing(base_score)) j["base_score"] = base_score;
  return j;
}

GbtParams GbtParams::from_json(const nlohmann::json& j) { return from_json(j, GbtParams{}); }

GbtParams GbtParams::from_json(const nlohmann::json& j, GbtParams p) {
  try {
    if (j.contains("eta")) p.eta = j.at("eta").get<double>();
    if (j.contains("max_depth")) p.max_depth = j.at("max_depth").get<int>();
    if (j.contains("min_child_weight")) p.min_child_weight = j.at("min_child_weight").get<double>();
    if (j.contains("lambda")) p.lambda = j.at("lambda").get<double>();
    if (j.contains("alpha")) p.alpha = j.at("alpha").get<double>();
    if (j.contains("n_rounds")) p.n_rounds = j.at("n_rounds").get<int>();
    if (j.contains("gamma")) p.gamma = j.at("gamma").get<double>();
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("base_score")) p.base_score = j.at("base_score").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("gbt params: ") + e.what());
  }
  p.validate();
  return p;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) continue;
    d[static_cast<std::size_t>(n.left)] = d[i] + 1;
    d[static_cast<std::size_t>(n.right)] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

std::size_t Tree::n_internal() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return !n.is_leaf(); }));
}

double soft_threshold(double g, double alpha) noexcept {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

double leaf_weight(double g, double h, double lambda, double alpha) {
  if (!(h + lambda > 0.0)) throw NumericError("leaf weight: H + lambda must be positive");
  return -soft_threshold(g, alpha) / (h + lambda);
}

namespace {

double score(double g, double h, double lambda, double alpha) {
  const double t = soft_threshold(g, alpha);
  const double denom = h + lambda;
  return denom > 0.0 ? t * t / denom : 0.0;
}

}  // namespace

double split_gain(double gl, double hl, double gr, double hr, double lambda, double alpha, double gamma) {
  return 0.5 * (score(gl, hl, lambda, alpha) + score(gr, hr, lambda, alpha) -
                score(gl + gr, hl + hr, lambda, alpha)) -
         gamma;
}

double split_threshold(double a, double b) noexcept {
  const double mid = a + (b - a) / 2.0;
  return mid > a ? mid : b;
}

SortedColumns::SortedColumns(const FeatureMatrix& x) : present_(x.n_features()), missing_(x.n_features()) {
  const auto n = x.n_rows();
#pragma omp parallel for schedule(dynamic)
  for (std::size_t f = 0; f < x.n_features(); ++f) {
    auto col = x.column(f);
    auto& p = present_[f];
    auto& m = missing_[f];
    for (std::uint32_t r = 0; r < n; ++r) (is_missing(col[r]) ? m : p).push_back(r);
    std::sort(p.begin(), p.end(), [&](std::uint32_t a, std::uint32_t b) {
      return col[a] < col[b] || (col[a] == col[b] && a < b);
    });
  }
}

namespace {

// Tries both default directions at one threshold and keeps the candidate if
// it strictly improves on `best`.
inline void consider(SplitCandidate& best, int feature, double threshold, double gl, double hl, double g_miss,
                     double h_miss, double g_total, double h_total, const GbtParams& p) {
  auto try_one = [&](double l_g, double l_h, bool default_left) {
    const double r_g = g_total - l_g, r_h = h_total - l_h;
    if (l_h < p.min_child_weight || r_h < p.min_child_weight) return;
    const double gain = split_gain(l_g, l_h, r_g, r_h, p.lambda, p.alpha, p.gamma);
    if (gain > best.gain) best = SplitCandidate{feature, threshold, default_left, gain, l_g, l_h, r_g, r_h};
  };
  try_one(gl, hl, false);
  if (h_miss > 0.0) try_one(gl + g_miss, hl + h_miss, true);
}

}  // namespace

std::vector<SplitCandidate> find_level_splits(const FeatureMatrix& x, const SortedColumns& sorted,
                                              std::span<const int> node_of_row, int n_nodes,
                                              std::span<const double> grad, std::span<const double> hess,
                                              const GbtParams& params) {
  const auto nn = static_cast<std::size_t>(n_nodes);
  std::vector<double> g_total(nn, 0.0), h_total(nn, 0.0);
  for (std::size_t r = 0; r < node_of_row.size(); ++r) {
    if (node_of_row[r] < 0) continue;
    g_total[static_cast<std::size_t>(node_of_row[r])] += grad[r];
    h_total[static_cast<std::size_t>(node_of_row[r])] += hess[r];
  }

  const std::size_t nf = x.n_features();
  std::vector<SplitCandidate> per_feature(nf * nn);

#pragma omp parallel
  {
    std::vector<double> gl(nn), hl(nn), gm(nn), hm(nn), last(nn);
    std::vector<char> seen(nn);
#pragma omp for schedule(dynamic)
    for (std::size_t f = 0; f < nf; ++f) {
      std::fill(gl.begin(), gl.end(), 0.0);
      std::fill(hl.begin(), hl.end(), 0.0);
      std::fill(gm.begin(), gm.end(), 0.0);
      std::fill(hm.begin(), hm.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0);
      for (auto r : sorted.missing(f)) {
        const int n = node_of_row[r];
        if (n < 0) continue;
        gm[static_cast<std::size_t>(n)] += grad[r];
        hm[static_cast<std::size_t>(n)] += hess[r];
      }
      auto col = x.column(f);
      SplitCandidate* best = per_feature.data() + f * nn;
      for (auto r : sorted.present(f)) {
        const int ni = node_of_row[r];
        if (ni < 0) continue;
        const auto n = static_cast<std::size_t>(ni);
        const double v = col[r];
        if (seen[n] && v != last[n]) {
          consider(best[n], static_cast<int>(f), split_threshold(last[n], v), gl[n], hl[n], gm[n], hm[n],
                   g_total[n], h_total[n], params);
        }
        gl[n] += grad[r];
        hl[n] += hess[r];
        last[n] = v;
        seen[n] = 1;
      }
    }
  }

  std::vector<SplitCandidate> best(nn);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t n = 0; n < nn; ++n) {
      const auto& c = per_feature[f * nn + n];
      if (c.valid() && c.gain > best[n].gain) best[n] = c;
    }
  }
  return best;
}

namespace {

void validate_training_inputs(const FeatureMatrix& m, const char* what) {
  for (std::size_t f = 0; f < m.n_features(); ++f) {
    for (double v : m.column(f)) {
      if (std::isinf(v)) {
        throw ValidationError(std::string("gbt: infinite value in ") + what + " feature '" + m.feature_names()[f] + "'");
      }
    }
  }
  for (double t : m.target()) {
    if (!std::isfinite(t)) throw ValidationError(std::string("gbt: non-finite target in ") + what + " data");
  }
}

double rmse_of(std::span<const double> pred, std::span<const double> target) {
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

std::vector<std::size_t> column_map(const GbtModel& model, const FeatureMatrix& rows) {
  std::vector<std::size_t> map;
  map.reserve(model.feature_names.size());
  for (const auto& name : model.feature_names) {
    auto idx = rows.index_of(name);
    if (!idx) throw SchemaError("gbt predict: input lacks feature column '" + name + "'");
    map.push_back(*idx);
  }
  return map;
}

Tree grow_tree(const FeatureMatrix& x, const SortedColumns& sorted, std::span<const double> grad,
               std::span<const double> hess, const GbtParams& p) {
  Tree tree;
  tree.nodes.emplace_back();
  const std::size_t n = x.n_rows();
  std::vector<int> node_of_row(n, 0);
  std::vector<int> slot_node{0};  // slot -> tree node id

  auto finalize_leaf = [&](int node, double g, double h) {
    tree.nodes[static_cast<std::size_t>(node)].weight = leaf_weight(g, h, p.lambda, p.alpha);
  };

  for (int depth = 0; depth < p.max_depth && !slot_node.empty(); ++depth) {
    const int n_slots = static_cast<int>(slot_node.size());
    auto splits = find_level_splits(x, sorted, node_of_row, n_slots, grad, hess, p);

    std::vector<int> next_slot_left(slot_node.size(), -1), next_slot_right(slot_node.size(), -1);
    std::vector<int> next_slots;
    std::vector<double> g_tot(slot_node.size(), 0.0), h_tot(slot_node.size(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      if (node_of_row[r] < 0) continue;
      g_tot[static_cast<std::size_t>(node_of_row[r])] += grad[r];
      h_tot[static_cast<std::size_t>(node_of_row[r])] += hess[r];
    }
    for (std::size_t s = 0; s < slot_node.size(); ++s) {
      const int node = slot_node[s];
      const auto& c = splits[s];
      if (!c.valid()) {
        finalize_leaf(node, g_tot[s], h_tot[s]);
        continue;
      }
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& nd = tree.nodes[static_cast<std::size_t>(node)];
      nd.feature = c.feature;
      nd.threshold = c.threshold;
      nd.default_left = c.default_left;
      nd.left = left;
      nd.right = left + 1;
      next_slot_left[s] = static_cast<int>(next_slots.size());
      next_slots.push_back(left);
      next_slot_right[s] = static_cast<int>(next_slots.size());
      next_slots.push_back(left + 1);
    }
    for (std::size_t r = 0; r < n; ++r) {
      const int s = node_of_row[r];
      if (s < 0) continue;
      const auto su = static_cast<std::size_t>(s);
      if (next_slot_left[su] < 0) {
        node_of_row[r] = -1;
        continue;
      }
      const auto& nd = tree.nodes[static_cast<std::size_t>(slot_node[su])];
      const double v = x.value(r, static_cast<std::size_t>(nd.feature));
      const bool go_left = is_missing(v) ? nd.default_left : v < nd.threshold;
      node_of_row[r] = go_left ? next_slot_left[su] : next_slot_right[su];
    }
    slot_node = std::move(next_slots);
  }

  // Nodes still open at max depth become leaves.
  if (!slot_node.empty()) {
    std::vector<double> g_tot(slot_node.size(), 0.0), h_tot(slot_node.size(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      if (node_of_row[r] < 0) continue;
      g_tot[static_cast<std::size_t>(node_of_row[r])] += grad[r];
      h_tot[static_cast<std::size_t>(node_of_row[r])] += hess[r];
    }
    for (std::size_t s = 0; s < slot_node.size(); ++s) finalize_leaf(slot_node[s], g_tot[s], h_tot[s]);
  }
  return tree;
}

}  // namespace

FitResult fit(const FeatureMatrix& train, const GbtParams& params, const FeatureMatrix* eval) {
  params.validate();
  if (train.n_rows() == 0) throw ValidationError("gbt: empty training data");
  validate_training_inputs(train, "training");
  std::vector<std::size_t> eval_map;
  if (eval) {
    validate_training_inputs(*eval, "evaluation");
    GbtModel probe;
    probe.feature_names = train.feature_names();
    eval_map = column_map(probe, *eval);
  }

  FitResult out;
  auto& model = out.model;
  model.params = params;
  model.eta = params.eta;
  model.feature_names = train.feature_names();
  const auto y = train.target();
  const std::size_t n = train.n_rows();
  model.base_score = is_missing(params.base_score)
                         ? std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n)
                         : params.base_score;

  const SortedColumns sorted(train);
  std::vector<double> pred(n, model.base_score), grad(n), hess(n, 1.0);
  std::vector<double> eval_pred(eval ? eval->n_rows() : 0, model.base_score);

  for (int round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y[i];
    Tree tree = grow_tree(train, sorted, grad, hess, params);

#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] += params.eta * tree.evaluate([&](int f) { return train.value(i, static_cast<std::size_t>(f)); });
    }
    out.log.train_rmse.push_back(rmse_of(pred, y));
    if (eval && eval->n_rows() > 0) {
#pragma omp parallel for schedule(static)
      for (std::size_t i = 0; i < eval->n_rows(); ++i) {
        eval_pred[i] += params.eta * tree.evaluate([&](int f) { return eval->value(i, eval_map[static_cast<std::size_t>(f)]); });
      }
      out.log.eval_rmse.push_back(rmse_of(eval_pred, eval->target()));
    }
    model.trees.push_back(std::move(tree));
  }
  return out;
}

std::vector<double> predict(const GbtModel& model, const FeatureMatrix& rows) {
  const auto map = column_map(model, rows);
  std::vector<double> out(rows.n_rows(), model.base_score);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < rows.n_rows(); ++i) {
    double sum = 0.0;
    for (const auto& tree : model.trees) {
      sum += tree.evaluate([&](int f) { return rows.value(i, map[static_cast<std::size_t>(f)]); });
    }
    out[i] += model.eta * sum;
  }
  return out;
}

std::vector<std::pair<std::string, int>> importance(const GbtModel& model) {
  std::vector<int> counts(model.feature_names.size(), 0);
  for (const auto& t : model.trees) {
    for (const auto& n : t.nodes) {
      if (!n.is_leaf()) ++counts[static_cast<std::size_t>(n.feature)];
    }
  }
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  std::vector<std::pair<std::string, int>> out;
  for (auto f : order) {
    if (counts[f] > 0) out.emplace_back(model.feature_names[f], counts[f]);
  }
  return out;
}

GbtModel truncated(const GbtModel& model, std::size_t n_trees) {
  GbtModel out = model;
  if (out.trees.size() > n_trees) out.trees.resize(n_trees);
  out.params.n_rounds = static_cast<int>(std::max<std::size_t>(1, out.trees.size()));
  return out;
}

namespace {

nlohmann::json node_to_json(const Tree& t, int i) {
  const auto& n = t.nodes[static_cast<std::size_t>(i)];
  if (n.is_leaf()) return {{"leaf", n.weight}};
  return {{"feat", n.feature},
          {"thr", n.threshold},
          {"default_left", n.default_left},
          {"left", node_to_json(t, n.left)},
          {"right", node_to_json(t, n.right)}};
}

int node_from_json(Tree& t, const nlohmann::json& j, std::size_t n_features) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  if (j.contains("leaf")) {
    t.nodes[static_cast<std::size_t>(id)].weight = j.at("leaf").get<double>();
    return id;
  }
  TreeNode n;
  n.feature = j.at("feat").get<int>();
  if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= n_features) {
    throw SchemaError("gbt model: split feature index out of range");
  }
  n.threshold = j.at("thr").get<double>();
  n.default_left = j.at("default_left").get<bool>();
  n.left = node_from_json(t, j.at("left"), n_features);
  n.right = node_from_json(t, j.at("right"), n_features);
  t.nodes[static_cast<std::size_t>(id)] = n;
  return id;
}

}  // namespace

nlohmann::json to_json(const GbtModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : model.trees) trees.push_back(node_to_json(t, 0));
  return {{"params", model.params.to_json()},
          {"base_score", model.base_score},
          {"eta", model.eta},
          {"feature_names", model.feature_names},
          {"trees", trees}};
}

GbtModel model_from_json(const nlohmann::json& j) {
  try {
    GbtModel m;
    m.params = GbtParams::from_json(j.at("params"));
    m.base_score = j.at("base_score").get<double>();
    m.eta = j.at("eta").get<double>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& tj : j.at("trees")) {
      Tree t;
      node_from_json(t, tj, m.feature_names.size());
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("gbt model: ") + e.what());
  }
}

}  // namespace pfcast::gbt
