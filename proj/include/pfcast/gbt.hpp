#pragma once

// Second-order gradient-boosted regression trees with squared loss,
// L1 (soft-threshold) and L2 leaf regularization, min-child-weight,
// depth limit and shrinkage. Exact greedy split search over sorted values;
// missing values are routed to a learned default direction.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pfcast/panel.hpp"

namespace pfcast::gbt {

struct GbtParams {
  double eta = 0.148;
  int max_depth = 6;
  double min_child_weight = 26.0;
  double lambda = 0.171;
  double alpha = 0.170;
  int n_rounds = 100;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  /// Initial prediction; the missing sentinel means "training target mean".
  double base_score = kMissing;

  void validate() const;
  nlohmann::json to_json() const;
  static GbtParams from_json(const nlohmann::json& j);
  static GbtParams from_json(const nlohmann::json& j, GbtParams defaults);
};

/// Internal when feature >= 0: rows with x < threshold go left, missing
/// values follow default_left. Leaf otherwise.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  bool default_left = false;
  int left = -1;
  int right = -1;
  double weight = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <typename Row>
  double evaluate(const Row& value_of) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      const double v = value_of(n.feature);
      const bool go_left = is_missing(v) ? n.default_left : v < n.threshold;
      i = go_left ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].weight;
  }
  int depth() const;
  std::size_t n_internal() const;
};

/// prediction = base_score + eta * sum of tree outputs; leaf weights are
/// stored unshrunk.
struct GbtModel {
  GbtParams params;
  double base_score = 0.0;
  double eta = 1.0;
  std::vector<std::string> feature_names;
  std::vector<Tree> trees;
};

struct FitLog {
  std::vector<double> train_rmse;
  std::vector<double> eval_rmse;
};

struct FitResult {
  GbtModel model;
  FitLog log;
};

/// T_alpha(G): G - alpha if G > alpha, G + alpha if G < -alpha, else 0.
double soft_threshold(double g, double alpha) noexcept;
/// -T_alpha(G) / (H + lambda). Throws NumericError when H + lambda <= 0.
double leaf_weight(double g, double h, double lambda, double alpha);
/// 0.5 * [score(L) + score(R) - score(L u R)] - gamma, score = T_alpha(G)^2 / (H + lambda).
double split_gain(double gl, double hl, double gr, double hr, double lambda, double alpha, double gamma);

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  bool default_left = false;
  double gain = 0.0;
  double gl = 0.0, hl = 0.0, gr = 0.0, hr = 0.0;

  bool valid() const noexcept { return feature >= 0; }
};

/// Midpoint between consecutive distinct values a < b, never equal to a.
double split_threshold(double a, double b) noexcept;

/// Per feature: non-missing rows sorted by (value, row), and missing rows.
class SortedColumns {
 public:
  explicit SortedColumns(const FeatureMatrix& x);
  std::span<const std::uint32_t> present(std::size_t feature) const { return present_[feature]; }
  std::span<const std::uint32_t> missing(std::size_t feature) const { return missing_[feature]; }

 private:
  std::vector<std::vector<std::uint32_t>> present_;
  std::vector<std::vector<std::uint32_t>> missing_;
};

/// Best admissible split for every node slot of one tree level. Rows with
/// node_of_row < 0 are inactive. Features are scanned in parallel; ties go to
/// the lowest feature index, then the lowest threshold, then missing-right.
std::vector<SplitCandidate> find_level_splits(const FeatureMatrix& x, const SortedColumns& sorted,
                                              std::span<const int> node_of_row, int n_nodes,
                                              std::span<const double> grad, std::span<const double> hess,
                                              const GbtParams& params);

namespace reference {
/// Brute-force enumeration of every (feature, threshold, default direction)
/// for one node, summing gradients directly per candidate. Same tie rules.
SplitCandidate best_split_exhaustive(const FeatureMatrix& x, std::span<const std::size_t> rows,
                                     std::span<const double> grad, std::span<const double> hess,
                                     const GbtParams& params);
}  // namespace reference

/// Throws ValidationError on empty input, infinite feature values or
/// non-finite targets.
FitResult fit(const FeatureMatrix& train, const GbtParams& params, const FeatureMatrix* eval = nullptr);

/// Throws SchemaError if a model feature is absent from `rows`.
std::vector<double> predict(const GbtModel& model, const FeatureMatrix& rows);

/// Split counts per feature, descending (ties by feature index). Features
/// never used are omitted.
std::vector<std::pair<std::string, int>> importance(const GbtModel& model);

/// First `n_trees` trees only.
GbtModel truncated(const GbtModel& model, std::size_t n_trees);

nlohmann::json to_json(const GbtModel& model);
GbtModel model_from_json(const nlohmann::json& j);

}  // namespace pfcast::gbt
