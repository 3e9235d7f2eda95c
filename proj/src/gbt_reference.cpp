#include <algorithm>
#include <set>

#include "pfcast/gbt.hpp"

namespace pfcast::gbt::reference {

SplitCandidate best_split_exhaustive(const FeatureMatrix& x, std::span<const std::size_t> rows,
                                     std::span<const double> grad, std::span<const double> hess,
                                     const GbtParams& p) {
  SplitCandidate best;
  for (std::size_t f = 0; f < x.n_features(); ++f) {
    std::set<double> values;
    bool any_missing = false;
    for (auto r : rows) {
      const double v = x.value(r, f);
      if (is_missing(v)) {
        any_missing = true;
      } else {
        values.insert(v);
      }
    }
    if (values.size() < 2) continue;
    std::vector<double> distinct(values.begin(), values.end());
    for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
      const double thr = split_threshold(distinct[k], distinct[k + 1]);
      for (bool default_left : {false, true}) {
        if (default_left && !any_missing) continue;
        double gl = 0, hl = 0, gr = 0, hr = 0;
        for (auto r : rows) {
          const double v = x.value(r, f);
          const bool left = is_missing(v) ? default_left : v < thr;
          (left ? gl : gr) += grad[r];
          (left ? hl : hr) += hess[r];
        }
        if (hl < p.min_child_weight || hr < p.min_child_weight) continue;
        const double gain = split_gain(gl, hl, gr, hr, p.lambda, p.alpha, p.gamma);
        if (gain > best.gain) best = SplitCandidate{static_cast<int>(f), thr, default_left, gain, gl, hl, gr, hr};
      }
    }
  }
  return best;
}

}  // namespace pfcast::gbt::reference
