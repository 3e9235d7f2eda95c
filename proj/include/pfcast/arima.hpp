#pragma once

// Per-series ARIMA(p, d, q) via Hannan-Rissanen two-stage least squares,
// with a last-value persistence fallback for short or degenerate series.

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pfcast/panel.hpp"

namespace pfcast::arima {

struct ArimaOrder {
  int p = 1;
  int d = 1;
  int q = 1;
};

struct ArimaFit {
  ArimaOrder order;
  std::vector<double> phi;    // p AR coefficients
  std::vector<double> theta;  // q MA coefficients
  double intercept = 0.0;
  double sigma2 = 0.0;
  bool fallback_used = false;
};

/// d-fold first differences. Throws ValidationError when series.size() <= d.
std::vector<double> difference(std::span<const double> series, int d);

/// Minimum series length for a real fit: max(8, p + q + d + 4).
std::size_t min_length(const ArimaOrder& order) noexcept;

/// Throws ValidationError on non-finite values or negative orders. Returns a
/// fallback fit when the series is too short, the least-squares system is
/// singular, or the estimate is non-stationary or non-invertible.
ArimaFit fit_arima(std::span<const double> series, const ArimaOrder& order);

/// One-step-ahead forecast on the original scale. Fallback fits (and
/// histories too short for the order) return the last observation, or 0 for
/// an empty history.
double forecast_one(const ArimaFit& fit, std::span<const double> history);

struct SeriesResult {
  RowKey key;
  ArimaFit fit;
  std::vector<double> in_sample;  // one-step predictions for training blocks train_first+1 .. train_last
  double validation = 0.0;
  double test = 0.0;
};

struct ArimaRun {
  ArimaOrder order;
  SplitSpec split;
  std::vector<SeriesResult> series;  // sorted by key
  std::size_t fallback_count = 0;

  /// Prediction for a row; pairs without training history get 0. Blocks inside
  /// the training range use in-sample one-step predictions.
  double predict(int block, const RowKey& key) const;
  double fallback_rate() const noexcept {
    return series.empty() ? 0.0 : static_cast<double>(fallback_count) / static_cast<double>(series.size());
  }

 private:
  friend ArimaRun fit_all(const PanelGrid&, const ArimaOrder&, const SplitSpec&);
  std::map<RowKey, std::size_t> index_;
};

/// One independent fit per (shop, item) series seen in the training blocks,
/// zero-filled where a cell is absent. Series are fitted in parallel.
ArimaRun fit_all(const PanelGrid& grid, const ArimaOrder& order, const SplitSpec& split);

/// `shop_id,item_id,p,d,q,phi_1..phi_p,theta_1..theta_q,fallback_used,sigma2`.
std::string diagnostics_csv(const ArimaRun& run);

}  // namespace pfcast::arima
