#include "pfcast/arima.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "pfcast/csv.hpp"
#include "pfcast/error.hpp"

namespace pfcast::arima {

namespace {

// Least squares via Cholesky on the normal equations. nullopt when the
// system is numerically singular.
std::optional<std::vector<double>> least_squares(const std::vector<std::vector<double>>& rows,
                                                 std::span<const double> y) {
  if (rows.empty()) return std::nullopt;
  const std::size_t k = rows.front().size();
  if (rows.size() <= k) return std::nullopt;
  std::vector<double> a(k * k, 0.0), b(k, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& x = rows[i];
    for (std::size_t r = 0; r < k; ++r) {
      b[r] += x[r] * y[i];
      for (std::size_t c = 0; c <= r; ++c) a[r * k + c] += x[r] * x[c];
    }
  }
  double max_diag = 0.0;
  for (std::size_t r = 0; r < k; ++r) max_diag = std::max(max_diag, a[r * k + r]);
  if (!(max_diag > 0.0)) return std::nullopt;
  const double tol = 1e-10 * max_diag;

  std::vector<double> l(k * k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c <= r; ++c) {
      double s = a[r * k + c];
      for (std::size_t m = 0; m < c; ++m) s -= l[r * k + m] * l[c * k + m];
      if (r == c) {
        if (!(s > tol)) return std::nullopt;
        l[r * k + r] = std::sqrt(s);
      } else {
        l[r * k + c] = s / l[c * k + c];
      }
    }
  }
  std::vector<double> z(k), beta(k);
  for (std::size_t r = 0; r < k; ++r) {
    double s = b[r];
    for (std::size_t m = 0; m < r; ++m) s -= l[r * k + m] * z[m];
    z[r] = s / l[r * k + r];
  }
  for (std::size_t r = k; r-- > 0;) {
    double s = z[r];
    for (std::size_t m = r + 1; m < k; ++m) s -= l[m * k + r] * beta[m];
    beta[r] = s / l[r * k + r];
  }
  for (double v : beta) {
    if (!std::isfinite(v)) return std::nullopt;
  }
  return beta;
}

ArimaFit fallback(const ArimaOrder& order) {
  ArimaFit f;
  f.order = order;
  f.phi.assign(static_cast<std::size_t>(order.p), 0.0);
  f.theta.assign(static_cast<std::size_t>(order.q), 0.0);
  f.fallback_used = true;
  return f;
}

// x_t = sum_i a_i x_{t-i} is stable iff every reflection coefficient from the
// step-down recursion lies strictly inside (-1, 1).
bool is_stable(std::vector<double> a) {
  for (std::size_t k = a.size(); k > 0; --k) {
    const double r = a[k - 1];
    if (!(std::abs(r) < 1.0 - 1e-8)) return false;
    std::vector<double> next(k - 1);
    for (std::size_t i = 0; i + 1 < k; ++i) next[i] = (a[i] + r * a[k - 2 - i]) / (1.0 - r * r);
    a = std::move(next);
  }
  return true;
}

// Conditional residuals of the fitted ARMA on the differenced series.
std::vector<double> arma_residuals(const ArimaFit& fit, std::span<const double> w) {
  const auto p = fit.phi.size(), q = fit.theta.size();
  const std::size_t start = std::max(p, q);
  std::vector<double> e(w.size(), 0.0);
  for (std::size_t t = start; t < w.size(); ++t) {
    double pred = fit.intercept;
    for (std::size_t i = 1; i <= p; ++i) pred += fit.phi[i - 1] * w[t - i];
    for (std::size_t j = 1; j <= q; ++j) pred += fit.theta[j - 1] * e[t - j];
    e[t] = w[t] - pred;
  }
  return e;
}

}  // namespace

std::vector<double> difference(std::span<const double> series, int d) {
  if (d < 0) throw ValidationError("difference: negative order");
  if (series.size() <= static_cast<std::size_t>(d)) {
    throw ValidationError("difference: series of length " + std::to_string(series.size()) +
                          " is too short for order " + std::to_string(d));
  }
  std::vector<double> w(series.begin(), series.end());
  for (int k = 0; k < d; ++k) {
    for (std::size_t t = 0; t + 1 < w.size(); ++t) w[t] = w[t + 1] - w[t];
    w.pop_back();
  }
  return w;
}

std::size_t min_length(const ArimaOrder& o) noexcept {
  return static_cast<std::size_t>(std::max(8, o.p + o.q + o.d + 4));
}

ArimaFit fit_arima(std::span<const double> series, const ArimaOrder& order) {
  if (order.p < 0 || order.d < 0 || order.q < 0) throw ValidationError("arima: negative order");
  for (double v : series) {
    if (!std::isfinite(v)) throw ValidationError("arima: non-finite value in series");
  }
  if (series.size() < min_length(order)) return fallback(order);

  const auto w = difference(series, order.d);
  const auto n = w.size();
  const auto p = static_cast<std::size_t>(order.p), q = static_cast<std::size_t>(order.q);

  // Stage 1: long autoregression for innovation proxies.
  std::vector<double> resid(n, 0.0);
  std::size_t start = p;
  if (q > 0) {
    const double ln = std::log(static_cast<double>(n));
    const std::size_t m = std::max<std::size_t>(2 * std::max(p, q),
                                                std::min<std::size_t>(static_cast<std::size_t>(ln * ln), n / 3));
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (std::size_t t = m; t < n; ++t) {
      std::vector<double> row{1.0};
      for (std::size_t i = 1; i <= m; ++i) row.push_back(w[t - i]);
      x.push_back(std::move(row));
      y.push_back(w[t]);
    }
    auto beta = least_squares(x, y);
    if (!beta) return fallback(order);
    for (std::size_t t = m; t < n; ++t) {
      double pred = 0.0;
      for (std::size_t c = 0; c < beta->size(); ++c) pred += (*beta)[c] * x[t - m][c];
      resid[t] = w[t] - pred;
    }
    start = std::max(p, m + q);
  }

  // Stage 2: regress on own lags and lagged innovation proxies.
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (std::size_t t = start; t < n; ++t) {
    std::vector<double> row{1.0};
    for (std::size_t i = 1; i <= p; ++i) row.push_back(w[t - i]);
    for (std::size_t j = 1; j <= q; ++j) row.push_back(resid[t - j]);
    x.push_back(std::move(row));
    y.push_back(w[t]);
  }
  auto beta = least_squares(x, y);
  if (!beta) return fallback(order);

  ArimaFit fit;
  fit.order = order;
  fit.intercept = (*beta)[0];
  fit.phi.assign(beta->begin() + 1, beta->begin() + 1 + static_cast<std::ptrdiff_t>(p));
  fit.theta.assign(beta->begin() + 1 + static_cast<std::ptrdiff_t>(p), beta->end());
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pred = 0.0;
    for (std::size_t c = 0; c < beta->size(); ++c) pred += (*beta)[c] * x[i][c];
    ss += (y[i] - pred) * (y[i] - pred);
  }
  fit.sigma2 = ss / static_cast<double>(x.size());
  if (!std::isfinite(fit.sigma2)) return fallback(order);
  std::vector<double> neg_theta(fit.theta.size());
  std::transform(fit.theta.begin(), fit.theta.end(), neg_theta.begin(), [](double t) { return -t; });
  if (!is_stable(fit.phi) || !is_stable(neg_theta)) return fallback(order);
  return fit;
}

double forecast_one(const ArimaFit& fit, std::span<const double> history) {
  if (history.empty()) return 0.0;
  const double last = history.back();
  const auto d = static_cast<std::size_t>(fit.order.d);
  if (fit.fallback_used || history.size() < d + std::max<std::size_t>(1, fit.phi.size())) return last;

  const auto w = difference(history, fit.order.d);
  const auto e = arma_residuals(fit, w);
  const auto n = w.size();
  double next = fit.intercept;
  for (std::size_t i = 1; i <= fit.phi.size(); ++i) next += fit.phi[i - 1] * w[n - i];
  for (std::size_t j = 1; j <= std::min(fit.theta.size(), n); ++j) next += fit.theta[j - 1] * e[n - j];

  // Undo differencing: y_{n+1} = w_{n+1} + sum_k last value of the k-th difference.
  std::vector<double> level(history.begin(), history.end());
  double forecast = next;
  for (std::size_t k = 0; k < d; ++k) {
    forecast += level.back();
    for (std::size_t t = 0; t + 1 < level.size(); ++t) level[t] = level[t + 1] - level[t];
    level.pop_back();
  }
  return forecast;
}

double ArimaRun::predict(int block, const RowKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return 0.0;
  const auto& s = series[it->second];
  if (block == split.validation_block) return s.validation;
  if (block == split.test_block) return s.test;
  if (block > split.train_first && block <= split.train_last) {
    return s.in_sample[static_cast<std::size_t>(block - split.train_first - 1)];
  }
  return 0.0;
}

ArimaRun fit_all(const PanelGrid& grid, const ArimaOrder& order, const SplitSpec& split) {
  split.validate();
  ArimaRun run;
  run.order = order;
  run.split = split;

  std::map<RowKey, std::vector<double>> histories;
  const auto len = static_cast<std::size_t>(split.train_last - split.train_first + 1);
  for (int b = split.train_first; b <= split.train_last; ++b) {
    for (const auto& c : grid.block(b)) {
      auto [it, inserted] = histories.try_emplace(RowKey{c.shop_id, c.item_id});
      if (inserted) it->second.assign(len + 1, 0.0);  // last slot holds the validation value
      it->second[static_cast<std::size_t>(b - split.train_first)] = c.item_cnt_month;
    }
  }
  for (auto& [key, h] : histories) {
    if (const auto* c = grid.find(split.validation_block, key.shop_id, key.item_id)) h[len] = c->item_cnt_month;
  }

  std::vector<std::pair<RowKey, const std::vector<double>*>> work;
  work.reserve(histories.size());
  for (const auto& [key, h] : histories) work.emplace_back(key, &h);
  run.series.resize(work.size());

#pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < work.size(); ++i) {
    const std::span<const double> full(*work[i].second);
    const auto train = full.first(len);
    SeriesResult r;
    r.key = work[i].first;
    r.fit = fit_arima(train, order);
    r.in_sample.reserve(len - 1);
    for (std::size_t t = 1; t < len; ++t) r.in_sample.push_back(forecast_one(r.fit, train.first(t)));
    r.validation = forecast_one(r.fit, train);
    r.test = forecast_one(r.fit, full);
    run.series[i] = std::move(r);
  }

  for (std::size_t i = 0; i < run.series.size(); ++i) {
    run.index_.emplace(run.series[i].key, i);
    if (run.series[i].fit.fallback_used) ++run.fallback_count;
  }
  return run;
}

std::string diagnostics_csv(const ArimaRun& run) {
  std::string out = "shop_id,item_id,p,d,q";
  for (int i = 1; i <= run.order.p; ++i) out += ",phi_" + std::to_string(i);
  for (int j = 1; j <= run.order.q; ++j) out += ",theta_" + std::to_string(j);
  out += ",fallback_used,sigma2\n";
  for (const auto& s : run.series) {
    out += std::to_string(s.key.shop_id) + "," + std::to_string(s.key.item_id) + "," + std::to_string(run.order.p) +
           "," + std::to_string(run.order.d) + "," + std::to_string(run.order.q);
    for (double v : s.fit.phi) {
      out += ',';
      append_double(out, v);
    }
    for (double v : s.fit.theta) {
      out += ',';
      append_double(out, v);
    }
    out += s.fit.fallback_used ? ",1," : ",0,";
    append_double(out, s.fit.sigma2);
    out += '\n';
  }
  return out;
}

}  // namespace pfcast::arima
