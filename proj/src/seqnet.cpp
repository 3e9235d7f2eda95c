#include "pfcast/seqnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pfcast/error.hpp"

namespace pfcast::seqnet {

void SeqNetParams::validate() const {
  if (hidden_lstm < 1 || hidden_static < 1 || hidden_merge < 1) throw ValidationError("lstm: layer widths must be >= 1");
  if (!(l2_lambda >= 0.0)) throw ValidationError("lstm: l2_lambda must be >= 0");
  if (batch_size < 1) throw ValidationError("lstm: batch_size must be >= 1");
  if (epochs < 0) throw ValidationError("lstm: epochs must be >= 0");
  if (window < 1) throw ValidationError("lstm: window must be >= 1");
  if (!(adam.alpha >= 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.epsilon > 0.0)) {
    throw ValidationError("lstm: invalid Adam parameters");
  }
}

nlohmann::json SeqNetParams::to_json() const {
  return {{"hidden_lstm", hidden_lstm},
          {"hidden_static", hidden_static},
          {"hidden_merge", hidden_merge},
          {"l2_lambda", l2_lambda},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"adam", {{"alpha", adam.alpha}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"epsilon", adam.epsilon}}},
          {"seed", seed},
          {"window", window}};
}

SeqNetParams SeqNetParams::from_json(const nlohmann::json& j) { return from_json(j, SeqNetParams{}); }

SeqNetParams SeqNetParams::from_json(const nlohmann::json& j, SeqNetParams p) {
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("hidden_lstm", p.hidden_lstm);
    get("hidden_static", p.hidden_static);
    get("hidden_merge", p.hidden_merge);
    get("l2_lambda", p.l2_lambda);
    get("batch_size", p.batch_size);
    get("epochs", p.epochs);
    get("seed", p.seed);
    get("window", p.window);
    if (j.contains("adam")) {
      const auto& a = j.at("adam");
      if (a.contains("alpha")) p.adam.alpha = a.at("alpha").get<double>();
      if (a.contains("beta1")) p.adam.beta1 = a.at("beta1").get<double>();
      if (a.contains("beta2")) p.adam.beta2 = a.at("beta2").get<double>();
      if (a.contains("epsilon")) p.adam.epsilon = a.at("epsilon").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("lstm params: ") + e.what());
  }
  p.validate();
  return p;
}

bool is_weight_matrix(Param p) noexcept {
  switch (p) {
    case Param::W_x:
    case Param::W_h:
    case Param::W_s:
    case Param::W_m:
    case Param::w_o:
      return true;
    default:
      return false;
  }
}

// -------------------------------------------------------------- Standardizer

Standardizer Standardizer::fit(const SequenceSet& s) {
  Standardizer z;
  const std::size_t n = s.size(), d = s.n_dynamic(), ns = s.n_static(), w = s.window;
  auto finish = [](std::vector<double>& mean, std::vector<double>& scale, const std::vector<double>& sq, double count) {
    for (std::size_t j = 0; j < mean.size(); ++j) {
      mean[j] /= count;
      const double var = sq[j] / count - mean[j] * mean[j];
      scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
  };
  z.dynamic_mean.assign(d, 0.0);
  z.dynamic_scale.assign(d, 1.0);
  std::vector<double> sq(d, 0.0);
  for (std::size_t i = 0; i < n * w; ++i) {
    for (std::size_t f = 0; f < d; ++f) {
      const double v = s.dynamic[i * d + f];
      z.dynamic_mean[f] += v;
      sq[f] += v * v;
    }
  }
  if (n > 0) finish(z.dynamic_mean, z.dynamic_scale, sq, static_cast<double>(n * w));

  z.static_mean.assign(ns, 0.0);
  z.static_scale.assign(ns, 1.0);
  std::vector<double> sq2(ns, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < ns; ++f) {
      const double v = s.statics[i * ns + f];
      z.static_mean[f] += v;
      sq2[f] += v * v;
    }
  }
  if (n > 0) finish(z.static_mean, z.static_scale, sq2, static_cast<double>(n));

  if (n > 0) {
    std::vector<double> tm{0.0}, ts{1.0}, tsq{0.0};
    for (double t : s.target) {
      tm[0] += t;
      tsq[0] += t * t;
    }
    finish(tm, ts, tsq, static_cast<double>(n));
    z.target_mean = tm[0];
    z.target_scale = ts[0];
  }
  return z;
}

SequenceSet Standardizer::apply(const SequenceSet& s) const {
  if (dynamic_mean.size() != s.n_dynamic() || static_mean.size() != s.n_static()) {
    throw ValidationError("lstm: input widths do not match the model's scaling");
  }
  SequenceSet out = s;
  const std::size_t d = s.n_dynamic(), ns = s.n_static();
  for (std::size_t i = 0; i < out.dynamic.size(); ++i) {
    const auto f = i % d;
    out.dynamic[i] = (out.dynamic[i] - dynamic_mean[f]) / dynamic_scale[f];
  }
  for (std::size_t i = 0; i < out.statics.size(); ++i) {
    const auto f = i % ns;
    out.statics[i] = (out.statics[i] - static_mean[f]) / static_scale[f];
  }
  for (double& t : out.target) t = (t - target_mean) / target_scale;
  return out;
}

// ------------------------------------------------------------------- model

SeqNetModel::SeqNetModel(const Shape& shape) : shape_(shape) {
  const std::size_t d = shape.n_dynamic, h = shape.hidden_lstm, ns = shape.n_static, s = shape.hidden_static,
                    m = shape.hidden_merge;
  sizes_ = {4 * h * d, 4 * h * h, 4 * h, s * ns, s, m * (h + s), m, m, 1};
  std::size_t off = 0;
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    offsets_[i] = off;
    off += sizes_[i];
  }
  weights_.assign(off, 0.0);
}

std::span<double> SeqNetModel::block(Param p) {
  return std::span<double>(weights_).subspan(offset(p), block_size(p));
}

std::span<const double> SeqNetModel::block(Param p) const {
  return std::span<const double>(weights_).subspan(offset(p), block_size(p));
}

SeqNetModel init_model(const Shape& shape, std::uint64_t seed) {
  SeqNetModel m(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&](Param p, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, fan_in)));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& w : m.block(p)) w = u(rng);
  };
  fill(Param::W_x, shape.n_dynamic);
  fill(Param::W_h, shape.hidden_lstm);
  fill(Param::W_s, shape.n_static);
  fill(Param::W_m, shape.hidden_lstm + shape.hidden_static);
  fill(Param::w_o, shape.hidden_merge);
  return m;
}

LstmWeights lstm_weights(const SeqNetModel& m) {
  return {m.block(Param::W_x), m.block(Param::W_h), m.block(Param::b), m.shape().n_dynamic, m.shape().hidden_lstm};
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// One LSTM step writing activated gates [i, f, o, g] (4H) as well.
void lstm_step(const double* x, const double* h_prev, const double* c_prev, const LstmWeights& w, double* gates,
               double* h_out, double* c_out) {
  const std::size_t d = w.input, h = w.hidden;
  for (std::size_t r = 0; r < 4 * h; ++r) {
    double z = w.b[r];
    const double* wx = w.w_x.data() + r * d;
    for (std::size_t k = 0; k < d; ++k) z += wx[k] * x[k];
    const double* wh = w.w_h.data() + r * h;
    for (std::size_t k = 0; k < h; ++k) z += wh[k] * h_prev[k];
    gates[r] = r < 3 * h ? sigmoid(z) : std::tanh(z);
  }
  for (std::size_t k = 0; k < h; ++k) {
    const double i = gates[k], f = gates[h + k], o = gates[2 * h + k], g = gates[3 * h + k];
    c_out[k] = f * c_prev[k] + i * g;
    h_out[k] = o * std::tanh(c_out[k]);
  }
}

void check_sample(const SeqNetModel& m, std::span<const double> dynamic, std::size_t window,
                  std::span<const double> statics) {
  if (dynamic.size() != window * m.shape().n_dynamic || statics.size() != m.shape().n_static) {
    throw ValidationError("lstm: sample shape does not match the model");
  }
}

double forward_cached(const SeqNetModel& m, std::span<const double> dynamic, std::size_t window,
                      std::span<const double> statics, detail::Workspace& ws) {
  const auto& sh = m.shape();
  const std::size_t d = sh.n_dynamic, h = sh.hidden_lstm, ns = sh.n_static, s = sh.hidden_static,
                    mm = sh.hidden_merge;
  const auto lw = lstm_weights(m);
  ws.gates.resize(window * 4 * h);
  ws.c.assign((window + 1) * h, 0.0);
  ws.h.assign((window + 1) * h, 0.0);
  for (std::size_t t = 0; t < window; ++t) {
    lstm_step(dynamic.data() + t * d, ws.h.data() + t * h, ws.c.data() + t * h, lw, ws.gates.data() + t * 4 * h,
              ws.h.data() + (t + 1) * h, ws.c.data() + (t + 1) * h);
  }

  const auto ws_w = m.block(Param::W_s);
  const auto ws_b = m.block(Param::b_s);
  ws.s.resize(s);
  for (std::size_t j = 0; j < s; ++j) {
    double z = ws_b[j];
    for (std::size_t k = 0; k < ns; ++k) z += ws_w[j * ns + k] * statics[k];
    ws.s[j] = std::tanh(z);
  }

  ws.u.resize(h + s);
  std::copy_n(ws.h.data() + window * h, h, ws.u.begin());
  std::copy(ws.s.begin(), ws.s.end(), ws.u.begin() + static_cast<std::ptrdiff_t>(h));

  const auto wm = m.block(Param::W_m);
  const auto bm = m.block(Param::b_m);
  const auto wo = m.block(Param::w_o);
  ws.m.resize(mm);
  double y = m.block(Param::b_o)[0];
  for (std::size_t j = 0; j < mm; ++j) {
    double z = bm[j];
    for (std::size_t k = 0; k < h + s; ++k) z += wm[j * (h + s) + k] * ws.u[k];
    ws.m[j] = std::tanh(z);
    y += wo[j] * ws.m[j];
  }
  return y;
}

}  // namespace

void lstm_cell(std::span<const double> x, std::span<const double> h_prev, std::span<const double> c_prev,
               const LstmWeights& w, std::span<double> h_out, std::span<double> c_out) {
  const std::size_t d = w.input, h = w.hidden;
  if (x.size() != d || h_prev.size() != h || c_prev.size() != h || h_out.size() != h || c_out.size() != h ||
      w.w_x.size() != 4 * h * d || w.w_h.size() != 4 * h * h || w.b.size() != 4 * h) {
    throw ValidationError("lstm_cell: shape mismatch");
  }
  std::vector<double> gates(4 * h);
  lstm_step(x.data(), h_prev.data(), c_prev.data(), w, gates.data(), h_out.data(), c_out.data());
}

double forward_one(const SeqNetModel& m, std::span<const double> dynamic, std::size_t window,
                   std::span<const double> statics) {
  check_sample(m, dynamic, window, statics);
  detail::Workspace ws;
  return forward_cached(m, dynamic, window, statics, ws);
}

std::vector<double> forward(const SeqNetModel& m, const SequenceSet& s) {
  std::vector<double> out(s.size());
  if (s.size() > 0) check_sample(m, s.dynamic_of(0), s.window, s.static_of(0));
#pragma omp parallel
  {
    detail::Workspace ws;
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = forward_cached(m, s.dynamic_of(i), s.window, s.static_of(i), ws);
  }
  return out;
}

double loss(std::span<const double> predictions, std::span<const double> targets, const SeqNetModel& m,
            double l2_lambda) {
  if (predictions.size() != targets.size()) throw ValidationError("lstm loss: length mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    mse += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
  }
  if (!predictions.empty()) mse /= static_cast<double>(predictions.size());
  double penalty = 0.0;
  for (std::size_t p = 0; p < static_cast<std::size_t>(Param::count); ++p) {
    if (!is_weight_matrix(static_cast<Param>(p))) continue;
    for (double w : m.block(static_cast<Param>(p))) penalty += w * w;
  }
  return mse + l2_lambda * penalty;
}

namespace detail {

double accumulate_sample(const SeqNetModel& m, std::span<const double> dynamic, std::size_t window,
                         std::span<const double> statics, double target, double scale, std::span<double> grad,
                         Workspace& ws) {
  const auto& sh = m.shape();
  const std::size_t d = sh.n_dynamic, h = sh.hidden_lstm, ns = sh.n_static, s = sh.hidden_static,
                    mm = sh.hidden_merge, hs = h + s;
  const double y = forward_cached(m, dynamic, window, statics, ws);
  const double err = y - target;
  const double dy = 2.0 * scale * err;

  auto g = [&](Param p) { return grad.data() + m.offset(p); };
  double* g_wx = g(Param::W_x);
  double* g_wh = g(Param::W_h);
  double* g_b = g(Param::b);
  double* g_ws = g(Param::W_s);
  double* g_bs = g(Param::b_s);
  double* g_wm = g(Param::W_m);
  double* g_bm = g(Param::b_m);
  double* g_wo = g(Param::w_o);
  double* g_bo = g(Param::b_o);
  const auto wm = m.block(Param::W_m);
  const auto wo = m.block(Param::w_o);
  const auto w_h = m.block(Param::W_h);

  // Output and merge layers.
  g_bo[0] += dy;
  ws.du.assign(hs, 0.0);
  for (std::size_t j = 0; j < mm; ++j) {
    g_wo[j] += dy * ws.m[j];
    const double dz = dy * wo[j] * (1.0 - ws.m[j] * ws.m[j]);
    g_bm[j] += dz;
    for (std::size_t k = 0; k < hs; ++k) {
      g_wm[j * hs + k] += dz * ws.u[k];
      ws.du[k] += wm[j * hs + k] * dz;
    }
  }

  // Static branch.
  for (std::size_t j = 0; j < s; ++j) {
    const double dz = ws.du[h + j] * (1.0 - ws.s[j] * ws.s[j]);
    g_bs[j] += dz;
    for (std::size_t k = 0; k < ns; ++k) g_ws[j * ns + k] += dz * statics[k];
  }

  // Backpropagation through time.
  ws.dh.assign(ws.du.begin(), ws.du.begin() + static_cast<std::ptrdiff_t>(h));
  ws.dc.assign(h, 0.0);
  ws.dz.resize(4 * h);
  std::vector<double> dh_prev(h);
  for (std::size_t t = window; t-- > 0;) {
    const double* gates = ws.gates.data() + t * 4 * h;
    const double* c_t = ws.c.data() + (t + 1) * h;
    const double* c_prev = ws.c.data() + t * h;
    const double* h_prev = ws.h.data() + t * h;
    const double* x = dynamic.data() + t * d;
    for (std::size_t k = 0; k < h; ++k) {
      const double i = gates[k], f = gates[h + k], o = gates[2 * h + k], gg = gates[3 * h + k];
      const double tc = std::tanh(c_t[k]);
      const double d_o = ws.dh[k] * tc;
      const double dc = ws.dc[k] + ws.dh[k] * o * (1.0 - tc * tc);
      ws.dz[k] = dc * gg * i * (1.0 - i);
      ws.dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
      ws.dz[2 * h + k] = d_o * o * (1.0 - o);
      ws.dz[3 * h + k] = dc * i * (1.0 - gg * gg);
      ws.dc[k] = dc * f;
    }
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      const double dz = ws.dz[r];
      g_b[r] += dz;
      for (std::size_t k = 0; k < d; ++k) g_wx[r * d + k] += dz * x[k];
      for (std::size_t k = 0; k < h; ++k) {
        g_wh[r * h + k] += dz * h_prev[k];
        dh_prev[k] += w_h[r * h + k] * dz;
      }
    }
    ws.dh.assign(dh_prev.begin(), dh_prev.end());
  }
  return err * err;
}

void add_l2(const SeqNetModel& m, double l2_lambda, Gradient& g) {
  double penalty = 0.0;
  for (std::size_t p = 0; p < static_cast<std::size_t>(Param::count); ++p) {
    const auto param = static_cast<Param>(p);
    if (!is_weight_matrix(param)) continue;
    const auto w = m.block(param);
    double* gw = g.grad.data() + m.offset(param);
    for (std::size_t i = 0; i < w.size(); ++i) {
      gw[i] += 2.0 * l2_lambda * w[i];
      penalty += w[i] * w[i];
    }
  }
  g.loss += l2_lambda * penalty;
}

}  // namespace detail

Gradient backward(const SeqNetModel& m, const SequenceSet& s, std::span<const std::size_t> rows, double l2_lambda) {
  constexpr std::size_t kChunk = 16;
  Gradient out;
  out.grad.assign(m.weights().size(), 0.0);
  if (rows.empty()) {
    detail::add_l2(m, l2_lambda, out);
    return out;
  }
  check_sample(m, s.dynamic_of(rows[0]), s.window, s.static_of(rows[0]));
  const double scale = 1.0 / static_cast<double>(rows.size());
  const std::size_t n_chunks = (rows.size() + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> partial(n_chunks);
  std::vector<double> sq(n_chunks, 0.0);

#pragma omp parallel
  {
    detail::Workspace ws;
#pragma omp for schedule(static)
    for (std::size_t c = 0; c < n_chunks; ++c) {
      partial[c].assign(m.weights().size(), 0.0);
      const std::size_t end = std::min(rows.size(), (c + 1) * kChunk);
      for (std::size_t k = c * kChunk; k < end; ++k) {
        const auto r = rows[k];
        sq[c] += detail::accumulate_sample(m, s.dynamic_of(r), s.window, s.static_of(r), s.target[r], scale,
                                           partial[c], ws);
      }
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += partial[c][i];
    total += sq[c];
  }
  out.loss = total * scale;
  detail::add_l2(m, l2_lambda, out);
  return out;
}

namespace {

double rmse_of(std::span<const double> p, std::span<const double> t) {
  if (p.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return std::sqrt(s / static_cast<double>(p.size()));
}

}  // namespace

TrainResult train(const SequenceSet& train_set, const SequenceSet& val_set, const SeqNetParams& params) {
  params.validate();
  if (train_set.size() == 0) throw ValidationError("lstm: empty training set");
  if (val_set.size() > 0 &&
      (val_set.n_dynamic() != train_set.n_dynamic() || val_set.n_static() != train_set.n_static() ||
       val_set.window != train_set.window)) {
    throw ValidationError("lstm: validation set shape differs from training set");
  }

  const Shape shape{train_set.n_dynamic(), train_set.n_static(), static_cast<std::size_t>(params.hidden_lstm),
                    static_cast<std::size_t>(params.hidden_static), static_cast<std::size_t>(params.hidden_merge)};
  TrainResult out;
  out.model = init_model(shape, params.seed);
  out.model.scaling = Standardizer::fit(train_set);
  const SequenceSet tr = out.model.scaling.apply(train_set);
  const SequenceSet va = val_set.size() > 0 ? out.model.scaling.apply(val_set) : SequenceSet{};

  auto& model = out.model;
  const std::size_t n_params = model.weights().size();
  std::vector<double> m1(n_params, 0.0), m2(n_params, 0.0);
  std::vector<std::size_t> order(tr.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(params.seed ^ 0x5eedf00dULL);
  const auto& a = params.adam;
  std::uint64_t step = 0;
  const auto batch = static_cast<std::size_t>(params.batch_size);

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto rows = std::span<const std::size_t>(order).subspan(start, std::min(batch, order.size() - start));
      auto g = backward(model, tr, rows, params.l2_lambda);
      if (!std::isfinite(g.loss)) {
        throw NumericError("lstm: non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(step + 1));
      }
      ++step;
      const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(step));
      auto w = model.weights();
      for (std::size_t i = 0; i < n_params; ++i) {
        m1[i] = a.beta1 * m1[i] + (1.0 - a.beta1) * g.grad[i];
        m2[i] = a.beta2 * m2[i] + (1.0 - a.beta2) * g.grad[i] * g.grad[i];
        w[i] -= a.alpha * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + a.epsilon);
      }
    }
    out.log.train_rmse.push_back(rmse_of(predict(model, train_set), train_set.target));
    out.log.val_rmse.push_back(val_set.size() > 0 ? rmse_of(predict(model, val_set), val_set.target) : 0.0);
    if (!std::isfinite(out.log.train_rmse.back())) {
      throw NumericError("lstm: training diverged at epoch " + std::to_string(epoch + 1));
    }
  }
  return out;
}

std::vector<double> predict(const SeqNetModel& m, const SequenceSet& s) {
  if (m.scaling.empty()) return forward(m, s);
  auto y = forward(m, m.scaling.apply(s));
  for (double& v : y) v = m.scaling.unscale_target(v);
  return y;
}

Footprint input_footprint(const SequenceSet& s) {
  const std::size_t n = s.size(), t = s.window, d = s.n_dynamic(), ns = s.n_static();
  return {n * (t * d + ns), n * t * (d + ns), n * ns, n * t * ns};
}

nlohmann::json to_json(const SeqNetModel& m, const SeqNetParams& params) {
  const auto& sh = m.shape();
  nlohmann::json weights;
  for (std::size_t p = 0; p < static_cast<std::size_t>(Param::count); ++p) {
    auto b = m.block(static_cast<Param>(p));
    weights[kParamNames[p]] = std::vector<double>(b.begin(), b.end());
  }
  return {{"params", params.to_json()},
          {"shape",
           {{"n_dynamic", sh.n_dynamic},
            {"n_static", sh.n_static},
            {"hidden_lstm", sh.hidden_lstm},
            {"hidden_static", sh.hidden_static},
            {"hidden_merge", sh.hidden_merge}}},
          {"weights", weights},
          {"scaling",
           {{"dynamic_mean", m.scaling.dynamic_mean},
            {"dynamic_scale", m.scaling.dynamic_scale},
            {"static_mean", m.scaling.static_mean},
            {"static_scale", m.scaling.static_scale},
            {"target_mean", m.scaling.target_mean},
            {"target_scale", m.scaling.target_scale}}}};
}

SeqNetModel model_from_json(const nlohmann::json& j) {
  try {
    const auto& sj = j.at("shape");
    Shape sh{sj.at("n_dynamic").get<std::size_t>(), sj.at("n_static").get<std::size_t>(),
             sj.at("hidden_lstm").get<std::size_t>(), sj.at("hidden_static").get<std::size_t>(),
             sj.at("hidden_merge").get<std::size_t>()};
    SeqNetModel m(sh);
    for (std::size_t p = 0; p < static_cast<std::size_t>(Param::count); ++p) {
      auto values = j.at("weights").at(kParamNames[p]).get<std::vector<double>>();
      auto dst = m.block(static_cast<Param>(p));
      if (values.size() != dst.size()) throw SchemaError(std::string("lstm model: wrong size for ") + kParamNames[p]);
      std::copy(values.begin(), values.end(), dst.begin());
    }
    const auto& z = j.at("scaling");
    m.scaling.dynamic_mean = z.at("dynamic_mean").get<std::vector<double>>();
    m.scaling.dynamic_scale = z.at("dynamic_scale").get<std::vector<double>>();
    m.scaling.static_mean = z.at("static_mean").get<std::vector<double>>();
    m.scaling.static_scale = z.at("static_scale").get<std::vector<double>>();
    m.scaling.target_mean = z.at("target_mean").get<double>();
    m.scaling.target_scale = z.at("target_scale").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("lstm model: ") + e.what());
  }
}

}  // namespace pfcast::seqnet
