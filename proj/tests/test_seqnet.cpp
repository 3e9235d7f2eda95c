#include <cmath>
#include <numeric>

#include "doctest.h"
#include "pfcast/error.hpp"
#include "pfcast/seqnet.hpp"
#include "seq_data.hpp"

using namespace pfcast;
using namespace pfcast::seqnet;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Shape tiny_shape() { return {2, 3, 4, 3, 2}; }

std::vector<std::size_t> all_rows(const SequenceSet& s) {
  std::vector<std::size_t> r(s.size());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

/// Scalar-loop LSTM cell for two units: gate rows are i, f, o, g.
void scalar_cell(const std::vector<double>& x, const double* h_prev, const double* c_prev, const LstmWeights& w,
                 double* h, double* c) {
  const std::size_t H = w.hidden, D = w.input;
  for (std::size_t u = 0; u < H; ++u) {
    double z[4];
    for (std::size_t gate = 0; gate < 4; ++gate) {
      const std::size_t row = gate * H + u;
      z[gate] = w.b[row];
      for (std::size_t k = 0; k < D; ++k) z[gate] += w.w_x[row * D + k] * x[k];
      for (std::size_t k = 0; k < H; ++k) z[gate] += w.w_h[row * H + k] * h_prev[k];
    }
    c[u] = sigmoid(z[1]) * c_prev[u] + sigmoid(z[0]) * std::tanh(z[3]);
    h[u] = sigmoid(z[2]) * std::tanh(c[u]);
  }
}

}  // namespace

TEST_CASE("lstm_cell: zero weights") {
  const SeqNetModel m({3, 1, 2, 1, 1});
  const std::vector<double> x{1, -2, 3}, zero(2, 0.0);
  std::vector<double> h(2, 9.0), c(2, 9.0);
  lstm_cell(x, zero, zero, lstm_weights(m), h, c);
  CHECK(h == zero);
  CHECK(c == zero);
}

TEST_CASE("lstm_cell: saturated forget gate keeps the cell") {
  SeqNetModel m({2, 1, 2, 1, 1});
  auto b = m.block(Param::b);
  b[2] = b[3] = 50.0;  // forget rows
  const std::vector<double> x{0.3, -0.7}, h0{0.1, 0.2}, c0{1.5, -0.25};
  std::vector<double> h(2), c(2);
  lstm_cell(x, h0, c0, lstm_weights(m), h, c);
  CHECK(c[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("lstm_cell matches a scalar re-implementation") {
  const auto m = init_model({3, 1, 2, 1, 1}, 17);
  const auto w = lstm_weights(m);
  const std::vector<double> x{0.5, -1.0, 2.0}, h0{0.3, -0.4}, c0{0.7, 0.1};
  std::vector<double> h(2), c(2);
  lstm_cell(x, h0, c0, w, h, c);
  double he[2], ce[2];
  scalar_cell(x, h0.data(), c0.data(), w, he, ce);
  for (int u = 0; u < 2; ++u) {
    CHECK(h[u] == doctest::Approx(he[u]).epsilon(1e-14));
    CHECK(c[u] == doctest::Approx(ce[u]).epsilon(1e-14));
  }
  std::vector<double> bad(3);
  CHECK_THROWS_AS(lstm_cell(x, bad, c0, w, h, c), ValidationError);
}

TEST_CASE("forward: zero network returns the output bias") {
  SeqNetModel m(tiny_shape());
  m.block(Param::b_o)[0] = 0.625;
  const auto s = testdata::random_sequences(5, 3, 2, 3, 1);
  for (double y : forward(m, s)) CHECK(y == 0.625);
}

TEST_CASE("forward: hand-computed single-unit network over two steps") {
  SeqNetModel m({1, 1, 1, 1, 1});
  // gates i, f, o, g
  const double wx[4] = {0.5, -0.3, 0.8, 1.2}, wh[4] = {0.1, 0.2, -0.4, 0.7}, b[4] = {0.0, 1.0, 0.1, -0.2};
  for (int k = 0; k < 4; ++k) {
    m.block(Param::W_x)[k] = wx[k];
    m.block(Param::W_h)[k] = wh[k];
    m.block(Param::b)[k] = b[k];
  }
  m.block(Param::W_s)[0] = 0.9;
  m.block(Param::b_s)[0] = -0.1;
  m.block(Param::W_m)[0] = 1.1;  // h
  m.block(Param::W_m)[1] = -0.6;  // static branch
  m.block(Param::b_m)[0] = 0.05;
  m.block(Param::w_o)[0] = 2.0;
  m.block(Param::b_o)[0] = 0.3;
  const double xs[2] = {1.0, -2.0}, st = 0.5;
  double h = 0, c = 0;
  for (double x : xs) {
    const double i = sigmoid(wx[0] * x + wh[0] * h + b[0]);
    const double f = sigmoid(wx[1] * x + wh[1] * h + b[1]);
    const double o = sigmoid(wx[2] * x + wh[2] * h + b[2]);
    const double g = std::tanh(wx[3] * x + wh[3] * h + b[3]);
    c = f * c + i * g;
    h = o * std::tanh(c);
  }
  const double sb = std::tanh(0.9 * st - 0.1);
  const double expect = 0.3 + 2.0 * std::tanh(1.1 * h - 0.6 * sb + 0.05);
  const std::vector<double> dyn{1.0, -2.0}, stat{0.5};
  CHECK(forward_one(m, dyn, 2, stat) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("forward: permutation and batch invariance") {
  const auto m = init_model(tiny_shape(), 4);
  const auto s = testdata::random_sequences(40, 3, 2, 3, 2);
  const auto all = forward(m, s);
  std::vector<std::size_t> perm(s.size());
  std::iota(perm.rbegin(), perm.rend(), 0);
  const auto rev = forward(m, s.select_rows(perm));
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(rev[i] == all[perm[i]]);
    const std::vector<std::size_t> one{i};
    CHECK(std::abs(forward(m, s.select_rows(one))[0] - all[i]) <= 1e-12);
  }
}

TEST_CASE("loss") {
  const SeqNetModel zero(tiny_shape());
  const std::vector<double> p{0, 2}, t{1, 1};
  CHECK(loss(t, t, zero, 0.0) == 0);
  CHECK(loss(p, t, zero, 0.0) == 1.0);
  const auto m = init_model(tiny_shape(), 1);
  CHECK(loss(p, t, m, 0.01) > loss(p, t, m, 0.0));
  double sq = 0;
  for (std::size_t k = 0; k < static_cast<std::size_t>(Param::count); ++k) {
    if (!is_weight_matrix(static_cast<Param>(k))) continue;
    for (double w : m.block(static_cast<Param>(k))) sq += w * w;
  }
  CHECK(loss(p, t, m, 0.01) == doctest::Approx(1.0 + 0.01 * sq).epsilon(1e-14));
}

TEST_CASE("gradients match central finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto m = init_model(tiny_shape(), seed);
    const auto s = testdata::random_sequences(2, 3, 2, 3, seed + 100);
    const auto r = testdata::finite_difference_check(m, s, 0.01, 1e-4, 1e-6);
    CAPTURE(seed);
    CHECK(r.checked == m.weights().size());
    CHECK(r.max_rel < 1e-3);
  }
}

TEST_CASE("gradients vanish at an exact fit") {
  const auto m = init_model(tiny_shape(), 9);
  auto s = testdata::random_sequences(6, 3, 2, 3, 9);
  s.target = forward(m, s);
  const auto g = backward(m, s, all_rows(s), 0.0);
  for (double v : g.grad) CHECK(std::abs(v) <= 1e-10);
  CHECK(g.loss <= 1e-20);
}

TEST_CASE("penalty gradient is linear in lambda") {
  const auto m = init_model(tiny_shape(), 5);
  const auto s = testdata::random_sequences(7, 3, 2, 3, 5);
  const auto rows = all_rows(s);
  const auto g0 = backward(m, s, rows, 0.0), g1 = backward(m, s, rows, 0.01), g2 = backward(m, s, rows, 0.02);
  for (std::size_t k = 0; k < g0.grad.size(); ++k) {
    const double r1 = g1.grad[k] - g0.grad[k], r2 = g2.grad[k] - g0.grad[k];
    CHECK(std::abs(r2 - 2 * r1) <= 1e-12);
  }
  for (std::size_t k = 0; k < m.block_size(Param::b); ++k) CHECK(g1.grad[m.offset(Param::b) + k] == g0.grad[m.offset(Param::b) + k]);
}

TEST_CASE("parallel backward equals the serial reference") {
  const auto m = init_model(tiny_shape(), 6);
  const auto s = testdata::random_sequences(77, 3, 2, 3, 6);
  const auto rows = all_rows(s);
  const auto a = backward(m, s, rows, 0.001), b = reference::backward_serial(m, s, rows, 0.001);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
  for (std::size_t k = 0; k < a.grad.size(); ++k) CHECK(std::abs(a.grad[k] - b.grad[k]) <= 1e-12);
}

TEST_CASE("training: toy task, zero learning rate and determinism") {
  const auto tr = testdata::toy_task(800, 1), va = testdata::toy_task(200, 2);
  SeqNetParams p;
  p.hidden_lstm = 8;
  p.hidden_static = 4;
  p.hidden_merge = 8;
  p.batch_size = 8;
  p.epochs = 5;
  p.window = 4;
  p.adam.alpha = 0.0;
  const auto frozen = train(tr, va, p);
  const auto init = init_model(frozen.model.shape(), p.seed);
  CHECK(std::equal(init.weights().begin(), init.weights().end(), frozen.model.weights().begin()));
  const double untrained = frozen.log.val_rmse.back();

  p.adam.alpha = 0.005;
  const auto a = train(tr, va, p), b = train(tr, va, p);
  REQUIRE(a.log.val_rmse.size() == 5);
  CHECK(a.log.val_rmse.back() < 0.7 * untrained);
  CHECK(a.log.val_rmse == b.log.val_rmse);
  CHECK(a.log.train_rmse == b.log.train_rmse);
}

TEST_CASE("predict applies scaling and the model survives JSON") {
  const auto tr = testdata::toy_task(200, 3);
  SeqNetParams p;
  p.hidden_lstm = 3;
  p.hidden_static = 2;
  p.hidden_merge = 3;
  p.epochs = 1;
  p.window = 4;
  p.batch_size = 16;
  const auto r = train(tr, tr, p);
  const auto back = model_from_json(nlohmann::json::parse(to_json(r.model, p).dump()));
  CHECK(predict(back, tr) == predict(r.model, tr));
  CHECK(SeqNetParams::from_json(p.to_json()).to_json() == p.to_json());
  auto wrong = tr;
  wrong.static_names.pop_back();
  CHECK_THROWS_AS(predict(r.model, wrong), ValidationError);
}

TEST_CASE("split storage saves a window-size factor on static inputs") {
  const auto s = testdata::random_sequences(10, 12, 3, 5, 1);
  const auto f = input_footprint(s);
  CHECK(f.static_replicated == 12 * f.static_split);
  CHECK(f.split_values == 10 * (12 * 3 + 5));
  CHECK(f.replicated_values == 10 * 12 * 8);
}

TEST_CASE("params validation") {
  SeqNetParams p;
  p.hidden_lstm = 0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK_THROWS_AS(SeqNetParams::from_json({{"l2_lambda", -1.0}}), ValidationError);
}
