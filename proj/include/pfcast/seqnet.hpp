#pragma once

// Static/dynamic recurrent regressor: an LSTM over the monthly window joined
// with a tanh dense layer over static inputs, merged through a tanh dense
// layer into a linear scalar output. Trained with Adam on mean squared error
// plus an L2 penalty on every weight matrix (biases excluded).

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfcast/panel.hpp"

namespace pfcast::seqnet {

struct AdamParams {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct SeqNetParams {
  int hidden_lstm = 32;
  int hidden_static = 16;
  int hidden_merge = 32;
  double l2_lambda = 0.001;
  int batch_size = 512;
  int epochs = 5;
  AdamParams adam;
  std::uint64_t seed = 0;
  int window = 12;

  void validate() const;
  nlohmann::json to_json() const;
  static SeqNetParams from_json(const nlohmann::json& j);
  static SeqNetParams from_json(const nlohmann::json& j, SeqNetParams defaults);
};

struct Shape {
  std::size_t n_dynamic = 0;
  std::size_t n_static = 0;
  std::size_t hidden_lstm = 0;
  std::size_t hidden_static = 0;
  std::size_t hidden_merge = 0;
};

/// Parameter blocks, in storage order. Gate rows inside W_x, W_h and b are
/// ordered input, forget, output, candidate.
enum class Param : std::size_t { W_x, W_h, b, W_s, b_s, W_m, b_m, w_o, b_o, count };
inline constexpr std::array<const char*, 9> kParamNames{"W_x", "W_h", "b", "W_s", "b_s", "W_m", "b_m", "w_o", "b_o"};
/// True for blocks that carry the L2 penalty.
bool is_weight_matrix(Param p) noexcept;

/// Per-column affine input scaling and target scaling learned from training
/// data. The network is trained on standardized targets.
struct Standardizer {
  std::vector<double> dynamic_mean, dynamic_scale;
  std::vector<double> static_mean, static_scale;
  double target_mean = 0.0;
  double target_scale = 1.0;

  bool empty() const noexcept { return dynamic_mean.empty() && static_mean.empty(); }
  static Standardizer fit(const SequenceSet& s);
  /// Scales inputs and targets.
  SequenceSet apply(const SequenceSet& s) const;
  double unscale_target(double y) const noexcept { return y * target_scale + target_mean; }
};

class SeqNetModel {
 public:
  SeqNetModel() = default;
  explicit SeqNetModel(const Shape& shape);  // all parameters zero

  const Shape& shape() const noexcept { return shape_; }
  std::span<double> weights() noexcept { return weights_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<double> block(Param p);
  std::span<const double> block(Param p) const;
  std::size_t offset(Param p) const { return offsets_[static_cast<std::size_t>(p)]; }
  std::size_t block_size(Param p) const { return sizes_[static_cast<std::size_t>(p)]; }

  Standardizer scaling;

 private:
  Shape shape_;
  std::vector<double> weights_;
  std::array<std::size_t, 9> offsets_{};
  std::array<std::size_t, 9> sizes_{};
};

/// Matrices uniform in +-1/sqrt(fan_in); biases zero.
SeqNetModel init_model(const Shape& shape, std::uint64_t seed);

struct LstmWeights {
  std::span<const double> w_x;  // 4H x D, row-major
  std::span<const double> w_h;  // 4H x H
  std::span<const double> b;    // 4H
  std::size_t input = 0;
  std::size_t hidden = 0;
};

/// i, f, o = sigmoid(.), g = tanh(.), c = f*c_prev + i*g, h = o*tanh(c).
/// Throws ValidationError on shape mismatch.
void lstm_cell(std::span<const double> x, std::span<const double> h_prev, std::span<const double> c_prev,
               const LstmWeights& w, std::span<double> h_out, std::span<double> c_out);

LstmWeights lstm_weights(const SeqNetModel& m);

/// Prediction for one sample from already-scaled inputs.
double forward_one(const SeqNetModel& m, std::span<const double> dynamic, std::size_t window,
                   std::span<const double> statics);
/// Raw forward pass (no input scaling).
std::vector<double> forward(const SeqNetModel& m, const SequenceSet& s);

/// MSE + lambda * sum of squared weight-matrix entries.
double loss(std::span<const double> predictions, std::span<const double> targets, const SeqNetModel& m,
            double l2_lambda);

struct Gradient {
  std::vector<double> grad;  // same layout as model weights
  double loss = 0.0;
};

/// Exact gradient of loss() over `rows` by backpropagation through time.
/// Samples are processed in fixed-size chunks in parallel; chunk sums are
/// reduced in order so results do not depend on the thread count.
Gradient backward(const SeqNetModel& m, const SequenceSet& s, std::span<const std::size_t> rows, double l2_lambda);

namespace reference {
/// Single-threaded sample-by-sample accumulation.
Gradient backward_serial(const SeqNetModel& m, const SequenceSet& s, std::span<const std::size_t> rows,
                         double l2_lambda);
}  // namespace reference

struct EpochLog {
  std::vector<double> train_rmse;
  std::vector<double> val_rmse;
};

struct TrainResult {
  SeqNetModel model;
  EpochLog log;
};

/// Throws NumericError when the loss becomes non-finite.
TrainResult train(const SequenceSet& train, const SequenceSet& val, const SeqNetParams& params);

/// Applies the model's input scaling, the forward pass, then maps outputs
/// back to the target scale.
std::vector<double> predict(const SeqNetModel& m, const SequenceSet& s);

struct Footprint {
  std::size_t split_values = 0;       // n * (T * d_dyn + d_static)
  std::size_t replicated_values = 0;  // n * T * (d_dyn + d_static)
  std::size_t static_split = 0;
  std::size_t static_replicated = 0;
};
Footprint input_footprint(const SequenceSet& s);

nlohmann::json to_json(const SeqNetModel& m, const SeqNetParams& params);
SeqNetModel model_from_json(const nlohmann::json& j);

namespace detail {
struct Workspace {
  std::vector<double> gates;  // T x 4H activated gates
  std::vector<double> c;      // (T+1) x H
  std::vector<double> h;      // (T+1) x H
  std::vector<double> s, u, m;
  std::vector<double> dh, dc, dz, du;
};
/// Adds d(scale * (y - target)^2)/d(theta) into grad; returns the squared error.
double accumulate_sample(const SeqNetModel& m, std::span<const double> dynamic, std::size_t window,
                         std::span<const double> statics, double target, double scale, std::span<double> grad,
                         Workspace& ws);
void add_l2(const SeqNetModel& m, double l2_lambda, Gradient& g);
}  // namespace detail

}  // namespace pfcast::seqnet
