#pragma once

#include <string>
#include <vector>

#include "ganlab/common.hpp"

namespace ganlab::nnet {

enum class Activation { ReLU, Tanh, Sigmoid, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct Layer {
  Mat weight;  // out x in
  Vec bias;    // out
  Activation act = Activation::Identity;
};

// Fully connected network parameters. Layers chain: out of layer i equals
// in of layer i+1.
struct MlpParams {
  std::vector<Layer> layers;

  int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }
  void validate() const;  // throws ShapeError / NumericError
};

// Deterministic init: per-layer uniform in +-sqrt(6/(in+out)), biases zero.
MlpParams make_mlp(const std::vector<int>& dims, const std::vector<Activation>& acts,
                   std::uint64_t seed);

// Gradient bundle mirroring MlpParams shapes.
struct MlpGrads {
  std::vector<Mat> d_weight;
  std::vector<Vec> d_bias;

  static MlpGrads zeros_like(const MlpParams& p);
  MlpGrads& operator+=(const MlpGrads& other);
  MlpGrads& operator*=(double s);
  bool all_finite() const;
};

// Batch convention throughout: rows are samples (n x dim).
Mat forward(const MlpParams& params, const Mat& inputs);
Vec forward(const MlpParams& params, const Vec& input);

// Per-layer inputs and pre-activations retained for backprop.
struct ForwardTrace {
  std::vector<Mat> inputs;  // inputs[i] = input to layer i (n x in_i)
  std::vector<Mat> pre;     // pre[i] = pre-activation of layer i (n x out_i)
  Mat output;               // post-activation of last layer
};

ForwardTrace forward_trace(const MlpParams& params, const Mat& inputs);

// Returns d(sum_rows(upstream . output))/d(params); writes d/d(input) into
// input_grad when non-null. upstream is n x out.
MlpGrads backward(const MlpParams& params, const ForwardTrace& trace,
                  const Mat& upstream, Mat* input_grad = nullptr);

// Single-sample convenience matching forward(params, input).
MlpGrads backward(const MlpParams& params, const Vec& input, const Vec& upstream,
                  Vec* input_grad = nullptr);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Mat> m_weight, v_weight;
  std::vector<Vec> m_bias, v_bias;
  long step = 0;
  AdamConfig config;

  static AdamState zeros_like(const MlpParams& p, const AdamConfig& cfg);
};

// Bias-corrected Adam update in place. Rejects non-finite gradients.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state);

// Versioned JSON checkpoint: layer shapes + row-major weights. Exact
// round-trip (shortest-exact double serialization).
std::string checkpoint_to_json(const MlpParams& params);
MlpParams checkpoint_from_json(const std::string& json_text);
void save_checkpoint(const MlpParams& params, const std::string& path);
MlpParams load_checkpoint(const std::string& path);

}  // namespace ganlab::nnet
