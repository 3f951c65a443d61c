#include "ganlab/nnet.hpp"

#include <fstream>
#include <json.hpp>

namespace ganlab::nnet {

using nlohmann::json;

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  throw ShapeError("unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation name: " + name);
}

void MlpParams::validate() const {
  if (layers.empty()) throw ShapeError("MlpParams: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (l.weight.rows() != l.bias.size())
      throw ShapeError("MlpParams: bias length does not match weight rows");
    if (i + 1 < layers.size() && layers[i + 1].weight.cols() != l.weight.rows())
      throw ShapeError("MlpParams: layer dimensions do not chain");
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw NumericError("MlpParams: non-finite entries");
  }
}

MlpParams make_mlp(const std::vector<int>& dims, const std::vector<Activation>& acts,
                   std::uint64_t seed) {
  if (dims.size() < 2) throw ShapeError("make_mlp: need at least one layer");
  if (acts.size() != dims.size() - 1)
    throw ShapeError("make_mlp: one activation per layer required");
  Rng rng(seed);
  MlpParams p;
  p.layers.resize(dims.size() - 1);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int in = dims[i], out = dims[i + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    Layer& l = p.layers[i];
    l.weight.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = rng.uniform(-limit, limit);
    l.bias = Vec::Zero(out);
    l.act = acts[i];
  }
  return p;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
  MlpGrads g;
  g.d_weight.reserve(p.layers.size());
  g.d_bias.reserve(p.layers.size());
  for (const Layer& l : p.layers) {
    g.d_weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
    g.d_bias.push_back(Vec::Zero(l.bias.size()));
  }
  return g;
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& other) {
  for (std::size_t i = 0; i < d_weight.size(); ++i) {
    d_weight[i] += other.d_weight[i];
    d_bias[i] += other.d_bias[i];
  }
  return *this;
}

MlpGrads& MlpGrads::operator*=(double s) {
  for (std::size_t i = 0; i < d_weight.size(); ++i) {
    d_weight[i] *= s;
    d_bias[i] *= s;
  }
  return *this;
}

bool MlpGrads::all_finite() const {
  for (std::size_t i = 0; i < d_weight.size(); ++i)
    if (!d_weight[i].allFinite() || !d_bias[i].allFinite()) return false;
  return true;
}

namespace {

void apply_activation(Activation act, Mat& x) {
  switch (act) {
    case Activation::ReLU:
      x = x.cwiseMax(0.0);
      break;
    case Activation::Tanh:
      x = x.array().tanh().matrix();
      break;
    case Activation::Sigmoid:
      x = (1.0 / (1.0 + (-x.array()).exp())).matrix();
      break;
    case Activation::Identity:
      break;
  }
}

// d(post)/d(pre) evaluated from the pre-activation.
Mat activation_grad(Activation act, const Mat& pre) {
  switch (act) {
    case Activation::ReLU:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh: {
      Mat t = pre.array().tanh().matrix();
      return (1.0 - t.array().square()).matrix();
    }
    case Activation::Sigmoid: {
      Mat s = (1.0 / (1.0 + (-pre.array()).exp())).matrix();
      return (s.array() * (1.0 - s.array())).matrix();
    }
    case Activation::Identity:
      return Mat::Ones(pre.rows(), pre.cols());
  }
  throw ShapeError("unknown activation");
}

void check_input_dim(const MlpParams& params, const Mat& inputs) {
  if (inputs.cols() != params.layers.front().weight.cols())
    throw ShapeError("forward: input dimension mismatch");
}

}  // namespace

Mat forward(const MlpParams& params, const Mat& inputs) {
  check_input_dim(params, inputs);
  Mat x = inputs;
  for (const Layer& l : params.layers) {
    Mat pre = x * l.weight.transpose();
    pre.rowwise() += l.bias.transpose();
    apply_activation(l.act, pre);
    x = std::move(pre);
  }
  return x;
}

Vec forward(const MlpParams& params, const Vec& input) {
  Mat out = forward(params, Mat(input.transpose()));
  return out.row(0).transpose();
}

ForwardTrace forward_trace(const MlpParams& params, const Mat& inputs) {
  check_input_dim(params, inputs);
  ForwardTrace t;
  t.inputs.reserve(params.layers.size());
  t.pre.reserve(params.layers.size());
  Mat x = inputs;
  for (const Layer& l : params.layers) {
    t.inputs.push_back(x);
    Mat pre = x * l.weight.transpose();
    pre.rowwise() += l.bias.transpose();
    t.pre.push_back(pre);
    apply_activation(l.act, pre);
    x = std::move(pre);
  }
  t.output = std::move(x);
  return t;
}

MlpGrads backward(const MlpParams& params, const ForwardTrace& trace,
                  const Mat& upstream, Mat* input_grad) {
  const auto n_layers = params.layers.size();
  if (upstream.rows() != trace.output.rows() || upstream.cols() != trace.output.cols())
    throw ShapeError("backward: upstream shape mismatch");
  MlpGrads grads;
  grads.d_weight.resize(n_layers);
  grads.d_bias.resize(n_layers);
  Mat delta = upstream;  // n x out of current layer
  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& l = params.layers[li];
    delta = delta.cwiseProduct(activation_grad(l.act, trace.pre[li]));
    grads.d_weight[li] = delta.transpose() * trace.inputs[li];
    grads.d_bias[li] = delta.colwise().sum().transpose();
    if (li > 0 || input_grad) delta = delta * l.weight;
  }
  if (input_grad) *input_grad = std::move(delta);
  return grads;
}

MlpGrads backward(const MlpParams& params, const Vec& input, const Vec& upstream,
                  Vec* input_grad) {
  ForwardTrace t = forward_trace(params, Mat(input.transpose()));
  Mat ig;
  MlpGrads g = backward(params, t, Mat(upstream.transpose()), input_grad ? &ig : nullptr);
  if (input_grad) *input_grad = ig.row(0).transpose();
  return g;
}

AdamState AdamState::zeros_like(const MlpParams& p, const AdamConfig& cfg) {
  AdamState s;
  s.config = cfg;
  for (const Layer& l : p.layers) {
    s.m_weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
    s.v_weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
    s.m_bias.push_back(Vec::Zero(l.bias.size()));
    s.v_bias.push_back(Vec::Zero(l.bias.size()));
  }
  return s;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state) {
  if (grads.d_weight.size() != params.layers.size())
    throw ShapeError("adam_step: gradient/parameter layer count mismatch");
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");
  const AdamConfig& c = state.config;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto update = [&](auto& m, auto& v, const auto& g, auto& theta) {
      m = c.beta1 * m + (1.0 - c.beta1) * g;
      v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
      theta.array() -=
          c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
    };
    update(state.m_weight[i], state.v_weight[i], grads.d_weight[i],
           params.layers[i].weight);
    update(state.m_bias[i], state.v_bias[i], grads.d_bias[i], params.layers[i].bias);
  }
}

std::string checkpoint_to_json(const MlpParams& params) {
  json j;
  j["format"] = "ganlab-mlp";
  j["version"] = 1;
  json layers = json::array();
  for (const Layer& l : params.layers) {
    json jl;
    jl["rows"] = l.weight.rows();
    jl["cols"] = l.weight.cols();
    jl["act"] = activation_name(l.act);
    std::vector<double> w(l.weight.size());
    for (int r = 0; r < l.weight.rows(); ++r)
      for (int c = 0; c < l.weight.cols(); ++c) w[r * l.weight.cols() + c] = l.weight(r, c);
    jl["weight"] = w;
    jl["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j.dump();
}

MlpParams checkpoint_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  if (j.value("format", "") != "ganlab-mlp")
    throw ConfigError("checkpoint: unrecognized format");
  if (j.value("version", 0) != 1) throw ConfigError("checkpoint: unsupported version");
  MlpParams p;
  for (const json& jl : j.at("layers")) {
    Layer l;
    const int rows = jl.at("rows").get<int>();
    const int cols = jl.at("cols").get<int>();
    l.act = activation_from_name(jl.at("act").get<std::string>());
    const auto w = jl.at("weight").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != rows * cols || static_cast<int>(b.size()) != rows)
      throw ConfigError("checkpoint: payload size mismatch");
    l.weight.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) l.weight(r, c) = w[r * cols + c];
    l.bias = Eigen::Map<const Vec>(b.data(), rows);
    p.layers.push_back(std::move(l));
  }
  p.validate();
  return p;
}

void save_checkpoint(const MlpParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  out << checkpoint_to_json(params);
}

MlpParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return checkpoint_from_json(text);
}

}  // namespace ganlab::nnet
