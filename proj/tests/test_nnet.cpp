#include <doctest.h>

#include <filesystem>

#include "ganlab/nnet.hpp"
#include "oracles.hpp"

using namespace ganlab;
using namespace ganlab::nnet;

namespace {
MlpParams random_net(const std::vector<int>& dims, std::uint64_t seed,
                     Activation hidden_act = Activation::ReLU) {
  std::vector<Activation> acts(dims.size() - 1, hidden_act);
  acts.back() = Activation::Identity;
  return make_mlp(dims, acts, seed);
}
}  // namespace

TEST_CASE("forward: identity network passes input through") {
  MlpParams p;
  Layer l;
  l.weight = Mat::Identity(2, 2);
  l.bias = Vec::Zero(2);
  l.act = Activation::Identity;
  p.layers.push_back(l);
  Vec out = forward(p, Vec(Vector2d(1.5, -2.0)));
  CHECK(out[0] == doctest::Approx(1.5));
  CHECK(out[1] == doctest::Approx(-2.0));
}

TEST_CASE("forward: single ReLU layer hand computation") {
  MlpParams p;
  Layer l;
  l.weight.resize(2, 2);
  l.weight << 2, 0, 0, 2;
  l.bias = Vec::Ones(2);
  l.act = Activation::ReLU;
  p.layers.push_back(l);
  Vec out = forward(p, Vec(Vector2d(-1.0, 3.0)));
  CHECK(out[0] == doctest::Approx(0.0));  // max(0, 2*(-1)+1)
  CHECK(out[1] == doctest::Approx(7.0));
}

TEST_CASE("forward: matches straight-line re-evaluation oracle on a 4-layer net") {
  const auto p = random_net({3, 16, 16, 16, 2}, 42);
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Vec x(3);
    for (int i = 0; i < 3; ++i) x[i] = rng.normal();
    const Vec got = forward(p, x);
    const auto expected = oracles::forward_reference(p, {x[0], x[1], x[2]});
    for (int i = 0; i < 2; ++i)
      CHECK(oracles::rel_err(got[i], expected[i]) <= 1e-12);
  }
}

TEST_CASE("forward: dimension mismatch raises shape error") {
  const auto p = random_net({3, 4, 2}, 1);
  CHECK_THROWS_AS(forward(p, Vec(Vector2d(1.0, 2.0))), ShapeError);
}

TEST_CASE("forward is pure: repeated calls bit-identical") {
  const auto p = random_net({2, 8, 8, 2}, 3);
  const Vec x(Vector2d(0.3, -1.2));
  const Vec a = forward(p, x), b = forward(p, x);
  CHECK(a[0] == b[0]);
  CHECK(a[1] == b[1]);
}

TEST_CASE("backward: linear one-layer gradient is outer(upstream, x)") {
  MlpParams p;
  Layer l;
  l.weight = Mat::Zero(2, 3);
  l.weight << 1, 2, 3, 4, 5, 6;
  l.bias = Vec::Zero(2);
  l.act = Activation::Identity;
  p.layers.push_back(l);
  Vec x(3);
  x << 0.5, -1.0, 2.0;
  Vec up(2);
  up << 1.0, -2.0;
  const MlpGrads g = backward(p, x, up);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) CHECK(g.d_weight[0](r, c) == doctest::Approx(up[r] * x[c]));
  CHECK(g.d_bias[0][0] == doctest::Approx(1.0));
  CHECK(g.d_bias[0][1] == doctest::Approx(-2.0));
}

TEST_CASE("backward: zero upstream gives zero parameter gradient") {
  const auto p = random_net({2, 8, 8, 2}, 5);
  const MlpGrads g = backward(p, Vec(Vector2d(0.7, 0.1)), Vec(Vector2d(0.0, 0.0)));
  for (const auto& w : g.d_weight) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: matches central finite differences on every architecture used") {
  // Probes per architecture; covers both activations the repo trains with.
  const std::vector<std::vector<int>> archs = {{2, 64, 64, 64, 2}, {2, 64, 64, 64, 1}};
  Rng rng(11);
  for (const auto& dims : archs) {
    for (Activation act : {Activation::ReLU, Activation::Tanh}) {
      MlpParams p = random_net(dims, rng.next_u64(), act);
      Vec x(dims.front());
      for (int i = 0; i < x.size(); ++i) x[i] = rng.normal();
      Vec up(dims.back());
      for (int i = 0; i < up.size(); ++i) up[i] = rng.normal();
      const MlpGrads g = backward(p, x, up);

      auto eval = [&] { return up.dot(forward(p, x)); };
      for (int probe = 0; probe < 25; ++probe) {
        const std::size_t li = rng.uniform_index(p.layers.size());
        Mat& w = p.layers[li].weight;
        const long r = static_cast<long>(rng.uniform_index(w.rows()));
        const long c = static_cast<long>(rng.uniform_index(w.cols()));
        const double fd = oracles::central_diff(eval, &w(r, c));
        CHECK(oracles::rel_err(g.d_weight[li](r, c), fd) <= 1e-4);
      }
    }
  }
}

TEST_CASE("backward: input gradient matches finite differences") {
  const auto p = random_net({3, 16, 16, 2}, 77, Activation::Tanh);
  Rng rng(78);
  Vec x(3), up(2);
  for (int i = 0; i < 3; ++i) x[i] = rng.normal();
  for (int i = 0; i < 2; ++i) up[i] = rng.normal();
  Vec ig;
  backward(p, x, up, &ig);
  auto eval = [&] { return up.dot(forward(p, x)); };
  for (int i = 0; i < 3; ++i) {
    const double fd = oracles::central_diff(eval, &x[i]);
    CHECK(oracles::rel_err(ig[i], fd) <= 1e-4);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged, moments decay") {
  auto p = random_net({2, 4, 2}, 9);
  const auto snapshot = p;
  AdamState st = AdamState::zeros_like(p, {});
  MlpGrads zero = MlpGrads::zeros_like(p);
  for (int i = 0; i < 5; ++i) adam_step(p, zero, st);
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    CHECK((p.layers[li].weight - snapshot.layers[li].weight).cwiseAbs().maxCoeff() == 0.0);
    CHECK(st.m_weight[li].cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(st.step == 5);
}

TEST_CASE("adam: one step from zero moments matches hand expansion") {
  // m_hat = g, v_hat = g^2  =>  delta = -lr * g / (|g| + eps)
  auto p = random_net({2, 3, 2}, 21);
  const auto before = p;
  AdamConfig cfg;
  cfg.lr = 1e-3;
  AdamState st = AdamState::zeros_like(p, cfg);
  MlpGrads g = MlpGrads::zeros_like(p);
  Rng rng(22);
  for (auto& w : g.d_weight)
    for (long r = 0; r < w.rows(); ++r)
      for (long c = 0; c < w.cols(); ++c) w(r, c) = rng.normal();
  adam_step(p, g, st);
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    for (long r = 0; r < g.d_weight[li].rows(); ++r)
      for (long c = 0; c < g.d_weight[li].cols(); ++c) {
        const double grad = g.d_weight[li](r, c);
        const double expected = -cfg.lr * grad / (std::abs(grad) + cfg.eps);
        const double got = p.layers[li].weight(r, c) - before.layers[li].weight(r, c);
        CHECK(oracles::rel_err(got, expected) <= 1e-12);
      }
  }
}

TEST_CASE("adam: constant gradient drives per-coordinate step magnitude to lr") {
  auto p = random_net({1, 2, 1}, 30);
  AdamConfig cfg;
  cfg.lr = 2e-3;
  AdamState st = AdamState::zeros_like(p, cfg);
  MlpGrads g = MlpGrads::zeros_like(p);
  for (auto& w : g.d_weight) w.setConstant(0.37);
  for (auto& b : g.d_bias) b.setConstant(-1.4);
  Mat prev = p.layers[0].weight;
  double step_mag = 0.0;
  for (int i = 0; i < 3000; ++i) {
    adam_step(p, g, st);
    step_mag = (p.layers[0].weight - prev).cwiseAbs().maxCoeff();
    prev = p.layers[0].weight;
  }
  CHECK(step_mag == doctest::Approx(cfg.lr).epsilon(1e-4));
}

TEST_CASE("adam: non-finite gradient rejected") {
  auto p = random_net({2, 3, 2}, 31);
  AdamState st = AdamState::zeros_like(p, {});
  MlpGrads g = MlpGrads::zeros_like(p);
  g.d_weight[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(p, g, st), NumericError);
}

TEST_CASE("checkpoint: JSON round-trip is exact") {
  const auto p = random_net({2, 64, 64, 64, 2}, 99);
  const std::string path = (std::filesystem::temp_directory_path() / "nnet_ckpt.json").string();
  save_checkpoint(p, path);
  const MlpParams q = load_checkpoint(path);
  REQUIRE(q.layers.size() == p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    CHECK((p.layers[i].weight - q.layers[i].weight).cwiseAbs().maxCoeff() == 0.0);
    CHECK((p.layers[i].bias - q.layers[i].bias).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.layers[i].act == q.layers[i].act);
  }
  std::filesystem::remove(path);
}

TEST_CASE("make_mlp: rejects inconsistent specs, validates chaining") {
  CHECK_THROWS_AS(make_mlp({2}, {}, 1), ShapeError);
  auto p = random_net({2, 4, 2}, 1);
  p.layers[1].weight.resize(2, 5);  // break the chain
  CHECK_THROWS_AS(p.validate(), ShapeError);
}
