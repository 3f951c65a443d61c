#include "ganlab/gan.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>

namespace ganlab::gan {

using nlohmann::json;
using nnet::Activation;

namespace {
constexpr double kProbClamp = 1e-7;

double clamped_log(double p) {
  return std::log(std::clamp(p, kProbClamp, 1.0 - kProbClamp));
}

// Gradient of log(clamp(sigmoid(z))) wrt z is (1 - p) inside the clamp
// band and 0 where the clamp binds; mirrored for log(1 - p).
bool in_clamp_band(double p) { return p >= kProbClamp && p <= 1.0 - kProbClamp; }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

void LatentPrior::validate() const {
  if (dim < 1) throw ConfigError("LatentPrior: dim must be >= 1");
  if (kind == Kind::Uniform && !(lo < hi))
    throw ConfigError("LatentPrior: uniform requires lo < hi");
}

Mat LatentPrior::draw(long n, Rng& rng) const {
  validate();
  Mat z(n, dim);
  if (kind == Kind::StandardNormal) {
    for (long r = 0; r < n; ++r)
      for (int c = 0; c < dim; ++c) z(r, c) = rng.normal();
  } else {
    for (long r = 0; r < n; ++r)
      for (int c = 0; c < dim; ++c) z(r, c) = rng.uniform(lo, hi);
  }
  return z;
}

void GanModel::validate() const {
  prior.validate();
  generator.validate();
  discriminator.validate();
  if (generator.input_dim() != prior.dim)
    throw ShapeError("GanModel: generator input dim != prior dim");
  if (generator.output_dim() != 2) throw ShapeError("GanModel: generator must emit 2-D");
  if (discriminator.input_dim() != 2 || discriminator.output_dim() != 1)
    throw ShapeError("GanModel: discriminator must map 2-D to one logit");
}

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("TrainConfig: steps must be >= 0");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (d_steps_per_g < 1) throw ConfigError("TrainConfig: d_steps_per_g must be >= 1");
  if (log_every < 1) throw ConfigError("TrainConfig: log_every must be >= 1");
  if (decay_steps < 0) throw ConfigError("TrainConfig: decay_steps must be >= 0");
  if (ema_decay < 0.0 || ema_decay >= 1.0)
    throw ConfigError("TrainConfig: ema_decay must lie in [0, 1)");
}

GanModel init_gan(const LatentPrior& prior, std::uint64_t seed, int hidden) {
  prior.validate();
  const std::vector<Activation> acts = {Activation::ReLU, Activation::ReLU,
                                        Activation::ReLU, Activation::Identity};
  GanModel m;
  m.prior = prior;
  m.generator = nnet::make_mlp({prior.dim, hidden, hidden, hidden, 2}, acts,
                               derive_seed(seed, 0xabba01));
  m.discriminator = nnet::make_mlp({2, hidden, hidden, hidden, 1}, acts,
                                   derive_seed(seed, 0xabba02));
  return m;
}

Mat TrainingData::draw(int n, Rng& rng) const {
  if (world_) return worlds::sample_points(*world_, n, rng);
  Mat out(n, fixed_->cols());
  const long m = fixed_->rows();
  for (int r = 0; r < n; ++r)
    out.row(r) = fixed_->row(static_cast<long>(rng.uniform_index(m)));
  return out;
}

long TrainingData::available() const { return world_ ? -1 : fixed_->rows(); }

double d_loss(const GanModel& model, const Mat& real, const Mat& fake) {
  if (real.rows() == 0 || fake.rows() == 0)
    throw UndefinedInputError("d_loss: empty batch");
  const Vec logit_r = nnet::forward(model.discriminator, real).col(0);
  const Vec logit_f = nnet::forward(model.discriminator, fake).col(0);
  double loss = 0.0;
  for (long i = 0; i < logit_r.size(); ++i) loss -= clamped_log(sigmoid(logit_r[i]));
  loss /= static_cast<double>(logit_r.size());
  double loss_f = 0.0;
  for (long i = 0; i < logit_f.size(); ++i)
    loss_f -= clamped_log(1.0 - sigmoid(logit_f[i]));
  return loss + loss_f / static_cast<double>(logit_f.size());
}

double g_loss(const GanModel& model, const Mat& latent) {
  if (latent.rows() == 0) throw UndefinedInputError("g_loss: empty batch");
  const Mat fake = nnet::forward(model.generator, latent);
  const Vec logit = nnet::forward(model.discriminator, fake).col(0);
  double loss = 0.0;
  for (long i = 0; i < logit.size(); ++i) loss -= clamped_log(sigmoid(logit[i]));
  return loss / static_cast<double>(logit.size());
}

double d_loss_grads(const GanModel& model, const Mat& real, const Mat& fake,
                    nnet::MlpGrads* d_grads) {
  if (real.rows() == 0 || fake.rows() == 0)
    throw UndefinedInputError("d_loss: empty batch");
  const auto trace_r = nnet::forward_trace(model.discriminator, real);
  const auto trace_f = nnet::forward_trace(model.discriminator, fake);
  const double nr = static_cast<double>(real.rows());
  const double nf = static_cast<double>(fake.rows());

  double loss = 0.0;
  Mat up_r(real.rows(), 1), up_f(fake.rows(), 1);
  for (long i = 0; i < real.rows(); ++i) {
    const double p = sigmoid(trace_r.output(i, 0));
    loss -= clamped_log(p) / nr;
    up_r(i, 0) = in_clamp_band(p) ? (p - 1.0) / nr : 0.0;
  }
  for (long i = 0; i < fake.rows(); ++i) {
    const double p = sigmoid(trace_f.output(i, 0));
    loss -= clamped_log(1.0 - p) / nf;
    up_f(i, 0) = in_clamp_band(1.0 - p) ? p / nf : 0.0;
  }
  if (d_grads) {
    *d_grads = nnet::backward(model.discriminator, trace_r, up_r);
    *d_grads += nnet::backward(model.discriminator, trace_f, up_f);
  }
  return loss;
}

double g_loss_grads(const GanModel& model, const Mat& latent, nnet::MlpGrads* g_grads) {
  if (latent.rows() == 0) throw UndefinedInputError("g_loss: empty batch");
  const auto trace_g = nnet::forward_trace(model.generator, latent);
  const auto trace_d = nnet::forward_trace(model.discriminator, trace_g.output);
  const double n = static_cast<double>(latent.rows());

  double loss = 0.0;
  Mat up(latent.rows(), 1);
  for (long i = 0; i < latent.rows(); ++i) {
    const double p = sigmoid(trace_d.output(i, 0));
    loss -= clamped_log(p) / n;
    up(i, 0) = in_clamp_band(p) ? (p - 1.0) / n : 0.0;
  }
  if (g_grads) {
    Mat input_grad;
    nnet::backward(model.discriminator, trace_d, up, &input_grad);
    *g_grads = nnet::backward(model.generator, trace_g, input_grad);
  }
  return loss;
}

TrainState init_train_state(const LatentPrior& prior, const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.model = init_gan(prior, config.seed);
  s.g_opt = nnet::AdamState::zeros_like(s.model.generator, config.adam);
  s.d_opt = nnet::AdamState::zeros_like(s.model.discriminator, config.adam);
  s.rng = Rng(derive_seed(config.seed, 0x7261696e));
  return s;
}

void train_steps(TrainState& state, const TrainingData& data, const TrainConfig& config,
                 const LogCallback& on_log) {
  config.validate();
  if (data.available() >= 0 && data.available() < config.batch_size)
    throw ConfigError("train: data source smaller than batch size");
  Rng& rng = state.rng;
  const long start = state.model.history.empty() ? 0 : state.model.history.back().step;
  const double base_g_lr = state.g_opt.config.lr;
  const double base_d_lr = state.d_opt.config.lr;
  double last_dl = 0.0, last_gl = 0.0;
  for (long s = 0; s < config.steps; ++s) {
    if (config.decay_steps > 0) {
      const long remaining = config.steps - s;
      const double scale =
          remaining >= config.decay_steps
              ? 1.0
              : static_cast<double>(remaining) / static_cast<double>(config.decay_steps);
      state.g_opt.config.lr = base_g_lr * scale;
      state.d_opt.config.lr = base_d_lr * scale;
    }
    nnet::MlpGrads grads;
    for (int k = 0; k < config.d_steps_per_g; ++k) {
      const Mat real = data.draw(config.batch_size, rng);
      const Mat z = state.model.prior.draw(config.batch_size, rng);
      const Mat fake = nnet::forward(state.model.generator, z);
      last_dl = d_loss_grads(state.model, real, fake, &grads);
      nnet::adam_step(state.model.discriminator, grads, state.d_opt);
    }
    const Mat z = state.model.prior.draw(config.batch_size, rng);
    last_gl = g_loss_grads(state.model, z, &grads);
    nnet::adam_step(state.model.generator, grads, state.g_opt);

    const long step = start + s + 1;
    if (s == 0 || step % config.log_every == 0 || s + 1 == config.steps) {
      state.model.history.push_back({step, last_dl, last_gl});
      if (on_log) on_log(state, step, last_dl, last_gl);
    }
  }
  state.g_opt.config.lr = base_g_lr;
  state.d_opt.config.lr = base_d_lr;
}

GanModel train(const TrainingData& data, const TrainConfig& config,
               const LatentPrior& prior, const LogCallback& on_log) {
  TrainState state = init_train_state(prior, config);
  train_steps(state, data, config, on_log);
  return std::move(state.model);
}

Mat generate_points(const GanModel& model, long n, Rng& rng) {
  const Mat z = model.prior.draw(n, rng);
  return nnet::forward(model.generator, z);
}

worlds::SampleBatch generate(const GanModel& model, long n, std::uint64_t seed) {
  if (n < 0) throw UndefinedInputError("generate: n must be >= 0");
  Rng rng(seed);
  return {generate_points(model, n, rng), worlds::Provenance::Generated};
}

worlds::SampleBatch generate_from(const GanModel& model, const Mat& codes) {
  if (codes.rows() > 0 && codes.cols() != model.prior.dim)
    throw ShapeError("generate_from: code dimension != prior dim");
  if (codes.rows() == 0)
    return {Mat(0, 2), worlds::Provenance::Generated};
  return {nnet::forward(model.generator, codes), worlds::Provenance::Generated};
}

void save_model(const GanModel& model, const std::string& path) {
  json j;
  j["format"] = "ganlab-gan";
  j["version"] = 1;
  j["generator"] = json::parse(nnet::checkpoint_to_json(model.generator));
  j["discriminator"] = json::parse(nnet::checkpoint_to_json(model.discriminator));
  json prior;
  prior["kind"] =
      model.prior.kind == LatentPrior::Kind::StandardNormal ? "standard_normal" : "uniform";
  prior["dim"] = model.prior.dim;
  if (model.prior.kind == LatentPrior::Kind::Uniform) {
    prior["lo"] = model.prior.lo;
    prior["hi"] = model.prior.hi;
  }
  j["prior"] = prior;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  out << j.dump();

  std::ofstream hist(path + ".history.csv");
  hist << "step,d_loss,g_loss\n";
  char buf[96];
  for (const HistoryRow& row : model.history) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g\n", row.step, row.d_loss, row.g_loss);
    hist << buf;
  }
}

GanModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "ganlab-gan")
    throw ConfigError("model checkpoint: unrecognized format");
  if (j.value("version", 0) != 1)
    throw ConfigError("model checkpoint: unsupported version");
  GanModel m;
  m.generator = nnet::checkpoint_from_json(j.at("generator").dump());
  m.discriminator = nnet::checkpoint_from_json(j.at("discriminator").dump());
  const json& prior = j.at("prior");
  const std::string kind = prior.at("kind").get<std::string>();
  if (kind == "standard_normal") {
    m.prior = LatentPrior::standard_normal(prior.at("dim").get<int>());
  } else if (kind == "uniform") {
    m.prior = LatentPrior::uniform(prior.at("lo").get<double>(),
                                   prior.at("hi").get<double>(), prior.at("dim").get<int>());
  } else {
    throw ConfigError("model checkpoint: unknown prior kind " + kind);
  }
  std::ifstream hist(path + ".history.csv");
  if (hist) {
    std::string line;
    std::getline(hist, line);  // header
    while (std::getline(hist, line)) {
      HistoryRow row;
      if (std::sscanf(line.c_str(), "%ld,%lf,%lf", &row.step, &row.d_loss, &row.g_loss) == 3)
        m.history.push_back(row);
    }
  }
  m.validate();
  return m;
}

}  // namespace ganlab::gan
