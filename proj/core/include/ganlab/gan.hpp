#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ganlab/nnet.hpp"
#include "ganlab/worlds.hpp"

namespace ganlab::gan {

struct LatentPrior {
  enum class Kind { StandardNormal, Uniform };
  Kind kind = Kind::StandardNormal;
  int dim = 2;
  double lo = -1.0, hi = 1.0;  // Uniform only

  void validate() const;
  Mat draw(long n, Rng& rng) const;  // n x dim

  static LatentPrior standard_normal(int dim = 2) { return {Kind::StandardNormal, dim, 0, 0}; }
  static LatentPrior uniform(double lo, double hi, int dim = 2) {
    return {Kind::Uniform, dim, lo, hi};
  }
};

struct HistoryRow {
  long step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
};

// Generator (prior.dim -> 2) plus discriminator (2 -> 1 raw logit).
struct GanModel {
  nnet::MlpParams generator;
  nnet::MlpParams discriminator;
  LatentPrior prior;
  std::vector<HistoryRow> history;

  void validate() const;
};

struct TrainConfig {
  long steps = 20000;
  int batch_size = 256;
  int d_steps_per_g = 1;
  nnet::AdamConfig adam;
  std::uint64_t seed = 1;
  long log_every = 500;
  // Linear learning-rate decay over the last `decay_steps` of this call;
  // stabilizes the endpoint against the usual adversarial oscillation.
  long decay_steps = 0;
  // Exponential moving average of generator weights (0 = disabled). The
  // averaged generator is what snapshot_model() exposes.
  double ema_decay = 0.0;

  void validate() const;
};

// Fixed toy architecture: 4 fully connected layers, hidden width 64, ReLU,
// for both networks; D emits one raw logit.
GanModel init_gan(const LatentPrior& prior, std::uint64_t seed, int hidden = 64);

// Training data is either an analytic world (fresh draws per step) or a
// fixed batch (minibatches drawn uniformly with replacement).
class TrainingData {
 public:
  explicit TrainingData(const worlds::MixtureSpec& world) : world_(&world) {}
  explicit TrainingData(const Mat& fixed) : fixed_(&fixed) {}

  Mat draw(int n, Rng& rng) const;
  long available() const;  // -1 when unbounded

 private:
  const worlds::MixtureSpec* world_ = nullptr;
  const Mat* fixed_ = nullptr;
};

// Probabilities are clamped to [1e-7, 1 - 1e-7] before logs.
double d_loss(const GanModel& model, const Mat& real, const Mat& fake);
double g_loss(const GanModel& model, const Mat& latent);

// Loss plus analytic parameter gradients (means over the batch).
double d_loss_grads(const GanModel& model, const Mat& real, const Mat& fake,
                    nnet::MlpGrads* d_grads);
double g_loss_grads(const GanModel& model, const Mat& latent, nnet::MlpGrads* g_grads);

struct TrainState {
  GanModel model;
  nnet::AdamState g_opt;
  nnet::AdamState d_opt;
  Rng rng{0};  // draw stream continues across train_steps calls
  nnet::MlpParams g_ema;
  bool ema_active = false;

  // Model as deployed: the EMA generator when averaging is on, the raw
  // weights otherwise.
  GanModel snapshot_model() const;
};

TrainState init_train_state(const LatentPrior& prior, const TrainConfig& config);

// Called at step 0, every log_every steps, and at the last step.
using LogCallback = std::function<void(const TrainState&, long step, double d_loss,
                                       double g_loss)>;

// Alternating updates per the minimax losses; continues from the given
// optimizer state, so phased pipelines can extend training on new data.
void train_steps(TrainState& state, const TrainingData& data, const TrainConfig& config,
                 const LogCallback& on_log = nullptr);

GanModel train(const TrainingData& data, const TrainConfig& config,
               const LatentPrior& prior = LatentPrior::standard_normal(),
               const LogCallback& on_log = nullptr);

worlds::SampleBatch generate(const GanModel& model, long n, std::uint64_t seed);
Mat generate_points(const GanModel& model, long n, Rng& rng);
worlds::SampleBatch generate_from(const GanModel& model, const Mat& codes);

// Checkpoint: both nnet checkpoints + prior descriptor in one JSON file,
// training history in a sibling CSV ("<path>.history.csv").
void save_model(const GanModel& model, const std::string& path);
GanModel load_model(const std::string& path);

}  // namespace ganlab::gan
