#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ganlab/metrics.hpp"
#include "ganlab/provider.hpp"

namespace ganlab::extraction {

// Logistic map C(d) = sigmoid(a*d + b) from raw discriminator output to a
// calibrated probability of "real".
struct CalibratedClassifier {
  double a = 0.0;
  double b = 0.0;
  bool degenerate = false;  // fell back to the constant base-rate classifier

  double probability(double d_logit) const;

  static CalibratedClassifier identity() { return {1.0, 0.0, false}; }
};

// 1-D logistic regression (label 1 = real) by damped Newton, tolerance 1e-8
// on the mean-gradient norm. All-equal logits fall back to the base rate.
CalibratedClassifier calibrate(const Vec& d_real, const Vec& d_fake);

// C/(1-C) with C clamped to [1e-7, 1-1e-7].
double density_ratio(const CalibratedClassifier& c, double d_logit);

struct MhConfig {
  int K = 200;                   // proposals per chain
  long N = 50000;                // refined samples wanted
  long m = 0;                    // calibration set size per class; 0 = full real grant
  long max_chain_restarts = -1;  // -1 = 100 * N

  void validate() const;
};

// Restart cap reached before N samples were collected.
struct PartialResultError : std::runtime_error {
  worlds::SampleBatch collected;
  explicit PartialResultError(worlds::SampleBatch got)
      : std::runtime_error("mh_subsample: chain restart cap reached"),
        collected(std::move(got)) {}
};

// Independence-chain Metropolis-Hastings over generator proposals: each
// chain starts at a real seed, runs K accept/reject steps with
// p = min(1, r(x')/r(x)), and contributes its final state unless no
// proposal was ever accepted. Every proposal is charged to the ledger.
worlds::SampleBatch mh_subsample(provider::Provider& src, const CalibratedClassifier& c,
                                 const worlds::SampleBatch& real_seeds, const MhConfig& cfg,
                                 std::uint64_t seed);

enum class Scenario { BlackBoxAccuracy, PartialBlackBoxFidelity, WhiteBoxFidelity };

std::string scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

// Attack-side controls plus the experimenter-side evaluation handles.
struct AttackConfig {
  gan::TrainConfig train;     // phase-1 optimization
  long phase2_steps = 4000;   // continuation after real data joins
  long select_every = 500;    // checkpoint-selection cadence
  long select_n = 20000;      // sample size for selection metric
  long eval_n = 50000;        // sample size for the reported metrics
  std::uint64_t eval_seed = 9000;
  gan::LatentPrior attack_prior = gan::LatentPrior::standard_normal();
  // When set, codes are drawn from this prior and submitted via
  // query_with_codes instead of plain query(n).
  std::optional<gan::LatentPrior> query_prior;
};

struct SelectionRow {
  long step = 0;
  double accuracy = 0.0;  // attacker-side proxy used for checkpoint choice
  double fidelity = 0.0;
};

// Returns the index minimizing accuracy; earliest index wins ties.
std::size_t model_selection_checkpoint(const std::vector<SelectionRow>& history);

struct ExtractionRun {
  Scenario scenario = Scenario::BlackBoxAccuracy;
  long budget = 0;
  double real_fraction = 0.0;
  metrics::AttackReport report;
  gan::GanModel attack_model;  // selected checkpoint
  long selected_step = 0;
  std::vector<SelectionRow> selection_history;
  long refined_samples = 0;  // white-box only

  std::string manifest_json(std::uint64_t seed) const;
};

ExtractionRun run_black_box_accuracy(provider::Provider& src,
                                     const gan::GanModel& target,
                                     const worlds::MixtureSpec& world, long budget,
                                     const AttackConfig& cfg);

ExtractionRun run_partial_black_box(provider::Provider& src, const gan::GanModel& target,
                                    const worlds::MixtureSpec& world, long budget,
                                    double real_fraction, const AttackConfig& cfg);

struct WhiteBoxResult {
  ExtractionRun mh_only;  // trained on refined samples, before real data joins
  ExtractionRun final_run;
};

WhiteBoxResult run_white_box(provider::Provider& src, const gan::GanModel& target,
                             const worlds::MixtureSpec& world, long budget,
                             double real_fraction, const MhConfig& mh_cfg,
                             const AttackConfig& cfg);

struct TransferPoint {
  long step = 0;
  double frechet_to_world = 0.0;
};

struct TransferRecord {
  std::vector<TransferPoint> fine_tune;
  std::vector<TransferPoint> scratch;
  double fine_tune_final = 0.0;
  double scratch_final = 0.0;
  gan::GanModel fine_tune_model;
  gan::GanModel scratch_model;
};

// Fine-tuning from the extracted weights vs training from scratch on a new
// world under the same step budget and data stream.
TransferRecord transfer_learning_study(const gan::GanModel& extracted,
                                       const worlds::MixtureSpec& new_world,
                                       long budget_steps, const AttackConfig& cfg);

}  // namespace ganlab::extraction
