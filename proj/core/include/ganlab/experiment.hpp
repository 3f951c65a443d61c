#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ganlab/extraction.hpp"

namespace ganlab::experiment {

struct WorldConfig {
  std::string base = "grid25";
  Vector2d shift = Vector2d::Zero();

  worlds::MixtureSpec build() const;
};

struct TargetConfig {
  gan::TrainConfig train;
  long corpus_size = 200000;
  int latent_dim = 2;
};

// Experiment grid: scenario x budget x defense x fraction x seed.
struct ExperimentConfig {
  WorldConfig world;
  TargetConfig target;
  std::vector<extraction::Scenario> scenarios = {extraction::Scenario::BlackBoxAccuracy};
  std::vector<long> budgets = {50000};
  std::vector<double> real_fractions = {0.1};
  std::vector<defenses::DefensePolicy> defense_policies = {{}};
  std::vector<std::uint64_t> seeds = {1};
  extraction::AttackConfig attack;
  extraction::MhConfig mh;
  std::optional<std::string> query_prior;  // "standard_normal" | "uniform"
  Vector2d transfer_shift = Vector2d(0.5, 0.5);
  long transfer_budget_steps = 2000;
  std::string out_dir = "out";
  int threads = 1;

  void validate() const;
  std::string to_canonical_json() const;
  std::string hash() const { return to_hex(fnv1a64(to_canonical_json())); }

  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
};

// Trains (or loads a cached checkpoint of) the target for one seed.
struct TargetBundle {
  gan::GanModel model;
  double frechet_to_world = 0.0;
  double hq_fraction = 0.0;
  std::string checkpoint_path;
};

TargetBundle train_or_load_target(const ExperimentConfig& cfg, std::uint64_t seed,
                                  bool allow_cache = true);

struct CellResult {
  extraction::Scenario scenario;
  std::uint64_t seed = 0;
  long budget = 0;
  double real_fraction = 0.0;
  std::string defense_kind = "none";
  std::string variant;  // "mh_only" for the white-box intermediate row
  metrics::AttackReport report;
  long selected_step = 0;
  long refined_samples = 0;
  std::string error;  // non-empty when the cell failed (e.g. quota)

  static std::string csv_header();
  std::string csv_row(const std::string& config_hash) const;
};

using CellCallback = std::function<void(const CellResult&)>;

// Runs the whole matrix; cells are independent and may run on worker
// threads, results come back in config order.
std::vector<CellResult> run_attack_matrix(const ExperimentConfig& cfg,
                                          const CellCallback& on_cell = nullptr);

// Single cell, reused by the acceptance suite.
std::vector<CellResult> run_cell(const ExperimentConfig& cfg, const gan::GanModel& target,
                                 extraction::Scenario scenario, long budget,
                                 double real_fraction,
                                 const defenses::DefensePolicy& defense,
                                 std::uint64_t seed);

// Bounded-concurrency helper; item order of side effects is up to the
// caller, results must be written by index.
void parallel_for(long n, int threads, const std::function<void(long)>& fn);

}  // namespace ganlab::experiment
