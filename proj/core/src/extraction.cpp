#include "ganlab/extraction.hpp"

#include <algorithm>
#include <json.hpp>
#include <limits>

namespace ganlab::extraction {

using nlohmann::json;

namespace {
constexpr double kProbClamp = 1e-7;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double log_loss(const Vec& d, const Vec& y, double a, double b) {
  double s = 0.0;
  for (long i = 0; i < d.size(); ++i) {
    const double p = std::clamp(sigmoid(a * d[i] + b), kProbClamp, 1.0 - kProbClamp);
    s -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return s / static_cast<double>(d.size());
}
}  // namespace

double CalibratedClassifier::probability(double d_logit) const {
  return sigmoid(a * d_logit + b);
}

CalibratedClassifier calibrate(const Vec& d_real, const Vec& d_fake) {
  if (d_real.size() < 2 || d_fake.size() < 2)
    throw UndefinedInputError("calibrate: need at least 2 logits per class");
  const long n = d_real.size() + d_fake.size();
  Vec d(n), y(n);
  d << d_real, d_fake;
  y << Vec::Ones(d_real.size()), Vec::Zero(d_fake.size());

  const double base_rate = static_cast<double>(d_real.size()) / static_cast<double>(n);
  const double b0 = std::log(base_rate / (1.0 - base_rate));

  if ((d.array() == d[0]).all()) {
    // No information in the scores at all.
    return {0.0, b0, true};
  }

  // Damped Newton on the mean log-loss, started at the constant classifier,
  // so the fit can only improve on the base rate.
  double a = 0.0, b = b0;
  double loss = log_loss(d, y, a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double g_a = 0.0, g_b = 0.0, h_aa = 0.0, h_ab = 0.0, h_bb = 0.0;
    for (long i = 0; i < n; ++i) {
      const double p = sigmoid(a * d[i] + b);
      const double e = p - y[i];
      const double w = std::max(p * (1.0 - p), 1e-12);
      g_a += e * d[i];
      g_b += e;
      h_aa += w * d[i] * d[i];
      h_ab += w * d[i];
      h_bb += w;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    g_a *= inv_n;
    g_b *= inv_n;
    h_aa *= inv_n;
    h_ab *= inv_n;
    h_bb *= inv_n;
    if (std::sqrt(g_a * g_a + g_b * g_b) < 1e-8) break;
    const double det = h_aa * h_bb - h_ab * h_ab;
    double step_a, step_b;
    if (det > 1e-300) {
      step_a = (h_bb * g_a - h_ab * g_b) / det;
      step_b = (h_aa * g_b - h_ab * g_a) / det;
    } else {
      step_a = g_a;
      step_b = g_b;
    }
    double t = 1.0;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      const double next = log_loss(d, y, a - t * step_a, b - t * step_b);
      if (next <= loss) {
        a -= t * step_a;
        b -= t * step_b;
        loss = next;
        break;
      }
    }
  }
  return {a, b, false};
}

double density_ratio(const CalibratedClassifier& c, double d_logit) {
  const double p = std::clamp(c.probability(d_logit), kProbClamp, 1.0 - kProbClamp);
  return p / (1.0 - p);
}

void MhConfig::validate() const {
  if (K < 1) throw ConfigError("MhConfig: K must be >= 1");
  if (N < 1) throw ConfigError("MhConfig: N must be >= 1");
  if (m != 0 && m < 2) throw ConfigError("MhConfig: m must be >= 2 when set");
}

worlds::SampleBatch mh_subsample(provider::Provider& src, const CalibratedClassifier& c,
                                 const worlds::SampleBatch& real_seeds, const MhConfig& cfg,
                                 std::uint64_t seed) {
  cfg.validate();
  if (real_seeds.size() == 0) throw UndefinedInputError("mh_subsample: no real seeds");
  const long max_chains = cfg.max_chain_restarts < 0 ? 100 * cfg.N : cfg.max_chain_restarts;
  Rng rng(derive_seed(seed, 0x6d68));

  // Seed ratios once; discriminator evaluations are not generator queries.
  const Vec seed_logits = src.discriminator_logits(real_seeds.points);
  Vec seed_ratios(seed_logits.size());
  for (long i = 0; i < seed_logits.size(); ++i)
    seed_ratios[i] = density_ratio(c, seed_logits[i]);

  Mat out(cfg.N, 2);
  long collected = 0;
  long chains = 0;
  while (collected < cfg.N) {
    if (chains >= max_chains) {
      worlds::SampleBatch partial{out.topRows(collected), worlds::Provenance::Refined};
      throw PartialResultError(std::move(partial));
    }
    ++chains;
    const long s = static_cast<long>(rng.uniform_index(real_seeds.size()));
    Eigen::RowVector2d cur = real_seeds.points.row(s);
    double cur_ratio = seed_ratios[s];
    bool accepted_any = false;

    // One generator query per proposal; the whole chain is fetched and
    // scored in a single batch.
    const worlds::SampleBatch proposals = src.query(cfg.K);
    const Vec logits = src.discriminator_logits(proposals.points);
    for (int i = 0; i < cfg.K; ++i) {
      const double ratio = density_ratio(c, logits[i]);
      const double p = std::min(1.0, ratio / cur_ratio);
      if (rng.uniform() <= p) {
        cur = proposals.points.row(i);
        cur_ratio = ratio;
        accepted_any = true;
      }
    }
    if (accepted_any) out.row(collected++) = cur;
  }
  return {std::move(out), worlds::Provenance::Refined};
}

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::BlackBoxAccuracy: return "black_box_accuracy";
    case Scenario::PartialBlackBoxFidelity: return "partial_black_box_fidelity";
    case Scenario::WhiteBoxFidelity: return "white_box_fidelity";
  }
  throw ConfigError("unknown scenario");
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "black_box_accuracy") return Scenario::BlackBoxAccuracy;
  if (name == "partial_black_box_fidelity") return Scenario::PartialBlackBoxFidelity;
  if (name == "white_box_fidelity") return Scenario::WhiteBoxFidelity;
  throw ConfigError("unknown scenario: " + name);
}

std::size_t model_selection_checkpoint(const std::vector<SelectionRow>& history) {
  if (history.empty()) throw UndefinedInputError("model selection: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i].accuracy < history[best].accuracy) best = i;
  return best;
}

namespace {

// Attacker-side selection metric: Frechet distance from the candidate's
// samples to the dataset the attacker trained on.
struct SelectionTracker {
  metrics::GaussianMoments dataset_moments;
  metrics::GaussianMoments world_moments;  // diagnostic only
  long select_n;
  std::uint64_t eval_seed;
  std::vector<SelectionRow> history;

  void observe(const gan::TrainState& state, long step) {
    const Mat pts =
        gan::generate(state.model, select_n, derive_seed(eval_seed, 0x5e1ec7 + step)).points;
    const auto m = metrics::moments(pts);
    SelectionRow row;
    row.step = step;
    row.accuracy = metrics::frechet_distance(m, dataset_moments);
    row.fidelity = metrics::frechet_distance(m, world_moments);
    history.push_back(row);
  }
};

worlds::SampleBatch fetch_training_samples(provider::Provider& src, long budget,
                                           const AttackConfig& cfg) {
  if (cfg.query_prior) {
    Rng rng(derive_seed(cfg.train.seed, 0x71707269));
    gan::LatentPrior prior = *cfg.query_prior;
    prior.dim = src.latent_dim();
    return src.query_with_codes(prior.draw(budget, rng));
  }
  return src.query(budget);
}

metrics::AttackReport finish_report(const gan::GanModel& selected,
                                    const gan::GanModel& target,
                                    const worlds::MixtureSpec& world,
                                    const AttackConfig& cfg, long queries_used) {
  metrics::AttackReport report =
      metrics::accuracy_and_fidelity(selected, target, world, cfg.eval_n, cfg.eval_seed);
  const metrics::Dissection d =
      metrics::dissect(selected, target, world, 30, cfg.eval_n, derive_seed(cfg.eval_seed, 77));
  report.js_accuracy = d.js_accuracy;
  report.js_fidelity = d.js_fidelity;
  report.queries = queries_used;
  return report;
}

// Shared two-phase trainer: phase 1 on the queried data alone, phase 2 on
// the union with whatever real data the capability granted. Checkpoint
// selection spans the whole process.
ExtractionRun run_phased(provider::Provider& src, const gan::GanModel& target,
                         const worlds::MixtureSpec& world, long budget,
                         double real_fraction, Scenario scenario,
                         const worlds::SampleBatch& train_set, const AttackConfig& cfg) {
  gan::TrainState state = gan::init_train_state(cfg.attack_prior, cfg.train);

  SelectionTracker tracker;
  tracker.dataset_moments = metrics::moments(train_set.points);
  tracker.world_moments = metrics::moments(
      worlds::sample(world, cfg.select_n, derive_seed(cfg.eval_seed, 0x776f726c)).points);
  tracker.select_n = cfg.select_n;
  tracker.eval_seed = cfg.eval_seed;

  // Decay applies at the very end of training only, i.e. in phase 2.
  gan::TrainConfig phase1 = cfg.train;
  phase1.log_every = cfg.select_every;
  phase1.decay_steps = 0;
  const auto on_log = [&](const gan::TrainState& st, long step, double, double) {
    tracker.observe(st, step);
  };
  gan::train_steps(state, gan::TrainingData(train_set.points), phase1, on_log);

  Mat phase2_data = train_set.points;
  if (real_fraction > 0.0) {
    const worlds::SampleBatch real = src.real_data(real_fraction);
    Mat merged(train_set.points.rows() + real.points.rows(), 2);
    merged << train_set.points, real.points;
    phase2_data = std::move(merged);
  }
  gan::TrainConfig phase2 = cfg.train;
  phase2.steps = cfg.phase2_steps;
  phase2.log_every = cfg.select_every;
  gan::train_steps(state, gan::TrainingData(phase2_data), phase2, on_log);

  // The report is computed on the model as trained; the selection history
  // stays available for checkpoint studies via model_selection_checkpoint.
  ExtractionRun run;
  run.scenario = scenario;
  run.budget = budget;
  run.real_fraction = real_fraction;
  run.selection_history = tracker.history;
  run.attack_model = state.model;
  run.selected_step = state.model.history.empty() ? 0 : state.model.history.back().step;
  run.report = finish_report(run.attack_model, target, world, cfg, src.ledger().used);
  return run;
}

}  // namespace

std::string ExtractionRun::manifest_json(std::uint64_t seed) const {
  json j;
  j["scenario"] = scenario_name(scenario);
  j["budget"] = budget;
  j["real_fraction"] = real_fraction;
  j["seed"] = seed;
  j["selected_step"] = selected_step;
  j["refined_samples"] = refined_samples;
  j["report"] = json::parse(report.to_json());
  return j.dump();
}

ExtractionRun run_black_box_accuracy(provider::Provider& src, const gan::GanModel& target,
                                     const worlds::MixtureSpec& world, long budget,
                                     const AttackConfig& cfg) {
  if (budget < cfg.train.batch_size)
    throw ConfigError("attack budget smaller than attack batch size");
  const worlds::SampleBatch data = fetch_training_samples(src, budget, cfg);
  return run_phased(src, target, world, budget, 0.0, Scenario::BlackBoxAccuracy, data, cfg);
}

ExtractionRun run_partial_black_box(provider::Provider& src, const gan::GanModel& target,
                                    const worlds::MixtureSpec& world, long budget,
                                    double real_fraction, const AttackConfig& cfg) {
  if (budget < cfg.train.batch_size)
    throw ConfigError("attack budget smaller than attack batch size");
  const worlds::SampleBatch data = fetch_training_samples(src, budget, cfg);
  ExtractionRun run = run_phased(src, target, world, budget, real_fraction,
                                 Scenario::PartialBlackBoxFidelity, data, cfg);
  return run;
}

WhiteBoxResult run_white_box(provider::Provider& src, const gan::GanModel& target,
                             const worlds::MixtureSpec& world, long budget,
                             double real_fraction, const MhConfig& mh_cfg,
                             const AttackConfig& cfg) {
  mh_cfg.validate();
  const worlds::SampleBatch real = src.real_data(real_fraction);
  if (real.size() < 2) throw ConfigError("run_white_box: real grant too small");

  // Calibrate on m real vs m generated logits (m defaults to the grant).
  const long m = mh_cfg.m == 0 ? real.size() : std::min<long>(mh_cfg.m, real.size());
  const worlds::SampleBatch fake_cal = src.query(m);
  const Vec d_real = src.discriminator_logits(real.points.topRows(m));
  const Vec d_fake = src.discriminator_logits(fake_cal.points);
  const CalibratedClassifier c = calibrate(d_real, d_fake);

  const worlds::SampleBatch refined =
      mh_subsample(src, c, real, mh_cfg, derive_seed(cfg.train.seed, 0x6d6873));

  // Phase 1 on refined samples only = MH fidelity extraction.
  gan::TrainState state = gan::init_train_state(cfg.attack_prior, cfg.train);
  SelectionTracker tracker;
  tracker.dataset_moments = metrics::moments(refined.points);
  tracker.world_moments = metrics::moments(
      worlds::sample(world, cfg.select_n, derive_seed(cfg.eval_seed, 0x776f726c)).points);
  tracker.select_n = cfg.select_n;
  tracker.eval_seed = cfg.eval_seed;
  const auto on_log = [&](const gan::TrainState& st, long step, double, double) {
    tracker.observe(st, step);
  };
  gan::TrainConfig phase1 = cfg.train;
  phase1.log_every = cfg.select_every;
  phase1.decay_steps = 0;
  gan::train_steps(state, gan::TrainingData(refined.points), phase1, on_log);

  WhiteBoxResult result;
  result.mh_only.scenario = Scenario::WhiteBoxFidelity;
  result.mh_only.budget = budget;
  result.mh_only.real_fraction = real_fraction;
  result.mh_only.refined_samples = refined.size();
  result.mh_only.selection_history = tracker.history;
  result.mh_only.attack_model = state.model;
  result.mh_only.selected_step = phase1.steps;
  result.mh_only.report = finish_report(result.mh_only.attack_model, target, world, cfg,
                                        src.ledger().used);

  // Phase 2: the calibration reals join the training set.
  Mat merged(refined.points.rows() + real.points.rows(), 2);
  merged << refined.points, real.points;
  gan::TrainConfig phase2 = cfg.train;
  phase2.steps = cfg.phase2_steps;
  phase2.log_every = cfg.select_every;
  gan::train_steps(state, gan::TrainingData(merged), phase2, on_log);

  result.final_run.scenario = Scenario::WhiteBoxFidelity;
  result.final_run.budget = budget;
  result.final_run.real_fraction = real_fraction;
  result.final_run.refined_samples = refined.size();
  result.final_run.selection_history = tracker.history;
  result.final_run.attack_model = state.model;
  result.final_run.selected_step = phase1.steps + phase2.steps;
  result.final_run.report = finish_report(result.final_run.attack_model, target, world, cfg,
                                          src.ledger().used);
  return result;
}

TransferRecord transfer_learning_study(const gan::GanModel& extracted,
                                       const worlds::MixtureSpec& new_world,
                                       long budget_steps, const AttackConfig& cfg) {
  const metrics::GaussianMoments world_moments = metrics::moments(
      worlds::sample(new_world, cfg.eval_n, derive_seed(cfg.eval_seed, 0x6e657777)).points);

  auto frechet_to_world = [&](const gan::GanModel& model, long tag) {
    const Mat pts =
        gan::generate(model, cfg.select_n, derive_seed(cfg.eval_seed, 0x747261 + tag)).points;
    return metrics::frechet_distance(metrics::moments(pts), world_moments);
  };

  gan::TrainConfig tc = cfg.train;
  tc.steps = budget_steps;
  tc.log_every = std::max<long>(1, cfg.select_every);

  TransferRecord rec;
  auto run_arm = [&](gan::TrainState state, std::vector<TransferPoint>& traj) {
    traj.push_back({0, frechet_to_world(state.model, 0)});
    const auto on_log = [&](const gan::TrainState& st, long step, double, double) {
      traj.push_back({step, frechet_to_world(st.model, step)});
    };
    gan::train_steps(state, gan::TrainingData(new_world), tc, on_log);
    return state.model;
  };

  // Fine-tune arm: extracted weights, fresh optimizer, same data stream.
  gan::TrainState warm = gan::init_train_state(extracted.prior, tc);
  warm.model = extracted;
  warm.model.history.clear();
  warm.g_opt = nnet::AdamState::zeros_like(warm.model.generator, tc.adam);
  warm.d_opt = nnet::AdamState::zeros_like(warm.model.discriminator, tc.adam);
  rec.fine_tune_model = run_arm(std::move(warm), rec.fine_tune);
  rec.fine_tune_final = rec.fine_tune.back().frechet_to_world;

  gan::TrainState cold = gan::init_train_state(cfg.attack_prior, tc);
  rec.scratch_model = run_arm(std::move(cold), rec.scratch);
  rec.scratch_final = rec.scratch.back().frechet_to_world;
  return rec;
}

}  // namespace ganlab::extraction
