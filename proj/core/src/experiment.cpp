#include "ganlab/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <thread>

namespace ganlab::experiment {

using nlohmann::json;

worlds::MixtureSpec WorldConfig::build() const {
  if (base != "grid25") throw ConfigError("unknown world base: " + base);
  return worlds::grid25().translated(shift);
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("config: seeds must be non-empty");
  for (std::size_t i = 1; i < budgets.size(); ++i)
    if (budgets[i] <= budgets[i - 1])
      throw ConfigError("config: budgets must be strictly increasing");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
  target.train.validate();
  attack.train.validate();
  for (const auto& d : defense_policies) d.validate();
}

namespace {

json train_config_to_json(const gan::TrainConfig& t) {
  json j;
  j["steps"] = t.steps;
  j["batch_size"] = t.batch_size;
  j["d_steps_per_g"] = t.d_steps_per_g;
  j["lr"] = t.adam.lr;
  j["beta1"] = t.adam.beta1;
  j["beta2"] = t.adam.beta2;
  j["eps"] = t.adam.eps;
  j["decay_steps"] = t.decay_steps;
  return j;
}

gan::TrainConfig train_config_from_json(const json& j, const gan::TrainConfig& defaults) {
  gan::TrainConfig t = defaults;
  t.steps = j.value("steps", t.steps);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.d_steps_per_g = j.value("d_steps_per_g", t.d_steps_per_g);
  t.adam.lr = j.value("lr", t.adam.lr);
  t.adam.beta1 = j.value("beta1", t.adam.beta1);
  t.adam.beta2 = j.value("beta2", t.adam.beta2);
  t.adam.eps = j.value("eps", t.adam.eps);
  t.decay_steps = j.value("decay_steps", t.decay_steps);
  return t;
}

}  // namespace

std::string ExperimentConfig::to_canonical_json() const {
  json j;
  j["world"] = {{"base", world.base}, {"shift", {world.shift.x(), world.shift.y()}}};
  j["target"] = train_config_to_json(target.train);
  j["target"]["corpus_size"] = target.corpus_size;
  j["target"]["latent_dim"] = target.latent_dim;
  json sc = json::array();
  for (auto s : scenarios) sc.push_back(extraction::scenario_name(s));
  j["scenarios"] = sc;
  j["budgets"] = budgets;
  j["real_fractions"] = real_fractions;
  json defs = json::array();
  for (const auto& d : defense_policies) defs.push_back(json::parse(d.to_json()));
  j["defenses"] = defs;
  j["seeds"] = seeds;
  j["attack"] = train_config_to_json(attack.train);
  j["attack"]["phase2_steps"] = attack.phase2_steps;
  j["attack"]["select_every"] = attack.select_every;
  j["attack"]["select_n"] = attack.select_n;
  j["attack"]["eval_n"] = attack.eval_n;
  j["mh"] = {{"K", mh.K}, {"N", mh.N}, {"m", mh.m}};
  if (query_prior) j["query_prior"] = *query_prior;
  j["transfer"] = {{"shift", {transfer_shift.x(), transfer_shift.y()}},
                   {"budget_steps", transfer_budget_steps}};
  j["out_dir"] = out_dir;
  return j.dump();
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;
  if (j.contains("world")) {
    const json& w = j["world"];
    if (w.is_string()) {
      cfg.world.base = w.get<std::string>();
    } else {
      cfg.world.base = w.value("base", "grid25");
      if (w.contains("shift"))
        cfg.world.shift = Vector2d(w["shift"][0].get<double>(), w["shift"][1].get<double>());
    }
  }
  if (j.contains("target")) {
    cfg.target.train = train_config_from_json(j["target"], cfg.target.train);
    cfg.target.corpus_size = j["target"].value("corpus_size", cfg.target.corpus_size);
    cfg.target.latent_dim = j["target"].value("latent_dim", cfg.target.latent_dim);
  }
  if (j.contains("scenarios")) {
    cfg.scenarios.clear();
    for (const json& s : j["scenarios"])
      cfg.scenarios.push_back(extraction::scenario_from_name(s.get<std::string>()));
  }
  if (j.contains("budgets")) cfg.budgets = j["budgets"].get<std::vector<long>>();
  if (j.contains("real_fractions"))
    cfg.real_fractions = j["real_fractions"].get<std::vector<double>>();
  if (j.contains("defenses")) {
    cfg.defense_policies.clear();
    for (const json& d : j["defenses"])
      cfg.defense_policies.push_back(defenses::DefensePolicy::from_json(d.dump()));
  }
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("attack")) {
    cfg.attack.train = train_config_from_json(j["attack"], cfg.attack.train);
    cfg.attack.phase2_steps = j["attack"].value("phase2_steps", cfg.attack.phase2_steps);
    cfg.attack.select_every = j["attack"].value("select_every", cfg.attack.select_every);
    cfg.attack.select_n = j["attack"].value("select_n", cfg.attack.select_n);
    cfg.attack.eval_n = j["attack"].value("eval_n", cfg.attack.eval_n);
  }
  if (j.contains("mh")) {
    cfg.mh.K = j["mh"].value("K", cfg.mh.K);
    cfg.mh.N = j["mh"].value("N", cfg.mh.N);
    cfg.mh.m = j["mh"].value("m", cfg.mh.m);
  }
  if (j.contains("query_prior")) cfg.query_prior = j["query_prior"].get<std::string>();
  if (j.contains("transfer")) {
    const json& t = j["transfer"];
    if (t.contains("shift"))
      cfg.transfer_shift =
          Vector2d(t["shift"][0].get<double>(), t["shift"][1].get<double>());
    cfg.transfer_budget_steps = t.value("budget_steps", cfg.transfer_budget_steps);
  }
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return from_json(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

TargetBundle train_or_load_target(const ExperimentConfig& cfg, std::uint64_t seed,
                                  bool allow_cache) {
  const worlds::MixtureSpec world = cfg.world.build();
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path =
      cfg.out_dir + "/target_" + cfg.hash() + "_seed" + std::to_string(seed) + ".json";

  TargetBundle bundle;
  bundle.checkpoint_path = path;
  if (allow_cache && std::filesystem::exists(path)) {
    bundle.model = gan::load_model(path);
  } else {
    gan::TrainConfig tc = cfg.target.train;
    tc.seed = seed;
    bundle.model = gan::train(gan::TrainingData(world), tc,
                              gan::LatentPrior::standard_normal(cfg.target.latent_dim));
    gan::save_model(bundle.model, path);
  }
  const Mat pts = gan::generate(bundle.model, 50000, derive_seed(seed, 0xe7a1)).points;
  const Mat real = worlds::sample(world, 50000, derive_seed(seed, 0xe7a2)).points;
  bundle.frechet_to_world =
      metrics::frechet_distance(metrics::moments(pts), metrics::moments(real));
  bundle.hq_fraction = worlds::high_quality_fraction(pts, world);
  return bundle;
}

std::string CellResult::csv_header() {
  return "config_hash,scenario,seed,budget,real_fraction,defense,variant," +
         metrics::AttackReport::csv_header() + ",selected_step,refined_samples,error";
}

std::string CellResult::csv_row(const std::string& config_hash) const {
  char head[256];
  std::snprintf(head, sizeof(head), "%s,%s,%llu,%ld,%.6g,%s,%s,", config_hash.c_str(),
                extraction::scenario_name(scenario).c_str(),
                static_cast<unsigned long long>(seed), budget, real_fraction,
                defense_kind.c_str(), variant.c_str());
  char tail[96];
  std::snprintf(tail, sizeof(tail), ",%ld,%ld,%s", selected_step, refined_samples,
                error.c_str());
  return std::string(head) + report.csv_row() + tail;
}

void parallel_for(long n, int threads, const std::function<void(long)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const int workers = static_cast<int>(std::min<long>(threads, n));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const long i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

std::string defense_kind_name(const defenses::DefensePolicy& d) {
  json j = json::parse(d.to_json());
  return j.at("kind").get<std::string>();
}

extraction::AttackConfig cell_attack_config(const ExperimentConfig& cfg,
                                            std::uint64_t seed) {
  extraction::AttackConfig ac = cfg.attack;
  ac.train.seed = derive_seed(seed, 0xa77ac4);
  ac.eval_seed = derive_seed(seed, 0xe7a13);
  if (cfg.query_prior) {
    if (*cfg.query_prior == "uniform")
      ac.query_prior = gan::LatentPrior::uniform(-1.0, 1.0);
    else if (*cfg.query_prior == "standard_normal")
      ac.query_prior = gan::LatentPrior::standard_normal();
    else
      throw ConfigError("unknown query_prior: " + *cfg.query_prior);
  }
  return ac;
}

}  // namespace

std::vector<CellResult> run_cell(const ExperimentConfig& cfg, const gan::GanModel& target,
                                 extraction::Scenario scenario, long budget,
                                 double real_fraction,
                                 const defenses::DefensePolicy& defense,
                                 std::uint64_t seed) {
  const worlds::MixtureSpec world = cfg.world.build();
  provider::ProviderConfig pc;
  pc.budget = -1;  // the attack budget is the experiment variable, not a hard cap
  pc.defense = defense;
  pc.corpus_size = cfg.target.corpus_size;
  pc.seed = derive_seed(seed, 0x9209);
  switch (scenario) {
    case extraction::Scenario::BlackBoxAccuracy:
      pc.capability.query_mode = cfg.query_prior
                                     ? provider::Capability::QueryMode::LatentQueries
                                     : provider::Capability::QueryMode::GeneratedDataOnly;
      pc.budget = budget;
      break;
    case extraction::Scenario::PartialBlackBoxFidelity:
      pc.capability.query_mode = provider::Capability::QueryMode::GeneratedDataOnly;
      pc.capability.partial_real_fraction = std::max(real_fraction, 0.0);
      pc.budget = budget;
      break;
    case extraction::Scenario::WhiteBoxFidelity:
      pc.capability.query_mode = provider::Capability::QueryMode::GeneratedDataOnly;
      pc.capability.partial_real_fraction = std::max(real_fraction, 0.1);
      pc.capability.discriminator_access = true;
      break;
  }
  provider::ModelProvider prov(target, world, pc);
  const extraction::AttackConfig ac = cell_attack_config(cfg, seed);

  CellResult base;
  base.scenario = scenario;
  base.seed = seed;
  base.budget = budget;
  base.real_fraction = real_fraction;
  base.defense_kind = defense_kind_name(defense);

  std::vector<CellResult> rows;
  try {
    switch (scenario) {
      case extraction::Scenario::BlackBoxAccuracy: {
        auto run = extraction::run_black_box_accuracy(prov, target, world, budget, ac);
        base.report = run.report;
        base.selected_step = run.selected_step;
        rows.push_back(base);
        break;
      }
      case extraction::Scenario::PartialBlackBoxFidelity: {
        auto run =
            extraction::run_partial_black_box(prov, target, world, budget, real_fraction, ac);
        base.report = run.report;
        base.selected_step = run.selected_step;
        rows.push_back(base);
        break;
      }
      case extraction::Scenario::WhiteBoxFidelity: {
        extraction::MhConfig mh = cfg.mh;
        auto result = extraction::run_white_box(prov, target, world, budget,
                                                real_fraction <= 0 ? 0.1 : real_fraction,
                                                mh, ac);
        CellResult mh_row = base;
        mh_row.variant = "mh_only";
        mh_row.report = result.mh_only.report;
        mh_row.selected_step = result.mh_only.selected_step;
        mh_row.refined_samples = result.mh_only.refined_samples;
        rows.push_back(mh_row);
        CellResult final_row = base;
        final_row.variant = "final";
        final_row.report = result.final_run.report;
        final_row.selected_step = result.final_run.selected_step;
        final_row.refined_samples = result.final_run.refined_samples;
        rows.push_back(final_row);
        break;
      }
    }
  } catch (const QuotaError& e) {
    base.error = std::string("quota: ") + e.what();
    rows.push_back(base);
  } catch (const PermissionError& e) {
    base.error = std::string("permission: ") + e.what();
    rows.push_back(base);
  }
  return rows;
}

std::vector<CellResult> run_attack_matrix(const ExperimentConfig& cfg,
                                          const CellCallback& on_cell) {
  cfg.validate();
  const worlds::MixtureSpec world = cfg.world.build();

  // Targets are shared across cells of one seed; train them first.
  std::vector<TargetBundle> targets(cfg.seeds.size());
  parallel_for(static_cast<long>(cfg.seeds.size()), cfg.threads, [&](long i) {
    targets[i] = train_or_load_target(cfg, cfg.seeds[i]);
  });

  struct Cell {
    extraction::Scenario scenario;
    long budget;
    double fraction;
    std::size_t defense_idx;
    std::size_t seed_idx;
  };
  std::vector<Cell> cells;
  for (auto scenario : cfg.scenarios) {
    const bool uses_fraction = scenario != extraction::Scenario::BlackBoxAccuracy;
    const std::vector<double> fractions =
        uses_fraction ? cfg.real_fractions : std::vector<double>{0.0};
    for (long budget : cfg.budgets)
      for (double f : fractions)
        for (std::size_t d = 0; d < cfg.defense_policies.size(); ++d)
          for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
            cells.push_back({scenario, budget, f, d, s});
  }

  std::vector<std::vector<CellResult>> results(cells.size());
  parallel_for(static_cast<long>(cells.size()), cfg.threads, [&](long i) {
    const Cell& c = cells[i];
    results[i] = run_cell(cfg, targets[c.seed_idx].model, c.scenario, c.budget, c.fraction,
                          cfg.defense_policies[c.defense_idx], cfg.seeds[c.seed_idx]);
  });

  std::vector<CellResult> flat;
  for (auto& rows : results)
    for (auto& row : rows) {
      if (on_cell) on_cell(row);
      flat.push_back(std::move(row));
    }
  return flat;
}

}  // namespace ganlab::experiment
