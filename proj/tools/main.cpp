// ganlab: train toy GAN targets, run extraction attack matrices, dissect
// model distributions, serve a target over the line protocol, and compare
// transfer learning against training from scratch.

#include <CLI11.hpp>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ganlab/experiment.hpp"
#include "ganlab/server.hpp"

namespace {

using namespace ganlab;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop.store(true); }

experiment::ExperimentConfig load_config_or_die(const std::string& path,
                                                const std::string& out_override,
                                                int threads_override,
                                                std::uint64_t seed_override) {
  experiment::ExperimentConfig cfg = experiment::ExperimentConfig::load(path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (threads_override > 0) cfg.threads = threads_override;
  if (seed_override != 0) cfg.seeds = {seed_override};
  cfg.validate();
  return cfg;
}

int cmd_train_target(const experiment::ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::string hash = cfg.hash();
  const std::string csv_path = cfg.out_dir + "/targets_" + hash + ".csv";
  std::ofstream csv(csv_path);
  csv << "config_hash,seed,steps,frechet_to_world,hq_fraction,checkpoint\n";
  for (std::uint64_t seed : cfg.seeds) {
    const auto bundle = experiment::train_or_load_target(cfg, seed);
    char row[512];
    std::snprintf(row, sizeof(row), "%s,%llu,%ld,%.12g,%.12g,%s\n", hash.c_str(),
                  static_cast<unsigned long long>(seed), cfg.target.train.steps,
                  bundle.frechet_to_world, bundle.hq_fraction,
                  bundle.checkpoint_path.c_str());
    csv << row;
    std::printf("target seed=%llu frechet=%.6g hq=%.4f -> %s\n",
                static_cast<unsigned long long>(seed), bundle.frechet_to_world,
                bundle.hq_fraction, bundle.checkpoint_path.c_str());
  }
  std::printf("wrote %s\n", csv_path.c_str());
  return kExitOk;
}

int cmd_attack(const experiment::ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::string hash = cfg.hash();
  const std::string csv_path = cfg.out_dir + "/attack_" + hash + ".csv";
  const auto results = experiment::run_attack_matrix(cfg, [](const auto& cell) {
    std::printf("%s seed=%llu budget=%ld frac=%.2f defense=%s%s%s acc=%.6g fid=%.6g\n",
                extraction::scenario_name(cell.scenario).c_str(),
                static_cast<unsigned long long>(cell.seed), cell.budget,
                cell.real_fraction, cell.defense_kind.c_str(),
                cell.variant.empty() ? "" : " variant=", cell.variant.c_str(),
                cell.report.accuracy, cell.report.fidelity);
  });
  std::ofstream csv(csv_path);
  csv << experiment::CellResult::csv_header() << "\n";
  for (const auto& cell : results) csv << cell.csv_row(hash) << "\n";

  // Trend summary over budgets per seed: the query-count study in one flag.
  json summary;
  summary["config_hash"] = hash;
  json monotone = json::array();
  for (std::uint64_t seed : cfg.seeds) {
    std::vector<double> acc;
    for (long budget : cfg.budgets)
      for (const auto& cell : results)
        if (cell.seed == seed && cell.budget == budget && cell.error.empty() &&
            cell.scenario == extraction::Scenario::BlackBoxAccuracy)
          acc.push_back(cell.report.accuracy);
    bool decreasing = acc.size() >= 2;
    for (std::size_t i = 1; i < acc.size(); ++i)
      if (acc[i] >= acc[i - 1]) decreasing = false;
    if (acc.size() >= 2)
      monotone.push_back({{"seed", seed}, {"accuracy_strictly_decreasing", decreasing}});
  }
  summary["query_count_trend"] = monotone;
  std::ofstream summary_out(cfg.out_dir + "/attack_" + hash + "_summary.json");
  summary_out << summary.dump(2) << "\n";
  std::printf("wrote %s\n", csv_path.c_str());
  return kExitOk;
}

int cmd_dissect(const std::vector<std::string>& checkpoints, int k, long n,
                std::uint64_t seed, const std::string& out_dir) {
  if (checkpoints.size() < 2)
    throw ConfigError("dissect: need at least 2 checkpoints (target first)");
  const worlds::MixtureSpec world = worlds::grid25();
  const Mat real = worlds::sample(world, n, derive_seed(seed, 1)).points;
  const auto reference = metrics::kmeans(real, k, derive_seed(seed, 2));
  const Vec world_props = metrics::class_proportions(real, reference);

  // Resample row: clustering noise floor for the world itself.
  const Mat real2 = worlds::sample(world, n, derive_seed(seed, 3)).points;
  const Vec world2_props = metrics::class_proportions(real2, reference);

  gan::GanModel target = gan::load_model(checkpoints.front());
  const Vec target_props = metrics::class_proportions(
      gan::generate(target, n, derive_seed(seed, 4)).points, reference);

  json out;
  out["k"] = k;
  out["n"] = n;
  json centroids = json::array();
  for (long c = 0; c < reference.centroids.rows(); ++c)
    centroids.push_back({reference.centroids(c, 0), reference.centroids(c, 1)});
  out["reference_centroids"] = centroids;
  out["world_proportions"] = std::vector<double>(
      world_props.data(), world_props.data() + world_props.size());
  out["world_resample_js"] = metrics::js_divergence(world2_props, world_props);

  json models = json::array();
  json table = json::array();
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    gan::GanModel model = gan::load_model(checkpoints[i]);
    const Vec props = metrics::class_proportions(
        gan::generate(model, n, derive_seed(seed, 5 + i)).points, reference);
    json jm;
    jm["checkpoint"] = checkpoints[i];
    jm["proportions"] = std::vector<double>(props.data(), props.data() + props.size());
    models.push_back(jm);
    if (i > 0) {
      json row;
      row["checkpoint"] = checkpoints[i];
      row["js_accuracy"] = metrics::js_divergence(props, target_props);
      row["js_fidelity"] = metrics::js_divergence(props, world_props);
      table.push_back(row);
      std::printf("%s js_accuracy=%.6g js_fidelity=%.6g\n", checkpoints[i].c_str(),
                  row["js_accuracy"].get<double>(), row["js_fidelity"].get<double>());
    }
  }
  out["models"] = models;
  out["js_table"] = table;

  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/dissect_" + to_hex(fnv1a64(out.dump())) + ".json";
  std::ofstream f(path);
  f << out.dump(2) << "\n";
  std::printf("wrote %s\n", path.c_str());
  return kExitOk;
}

int cmd_serve(const std::string& checkpoint, const std::string& capability_json,
              const std::string& defense_json, int port, long budget, long corpus_size,
              std::uint64_t seed) {
  gan::GanModel target = gan::load_model(checkpoint);
  provider::ProviderConfig pc;
  pc.capability = provider::Capability::from_json(capability_json);
  pc.defense = defenses::DefensePolicy::from_json(defense_json);
  pc.budget = budget;
  pc.corpus_size = corpus_size;
  pc.seed = seed;
  provider::ModelProvider prov(std::move(target), worlds::grid25(), pc);

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  server::ServerOptions options;
  options.port = port;
  options.stop = &g_stop;
  int bound = 0;
  std::atomic<bool> ready{false};
  std::printf("serving %s on 127.0.0.1:%d (ctrl-c to stop)\n", checkpoint.c_str(), port);
  server::serve(prov, options, &bound, &ready);
  return kExitOk;
}

int cmd_transfer(const experiment::ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::string hash = cfg.hash();
  const worlds::MixtureSpec world = cfg.world.build();
  const worlds::MixtureSpec new_world = world.translated(cfg.transfer_shift);

  const std::string csv_path = cfg.out_dir + "/transfer_" + hash + ".csv";
  std::ofstream csv(csv_path);
  csv << "config_hash,seed,budget_steps,fine_tune_final,scratch_final\n";
  std::ofstream traj(cfg.out_dir + "/transfer_" + hash + "_trajectories.csv");
  traj << "config_hash,seed,arm,step,frechet_to_new_world\n";

  std::vector<std::string> rows(cfg.seeds.size()), traj_rows(cfg.seeds.size());
  experiment::parallel_for(static_cast<long>(cfg.seeds.size()), cfg.threads, [&](long i) {
    const std::uint64_t seed = cfg.seeds[i];
    const auto target = experiment::train_or_load_target(cfg, seed);

    // Extract first, then transfer the stolen weights to the shifted world.
    provider::ProviderConfig pc;
    pc.budget = cfg.budgets.back();
    pc.seed = derive_seed(seed, 0x9209);
    pc.corpus_size = cfg.target.corpus_size;
    provider::ModelProvider prov(target.model, world, pc);
    extraction::AttackConfig ac = cfg.attack;
    ac.train.seed = derive_seed(seed, 0xa77ac4);
    ac.eval_seed = derive_seed(seed, 0xe7a13);
    const auto run = extraction::run_black_box_accuracy(prov, target.model, world,
                                                        cfg.budgets.back(), ac);

    extraction::AttackConfig tc = ac;
    tc.train.seed = derive_seed(seed, 0x7452);
    const auto rec = extraction::transfer_learning_study(run.attack_model, new_world,
                                                         cfg.transfer_budget_steps, tc);
    char row[256];
    std::snprintf(row, sizeof(row), "%s,%llu,%ld,%.12g,%.12g\n", hash.c_str(),
                  static_cast<unsigned long long>(seed), cfg.transfer_budget_steps,
                  rec.fine_tune_final, rec.scratch_final);
    rows[i] = row;
    std::string tr;
    for (const auto& p : rec.fine_tune) {
      std::snprintf(row, sizeof(row), "%s,%llu,fine_tune,%ld,%.12g\n", hash.c_str(),
                    static_cast<unsigned long long>(seed), p.step, p.frechet_to_world);
      tr += row;
    }
    for (const auto& p : rec.scratch) {
      std::snprintf(row, sizeof(row), "%s,%llu,scratch,%ld,%.12g\n", hash.c_str(),
                    static_cast<unsigned long long>(seed), p.step, p.frechet_to_world);
      tr += row;
    }
    traj_rows[i] = tr;
    std::printf("transfer seed=%llu fine_tune=%.6g scratch=%.6g\n",
                static_cast<unsigned long long>(seed), rec.fine_tune_final,
                rec.scratch_final);
  });
  for (const auto& r : rows) csv << r;
  for (const auto& r : traj_rows) traj << r;
  std::printf("wrote %s\n", csv_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ganlab: GAN model-extraction laboratory on 2-D Gaussian mixtures"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "experiment config JSON");
  app.add_option("--out", out_dir, "output directory override");
  app.add_option("--threads", threads, "worker threads override");
  app.add_option("--seed", seed, "single-seed override");

  auto* train = app.add_subcommand("train-target", "train target GANs per seed");
  auto* attack = app.add_subcommand("attack", "run the attack matrix");
  auto* transfer = app.add_subcommand("transfer", "transfer-learning case study");

  auto* dissect = app.add_subcommand("dissect", "class-distribution dissection");
  std::vector<std::string> checkpoints;
  int k = 30;
  long dissect_n = 50000;
  dissect->add_option("checkpoints", checkpoints,
                      "model checkpoints, target first, then attack models");
  dissect->add_option("--k", k, "number of k-means classes");
  dissect->add_option("--n", dissect_n, "samples per model");

  auto* serve = app.add_subcommand("serve", "serve a checkpoint over line-JSON TCP");
  std::string checkpoint, capability_json = R"({"query_mode":"latent_queries"})";
  std::string defense_json = R"({"kind":"none"})";
  int port = 7641;
  long budget = -1, corpus_size = 200000;
  serve->add_option("checkpoint", checkpoint, "target model checkpoint")->required();
  serve->add_option("--capabilities", capability_json, "capability JSON");
  serve->add_option("--defense", defense_json, "defense policy JSON");
  serve->add_option("--port", port, "TCP port (0 = ephemeral)");
  serve->add_option("--budget", budget, "query budget (-1 = unlimited)");
  serve->add_option("--corpus-size", corpus_size, "declared training corpus size");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed() || attack->parsed() || transfer->parsed()) {
      if (config_path.empty()) {
        std::fprintf(stderr, "error: --config is required for this subcommand\n");
        return kExitConfig;
      }
      const auto cfg = load_config_or_die(config_path, out_dir, threads, seed);
      if (train->parsed()) return cmd_train_target(cfg);
      if (attack->parsed()) return cmd_attack(cfg);
      return cmd_transfer(cfg);
    }
    if (dissect->parsed())
      return cmd_dissect(checkpoints, k, dissect_n, seed ? seed : 1234,
                         out_dir.empty() ? "out" : out_dir);
    if (serve->parsed())
      return cmd_serve(checkpoint, capability_json, defense_json, port, budget,
                       corpus_size, seed ? seed : 1);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
