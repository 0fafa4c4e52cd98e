// Command-line front end for the differentiable predictive control pipeline:
// dataset generation, the two training steps, closed-loop evaluation and
// report aggregation. Artifacts are reproducible from (config, seed); wall
// clock and timestamps live only in the *_manifest.json files.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dpc/checkpoint.hpp"
#include "dpc/errors.hpp"
#include "dpc/simulate.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;  // 0 = use config seed
  std::string out_dir;
};

dpc::RunConfig load(const CommonArgs& args) {
  dpc::RunConfig cfg = dpc::load_config(args.config_path);
  if (args.seed != 0) cfg.run.seed = args.seed;
  return cfg;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void write_manifest(const fs::path& path, json extra) {
  extra["created_at"] = timestamp();
  std::ofstream out(path);
  if (!out) throw dpc::ValidationError("cannot open '" + path.string() + "' for writing");
  out << extra.dump(1) << "\n";
}

json splits_json(const dpc::DatasetSplits& s) {
  return json{{"train", {s.train.begin, s.train.end}},
              {"dev", {s.dev.begin, s.dev.end}},
              {"test", {s.test.begin, s.test.end}}};
}

int cmd_generate_data(const CommonArgs& args) {
  const dpc::RunConfig cfg = load(args);
  const fs::path dir = args.out_dir.empty() ? fs::path(cfg.run.data_dir) : fs::path(args.out_dir);
  fs::create_directories(dir);

  dpc::RCBuildingModel plant(cfg.plant);
  dpc::SysIdGenResult sysid = dpc::generate_sysid_dataset(plant, cfg.run.days, cfg.run.excitation,
                                                          cfg.disturbance, cfg.run.seed);
  dpc::write_sysid_csv((dir / "sysid_data.csv").string(), sysid.series, cfg.plant.ts_seconds);
  write_manifest(dir / "sysid_manifest.json",
                 json{{"kind", "sysid"},
                      {"seed", cfg.run.seed},
                      {"config_hash", dpc::config_hash(cfg)},
                      {"samples", sysid.series.samples()},
                      {"splits", splits_json(sysid.splits)}});

  dpc::CtrlGenResult ctrl = dpc::generate_ctrl_dataset(plant, cfg.run.days, cfg.run.excitation,
                                                       cfg.disturbance, cfg.run.bounds,
                                                       cfg.run.seed);
  dpc::write_ctrl_csv((dir / "ctrl_data.csv").string(), ctrl.series, cfg.plant.ts_seconds);
  write_manifest(dir / "ctrl_manifest.json",
                 json{{"kind", "ctrl"},
                      {"seed", cfg.run.seed},
                      {"config_hash", dpc::config_hash(cfg)},
                      {"samples", ctrl.series.samples()},
                      {"splits", splits_json(ctrl.splits)}});

  std::printf("wrote %s (%d samples) and %s (%d samples)\n",
              (dir / "sysid_data.csv").c_str(), sysid.series.samples(),
              (dir / "ctrl_data.csv").c_str(), ctrl.series.samples());
  return 0;
}

int cmd_train_ssm(const CommonArgs& args) {
  const dpc::RunConfig cfg = load(args);
  const fs::path data_dir(cfg.run.data_dir);
  const fs::path out_dir = args.out_dir.empty() ? data_dir : fs::path(args.out_dir);
  fs::create_directories(out_dir);

  dpc::SeriesData series = dpc::read_sysid_csv((data_dir / "sysid_data.csv").string(),
                                               cfg.plant.n_u(), 1, cfg.plant.n_y());
  const dpc::DatasetSplits splits = dpc::equal_thirds(series.samples());
  const dpc::NormStats stats = dpc::compute_norm_stats(series, splits.train);
  const dpc::SeriesData normalized = dpc::normalize_series(series, stats);

  dpc::Rng rng(dpc::Rng::stream(cfg.run.seed, 100).raw());
  dpc::NeuralSSM model = dpc::NeuralSSM::make(cfg.ssm_arch(), rng);

  dpc::SysIdConfig train_cfg;
  train_cfg.horizon = cfg.run.horizon;
  train_cfg.batch_size = cfg.ssm.batch_size;
  train_cfg.epochs = cfg.ssm.epochs;
  train_cfg.patience = cfg.ssm.patience;
  train_cfg.stop_dev_nmse = cfg.ssm.stop_dev_nmse;
  train_cfg.loss.fit_weight = cfg.ssm.fit_weight;
  train_cfg.loss.smooth_weight = cfg.ssm.smooth_weight;
  train_cfg.loss.influence_weight = cfg.ssm.influence_weight;
  train_cfg.loss.influence_bound = cfg.ssm.influence_bound;
  train_cfg.optimizer = cfg.optimizer;
  train_cfg.seed = cfg.run.seed;

  dpc::SsmTrainResult result = dpc::train_ssm(model, normalized, splits, train_cfg);
  const double test_nmse = dpc::open_loop_nmse(model, normalized, splits.test, cfg.run.horizon);

  dpc::save_ssm_checkpoint((out_dir / "ssm_checkpoint.json").string(), model, stats,
                           dpc::config_hash(cfg));
  dpc::save_ssm_history((out_dir / "ssm_history.json").string(), result);
  write_manifest(out_dir / "ssm_train_manifest.json",
                 json{{"kind", "train-ssm"},
                      {"seed", cfg.run.seed},
                      {"config_hash", dpc::config_hash(cfg)},
                      {"wall_seconds", result.wall_seconds},
                      {"epochs_run", result.history.size()},
                      {"best_epoch", result.best_epoch},
                      {"best_dev_nmse", result.best_dev_nmse},
                      {"test_nmse", test_nmse}});
  std::printf("ssm: best dev nMSE %.4f (epoch %d), test nMSE %.4f, %.1f s\n",
              result.best_dev_nmse, result.best_epoch, test_nmse, result.wall_seconds);
  return 0;
}

int cmd_train_policy(const CommonArgs& args, const std::string& ssm_path) {
  const dpc::RunConfig cfg = load(args);
  const fs::path data_dir(cfg.run.data_dir);
  const fs::path out_dir = args.out_dir.empty() ? data_dir : fs::path(args.out_dir);
  fs::create_directories(out_dir);

  dpc::SsmCheckpoint ssm = dpc::load_ssm_checkpoint(ssm_path);
  if (ssm.model.arch.n_y != cfg.plant.n_y() || ssm.model.arch.n_u != cfg.plant.n_u())
    throw dpc::ValidationError("SSM checkpoint dimensions do not match the plant config");
  if (ssm.model.arch.n_past != cfg.n_past())
    throw dpc::ValidationError("SSM checkpoint n_past=" + std::to_string(ssm.model.arch.n_past) +
                               " does not match config n_past=" + std::to_string(cfg.n_past()));

  dpc::CtrlSeriesData series = dpc::read_ctrl_csv((data_dir / "ctrl_data.csv").string(),
                                                  cfg.plant.n_u(), 1, cfg.plant.n_y());
  const dpc::DatasetSplits splits = dpc::equal_thirds(series.samples());

  dpc::Rng rng(dpc::Rng::stream(cfg.run.seed, 200).raw());
  dpc::PolicyNet policy = dpc::PolicyNet::make(cfg.feature_layout(), cfg.policy.hidden,
                                               cfg.run.horizon, cfg.plant.n_u(),
                                               dpc::activation_from_string(cfg.policy.activation),
                                               rng);
  policy.u_scale = ssm.stats.u_scale;

  dpc::ClosedLoopModel cl{&policy, &ssm.model, ssm.stats, cfg.run.horizon};
  dpc::PolicyTrainConfig train_cfg;
  train_cfg.updates = cfg.policy.updates;
  train_cfg.batch_size = cfg.policy.batch_size;
  train_cfg.dev_interval = cfg.policy.dev_interval;
  train_cfg.optimizer = cfg.optimizer;
  train_cfg.seed = cfg.run.seed;

  dpc::PolicyTrainResult result =
      dpc::train_policy(cl, series, splits, cfg.loss_weights(), train_cfg);

  dpc::save_policy_checkpoint((out_dir / "policy_checkpoint.json").string(), policy,
                              dpc::config_hash(cfg));
  dpc::save_policy_history((out_dir / "policy_history.json").string(), result);
  write_manifest(out_dir / "policy_train_manifest.json",
                 json{{"kind", "train-policy"},
                      {"seed", cfg.run.seed},
                      {"config_hash", dpc::config_hash(cfg)},
                      {"wall_seconds", result.wall_seconds},
                      {"updates", cfg.policy.updates},
                      {"policy_params", policy.net.param_count()},
                      {"initial_dev_loss", result.initial_dev_loss},
                      {"best_dev_loss", result.best_dev_loss},
                      {"best_update", result.best_update}});
  std::printf("policy: dev loss %.5f -> %.5f (best at update %d), %.1f s\n",
              result.initial_dev_loss, result.best_dev_loss, result.best_update,
              result.wall_seconds);
  return 0;
}

int cmd_simulate(const CommonArgs& args, const std::string& policy_path,
                 const std::string& ssm_path, const std::string& plant_kind) {
  const auto t0 = std::chrono::steady_clock::now();
  const dpc::RunConfig cfg = load(args);
  const fs::path out_dir = args.out_dir.empty() ? fs::path(cfg.run.data_dir) : fs::path(args.out_dir);
  fs::create_directories(out_dir);

  dpc::PolicyCheckpoint pc = dpc::load_policy_checkpoint(policy_path);
  if (pc.policy.horizon != cfg.run.horizon)
    throw dpc::ValidationError("policy checkpoint horizon " + std::to_string(pc.policy.horizon) +
                               " does not match config horizon " +
                               std::to_string(cfg.run.horizon));
  if (pc.policy.n_u != cfg.plant.n_u())
    throw dpc::ValidationError("policy checkpoint n_u does not match the plant config");

  const dpc::SimScenario scenario = dpc::make_sim_scenario(cfg, cfg.run.seed);
  dpc::PolicyController controller(pc.policy);

  dpc::RCBuildingModel plant(cfg.plant);
  std::unique_ptr<dpc::PlantBackend> backend;
  dpc::SsmCheckpoint ssm;
  if (plant_kind == "true") {
    backend = std::make_unique<dpc::TruePlantBackend>(plant);
  } else if (plant_kind == "nominal") {
    if (ssm_path.empty())
      throw dpc::ValidationError("--plant nominal requires --ssm <checkpoint>");
    ssm = dpc::load_ssm_checkpoint(ssm_path);
    backend = std::make_unique<dpc::NominalModelBackend>(ssm.model, ssm.stats);
  } else {
    throw dpc::ValidationError("--plant must be 'nominal' or 'true', got '" + plant_kind + "'");
  }

  dpc::EvalReport report = dpc::run_closed_loop(*backend, controller, scenario);
  report.plant_kind = plant_kind;
  report.config_hash = dpc::config_hash(cfg);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string suffix = "_" + plant_kind;
  dpc::write_eval_report((out_dir / ("report" + suffix + ".json")).string(), report);
  dpc::write_trajectory_csv((out_dir / ("trajectory" + suffix + ".csv")).string(), report);
  write_manifest(out_dir / ("sim_manifest" + suffix + ".json"),
                 json{{"kind", "simulate"},
                      {"plant", plant_kind},
                      {"seed", cfg.run.seed},
                      {"config_hash", dpc::config_hash(cfg)},
                      {"wall_seconds", report.wall_seconds}});
  std::printf("simulate (%s): violation rate %.4f, mean violation %.3f C, energy |u|^2 %.1f, "
              "heat %.3g J over %d steps\n",
              plant_kind.c_str(), report.metrics.violation_rate, report.metrics.mean_violation,
              report.metrics.energy_u_sq, report.metrics.energy_joules, report.metrics.steps);
  return 0;
}

int cmd_eval_report(const std::vector<std::string>& report_paths, const std::string& out_path) {
  std::vector<dpc::EvalMetrics> metrics;
  for (const std::string& p : report_paths) metrics.push_back(dpc::load_eval_metrics(p));
  const std::vector<dpc::MetricSummary> rows = dpc::aggregate_metrics(metrics);
  if (!out_path.empty()) dpc::write_summary_csv(out_path, rows);
  std::fputs(dpc::format_summary_table(rows).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable predictive control pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string ssm_path, policy_path, plant_kind = "nominal";
  std::vector<std::string> report_paths;

  const auto add_common = [&](CLI::App* cmd, bool need_config = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "JSON config file");
    if (need_config) opt->required();
    cmd->add_option("--seed", args.seed, "override run.seed");
    cmd->add_option("--out", args.out_dir, "output directory");
  };

  CLI::App* gen = app.add_subcommand("generate-data", "simulate the plant and write both datasets");
  add_common(gen);

  CLI::App* tssm = app.add_subcommand("train-ssm", "system identification (step 1)");
  add_common(tssm);

  CLI::App* tpol = app.add_subcommand("train-policy", "control law learning (step 2)");
  add_common(tpol);
  tpol->add_option("--ssm", ssm_path, "SSM checkpoint from train-ssm")->required();

  CLI::App* sim = app.add_subcommand("simulate", "closed-loop receding-horizon evaluation");
  add_common(sim);
  sim->add_option("--policy", policy_path, "policy checkpoint")->required();
  sim->add_option("--ssm", ssm_path, "SSM checkpoint (required for --plant nominal)");
  sim->add_option("--plant", plant_kind, "nominal | true");

  CLI::App* rep = app.add_subcommand("eval-report", "aggregate metrics across report files");
  rep->add_option("reports", report_paths, "report JSON files")->required();
  rep->add_option("--out", args.out_dir, "summary CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate_data(args);
    if (tssm->parsed()) return cmd_train_ssm(args);
    if (tpol->parsed()) return cmd_train_policy(args, ssm_path);
    if (sim->parsed()) return cmd_simulate(args, policy_path, ssm_path, plant_kind);
    if (rep->parsed()) return cmd_eval_report(report_paths, args.out_dir);
  } catch (const dpc::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const dpc::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
