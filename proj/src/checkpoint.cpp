#include "dpc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "dpc/errors.hpp"
#include "json.hpp"

namespace dpc {

namespace {

using nlohmann::json;

json blocks_to_json(const std::vector<Param*>& params) {
  json blocks = json::array();
  for (const Param* p : params) {
    json b;
    b["name"] = p->name;
    b["rows"] = p->value.rows();
    b["cols"] = p->value.cols();
    b["data"] = std::vector<double>(p->value.flat().begin(), p->value.flat().end());
    blocks.push_back(std::move(b));
  }
  return blocks;
}

void blocks_from_json(const json& blocks, const std::vector<Param*>& params,
                      const std::string& path) {
  if (!blocks.is_array() || blocks.size() != params.size())
    throw ValidationError("'" + path + "': expected " + std::to_string(params.size()) +
                          " parameter blocks");
  for (size_t i = 0; i < params.size(); ++i) {
    const json& b = blocks[i];
    Param* p = params[i];
    if (b.at("name").get<std::string>() != p->name)
      throw ValidationError("'" + path + "': block " + std::to_string(i) + " is '" +
                            b.at("name").get<std::string>() + "', expected '" + p->name + "'");
    const int rows = b.at("rows").get<int>();
    const int cols = b.at("cols").get<int>();
    if (rows != p->value.rows() || cols != p->value.cols())
      throw ValidationError("'" + path + "': block '" + p->name + "' has shape " +
                            std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                            p->value.shape_str());
    const auto data = b.at("data").get<std::vector<double>>();
    if (static_cast<long long>(data.size()) != p->value.size())
      throw ValidationError("'" + path + "': block '" + p->name + "' has wrong element count");
    std::copy(data.begin(), data.end(), p->value.flat().begin());
  }
}

json stats_to_json(const NormStats& s) {
  return json{{"y_mean", s.y_mean}, {"y_std", s.y_std},     {"d_mean", s.d_mean},
              {"d_std", s.d_std},   {"u_scale", s.u_scale}};
}

NormStats stats_from_json(const json& j) {
  NormStats s;
  s.y_mean = j.at("y_mean").get<std::vector<double>>();
  s.y_std = j.at("y_std").get<std::vector<double>>();
  s.d_mean = j.at("d_mean").get<std::vector<double>>();
  s.d_std = j.at("d_std").get<std::vector<double>>();
  s.u_scale = j.at("u_scale").get<std::vector<double>>();
  return s;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << j.dump(1) << "\n";
  if (!out) throw ValidationError("write failed for '" + path + "'");
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
  return j;
}

}  // namespace

void save_ssm_checkpoint(const std::string& path, NeuralSSM& model, const NormStats& stats,
                         const std::string& config_hash) {
  const SsmArch& a = model.arch;
  json j;
  j["format"] = "dpc-ssm-v1";
  j["config_hash"] = config_hash;
  j["arch"] = {{"n_y", a.n_y},
               {"n_u", a.n_u},
               {"n_d", a.n_d},
               {"n_x", a.n_x},
               {"n_past", a.n_past},
               {"observer_hidden", a.observer_hidden},
               {"input_hidden", a.input_hidden},
               {"dist_hidden", a.dist_hidden},
               {"activation", to_string(a.activation)},
               {"state_map", to_string(a.state_map)},
               {"lambda_min", a.lambda_min},
               {"lambda_max", a.lambda_max}};
  j["normalization"] = stats_to_json(stats);
  j["blocks"] = blocks_to_json(model.params());
  write_json(path, j);
}

SsmCheckpoint load_ssm_checkpoint(const std::string& path) {
  const json j = read_json(path);
  if (j.value("format", "") != "dpc-ssm-v1")
    throw ValidationError("'" + path + "' is not an SSM checkpoint");
  const json& ja = j.at("arch");
  SsmArch a;
  a.n_y = ja.at("n_y").get<int>();
  a.n_u = ja.at("n_u").get<int>();
  a.n_d = ja.at("n_d").get<int>();
  a.n_x = ja.at("n_x").get<int>();
  a.n_past = ja.at("n_past").get<int>();
  a.observer_hidden = ja.at("observer_hidden").get<std::vector<int>>();
  a.input_hidden = ja.at("input_hidden").get<std::vector<int>>();
  a.dist_hidden = ja.at("dist_hidden").get<std::vector<int>>();
  a.activation = activation_from_string(ja.at("activation").get<std::string>());
  a.state_map = state_map_from_string(ja.at("state_map").get<std::string>());
  a.lambda_min = ja.at("lambda_min").get<double>();
  a.lambda_max = ja.at("lambda_max").get<double>();

  SsmCheckpoint ck;
  Rng rng(1);
  ck.model = NeuralSSM::make(a, rng);
  blocks_from_json(j.at("blocks"), ck.model.params(), path);
  ck.stats = stats_from_json(j.at("normalization"));
  ck.config_hash = j.value("config_hash", "");
  return ck;
}

void save_policy_checkpoint(const std::string& path, PolicyNet& policy,
                            const std::string& config_hash) {
  json j;
  j["format"] = "dpc-policy-v1";
  j["config_hash"] = config_hash;
  j["horizon"] = policy.horizon;
  j["n_u"] = policy.n_u;
  j["activation"] = to_string(policy.net.activation);
  json layout = json::array();
  for (const FeatureSegment& s : policy.layout.segments)
    layout.push_back({{"name", s.name}, {"rows", s.rows}});
  j["feature_layout"] = std::move(layout);
  std::vector<int> hidden;
  for (size_t l = 0; l + 1 < policy.net.layers.size(); ++l)
    hidden.push_back(policy.net.layers[l].out_dim());
  j["hidden"] = hidden;
  j["normalization"] = {{"feat_mean", policy.feat_stats.mean},
                        {"feat_std", policy.feat_stats.stddev},
                        {"u_scale", policy.u_scale}};
  j["blocks"] = blocks_to_json(policy.params());
  write_json(path, j);
}

PolicyCheckpoint load_policy_checkpoint(const std::string& path) {
  const json j = read_json(path);
  if (j.value("format", "") != "dpc-policy-v1")
    throw ValidationError("'" + path + "' is not a policy checkpoint");
  FeatureLayout layout;
  for (const json& s : j.at("feature_layout"))
    layout.segments.push_back({s.at("name").get<std::string>(), s.at("rows").get<int>()});
  const auto hidden = j.at("hidden").get<std::vector<int>>();
  const int horizon = j.at("horizon").get<int>();
  const int n_u = j.at("n_u").get<int>();

  PolicyCheckpoint ck;
  Rng rng(1);
  ck.policy = PolicyNet::make(layout, hidden, horizon, n_u,
                              activation_from_string(j.at("activation").get<std::string>()), rng);
  blocks_from_json(j.at("blocks"), ck.policy.params(), path);
  const json& n = j.at("normalization");
  ck.policy.feat_stats.mean = n.at("feat_mean").get<std::vector<double>>();
  ck.policy.feat_stats.stddev = n.at("feat_std").get<std::vector<double>>();
  ck.policy.u_scale = n.at("u_scale").get<std::vector<double>>();
  ck.config_hash = j.value("config_hash", "");
  return ck;
}

void save_ssm_history(const std::string& path, const SsmTrainResult& result) {
  json j;
  j["best_dev_nmse"] = result.best_dev_nmse;
  j["best_epoch"] = result.best_epoch;
  j["influence_bound_used"] = result.influence_bound_used;
  json entries = json::array();
  for (const EpochRecord& e : result.history) {
    entries.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"dev_nmse", e.dev_nmse},
                       {"best_dev_nmse", e.best_dev_nmse}});
  }
  j["epochs"] = std::move(entries);
  write_json(path, j);
}

void save_policy_history(const std::string& path, const PolicyTrainResult& result) {
  json j;
  j["initial_dev_loss"] = result.initial_dev_loss;
  j["best_dev_loss"] = result.best_dev_loss;
  j["best_update"] = result.best_update;
  json entries = json::array();
  for (const UpdateRecord& e : result.history) {
    json rec{{"update", e.update}, {"batch_loss", e.batch_loss}, {"best_dev_loss", e.best_dev_loss}};
    if (e.dev_loss >= 0.0) rec["dev_loss"] = e.dev_loss;
    entries.push_back(std::move(rec));
  }
  j["updates"] = std::move(entries);
  write_json(path, j);
}

}  // namespace dpc
