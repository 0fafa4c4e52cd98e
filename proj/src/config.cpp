#include "dpc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "dpc/errors.hpp"
#include "json.hpp"

namespace dpc {

namespace {

using nlohmann::json;

// Reads one JSON object with every key accounted for; anything unrecognized
// is a configuration error naming the offending key.
class StrictObject {
 public:
  StrictObject(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& target) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      target = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + path_ + "." + key + "' has the wrong type");
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  ~StrictObject() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& item : obj_.items()) {
      if (!seen_.count(item.key()))
        throw ConfigError("unknown config key '" + path_ + "." + item.key() + "'");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void parse_plant(const json& j, PlantConfig& p, DisturbanceConfig& d) {
  StrictObject o(j, "plant");
  o.get("n_zones", p.n_zones);
  o.get("ts_seconds", p.ts_seconds);
  o.get("substeps", p.substeps);
  o.get("c_air", p.c_air);
  o.get("c_wall", p.c_wall);
  o.get("c_floor", p.c_floor);
  o.get("r_air_wall", p.r_air_wall);
  o.get("r_wall_out", p.r_wall_out);
  o.get("r_air_floor", p.r_air_floor);
  o.get("r_floor_out", p.r_floor_out);
  o.get("r_zone_zone", p.r_zone_zone);
  o.get("r_infiltration", p.r_infiltration);
  o.get("cp_water", p.cp_water);
  o.get("t_sup_min", p.t_sup_min);
  o.get("t_sup_max", p.t_sup_max);
  o.get("flow_max", p.flow_max);
  o.get("init_temp", p.init_temp);
  if (o.has("disturbance")) {
    StrictObject od(o.raw("disturbance"), "plant.disturbance");
    od.get("mean", d.mean);
    od.get("amplitude", d.amplitude);
    od.get("noise_ar", d.noise_ar);
    od.get("noise_amp", d.noise_amp);
    od.get("period_samples", d.period_samples);
    od.get("daily_min_sample", d.daily_min_sample);
  }
}

void parse_ssm(const json& j, SsmSection& s) {
  StrictObject o(j, "ssm");
  o.get("n_x", s.n_x);
  o.get("n_past", s.n_past);
  o.get("observer_hidden", s.observer_hidden);
  o.get("input_hidden", s.input_hidden);
  o.get("dist_hidden", s.dist_hidden);
  o.get("state_map", s.state_map);
  o.get("lambda_min", s.lambda_min);
  o.get("lambda_max", s.lambda_max);
  o.get("activation", s.activation);
  o.get("epochs", s.epochs);
  o.get("batch_size", s.batch_size);
  o.get("patience", s.patience);
  o.get("stop_dev_nmse", s.stop_dev_nmse);
  o.get("fit_weight", s.fit_weight);
  o.get("smooth_weight", s.smooth_weight);
  o.get("influence_weight", s.influence_weight);
  o.get("influence_bound", s.influence_bound);
}

void parse_policy(const json& j, PolicySection& p) {
  StrictObject o(j, "policy");
  o.get("hidden", p.hidden);
  o.get("activation", p.activation);
  o.get("feature_segments", p.feature_segments);
  o.get("updates", p.updates);
  o.get("batch_size", p.batch_size);
  o.get("dev_interval", p.dev_interval);
}

void parse_loss(const json& j, LossSection& l) {
  StrictObject o(j, "loss");
  o.get("q_umin", l.q_umin);
  o.get("q_du", l.q_du);
  o.get("q_y", l.q_y);
  o.get("q_u", l.q_u);
  o.get("penalty", l.penalty);
}

void parse_optimizer(const json& j, AdamConfig& a) {
  StrictObject o(j, "optimizer");
  o.get("lr", a.lr);
  o.get("beta1", a.beta1);
  o.get("beta2", a.beta2);
  o.get("eps", a.eps);
}

void parse_run(const json& j, RunSection& r) {
  StrictObject o(j, "run");
  o.get("seed", r.seed);
  o.get("horizon", r.horizon);
  o.get("days", r.days);
  o.get("sim_days", r.sim_days);
  o.get("sim_init_temp", r.sim_init_temp);
  o.get("data_dir", r.data_dir);
  if (o.has("excitation")) {
    StrictObject oe(o.raw("excitation"), "run.excitation");
    oe.get("flow_walk_step", r.excitation.flow_walk_step);
  }
  if (o.has("bounds")) {
    StrictObject ob(o.raw("bounds"), "run.bounds");
    ob.get("day_start_hour", r.bounds.day_start_hour);
    ob.get("day_end_hour", r.bounds.day_end_hour);
    ob.get("night_lb_min", r.bounds.night_lb_min);
    ob.get("night_lb_max", r.bounds.night_lb_max);
    ob.get("day_lb_min", r.bounds.day_lb_min);
    ob.get("day_lb_max", r.bounds.day_lb_max);
    ob.get("band_min", r.bounds.band_min);
    ob.get("band_max", r.bounds.band_max);
  }
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  StrictObject root(j, "config");
  if (root.has("plant")) parse_plant(root.raw("plant"), cfg.plant, cfg.disturbance);
  if (root.has("ssm")) parse_ssm(root.raw("ssm"), cfg.ssm);
  if (root.has("policy")) parse_policy(root.raw("policy"), cfg.policy);
  if (root.has("loss")) parse_loss(root.raw("loss"), cfg.loss);
  if (root.has("optimizer")) parse_optimizer(root.raw("optimizer"), cfg.optimizer);
  if (root.has("run")) parse_run(root.raw("run"), cfg.run);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

SsmArch RunConfig::ssm_arch() const {
  SsmArch a;
  a.n_y = plant.n_y();
  a.n_u = plant.n_u();
  a.n_d = 1;
  a.n_x = ssm.n_x;
  a.n_past = n_past();
  a.observer_hidden = ssm.observer_hidden;
  a.input_hidden = ssm.input_hidden;
  a.dist_hidden = ssm.dist_hidden;
  a.activation = activation_from_string(ssm.activation);
  a.state_map = state_map_from_string(ssm.state_map);
  a.lambda_min = ssm.lambda_min;
  a.lambda_max = ssm.lambda_max;
  return a;
}

FeatureLayout RunConfig::feature_layout() const {
  FeatureLayout layout;
  for (const std::string& name : policy.feature_segments) {
    int rows = 0;
    if (name == "past_outputs") {
      rows = n_past() * plant.n_y();
    } else if (name == "output_lower_bounds" || name == "output_upper_bounds") {
      rows = run.horizon * plant.n_y();
    } else if (name == "disturbances") {
      rows = run.horizon;
    } else {
      throw ConfigError("unknown feature segment 'policy.feature_segments:" + name + "'");
    }
    layout.segments.push_back({name, rows});
  }
  return layout;
}

LossWeights RunConfig::loss_weights() const {
  LossWeights w;
  w.q_umin = loss.q_umin;
  w.q_du = loss.q_du;
  w.q_y = loss.q_y;
  w.q_u = loss.q_u;
  w.penalty = penalty_from_string(loss.penalty);
  return w;
}

void RunConfig::validate() const {
  const auto require = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) throw ConfigError("config key '" + key + "' invalid: " + why);
  };
  require(plant.n_zones >= 1, "plant.n_zones", "must be >= 1");
  require(plant.ts_seconds > 0, "plant.ts_seconds", "must be positive");
  require(plant.substeps >= 1, "plant.substeps", "must be >= 1");
  require(plant.t_sup_min < plant.t_sup_max, "plant.t_sup_min", "supply range misordered");
  require(plant.flow_max > 0, "plant.flow_max", "must be positive");
  require(disturbance.period_samples > 0, "plant.disturbance.period_samples", "must be positive");
  require(ssm.n_x >= 1, "ssm.n_x", "must be >= 1");
  require(ssm.n_past >= 0, "ssm.n_past", "must be >= 0");
  require(0.0 <= ssm.lambda_min && ssm.lambda_min < ssm.lambda_max && ssm.lambda_max < 1.0,
          "ssm.lambda_min", "need 0 <= min < max < 1");
  state_map_from_string(ssm.state_map);
  activation_from_string(ssm.activation);
  require(ssm.epochs >= 0, "ssm.epochs", "must be >= 0");
  require(ssm.batch_size >= 1, "ssm.batch_size", "must be >= 1");
  require(ssm.fit_weight >= 0 && ssm.smooth_weight >= 0 && ssm.influence_weight >= 0,
          "ssm.fit_weight", "loss weights must be nonnegative");
  activation_from_string(policy.activation);
  require(policy.updates >= 0, "policy.updates", "must be >= 0");
  require(policy.batch_size >= 1, "policy.batch_size", "must be >= 1");
  require(policy.dev_interval >= 1, "policy.dev_interval", "must be >= 1");
  require(loss.q_umin >= 0 && loss.q_du >= 0 && loss.q_y >= 0 && loss.q_u >= 0, "loss.q_umin",
          "loss weights must be nonnegative");
  penalty_from_string(loss.penalty);
  require(run.horizon >= 1, "run.horizon", "must be >= 1");
  require(run.days >= 1, "run.days", "must be >= 1");
  require(run.sim_days >= 1, "run.sim_days", "must be >= 1");
  require(run.bounds.night_lb_min <= run.bounds.night_lb_max &&
              run.bounds.day_lb_min <= run.bounds.day_lb_max &&
              run.bounds.band_min <= run.bounds.band_max && run.bounds.band_min > 0,
          "run.bounds", "bound ranges misordered");
  require(0 <= run.bounds.day_start_hour && run.bounds.day_start_hour < run.bounds.day_end_hour &&
              run.bounds.day_end_hour <= 24,
          "run.bounds.day_start_hour", "day window invalid");
  require(run.excitation.flow_walk_step > 0 && run.excitation.flow_walk_step <= 1,
          "run.excitation.flow_walk_step", "must be in (0, 1]");
  feature_layout();  // rejects unknown segment names
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["plant"] = {{"n_zones", c.plant.n_zones},
                {"ts_seconds", c.plant.ts_seconds},
                {"substeps", c.plant.substeps},
                {"c_air", c.plant.c_air},
                {"c_wall", c.plant.c_wall},
                {"c_floor", c.plant.c_floor},
                {"r_air_wall", c.plant.r_air_wall},
                {"r_wall_out", c.plant.r_wall_out},
                {"r_air_floor", c.plant.r_air_floor},
                {"r_floor_out", c.plant.r_floor_out},
                {"r_zone_zone", c.plant.r_zone_zone},
                {"r_infiltration", c.plant.r_infiltration},
                {"cp_water", c.plant.cp_water},
                {"t_sup_min", c.plant.t_sup_min},
                {"t_sup_max", c.plant.t_sup_max},
                {"flow_max", c.plant.flow_max},
                {"init_temp", c.plant.init_temp},
                {"disturbance",
                 {{"mean", c.disturbance.mean},
                  {"amplitude", c.disturbance.amplitude},
                  {"noise_ar", c.disturbance.noise_ar},
                  {"noise_amp", c.disturbance.noise_amp},
                  {"period_samples", c.disturbance.period_samples},
                  {"daily_min_sample", c.disturbance.daily_min_sample}}}};
  j["ssm"] = {{"n_x", c.ssm.n_x},
              {"n_past", c.ssm.n_past},
              {"observer_hidden", c.ssm.observer_hidden},
              {"input_hidden", c.ssm.input_hidden},
              {"dist_hidden", c.ssm.dist_hidden},
              {"state_map", c.ssm.state_map},
              {"lambda_min", c.ssm.lambda_min},
              {"lambda_max", c.ssm.lambda_max},
              {"activation", c.ssm.activation},
              {"epochs", c.ssm.epochs},
              {"batch_size", c.ssm.batch_size},
              {"patience", c.ssm.patience},
              {"stop_dev_nmse", c.ssm.stop_dev_nmse},
              {"fit_weight", c.ssm.fit_weight},
              {"smooth_weight", c.ssm.smooth_weight},
              {"influence_weight", c.ssm.influence_weight},
              {"influence_bound", c.ssm.influence_bound}};
  j["policy"] = {{"hidden", c.policy.hidden},
                 {"activation", c.policy.activation},
                 {"feature_segments", c.policy.feature_segments},
                 {"updates", c.policy.updates},
                 {"batch_size", c.policy.batch_size},
                 {"dev_interval", c.policy.dev_interval}};
  j["loss"] = {{"q_umin", c.loss.q_umin},
               {"q_du", c.loss.q_du},
               {"q_y", c.loss.q_y},
               {"q_u", c.loss.q_u},
               {"penalty", c.loss.penalty}};
  j["optimizer"] = {{"lr", c.optimizer.lr},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps}};
  j["run"] = {{"seed", c.run.seed},
              {"horizon", c.run.horizon},
              {"days", c.run.days},
              {"sim_days", c.run.sim_days},
              {"sim_init_temp", c.run.sim_init_temp},
              {"data_dir", c.run.data_dir},
              {"excitation", {{"flow_walk_step", c.run.excitation.flow_walk_step}}},
              {"bounds",
               {{"day_start_hour", c.run.bounds.day_start_hour},
                {"day_end_hour", c.run.bounds.day_end_hour},
                {"night_lb_min", c.run.bounds.night_lb_min},
                {"night_lb_max", c.run.bounds.night_lb_max},
                {"day_lb_min", c.run.bounds.day_lb_min},
                {"day_lb_max", c.run.bounds.day_lb_max},
                {"band_min", c.run.bounds.band_min},
                {"band_max", c.run.bounds.band_max}}}};
  return j.dump(2);
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& cfg) { return fnv1a_hex(config_to_json(cfg)); }

}  // namespace dpc
