#include "advlab/config.hpp"

#include <set>

#include <json.hpp>

#include "advlab/error.hpp"
#include "advlab/textio.hpp"

namespace advlab {

using nlohmann::json;
using nlohmann::ordered_json;

void DataConfig::validate() const {
  if (kind != "toy" && kind != "csv") {
    throw ConfigError("data.kind must be 'toy' or 'csv', got '" + kind + "'");
  }
  if (kind == "toy") toy.validate();
  if (kind == "csv") {
    if (csv_train.empty() || csv_test.empty()) {
      throw ConfigError("data.kind 'csv' requires data.csv_train and data.csv_test");
    }
  }
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.lr = lr;
  t.momentum = momentum;
  t.weight_decay = weight_decay;
  t.batch_size = batch_size;
  t.attack_kind = attack_kind;
  t.attack = attack;
  t.loss = loss;
  t.piat = piat;
  t.seed = seed;
  t.lr_schedule = lr_schedule;
  return t;
}

void ExperimentConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("out_dir must be non-empty");
  data.validate();
  model.validate();
  train_config().validate();
  analysis.boundary.validate();
  analysis.landscape.validate();
  for (const auto& name : analysis.eval_attacks) attack_kind_from_string(name);
}

std::uint64_t toy_train_seed(const ExperimentConfig& cfg) {
  return derive_seed(cfg.data.seed.value_or(cfg.seed), streams::kDataTrain);
}

std::uint64_t toy_test_seed(const ExperimentConfig& cfg) {
  return derive_seed(cfg.data.seed.value_or(cfg.seed), streams::kDataTest);
}

std::uint64_t model_init_seed(const ExperimentConfig& cfg) {
  return derive_seed(cfg.seed, streams::kModelInit);
}

namespace {

// Rejects keys outside the allowed set, naming the offending field.
void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      const std::string path = where.empty() ? item.key() : where + "." + item.key();
      throw ConfigError("unknown config key '" + path + "'");
    }
  }
}

void require_object(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
}

template <typename T>
void read_field(const json& obj, const std::string& where, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    const std::string path = where.empty() ? key : where + "." + key;
    throw ConfigError("config key '" + path + "' has the wrong type");
  }
}

void parse_input_box(const json& obj, const std::string& where, std::optional<InputBox>& out) {
  const auto it = obj.find("input_box");
  if (it == obj.end() || it->is_null()) return;
  require_object(*it, where + ".input_box");
  check_keys(*it, where + ".input_box", {"lo", "hi"});
  InputBox box;
  const auto read_bound = [&](const char* key, std::vector<double>& v) {
    const auto b = it->find(key);
    if (b == it->end()) throw ConfigError("config key '" + where + ".input_box." + key + "' is required");
    try {
      if (b->is_number()) {
        v = {b->get<double>()};
      } else {
        v = b->get<std::vector<double>>();
      }
    } catch (const json::exception&) {
      throw ConfigError("config key '" + where + ".input_box." + std::string(key) + "' has the wrong type");
    }
  };
  read_bound("lo", box.lo);
  read_bound("hi", box.hi);
  out = box;
}

void parse_attack(const json& obj, const std::string& where, AttackKind& kind, AttackConfig& cfg) {
  require_object(obj, where);
  check_keys(obj, where, {"kind", "epsilon", "alpha", "steps", "momentum_decay",
                          "random_start", "input_box"});
  std::string kind_name = attack_kind_to_string(kind);
  read_field(obj, where, "kind", kind_name);
  kind = attack_kind_from_string(kind_name);
  read_field(obj, where, "epsilon", cfg.epsilon);
  read_field(obj, where, "alpha", cfg.alpha);
  read_field(obj, where, "steps", cfg.steps);
  read_field(obj, where, "momentum_decay", cfg.momentum_decay);
  read_field(obj, where, "random_start", cfg.random_start);
  parse_input_box(obj, where, cfg.input_box);
}

void parse_schedule(const json& obj, const std::string& where, LambdaSchedule& out) {
  require_object(obj, where);
  check_keys(obj, where, {"kind", "value", "a", "b", "c", "d"});
  std::string kind = out.kind == LambdaSchedule::Kind::fixed ? "fixed" : "rational";
  read_field(obj, where, "kind", kind);
  if (kind == "fixed") {
    out.kind = LambdaSchedule::Kind::fixed;
  } else if (kind == "rational") {
    out.kind = LambdaSchedule::Kind::rational;
  } else {
    throw ConfigError("config key '" + where + ".kind' must be 'fixed' or 'rational'");
  }
  read_field(obj, where, "value", out.fixed_value);
  read_field(obj, where, "a", out.a);
  read_field(obj, where, "b", out.b);
  read_field(obj, where, "c", out.c);
  read_field(obj, where, "d", out.d);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + origin + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError("config " + origin + " must be a JSON object");

  // A manifest wraps the config; unwrap it so a finished run's manifest can
  // seed an identical new run.
  if (root.contains("tool") && root.contains("config")) {
    root = root.at("config");
    if (!root.is_object()) throw ConfigError("manifest 'config' in " + origin + " must be an object");
  }

  ExperimentConfig cfg;
  check_keys(root, "", {"seed", "out_dir", "data", "model", "attack", "loss", "train", "analysis"});
  if (root.contains("seed") && !root.at("seed").is_null()) cfg.seed_explicit = true;
  read_field(root, "", "seed", cfg.seed);
  read_field(root, "", "out_dir", cfg.out_dir);

  if (root.contains("data")) {
    const json& d = root.at("data");
    require_object(d, "data");
    check_keys(d, "data", {"kind", "n_per_class", "sigma", "rho1", "rho2", "alpha1", "beta1",
                           "alpha2", "beta2", "seed", "csv_train", "csv_test"});
    read_field(d, "data", "kind", cfg.data.kind);
    read_field(d, "data", "n_per_class", cfg.data.toy.n_per_class);
    read_field(d, "data", "sigma", cfg.data.toy.sigma);
    read_field(d, "data", "rho1", cfg.data.toy.rho1);
    read_field(d, "data", "rho2", cfg.data.toy.rho2);
    read_field(d, "data", "alpha1", cfg.data.toy.alpha1);
    read_field(d, "data", "beta1", cfg.data.toy.beta1);
    read_field(d, "data", "alpha2", cfg.data.toy.alpha2);
    read_field(d, "data", "beta2", cfg.data.toy.beta2);
    std::uint64_t dseed = 0;
    if (d.contains("seed") && !d.at("seed").is_null()) {
      read_field(d, "data", "seed", dseed);
      cfg.data.seed = dseed;
    }
    read_field(d, "data", "csv_train", cfg.data.csv_train);
    read_field(d, "data", "csv_test", cfg.data.csv_test);
  }

  if (root.contains("model")) {
    const json& m = root.at("model");
    require_object(m, "model");
    check_keys(m, "model", {"input_dim", "hidden_dims", "output_dim", "activation"});
    read_field(m, "model", "input_dim", cfg.model.input_dim);
    read_field(m, "model", "hidden_dims", cfg.model.hidden_dims);
    read_field(m, "model", "output_dim", cfg.model.output_dim);
    std::string act = activation_to_string(cfg.model.activation);
    read_field(m, "model", "activation", act);
    cfg.model.activation = activation_from_string(act);
  }

  if (root.contains("attack")) parse_attack(root.at("attack"), "attack", cfg.attack_kind, cfg.attack);

  if (root.contains("loss")) {
    const json& l = root.at("loss");
    require_object(l, "loss");
    check_keys(l, "loss", {"kind", "mu", "alp_weight"});
    std::string kind = loss_kind_to_string(cfg.loss.kind);
    read_field(l, "loss", "kind", kind);
    cfg.loss.kind = loss_kind_from_string(kind);
    read_field(l, "loss", "mu", cfg.loss.mu);
    read_field(l, "loss", "alp_weight", cfg.loss.alp_weight);
  }

  if (root.contains("train")) {
    const json& t = root.at("train");
    require_object(t, "train");
    check_keys(t, "train", {"epochs", "lr", "momentum", "weight_decay", "batch_size", "piat",
                            "lr_schedule"});
    read_field(t, "train", "epochs", cfg.epochs);
    read_field(t, "train", "lr", cfg.lr);
    read_field(t, "train", "momentum", cfg.momentum);
    read_field(t, "train", "weight_decay", cfg.weight_decay);
    read_field(t, "train", "batch_size", cfg.batch_size);
    if (t.contains("piat")) {
      const json& p = t.at("piat");
      require_object(p, "train.piat");
      check_keys(p, "train.piat", {"enabled", "schedule"});
      read_field(p, "train.piat", "enabled", cfg.piat.enabled);
      if (p.contains("schedule")) parse_schedule(p.at("schedule"), "train.piat.schedule", cfg.piat.schedule);
    }
    if (t.contains("lr_schedule") && !t.at("lr_schedule").is_null()) {
      const json& s = t.at("lr_schedule");
      require_object(s, "train.lr_schedule");
      check_keys(s, "train.lr_schedule", {"boundaries", "values"});
      LrSchedule sched;
      read_field(s, "train.lr_schedule", "boundaries", sched.boundaries);
      read_field(s, "train.lr_schedule", "values", sched.values);
      cfg.lr_schedule = std::move(sched);
    }
  }

  if (root.contains("analysis")) {
    const json& a = root.at("analysis");
    require_object(a, "analysis");
    check_keys(a, "analysis", {"boundary", "landscape", "eval_attacks"});
    if (a.contains("boundary")) {
      const json& b = a.at("boundary");
      require_object(b, "analysis.boundary");
      check_keys(b, "analysis.boundary",
                 {"resolution", "x1_min", "x1_max", "x2_min", "x2_max", "x3"});
      read_field(b, "analysis.boundary", "resolution", cfg.analysis.boundary.resolution);
      read_field(b, "analysis.boundary", "x1_min", cfg.analysis.boundary.x1_min);
      read_field(b, "analysis.boundary", "x1_max", cfg.analysis.boundary.x1_max);
      read_field(b, "analysis.boundary", "x2_min", cfg.analysis.boundary.x2_min);
      read_field(b, "analysis.boundary", "x2_max", cfg.analysis.boundary.x2_max);
      read_field(b, "analysis.boundary", "x3", cfg.analysis.boundary.x3);
    }
    if (a.contains("landscape")) {
      const json& l = a.at("landscape");
      require_object(l, "analysis.landscape");
      check_keys(l, "analysis.landscape", {"grid_n", "seed", "sample", "loss"});
      read_field(l, "analysis.landscape", "grid_n", cfg.analysis.landscape.grid_n);
      read_field(l, "analysis.landscape", "seed", cfg.analysis.landscape.seed);
      read_field(l, "analysis.landscape", "sample", cfg.analysis.landscape.sample);
      std::string kind = cfg.analysis.landscape.loss == LandscapeLoss::clean ? "clean" : "adversarial";
      read_field(l, "analysis.landscape", "loss", kind);
      if (kind == "clean") {
        cfg.analysis.landscape.loss = LandscapeLoss::clean;
      } else if (kind == "adversarial") {
        cfg.analysis.landscape.loss = LandscapeLoss::adversarial;
      } else {
        throw ConfigError("config key 'analysis.landscape.loss' must be 'clean' or 'adversarial'");
      }
    }
    read_field(a, "analysis", "eval_attacks", cfg.analysis.eval_attacks);
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_text_file(path), path);
}

namespace {

ordered_json input_box_json(const std::optional<InputBox>& box) {
  if (!box) return nullptr;
  ordered_json j;
  j["lo"] = box->lo;
  j["hi"] = box->hi;
  return j;
}

ordered_json attack_json(AttackKind kind, const AttackConfig& a) {
  ordered_json j;
  j["kind"] = attack_kind_to_string(kind);
  j["epsilon"] = a.epsilon;
  j["alpha"] = a.alpha;
  j["steps"] = a.steps;
  j["momentum_decay"] = a.momentum_decay;
  j["random_start"] = a.random_start;
  j["input_box"] = input_box_json(a.input_box);
  return j;
}

}  // namespace

std::string experiment_config_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;

  ordered_json d;
  d["kind"] = cfg.data.kind;
  d["n_per_class"] = cfg.data.toy.n_per_class;
  d["sigma"] = cfg.data.toy.sigma;
  d["rho1"] = cfg.data.toy.rho1;
  d["rho2"] = cfg.data.toy.rho2;
  d["alpha1"] = cfg.data.toy.alpha1;
  d["beta1"] = cfg.data.toy.beta1;
  d["alpha2"] = cfg.data.toy.alpha2;
  d["beta2"] = cfg.data.toy.beta2;
  d["seed"] = cfg.data.seed ? ordered_json(*cfg.data.seed) : ordered_json(nullptr);
  d["csv_train"] = cfg.data.csv_train;
  d["csv_test"] = cfg.data.csv_test;
  j["data"] = d;

  ordered_json m;
  m["input_dim"] = cfg.model.input_dim;
  m["hidden_dims"] = cfg.model.hidden_dims;
  m["output_dim"] = cfg.model.output_dim;
  m["activation"] = activation_to_string(cfg.model.activation);
  j["model"] = m;

  j["attack"] = attack_json(cfg.attack_kind, cfg.attack);

  ordered_json l;
  l["kind"] = loss_kind_to_string(cfg.loss.kind);
  l["mu"] = cfg.loss.mu;
  l["alp_weight"] = cfg.loss.alp_weight;
  j["loss"] = l;

  ordered_json t;
  t["epochs"] = cfg.epochs;
  t["lr"] = cfg.lr;
  t["momentum"] = cfg.momentum;
  t["weight_decay"] = cfg.weight_decay;
  t["batch_size"] = cfg.batch_size;
  ordered_json piat;
  piat["enabled"] = cfg.piat.enabled;
  ordered_json sched;
  if (cfg.piat.schedule.kind == LambdaSchedule::Kind::fixed) {
    sched["kind"] = "fixed";
    sched["value"] = cfg.piat.schedule.fixed_value;
  } else {
    sched["kind"] = "rational";
    sched["a"] = cfg.piat.schedule.a;
    sched["b"] = cfg.piat.schedule.b;
    sched["c"] = cfg.piat.schedule.c;
    sched["d"] = cfg.piat.schedule.d;
  }
  piat["schedule"] = sched;
  t["piat"] = piat;
  if (cfg.lr_schedule) {
    ordered_json s;
    s["boundaries"] = cfg.lr_schedule->boundaries;
    s["values"] = cfg.lr_schedule->values;
    t["lr_schedule"] = s;
  } else {
    t["lr_schedule"] = nullptr;
  }
  j["train"] = t;

  ordered_json an;
  ordered_json b;
  b["resolution"] = cfg.analysis.boundary.resolution;
  b["x1_min"] = cfg.analysis.boundary.x1_min;
  b["x1_max"] = cfg.analysis.boundary.x1_max;
  b["x2_min"] = cfg.analysis.boundary.x2_min;
  b["x2_max"] = cfg.analysis.boundary.x2_max;
  b["x3"] = cfg.analysis.boundary.x3;
  an["boundary"] = b;
  ordered_json ls;
  ls["grid_n"] = cfg.analysis.landscape.grid_n;
  ls["seed"] = cfg.analysis.landscape.seed;
  ls["sample"] = cfg.analysis.landscape.sample;
  ls["loss"] = cfg.analysis.landscape.loss == LandscapeLoss::clean ? "clean" : "adversarial";
  an["landscape"] = ls;
  an["eval_attacks"] = cfg.analysis.eval_attacks;
  j["analysis"] = an;

  return j.dump(2) + "\n";
}

std::string manifest_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["tool"] = "advlab";
  j["version"] = kToolVersion;
  j["config"] = ordered_json::parse(experiment_config_json(cfg));
  return j.dump(2) + "\n";
}

std::string eval_report_json(const EvalReport& report) {
  ordered_json j;
  j["clean_acc"] = report.clean_acc;
  ordered_json robust;
  for (const auto& [name, acc] : report.robust_acc) robust[name] = acc;
  j["robust_acc"] = robust;
  ordered_json attacks = ordered_json::array();
  for (const auto& a : report.attacks) {
    ordered_json e = attack_json(a.kind, a.config);
    e.erase("kind");
    ordered_json named;
    named["name"] = a.name;
    named["kind"] = attack_kind_to_string(a.kind);
    for (auto& item : e.items()) named[item.key()] = item.value();
    attacks.push_back(named);
  }
  j["attacks"] = attacks;
  return j.dump(2) + "\n";
}

}  // namespace advlab
