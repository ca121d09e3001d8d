#include "drifa/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "drifa/metrics.hpp"

namespace drifa {

using nlohmann::json;
using nlohmann::ordered_json;

SyntheticSpec RunConfig::synthetic_spec() const {
  SyntheticSpec spec;
  spec.modalities = model.modalities;
  spec.tasks = model.tasks;
  spec.classes_per_task = model.classes_per_task;
  spec.samples_per_class = samples_per_class;
  spec.height = height;
  spec.width = width;
  spec.channels = model.input_channels;
  spec.shared_signal_strength = shared_signal_strength;
  spec.noise_sigma = noise_sigma;
  spec.seed = data_seed;
  return spec;
}

void RunConfig::validate() const {
  model.validate();
  uq.validate();
  require(epochs >= 1, ErrorKind::InvalidSpec, "config: epochs must be positive");
  require(batch_size >= 1, ErrorKind::InvalidSpec, "config: batch_size must be positive");
  require(learning_rate > 0.0, ErrorKind::InvalidSpec, "config: learning_rate must be positive");
  require(plateau_factor > 0.0 && plateau_factor < 1.0, ErrorKind::InvalidSpec,
          "config: plateau_factor must lie in (0,1)");
  require(min_learning_rate > 0.0, ErrorKind::InvalidSpec,
          "config: min_learning_rate must be positive");
  if (data_path.empty()) synthetic_spec().validate();
}

RunConfig default_config(const std::string& profile) {
  RunConfig cfg;
  cfg.profile = profile;
  cfg.model.modalities = 2;
  cfg.model.tasks = 1;
  cfg.model.classes_per_task = {4};
  cfg.model.dropout_rate = 0.25;
  cfg.uq = EnsembleConfig{};
  if (profile == "paper") {
    cfg.model.input_channels = 3;
    cfg.model.base_channels = 64;
    cfg.model.block_downsample = {false, true, false, true, false, true, false, true};
    cfg.height = 128;
    cfg.width = 128;
    cfg.samples_per_class = 100;
    cfg.epochs = 200;
    cfg.batch_size = 32;
  } else if (profile == "desk") {
    cfg.model.input_channels = 1;
    cfg.model.base_channels = 8;
    cfg.model.block_downsample = {false, true};
    cfg.height = 8;
    cfg.width = 8;
    cfg.samples_per_class = 40;
    cfg.epochs = 30;
    cfg.batch_size = 8;
  } else {
    fail(ErrorKind::ConfigParse, "config: unknown profile '" + profile + "'");
  }
  return cfg;
}

namespace {

void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(ErrorKind::ConfigParse, std::string("config: ") + where + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) known |= item.key() == key;
    if (!known)
      fail(ErrorKind::ConfigParse,
           std::string("config: unknown key '") + item.key() + "' in " + where);
  }
}

std::size_t get_size(const json& obj, const char* key, std::size_t cur) {
  if (!obj.contains(key)) return cur;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0))
    fail(ErrorKind::ConfigParse, std::string("config: '") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

std::uint64_t get_u64(const json& obj, const char* key, std::uint64_t cur) {
  if (!obj.contains(key)) return cur;
  const auto& v = obj.at(key);
  if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)))
    fail(ErrorKind::ConfigParse, std::string("config: '") + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

double get_double(const json& obj, const char* key, double cur) {
  if (!obj.contains(key)) return cur;
  const auto& v = obj.at(key);
  if (!v.is_number()) fail(ErrorKind::ConfigParse, std::string("config: '") + key + "' must be a number");
  return v.get<double>();
}

bool get_bool(const json& obj, const char* key, bool cur) {
  if (!obj.contains(key)) return cur;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) fail(ErrorKind::ConfigParse, std::string("config: '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& obj, const char* key, std::string cur) {
  if (!obj.contains(key)) return cur;
  const auto& v = obj.at(key);
  if (!v.is_string()) fail(ErrorKind::ConfigParse, std::string("config: '") + key + "' must be a string");
  return v.get<std::string>();
}

void parse_model(const json& obj, DrifaNetConfig& model) {
  check_keys(obj, "model",
             {"modalities", "tasks", "classes_per_task", "input_channels", "base_channels",
              "block_downsample", "dropout_rate", "task_weights", "init_seed", "ablation",
              "weight_toggles"});
  model.modalities = get_size(obj, "modalities", model.modalities);
  model.tasks = get_size(obj, "tasks", model.tasks);
  if (obj.contains("classes_per_task")) {
    const auto& v = obj.at("classes_per_task");
    if (!v.is_array()) fail(ErrorKind::ConfigParse, "config: 'classes_per_task' must be an array");
    model.classes_per_task.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() < 0)
        fail(ErrorKind::ConfigParse, "config: 'classes_per_task' entries must be non-negative integers");
      model.classes_per_task.push_back(e.get<std::size_t>());
    }
  }
  model.input_channels = get_size(obj, "input_channels", model.input_channels);
  model.base_channels = get_size(obj, "base_channels", model.base_channels);
  if (obj.contains("block_downsample")) {
    const auto& v = obj.at("block_downsample");
    if (!v.is_array()) fail(ErrorKind::ConfigParse, "config: 'block_downsample' must be an array");
    model.block_downsample.clear();
    for (const auto& e : v) {
      if (!e.is_boolean())
        fail(ErrorKind::ConfigParse, "config: 'block_downsample' entries must be booleans");
      model.block_downsample.push_back(e.get<bool>());
    }
  }
  model.dropout_rate = get_double(obj, "dropout_rate", model.dropout_rate);
  if (obj.contains("task_weights")) {
    const auto& v = obj.at("task_weights");
    if (!v.is_array()) fail(ErrorKind::ConfigParse, "config: 'task_weights' must be an array");
    model.task_weights.clear();
    for (const auto& e : v) {
      if (!e.is_number()) fail(ErrorKind::ConfigParse, "config: 'task_weights' entries must be numbers");
      model.task_weights.push_back(e.get<double>());
    }
  }
  model.init_seed = get_u64(obj, "init_seed", model.init_seed);
  if (obj.contains("ablation")) {
    const auto& a = obj.at("ablation");
    check_keys(a, "model.ablation", {"mfa", "mifa", "hifa", "clia", "mgifa", "mlifa"});
    model.ablation.mfa = get_bool(a, "mfa", model.ablation.mfa);
    model.ablation.mifa = get_bool(a, "mifa", model.ablation.mifa);
    model.ablation.hifa = get_bool(a, "hifa", model.ablation.hifa);
    model.ablation.clia = get_bool(a, "clia", model.ablation.clia);
    model.ablation.mgifa = get_bool(a, "mgifa", model.ablation.mgifa);
    model.ablation.mlifa = get_bool(a, "mlifa", model.ablation.mlifa);
  }
  if (obj.contains("weight_toggles")) {
    const auto& w = obj.at("weight_toggles");
    check_keys(w, "model.weight_toggles",
               {"omega_d", "omega_l", "omega_c", "omega_dm", "omega_lm", "omega_cm"});
    model.weights.omega_d = get_bool(w, "omega_d", model.weights.omega_d);
    model.weights.omega_l = get_bool(w, "omega_l", model.weights.omega_l);
    model.weights.omega_c = get_bool(w, "omega_c", model.weights.omega_c);
    model.weights.omega_dm = get_bool(w, "omega_dm", model.weights.omega_dm);
    model.weights.omega_lm = get_bool(w, "omega_lm", model.weights.omega_lm);
    model.weights.omega_cm = get_bool(w, "omega_cm", model.weights.omega_cm);
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigParse, std::string("config: ") + e.what());
  }
  try {
    check_keys(root, "config", {"profile", "model", "data", "train", "uq"});
    RunConfig cfg = default_config(get_string(root, "profile", "paper"));
    if (root.contains("model")) parse_model(root.at("model"), cfg.model);
    if (root.contains("data")) {
      const auto& d = root.at("data");
      check_keys(d, "data",
                 {"path", "samples_per_class", "height", "width", "shared_signal_strength",
                  "noise_sigma", "seed", "balance"});
      cfg.data_path = get_string(d, "path", cfg.data_path);
      cfg.samples_per_class = get_size(d, "samples_per_class", cfg.samples_per_class);
      cfg.height = get_size(d, "height", cfg.height);
      cfg.width = get_size(d, "width", cfg.width);
      cfg.shared_signal_strength = get_double(d, "shared_signal_strength", cfg.shared_signal_strength);
      cfg.noise_sigma = get_double(d, "noise_sigma", cfg.noise_sigma);
      cfg.data_seed = get_u64(d, "seed", cfg.data_seed);
      cfg.balance = get_bool(d, "balance", cfg.balance);
    }
    if (root.contains("train")) {
      const auto& t = root.at("train");
      check_keys(t, "train",
                 {"epochs", "batch_size", "learning_rate", "plateau_factor", "plateau_patience",
                  "min_learning_rate", "train_fraction", "val_fraction", "test_fraction", "seed"});
      cfg.epochs = get_size(t, "epochs", cfg.epochs);
      cfg.batch_size = get_size(t, "batch_size", cfg.batch_size);
      cfg.learning_rate = get_double(t, "learning_rate", cfg.learning_rate);
      cfg.plateau_factor = get_double(t, "plateau_factor", cfg.plateau_factor);
      cfg.plateau_patience = get_size(t, "plateau_patience", cfg.plateau_patience);
      cfg.min_learning_rate = get_double(t, "min_learning_rate", cfg.min_learning_rate);
      cfg.train_fraction = get_double(t, "train_fraction", cfg.train_fraction);
      cfg.val_fraction = get_double(t, "val_fraction", cfg.val_fraction);
      cfg.test_fraction = get_double(t, "test_fraction", cfg.test_fraction);
      cfg.seed = get_u64(t, "seed", cfg.seed);
    }
    if (root.contains("uq")) {
      const auto& u = root.at("uq");
      check_keys(u, "uq", {"ensembles", "iterations", "dropout_rate", "seeds"});
      cfg.uq.ensembles = get_size(u, "ensembles", cfg.uq.ensembles);
      cfg.uq.iterations = get_size(u, "iterations", cfg.uq.iterations);
      cfg.uq.dropout_rate = get_double(u, "dropout_rate", cfg.uq.dropout_rate);
      if (u.contains("seeds")) {
        const auto& v = u.at("seeds");
        if (!v.is_array()) fail(ErrorKind::ConfigParse, "config: 'seeds' must be an array");
        cfg.uq.seeds.clear();
        for (const auto& e : v) {
          if (!(e.is_number_unsigned() || (e.is_number_integer() && e.get<long long>() >= 0)))
            fail(ErrorKind::ConfigParse, "config: 'seeds' entries must be non-negative integers");
          cfg.uq.seeds.push_back(e.get<std::uint64_t>());
        }
      }
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigParse, std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::ConfigParse, "config: cannot read " + path.string());
  std::ostringstream text;
  text << f.rdbuf();
  return parse_run_config(text.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  ordered_json root;
  root["profile"] = cfg.profile;

  ordered_json model;
  model["modalities"] = cfg.model.modalities;
  model["tasks"] = cfg.model.tasks;
  model["classes_per_task"] = cfg.model.classes_per_task;
  model["input_channels"] = cfg.model.input_channels;
  model["base_channels"] = cfg.model.base_channels;
  model["block_downsample"] = cfg.model.block_downsample;
  model["dropout_rate"] = cfg.model.dropout_rate;
  model["task_weights"] = cfg.model.task_weights;
  model["init_seed"] = cfg.model.init_seed;
  model["ablation"] = {{"mfa", cfg.model.ablation.mfa},     {"mifa", cfg.model.ablation.mifa},
                       {"hifa", cfg.model.ablation.hifa},   {"clia", cfg.model.ablation.clia},
                       {"mgifa", cfg.model.ablation.mgifa}, {"mlifa", cfg.model.ablation.mlifa}};
  model["weight_toggles"] = {{"omega_d", cfg.model.weights.omega_d},
                             {"omega_l", cfg.model.weights.omega_l},
                             {"omega_c", cfg.model.weights.omega_c},
                             {"omega_dm", cfg.model.weights.omega_dm},
                             {"omega_lm", cfg.model.weights.omega_lm},
                             {"omega_cm", cfg.model.weights.omega_cm}};
  root["model"] = std::move(model);

  ordered_json data;
  data["path"] = cfg.data_path;
  data["samples_per_class"] = cfg.samples_per_class;
  data["height"] = cfg.height;
  data["width"] = cfg.width;
  data["shared_signal_strength"] = cfg.shared_signal_strength;
  data["noise_sigma"] = cfg.noise_sigma;
  data["seed"] = cfg.data_seed;
  data["balance"] = cfg.balance;
  root["data"] = std::move(data);

  ordered_json train;
  train["epochs"] = cfg.epochs;
  train["batch_size"] = cfg.batch_size;
  train["learning_rate"] = cfg.learning_rate;
  train["plateau_factor"] = cfg.plateau_factor;
  train["plateau_patience"] = cfg.plateau_patience;
  train["min_learning_rate"] = cfg.min_learning_rate;
  train["train_fraction"] = cfg.train_fraction;
  train["val_fraction"] = cfg.val_fraction;
  train["test_fraction"] = cfg.test_fraction;
  train["seed"] = cfg.seed;
  root["train"] = std::move(train);

  ordered_json uq;
  uq["ensembles"] = cfg.uq.ensembles;
  uq["iterations"] = cfg.uq.iterations;
  uq["dropout_rate"] = cfg.uq.dropout_rate;
  uq["seeds"] = cfg.uq.seeds;
  root["uq"] = std::move(uq);

  return root.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  return hash_hex(fnv1a64(serialize_run_config(cfg)));
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return serialize_run_config(a) == serialize_run_config(b);
}

// ---------------------------------------------------------------------------
// Ablation grids
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kTokenOrder = {"none", "mfa",   "hifa", "clia", "mifa",
                                              "mgifa", "mlifa", "wd",   "wl",   "wc",
                                              "wdm",   "wlm",   "wcm"};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

AblationSelection parse_ablation_row(const std::string& row) {
  std::set<std::string> tokens;
  std::stringstream ss(row);
  std::string piece;
  while (std::getline(ss, piece, '+')) {
    piece = trim(piece);
    if (piece.empty()) fail(ErrorKind::InvalidFlag, "ablation: empty token in '" + row + "'");
    if (std::find(kTokenOrder.begin(), kTokenOrder.end(), piece) == kTokenOrder.end())
      fail(ErrorKind::InvalidFlag, "ablation: unknown token '" + piece + "'");
    tokens.insert(piece);
  }
  if (tokens.empty()) fail(ErrorKind::InvalidFlag, "ablation: empty row");

  AblationSelection sel;
  for (const auto& t : kTokenOrder)
    if (tokens.count(t)) sel.name += (sel.name.empty() ? "" : "+") + t;

  if (tokens.count("none")) {
    if (tokens.size() > 1)
      fail(ErrorKind::InvalidFlag, "ablation: 'none' combines with nothing in '" + row + "'");
    sel.flags = AblationFlags{false, false, false, false, false, false};
    sel.weights = WeightToggles{false, false, false, false, false, false};
    return sel;
  }

  const bool any_module = tokens.count("mfa") || tokens.count("mifa") || tokens.count("hifa") ||
                          tokens.count("clia") || tokens.count("mgifa") || tokens.count("mlifa");
  if (any_module) {
    sel.flags.mfa = tokens.count("mfa") || tokens.count("hifa") || tokens.count("clia");
    sel.flags.mifa = tokens.count("mifa") || tokens.count("mgifa") || tokens.count("mlifa");
    const bool mfa_children = tokens.count("hifa") || tokens.count("clia");
    sel.flags.hifa = mfa_children ? tokens.count("hifa") > 0 : sel.flags.mfa;
    sel.flags.clia = mfa_children ? tokens.count("clia") > 0 : sel.flags.mfa;
    const bool mifa_children = tokens.count("mgifa") || tokens.count("mlifa");
    sel.flags.mgifa = mifa_children ? tokens.count("mgifa") > 0 : sel.flags.mifa;
    sel.flags.mlifa = mifa_children ? tokens.count("mlifa") > 0 : sel.flags.mifa;
  }  // else: every module stays on

  const bool any_weight = tokens.count("wd") || tokens.count("wl") || tokens.count("wc") ||
                          tokens.count("wdm") || tokens.count("wlm") || tokens.count("wcm");
  if (any_weight) {
    sel.weights.omega_d = tokens.count("wd") > 0;
    sel.weights.omega_l = tokens.count("wl") > 0;
    sel.weights.omega_c = tokens.count("wc") > 0;
    sel.weights.omega_dm = tokens.count("wdm") > 0;
    sel.weights.omega_lm = tokens.count("wlm") > 0;
    sel.weights.omega_cm = tokens.count("wcm") > 0;
  }
  return sel;
}

std::vector<AblationSelection> parse_ablation_grid(const std::string& grid) {
  std::vector<AblationSelection> rows;
  std::stringstream ss(grid);
  std::string row;
  while (std::getline(ss, row, ',')) rows.push_back(parse_ablation_row(trim(row)));
  if (rows.empty()) fail(ErrorKind::InvalidFlag, "ablation: empty grid");
  return rows;
}

}  // namespace drifa
