#include "surfreg/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace surfreg {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig kv;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + " is not key=value: " + line);
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key on config line " + std::to_string(line_no));
    if (kv.has(key)) throw ConfigError("duplicate config key: " + key);
    kv.entries_.emplace_back(key, value);
  }
  return kv;
}

std::string KeyValueConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

bool KeyValueConfig::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == key; });
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return e.second;
  throw ConfigError("missing config key: " + key);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_) {
    if (e.first == key) {
      e.second = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

int KeyValueConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not an integer: " + v);
  }
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not a number: " + v);
  }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    const std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + " is not an unsigned integer: " + v);
  }
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "train.batch_size",        "train.learning_rate",    "train.lr_schedule",
      "train.seed",              "train.n_reg_samples",    "train.reg_fraction",
      "train.checkpoint_every",  "schedule.initial_period", "schedule.final_period",
      "schedule.total_iterations", "loss.lambda_d",        "loss.lambda_n",
      "loss.lambda_b",           "loss.lambda_s",          "loss.stv_k",
      "loss.bias_denominator",   "field.density_resolution", "field.color_resolution",
      "field.feature_dim",       "field.hidden_dim",       "render.n_samples",
      "render.t_near",           "render.t_far",           "scene.kind",
      "scene.n_train_views",     "scene.n_eval_views",     "scene.image_size",
  };
  return keys;
}

TrainConfig train_config_from_kv(const KeyValueConfig& kv) {
  const auto& known = known_config_keys();
  for (const auto& [key, value] : kv.entries()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config key: " + key);
  }

  TrainConfig cfg;
  auto geti = [&](const char* k, int& out) { if (kv.has(k)) out = kv.get_int(k); };
  auto getd = [&](const char* k, double& out) { if (kv.has(k)) out = kv.get_double(k); };

  geti("train.batch_size", cfg.batch_size);
  getd("train.learning_rate", cfg.learning_rate);
  if (kv.has("train.lr_schedule")) cfg.lr_schedule = kv.get("train.lr_schedule");
  if (kv.has("train.seed")) cfg.seed = kv.get_u64("train.seed");
  geti("train.n_reg_samples", cfg.n_reg_samples);
  getd("train.reg_fraction", cfg.reg_fraction);
  geti("train.checkpoint_every", cfg.checkpoint_every);
  geti("schedule.initial_period", cfg.schedule.initial_period);
  geti("schedule.final_period", cfg.schedule.final_period);
  geti("schedule.total_iterations", cfg.schedule.total_iterations);
  getd("loss.lambda_d", cfg.reg.weights.lambda_d);
  getd("loss.lambda_n", cfg.reg.weights.lambda_n);
  getd("loss.lambda_b", cfg.reg.weights.lambda_b);
  getd("loss.lambda_s", cfg.reg.weights.lambda_s);
  geti("loss.stv_k", cfg.reg.stv_k);
  if (kv.has("loss.bias_denominator")) {
    const std::string& mode = kv.get("loss.bias_denominator");
    if (mode == "per_channel_max")
      cfg.reg.bias_denominator = BiasDenominator::per_channel_max;
    else if (mode == "max_sample_norm")
      cfg.reg.bias_denominator = BiasDenominator::max_sample_norm;
    else
      throw ConfigError("loss.bias_denominator must be per_channel_max or max_sample_norm");
  }
  geti("field.density_resolution", cfg.dims.density_res);
  geti("field.color_resolution", cfg.dims.color_res);
  geti("field.feature_dim", cfg.dims.feature_dim);
  geti("field.hidden_dim", cfg.dims.hidden_dim);
  geti("render.n_samples", cfg.render_samples);
  getd("render.t_near", cfg.t_near);
  getd("render.t_far", cfg.t_far);
  if (kv.has("scene.kind")) {
    const std::string& kind = kv.get("scene.kind");
    if (kind == "plane")
      cfg.scene.kind = SceneKind::plane;
    else if (kind == "sphere")
      cfg.scene.kind = SceneKind::sphere;
    else
      throw ConfigError("scene.kind must be plane or sphere");
  }
  geti("scene.n_train_views", cfg.scene.n_train_views);
  geti("scene.n_eval_views", cfg.scene.n_eval_views);
  geti("scene.image_size", cfg.scene.image_size);

  cfg.validate();
  return cfg;
}

KeyValueConfig train_config_to_kv(const TrainConfig& cfg) {
  KeyValueConfig kv;
  kv.set("train.batch_size", std::to_string(cfg.batch_size));
  kv.set("train.learning_rate", format_double(cfg.learning_rate));
  kv.set("train.lr_schedule", cfg.lr_schedule);
  kv.set("train.seed", std::to_string(cfg.seed));
  kv.set("train.n_reg_samples", std::to_string(cfg.n_reg_samples));
  kv.set("train.reg_fraction", format_double(cfg.reg_fraction));
  kv.set("train.checkpoint_every", std::to_string(cfg.checkpoint_every));
  kv.set("schedule.initial_period", std::to_string(cfg.schedule.initial_period));
  kv.set("schedule.final_period", std::to_string(cfg.schedule.final_period));
  kv.set("schedule.total_iterations", std::to_string(cfg.schedule.total_iterations));
  kv.set("loss.lambda_d", format_double(cfg.reg.weights.lambda_d));
  kv.set("loss.lambda_n", format_double(cfg.reg.weights.lambda_n));
  kv.set("loss.lambda_b", format_double(cfg.reg.weights.lambda_b));
  kv.set("loss.lambda_s", format_double(cfg.reg.weights.lambda_s));
  kv.set("loss.stv_k", std::to_string(cfg.reg.stv_k));
  kv.set("loss.bias_denominator",
         cfg.reg.bias_denominator == BiasDenominator::per_channel_max ? "per_channel_max"
                                                                      : "max_sample_norm");
  kv.set("field.density_resolution", std::to_string(cfg.dims.density_res));
  kv.set("field.color_resolution", std::to_string(cfg.dims.color_res));
  kv.set("field.feature_dim", std::to_string(cfg.dims.feature_dim));
  kv.set("field.hidden_dim", std::to_string(cfg.dims.hidden_dim));
  kv.set("render.n_samples", std::to_string(cfg.render_samples));
  kv.set("render.t_near", format_double(cfg.t_near));
  kv.set("render.t_far", format_double(cfg.t_far));
  kv.set("scene.kind", cfg.scene.kind == SceneKind::plane ? "plane" : "sphere");
  kv.set("scene.n_train_views", std::to_string(cfg.scene.n_train_views));
  kv.set("scene.n_eval_views", std::to_string(cfg.scene.n_eval_views));
  kv.set("scene.image_size", std::to_string(cfg.scene.image_size));
  return kv;
}

}  // namespace surfreg
