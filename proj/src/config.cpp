#include "medrl/cli/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace medrl {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigMap ConfigMap::defaults() {
  ConfigMap c;
  auto& v = c.values_;
  v["run.precision"] = "f32";
  v["run.seed"] = "0";
  v["run.outdir"] = "out";
  v["run.schema"] = "sepsis";

  v["sim.latent_dim"] = "6";
  v["sim.feature_dim"] = "12";
  v["sim.horizon"] = "60";
  v["sim.n_train"] = "10000";
  v["sim.n_test"] = "2000";
  v["sim.miss_base"] = "0.40";
  v["sim.miss_coupling"] = "0.6";
  v["sim.process_noise"] = "0.10";
  v["sim.obs_noise"] = "0.1";
  v["sim.discharge_threshold"] = "1.1";
  v["sim.death_threshold"] = "3.1";
  v["sim.gap_rate_base"] = "0.35";
  v["sim.gap_rate_coupling"] = "1.0";
  v["sim.behavior_temperature"] = "0.9";

  v["reward.a_sep"] = "-0.025";
  v["reward.b_sep"] = "-0.125";
  v["reward.c_sep"] = "-2.0";
  v["reward.a_vent"] = "0.5";
  v["reward.b_vent"] = "0.5";
  v["reward.terminal"] = "15.0";
  v["reward.gamma"] = "0.99";

  v["model.encoder"] = "afi";  // afi | plain (zero-impute, no intervals)
  v["model.embed_width"] = "32";
  v["model.mask_channel"] = "false";
  v["model.deter_dim"] = "256";
  v["model.stoch_dim"] = "32";
  v["model.hidden"] = "512";
  v["model.dyn_hidden"] = "256";
  v["model.std_floor"] = "0.1";
  v["model.free_bits"] = "1.0";
  v["model.bucket_count"] = "255";
  v["model.bucket_limit"] = "20.0";
  v["model.w_reward"] = "1.0";
  v["model.w_continue"] = "1.0";
  v["model.w_recon"] = "1.0";
  v["model.w_kl"] = "1.0";

  v["world.batch_size"] = "64";
  v["world.batch_length"] = "50";
  v["world.steps"] = "2000";
  v["world.lr"] = "1e-4";
  v["world.clip_norm"] = "100";

  v["policy.T"] = "50";
  v["policy.tau"] = "10";
  v["policy.horizon"] = "15";
  v["policy.lr_phase1"] = "1e-4";
  v["policy.lr_phase2"] = "1e-5";
  v["policy.ema_rate"] = "0.02";
  v["policy.entropy_coef"] = "3e-4";
  v["policy.lambda"] = "0.95";
  v["policy.steps_phase1"] = "600";
  v["policy.steps_phase2"] = "400";
  v["policy.batch_size"] = "16";
  v["policy.phase2_stride"] = "1";
  v["policy.retnorm_decay"] = "0.99";

  v["behavior.hidden"] = "16";
  v["behavior.lr"] = "1e-4";
  v["behavior.max_epochs"] = "200";
  v["behavior.patience"] = "10";
  v["behavior.batch_size"] = "64";
  v["behavior.prob_floor"] = "1e-4";

  v["ope.clip_lo"] = "1e-4";
  v["ope.clip_hi"] = "1e2";
  v["ope.bins"] = "10";
  v["eval.n_true_value"] = "500";
  return c;
}

ConfigMap ConfigMap::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ConfigMap::from_file: cannot open " + path);
  ConfigMap c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key or value");
    c.values_[key] = value;
  }
  return c;
}

ConfigMap ConfigMap::resolve(const std::string& file_path, const std::vector<std::string>& overrides) {
  ConfigMap config = defaults();
  if (!file_path.empty()) config.merge(from_file(file_path));
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("override must be key=value: " + kv);
    config.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  config.validate();
  return config;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  if (!defaults().has(key)) throw std::invalid_argument("unknown config key: " + key);
  values_[key] = value;
}

void ConfigMap::merge(const ConfigMap& overrides) {
  for (const auto& [k, val] : overrides.values_) set(k, val);
}

const std::string& ConfigMap::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("missing config key: " + key);
  return it->second;
}

double ConfigMap::get_double(const std::string& key) const {
  const std::string& s = get_string(key);
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("config key " + key + ": not a number: " + s);
  return v;
}

int ConfigMap::get_int(const std::string& key) const {
  const std::string& s = get_string(key);
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw std::invalid_argument("config key " + key + ": not an integer: " + s);
  return v;
}

bool ConfigMap::get_bool(const std::string& key) const {
  const std::string& s = get_string(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config key " + key + ": not a bool: " + s);
}

std::uint64_t ConfigMap::get_u64(const std::string& key) const {
  const std::string& s = get_string(key);
  std::size_t used = 0;
  const unsigned long long v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument("config key " + key + ": not an unsigned integer: " + s);
  return static_cast<std::uint64_t>(v);
}

std::string ConfigMap::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, val] : values_) {
    if (k == "run.outdir") continue;  // placement is not semantics
    mix(k);
    mix("=");
    mix(val);
    mix("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void ConfigMap::validate() const {
  const std::string& schema = get_string("run.schema");
  if (schema != "sepsis" && schema != "vent")
    throw std::invalid_argument("run.schema must be 'sepsis' or 'vent', got " + schema);
  const std::string& precision = get_string("run.precision");
  if (precision != "f32" && precision != "f64")
    throw std::invalid_argument("run.precision must be 'f32' or 'f64', got " + precision);
  const int t_len = get_int("policy.T");
  const int tau = get_int("policy.tau");
  if (tau < 0 || t_len < 1) throw std::invalid_argument("policy.T must be >= 1 and policy.tau >= 0");
  // tau == T is tolerated only for the imagination-ratio sweep's top end.
  if (tau > t_len)
    throw std::invalid_argument("policy.tau (" + std::to_string(tau) + ") must not exceed policy.T (" +
                                std::to_string(t_len) + ")");
  if (get_int("policy.horizon") < 1) throw std::invalid_argument("policy.horizon must be >= 1");
  if (get_int("model.bucket_count") < 2) throw std::invalid_argument("model.bucket_count must be >= 2");
  const std::string& encoder = get_string("model.encoder");
  if (encoder != "afi" && encoder != "plain")
    throw std::invalid_argument("model.encoder must be 'afi' or 'plain', got " + encoder);
  const double gamma = get_double("reward.gamma");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("reward.gamma must be in (0, 1]");
}

std::string ConfigMap::to_text() const {
  std::ostringstream out;
  for (const auto& [k, val] : values_) out << k << " = " << val << "\n";
  return out.str();
}

}  // namespace medrl
