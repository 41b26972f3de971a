#include "hygnn/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace hygnn {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(lr, "lr");
  positive(beta1, "beta1");
  positive(beta2, "beta2");
  positive(epsilon, "epsilon");
  positive(width_multiplier, "width_multiplier");
  positive(sigma, "sigma");
  positive(sigma_loc, "sigma_loc");
  if (beta1 >= 1.0 || beta2 >= 1.0) throw std::invalid_argument("Adam betas must be < 1");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be non-negative");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (batch == 0 || crop == 0 || scales == 0 || node_channels == 0 || back_end_dilation == 0) {
    throw std::invalid_argument("batch, crop, N, node_channels and dilation must be positive");
  }
  if (crop % 8) throw std::invalid_argument("crop must be a multiple of 8");
}

ModelConfig TrainConfig::model_config() const {
  auto m = ModelConfig::make(scales, mp_iterations, width_multiplier, node_channels);
  m.dfl.back_end_dilation = back_end_dilation;
  m.graph.lambda = lambda;
  m.graph.enable_cross_domain = cross_domain;
  m.graph.enable_adapter = adapter;
  return m;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("invalid number for '" + key + "': " + v);
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("invalid non-negative integer for '" + key + "': " + v);
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean for '" + key + "': " + v);
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"lr", [](auto& c, auto& k, auto& v) { c.lr = to_double(k, v); }},
      {"beta1", [](auto& c, auto& k, auto& v) { c.beta1 = to_double(k, v); }},
      {"beta2", [](auto& c, auto& k, auto& v) { c.beta2 = to_double(k, v); }},
      {"epsilon", [](auto& c, auto& k, auto& v) { c.epsilon = to_double(k, v); }},
      {"weight_decay", [](auto& c, auto& k, auto& v) { c.weight_decay = to_double(k, v); }},
      {"batch", [](auto& c, auto& k, auto& v) { c.batch = to_uint(k, v); }},
      {"crop", [](auto& c, auto& k, auto& v) { c.crop = to_uint(k, v); }},
      {"lambda", [](auto& c, auto& k, auto& v) { c.lambda = to_double(k, v); }},
      {"iterations", [](auto& c, auto& k, auto& v) { c.iterations = to_uint(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_uint(k, v); }},
      {"N", [](auto& c, auto& k, auto& v) { c.scales = to_uint(k, v); }},
      {"K", [](auto& c, auto& k, auto& v) { c.mp_iterations = to_uint(k, v); }},
      {"width_multiplier", [](auto& c, auto& k, auto& v) { c.width_multiplier = to_double(k, v); }},
      {"node_channels", [](auto& c, auto& k, auto& v) { c.node_channels = to_uint(k, v); }},
      {"back_end_dilation", [](auto& c, auto& k, auto& v) { c.back_end_dilation = to_uint(k, v); }},
      {"sigma", [](auto& c, auto& k, auto& v) { c.sigma = to_double(k, v); }},
      {"sigma_loc", [](auto& c, auto& k, auto& v) { c.sigma_loc = to_double(k, v); }},
      {"reduction",
       [](auto& c, auto& k, auto& v) {
         if (v == "mean") {
           c.reduction = LossReduction::mean;
         } else if (v == "sum") {
           c.reduction = LossReduction::sum;
         } else {
           throw ConfigError("reduction must be 'mean' or 'sum', got '" + v + "' for " + k);
         }
       }},
      {"cross_domain", [](auto& c, auto& k, auto& v) { c.cross_domain = to_bool(k, v); }},
      {"adapter", [](auto& c, auto& k, auto& v) { c.adapter = to_bool(k, v); }},
      {"flip", [](auto& c, auto& k, auto& v) { c.flip = to_bool(k, v); }},
      {"checkpoint_every", [](auto& c, auto& k, auto& v) { c.checkpoint_every = to_uint(k, v); }},
  };
  return table;
}

}  // namespace

void apply_setting(TrainConfig& config, const std::string& key, const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(config, key, value);
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply_setting(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::map<std::string, double> config_snapshot(const TrainConfig& c) {
  return {
      {"lr", c.lr},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"epsilon", c.epsilon},
      {"weight_decay", c.weight_decay},
      {"batch", static_cast<double>(c.batch)},
      {"crop", static_cast<double>(c.crop)},
      {"lambda", c.lambda},
      {"iterations", static_cast<double>(c.iterations)},
      // Split so every 64-bit seed survives the double encoding.
      {"seed_hi", static_cast<double>(c.seed >> 32)},
      {"seed_lo", static_cast<double>(c.seed & 0xffffffffULL)},
      {"N", static_cast<double>(c.scales)},
      {"K", static_cast<double>(c.mp_iterations)},
      {"width_multiplier", c.width_multiplier},
      {"node_channels", static_cast<double>(c.node_channels)},
      {"back_end_dilation", static_cast<double>(c.back_end_dilation)},
      {"sigma", c.sigma},
      {"sigma_loc", c.sigma_loc},
      {"reduction", c.reduction == LossReduction::sum ? 1.0 : 0.0},
      {"cross_domain", c.cross_domain ? 1.0 : 0.0},
      {"adapter", c.adapter ? 1.0 : 0.0},
      {"flip", c.flip ? 1.0 : 0.0},
      {"checkpoint_every", static_cast<double>(c.checkpoint_every)},
  };
}

TrainConfig config_from_snapshot(const std::map<std::string, double>& s) {
  auto get = [&](const char* key) {
    auto it = s.find(key);
    if (it == s.end()) throw ConfigError(std::string("config snapshot lacks '") + key + "'");
    return it->second;
  };
  auto as_uint = [&](const char* key) { return static_cast<std::uint64_t>(get(key)); };
  TrainConfig c;
  c.lr = get("lr");
  c.beta1 = get("beta1");
  c.beta2 = get("beta2");
  c.epsilon = get("epsilon");
  c.weight_decay = get("weight_decay");
  c.batch = as_uint("batch");
  c.crop = as_uint("crop");
  c.lambda = get("lambda");
  c.iterations = as_uint("iterations");
  c.seed = (as_uint("seed_hi") << 32) | as_uint("seed_lo");
  c.scales = as_uint("N");
  c.mp_iterations = as_uint("K");
  c.width_multiplier = get("width_multiplier");
  c.node_channels = as_uint("node_channels");
  c.back_end_dilation = as_uint("back_end_dilation");
  c.sigma = get("sigma");
  c.sigma_loc = get("sigma_loc");
  c.reduction = get("reduction") != 0.0 ? LossReduction::sum : LossReduction::mean;
  c.cross_domain = get("cross_domain") != 0.0;
  c.adapter = get("adapter") != 0.0;
  c.flip = get("flip") != 0.0;
  c.checkpoint_every = as_uint("checkpoint_every");
  return c;
}

}  // namespace hygnn
