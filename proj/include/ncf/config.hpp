#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncf/montecarlo.hpp"

namespace ncf::cfg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key-value experiment configuration: one `section.key = value` pair
/// per line, `#` starts a comment. Chosen so any language can parse it.
class Config {
 public:
  static Config parse_string(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      c.kv_[key] = value;
    }
    return c;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config not found: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_string(buf.str());
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }
  double get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config key " + key + ": not a number: " + it->second);
    }
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t used = 0;
      const std::int64_t v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config key " + key + ": not an integer: " + it->second);
    }
  }
  bool get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key " + key + ": not a boolean: " + it->second);
  }
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    for (const std::string& tok : split(it->second, ',')) {
      try {
        out.push_back(std::stod(tok));
      } catch (...) {
        throw ConfigError("config key " + key + ": bad list element: " + tok);
      }
    }
    return out;
  }
  std::vector<std::int64_t> get_ints(const std::string& key,
                                     std::vector<std::int64_t> fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<std::int64_t> out;
    for (const std::string& tok : split(it->second, ',')) {
      try {
        out.push_back(std::stoll(tok));
      } catch (...) {
        throw ConfigError("config key " + key + ": bad list element: " + tok);
      }
    }
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

  std::string to_string() const {
    std::string out;
    for (const auto& [k, v] : kv_) out += k + " = " + v + "\n";
    return out;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == sep) {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    out.push_back(trim(cur));
    return out;
  }

 private:
  std::map<std::string, std::string> kv_;
};

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "model.type", "model.alpha_left", "model.alpha_right", "model.beta", "model.k", "model.p",
      "model.matrix", "model.activation", "model.kappa", "model.alpha",
      "innovations.distribution", "innovations.mean", "innovations.sigma", "innovations.a",
      "innovations.b",
      "statistic.type", "statistic.delta_bar", "statistic.include_center", "statistic.weights",
      "index.type", "index.lo", "index.hi", "index.box_lo", "index.box_hi", "index.points",
      "experiment.d_grid", "experiment.m_grid", "experiment.replicates", "experiment.root_seed",
      "experiment.reference_depth", "experiment.picard_iterations", "experiment.window_margin",
      "experiment.picard_target", "experiment.swap_depth", "experiment.deviation_depth",
      "experiment.epsilon_grid", "experiment.workers",
      "output.dir"};
  return keys;
}

inline Coord coord_from_string(const std::string& s) {
  std::vector<std::int64_t> xs;
  for (const std::string& tok : Config::split(s, ',')) {
    try {
      xs.push_back(std::stoll(tok));
    } catch (...) {
      throw ConfigError("bad coordinate: " + s);
    }
  }
  Coord c(static_cast<int>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) c[static_cast<int>(i)] = xs[i];
  return c;
}

/// Builds the experiment plan, rejecting unknown keys so typos surface as
/// config errors instead of silently-defaulted runs.
inline mc::ExperimentPlan plan_from_config(const Config& c) {
  for (const auto& [key, value] : c.entries())
    if (!known_keys().count(key)) throw ConfigError("unknown config key: " + key);

  mc::ExperimentPlan plan;

  const std::string model_type = c.get_string("model.type", "ar");
  if (model_type == "ar") {
    plan.model.kind = mc::ModelSpec::Kind::ar;
    plan.model.alpha_left = c.get_double("model.alpha_left", 0.2);
    plan.model.alpha_right = c.get_double("model.alpha_right", 0.2);
    plan.model.beta = c.get_double("model.beta", 0.3);
  } else if (model_type == "brnn") {
    plan.model.kind = mc::ModelSpec::Kind::brnn;
    plan.model.k = static_cast<int>(c.get_int("model.k", 1));
    const int p = static_cast<int>(c.get_int("model.p", 1));
    const std::vector<double> entries = c.get_doubles("model.matrix", {0.3, 0.3});
    const int cols = 2 * plan.model.k * p;
    if (entries.size() != static_cast<std::size_t>(p * cols))
      throw ConfigError("model.matrix: expected " + std::to_string(p * cols) + " entries");
    Matrix a(p, cols);
    for (int r = 0; r < p; ++r)
      for (int col = 0; col < cols; ++col)
        a.at(r, col) = entries[static_cast<std::size_t>(r * cols + col)];
    plan.model.matrix = a;
    plan.model.beta = c.get_double("model.beta", 0.3);
    try {
      plan.model.activation = activation_from_name(c.get_string("model.activation", "tanh"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (model_type == "ar_lattice") {
    plan.model.kind = mc::ModelSpec::Kind::ar_lattice;
    plan.model.kappa = static_cast<int>(c.get_int("model.kappa", 2));
    plan.model.alpha = c.get_double("model.alpha", 0.4);
    plan.model.beta = c.get_double("model.beta", 0.3);
  } else {
    throw ConfigError("model.type must be ar, brnn or ar_lattice, got " + model_type);
  }

  const std::string dist = c.get_string("innovations.distribution", "gaussian");
  if (dist == "gaussian")
    plan.innovations =
        Distribution::gaussian(c.get_double("innovations.mean", 0.0), c.get_double("innovations.sigma", 1.0));
  else if (dist == "uniform")
    plan.innovations =
        Distribution::uniform(c.get_double("innovations.a", -1.0), c.get_double("innovations.b", 1.0));
  else
    throw ConfigError("innovations.distribution must be gaussian or uniform, got " + dist);

  const std::string stat = c.get_string("statistic.type", "risk_mean");
  if (stat == "center") plan.statistic.kind = mc::StatisticSpec::Kind::center;
  else if (stat == "sum") plan.statistic.kind = mc::StatisticSpec::Kind::sum;
  else if (stat == "max") plan.statistic.kind = mc::StatisticSpec::Kind::max;
  else if (stat == "risk_zero") plan.statistic.kind = mc::StatisticSpec::Kind::risk_zero;
  else if (stat == "risk_mean") plan.statistic.kind = mc::StatisticSpec::Kind::risk_mean;
  else if (stat == "risk_linear") plan.statistic.kind = mc::StatisticSpec::Kind::risk_linear;
  else throw ConfigError("statistic.type: unknown statistic " + stat);
  plan.statistic.delta_bar = c.get_ints("statistic.delta_bar", {1});
  plan.statistic.include_center = c.get_bool("statistic.include_center", false);
  plan.statistic.weights = c.get_doubles("statistic.weights", {});
  plan.statistic.value_dim =
      plan.model.kind == mc::ModelSpec::Kind::brnn ? static_cast<int>(c.get_int("model.p", 1)) : 1;

  const std::string index_type = c.get_string("index.type", "interval");
  if (index_type == "interval") {
    plan.index.kind = mc::IndexSpec::Kind::interval;
    plan.index.lo = c.get_int("index.lo", 0);
    plan.index.hi = c.get_int("index.hi", 63);
  } else if (index_type == "box") {
    plan.index.kind = mc::IndexSpec::Kind::box;
    plan.index.box_lo = coord_from_string(c.get_string("index.box_lo", "-1,-1"));
    plan.index.box_hi = coord_from_string(c.get_string("index.box_hi", "1,1"));
  } else if (index_type == "explicit") {
    plan.index.kind = mc::IndexSpec::Kind::explicit_points;
    for (const std::string& tok : Config::split(c.get_string("index.points", "0"), ';'))
      plan.index.points.push_back(coord_from_string(tok));
  } else {
    throw ConfigError("index.type must be interval, box or explicit, got " + index_type);
  }

  plan.d_grid = c.get_ints("experiment.d_grid", plan.d_grid);
  std::vector<std::int64_t> ms = c.get_ints("experiment.m_grid", {1, 2});
  plan.m_grid.clear();
  for (std::int64_t m : ms) plan.m_grid.push_back(static_cast<int>(m));
  plan.replicates = c.get_int("experiment.replicates", plan.replicates);
  plan.root_seed = static_cast<std::uint64_t>(c.get_int("experiment.root_seed", 1));
  plan.reference_depth = c.get_int("experiment.reference_depth", 0);
  plan.picard_iterations = static_cast<int>(c.get_int("experiment.picard_iterations", 0));
  plan.window_margin = static_cast<int>(c.get_int("experiment.window_margin", 0));
  plan.picard_target = c.get_double("experiment.picard_target", 1e-12);
  plan.swap_depth = c.get_int("experiment.swap_depth", 4);
  plan.deviation_depth = c.get_int("experiment.deviation_depth", 4);
  plan.epsilon_grid = static_cast<int>(c.get_int("experiment.epsilon_grid", 12));
  plan.workers = static_cast<int>(c.get_int("experiment.workers", 1));
  plan.output_dir = c.get_string("output.dir", plan.output_dir);

  try {
    plan.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return plan;
}

/// Full key set the plan actually runs with; written next to the outputs so
/// every run is reconstructible.
inline std::string render_plan(const mc::ExperimentPlan& plan) {
  Config c;
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  switch (plan.model.kind) {
    case mc::ModelSpec::Kind::ar:
      c.set("model.type", "ar");
      c.set("model.alpha_left", num(plan.model.alpha_left));
      c.set("model.alpha_right", num(plan.model.alpha_right));
      c.set("model.beta", num(plan.model.beta));
      break;
    case mc::ModelSpec::Kind::brnn: {
      c.set("model.type", "brnn");
      c.set("model.k", std::to_string(plan.model.k));
      c.set("model.p", std::to_string(plan.model.matrix.rows));
      c.set("model.beta", num(plan.model.beta));
      std::string entries;
      for (std::size_t i = 0; i < plan.model.matrix.a.size(); ++i)
        entries += (i ? "," : "") + num(plan.model.matrix.a[i]);
      c.set("model.matrix", entries);
      const char* act = "tanh";
      if (plan.model.activation == Activation::identity) act = "identity";
      if (plan.model.activation == Activation::relu) act = "relu";
      if (plan.model.activation == Activation::sigmoid) act = "sigmoid";
      c.set("model.activation", act);
      break;
    }
    case mc::ModelSpec::Kind::ar_lattice:
      c.set("model.type", "ar_lattice");
      c.set("model.kappa", std::to_string(plan.model.kappa));
      c.set("model.alpha", num(plan.model.alpha));
      c.set("model.beta", num(plan.model.beta));
      break;
  }
  if (plan.innovations.kind == DistKind::gaussian) {
    c.set("innovations.distribution", "gaussian");
    c.set("innovations.mean", num(plan.innovations.p1));
    c.set("innovations.sigma", num(plan.innovations.p2));
  } else {
    c.set("innovations.distribution", "uniform");
    c.set("innovations.a", num(plan.innovations.p1));
    c.set("innovations.b", num(plan.innovations.p2));
  }
  const char* stat_names[] = {"center", "sum", "max", "risk_zero", "risk_mean", "risk_linear"};
  c.set("statistic.type", stat_names[static_cast<int>(plan.statistic.kind)]);
  {
    std::string db;
    for (std::size_t i = 0; i < plan.statistic.delta_bar.size(); ++i)
      db += (i ? "," : "") + std::to_string(plan.statistic.delta_bar[i]);
    c.set("statistic.delta_bar", db);
  }
  c.set("statistic.include_center", plan.statistic.include_center ? "true" : "false");
  if (!plan.statistic.weights.empty()) {
    std::string w;
    for (std::size_t i = 0; i < plan.statistic.weights.size(); ++i)
      w += (i ? "," : "") + num(plan.statistic.weights[i]);
    c.set("statistic.weights", w);
  }
  switch (plan.index.kind) {
    case mc::IndexSpec::Kind::interval:
      c.set("index.type", "interval");
      c.set("index.lo", std::to_string(plan.index.lo));
      c.set("index.hi", std::to_string(plan.index.hi));
      break;
    case mc::IndexSpec::Kind::box: {
      c.set("index.type", "box");
      auto render_coord = [](const Coord& p) {
        std::string s;
        for (int i = 0; i < p.dim; ++i) s += (i ? "," : "") + std::to_string(p[i]);
        return s;
      };
      c.set("index.box_lo", render_coord(plan.index.box_lo));
      c.set("index.box_hi", render_coord(plan.index.box_hi));
      break;
    }
    case mc::IndexSpec::Kind::explicit_points: {
      c.set("index.type", "explicit");
      std::string pts;
      for (std::size_t i = 0; i < plan.index.points.size(); ++i) {
        const Coord& p = plan.index.points[i];
        if (i) pts += ";";
        for (int j = 0; j < p.dim; ++j) pts += (j ? "," : "") + std::to_string(p[j]);
      }
      c.set("index.points", pts);
      break;
    }
  }
  {
    std::string dg;
    for (std::size_t i = 0; i < plan.d_grid.size(); ++i)
      dg += (i ? "," : "") + std::to_string(plan.d_grid[i]);
    c.set("experiment.d_grid", dg);
    std::string mg;
    for (std::size_t i = 0; i < plan.m_grid.size(); ++i)
      mg += (i ? "," : "") + std::to_string(plan.m_grid[i]);
    c.set("experiment.m_grid", mg);
  }
  c.set("experiment.replicates", std::to_string(plan.replicates));
  c.set("experiment.root_seed", std::to_string(plan.root_seed));
  c.set("experiment.reference_depth", std::to_string(plan.reference_depth));
  c.set("experiment.picard_iterations", std::to_string(plan.picard_iterations));
  c.set("experiment.window_margin", std::to_string(plan.window_margin));
  c.set("experiment.picard_target", num(plan.picard_target));
  c.set("experiment.swap_depth", std::to_string(plan.swap_depth));
  c.set("experiment.deviation_depth", std::to_string(plan.deviation_depth));
  c.set("experiment.epsilon_grid", std::to_string(plan.epsilon_grid));
  c.set("experiment.workers", std::to_string(plan.workers));
  c.set("output.dir", plan.output_dir);
  return c.to_string();
}

}  // namespace ncf::cfg
