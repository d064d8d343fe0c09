#pragma once

// Flat "key = value" configuration with [section] headers. Keys are stored
// as "section.key". Comments start with '#' or ';'.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "vdga/errors.hpp"
#include "vdga/harness.hpp"

namespace vdga {

class Config {
public:
  static Config parse(std::istream& is) {
    Config cfg;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      line = trim(strip_comment(line));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigParse("line " + std::to_string(lineno) + ": bad section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigParse("line " + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigParse("line " + std::to_string(lineno) + ": empty key");
      cfg.values_[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open config file " + path);
    return parse(in);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key) const { return values_.at(key); }

  double get_double(const std::string& key) const {
    const std::string& v = values_.at(key);
    std::size_t used = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigParse("key " + key + ": not a number: '" + v + "'");
    return out;
  }

  template <class Int>
  Int get_int(const std::string& key) const {
    const std::string& v = values_.at(key);
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
      throw ConfigParse("key " + key + ": not an integer: '" + v + "'");
    }
    return out;
  }

private:
  static std::string strip_comment(const std::string& s) {
    const auto pos = s.find_first_of("#;");
    return pos == std::string::npos ? s : s.substr(0, pos);
  }
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

namespace detail {

template <class T>
void assign(const Config& c, const std::string& key, T& field) {
  if (!c.has(key)) return;
  if constexpr (std::is_floating_point_v<T>) {
    field = c.get_double(key);
  } else {
    field = c.get_int<T>(key);
  }
}

inline const char* const kKnownKeys[] = {
    "roi.width", "roi.height", "roi.raster_step",
    "ga.pop_size", "ga.n_objects", "ga.radius", "ga.crossover_rate", "ga.mutation_rate",
    "ga.mutation_points", "ga.coverage_target", "ga.max_generations",
    "session.g_nodes", "session.result_threshold", "session.ms_per_generation",
    "session.ack_timeout_ms", "session.max_retries", "session.reassembly_timeout_ms",
    "session.collection_timeout_ms",
    "link.latency_ms", "link.loss", "link.seed",
    "experiment.repetitions", "experiment.rng_seed", "experiment.comm_range",
    "experiment.baseline_generations", "experiment.variant_target",
    "rssi.p0_dbm", "rssi.d0_m", "rssi.eta",
};

}  // namespace detail

/// Builds an experiment from a config on top of the defaults. Unknown keys
/// and malformed values raise ConfigParse naming the key.
inline ExperimentSpec experiment_from_config(const Config& c) {
  for (const auto& [key, value] : c.values()) {
    bool known = false;
    for (const char* k : detail::kKnownKeys) known = known || key == k;
    if (!known) throw ConfigParse("unknown key " + key);
  }
  ExperimentSpec spec;
  auto& s = spec.session;
  double width = s.roi.width();
  double height = s.roi.height();
  double step = s.roi.raster_step();
  detail::assign(c, "roi.width", width);
  detail::assign(c, "roi.height", height);
  detail::assign(c, "roi.raster_step", step);
  try {
    s.roi = RegionOfInterest(width, height, step);
  } catch (const InvalidRegion& e) {
    throw ConfigParse(std::string("key roi: ") + e.what());
  }

  detail::assign(c, "ga.pop_size", s.ga.pop_size);
  detail::assign(c, "ga.n_objects", s.ga.n_objects);
  detail::assign(c, "ga.radius", s.ga.radius);
  detail::assign(c, "ga.crossover_rate", s.ga.crossover_rate);
  detail::assign(c, "ga.mutation_rate", s.ga.mutation_rate);
  detail::assign(c, "ga.mutation_points", s.ga.mutation_points);
  detail::assign(c, "ga.coverage_target", s.ga.coverage_target);
  detail::assign(c, "ga.max_generations", s.ga.max_generations);

  detail::assign(c, "session.g_nodes", s.g_nodes);
  detail::assign(c, "session.result_threshold", s.result_threshold);
  detail::assign(c, "session.ms_per_generation", s.ms_per_generation);
  detail::assign(c, "session.ack_timeout_ms", s.timing.ack_timeout_ms);
  detail::assign(c, "session.max_retries", s.timing.max_retries);
  detail::assign(c, "session.reassembly_timeout_ms", s.timing.reassembly_timeout_ms);
  detail::assign(c, "session.collection_timeout_ms", s.timing.collection_timeout_ms);

  detail::assign(c, "link.latency_ms", spec.link.latency_ms);
  detail::assign(c, "link.loss", spec.link.loss_prob);
  detail::assign(c, "link.seed", spec.link.rng_seed);

  detail::assign(c, "experiment.repetitions", spec.repetitions);
  detail::assign(c, "experiment.rng_seed", spec.rng_seed);
  detail::assign(c, "experiment.comm_range", spec.comm_range);
  detail::assign(c, "experiment.baseline_generations", spec.baseline_generations);
  detail::assign(c, "experiment.variant_target", spec.variant_target);

  detail::assign(c, "rssi.p0_dbm", spec.rssi.p0_dbm);
  detail::assign(c, "rssi.d0_m", spec.rssi.d0_m);
  detail::assign(c, "rssi.eta", spec.rssi.eta);

  spec.session.ga.rng_seed = spec.rng_seed;
  try {
    spec.validate();
  } catch (const InvalidConfig& e) {
    throw ConfigParse(e.what());
  }
  if (s.g_nodes == 0 || s.g_nodes > 255) throw ConfigParse("key session.g_nodes: must be in 1..255");
  if (!(s.result_threshold > 0.0 && s.result_threshold <= 1.0)) {
    throw ConfigParse("key session.result_threshold: must be in (0,1]");
  }
  return spec;
}

/// The effective configuration, every key spelled out; parses back to the
/// same experiment.
inline void write_effective_config(std::ostream& os, const ExperimentSpec& spec) {
  const auto& s = spec.session;
  auto num = [](double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
  };
  os << "[roi]\n"
     << "width = " << num(s.roi.width()) << "\n"
     << "height = " << num(s.roi.height()) << "\n"
     << "raster_step = " << num(s.roi.raster_step()) << "\n\n"
     << "[ga]\n"
     << "pop_size = " << s.ga.pop_size << "\n"
     << "n_objects = " << s.ga.n_objects << "\n"
     << "radius = " << num(s.ga.radius) << "\n"
     << "crossover_rate = " << num(s.ga.crossover_rate) << "\n"
     << "mutation_rate = " << num(s.ga.mutation_rate) << "\n"
     << "mutation_points = " << s.ga.mutation_points << "\n"
     << "coverage_target = " << num(s.ga.coverage_target) << "\n"
     << "max_generations = " << s.ga.max_generations << "\n\n"
     << "[session]\n"
     << "g_nodes = " << s.g_nodes << "\n"
     << "result_threshold = " << num(s.result_threshold) << "\n"
     << "ms_per_generation = " << s.ms_per_generation << "\n"
     << "ack_timeout_ms = " << s.timing.ack_timeout_ms << "\n"
     << "max_retries = " << s.timing.max_retries << "\n"
     << "reassembly_timeout_ms = " << s.timing.reassembly_timeout_ms << "\n"
     << "collection_timeout_ms = " << s.timing.collection_timeout_ms << "\n\n"
     << "[link]\n"
     << "latency_ms = " << spec.link.latency_ms << "\n"
     << "loss = " << num(spec.link.loss_prob) << "\n"
     << "seed = " << spec.link.rng_seed << "\n\n"
     << "[experiment]\n"
     << "repetitions = " << spec.repetitions << "\n"
     << "rng_seed = " << spec.rng_seed << "\n"
     << "comm_range = " << num(spec.comm_range) << "\n"
     << "baseline_generations = " << spec.baseline_generations << "\n"
     << "variant_target = " << num(spec.variant_target) << "\n\n"
     << "[rssi]\n"
     << "p0_dbm = " << num(spec.rssi.p0_dbm) << "\n"
     << "d0_m = " << num(spec.rssi.d0_m) << "\n"
     << "eta = " << num(spec.rssi.eta) << "\n";
}

}  // namespace vdga
