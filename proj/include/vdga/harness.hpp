#pragma once

// Experiment runner and reporting: centralized vs distributed sessions,
// initializer baselines, mutation variants, neighbour counts, a synthetic
// RSSI model, CSV and SVG output.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "vdga/errors.hpp"
#include "vdga/geometry.hpp"
#include "vdga/optimizer.hpp"
#include "vdga/protocol.hpp"
#include "vdga/seeding.hpp"
#include "vdga/simnet.hpp"

namespace vdga {

// --- network metrics -------------------------------------------------------

/// Count of other nodes within comm_range (Euclidean, inclusive).
inline std::vector<std::size_t> neighbor_counts(const Chromosome& c, double comm_range) {
  if (!(comm_range > 0.0)) throw InvalidConfig("comm_range must be > 0");
  std::vector<std::size_t> counts(c.size(), 0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      if (distance(c.genes[i], c.genes[j]) <= comm_range) {
        ++counts[i];
        ++counts[j];
      }
    }
  }
  return counts;
}

// Log-distance path loss, RSSI(d) = P0 - 10 eta log10(d / d0). Synthetic:
// no measured radio data stands behind these numbers.
struct RssiModel {
  double p0_dbm = -40.0;
  double d0_m = 1.0;
  double eta = 2.2;
};

inline double rssi_at(double d, const RssiModel& m) {
  return m.p0_dbm - 10.0 * m.eta * std::log10(d / m.d0_m);
}

inline double synthetic_rssi(const Chromosome& c, std::size_t tx, std::size_t rx,
                             const RssiModel& m = {}) {
  if (tx == rx) throw CoincidentNodes("tx and rx are the same node");
  const double d = distance(c.genes.at(tx), c.genes.at(rx));
  if (!(d > 0.0)) throw CoincidentNodes("nodes " + std::to_string(tx) + " and " +
                                        std::to_string(rx) + " share a position");
  return rssi_at(d, m);
}

/// Per node: synthetic RSSI from its nearest other node (distances under d0
/// are clamped to d0). Single-node layouts yield P0.
inline std::vector<double> strongest_rssi(const Chromosome& c, const RssiModel& m = {}) {
  std::vector<double> out(c.size(), m.p0_dbm);
  for (std::size_t i = 0; i < c.size(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (j != i) nearest = std::min(nearest, distance(c.genes[i], c.genes[j]));
    }
    if (std::isfinite(nearest)) out[i] = rssi_at(std::max(nearest, m.d0_m), m);
  }
  return out;
}

// --- rendering -------------------------------------------------------------

inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * fraction);
  return buf;
}

/// SVG map of a layout: region outline, one sensing circle per node and the
/// coverage percentage.
inline std::string render_deployment(const Chromosome& c, const RegionOfInterest& roi,
                                     double radius) {
  constexpr double scale = 10.0;  // px per metre
  constexpr double margin = 20.0;
  const double w = roi.width() * scale;
  const double h = roi.height() * scale;
  const double coverage = c.size() == 0 ? 0.0 : coverage_of(c, radius, roi);
  char buf[256];
  std::ostringstream os;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\">\n",
                w + 2 * margin, h + 3 * margin, w + 2 * margin, h + 3 * margin);
  os << buf;
  std::snprintf(buf, sizeof buf,
                "  <rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                "stroke=\"black\"/>\n",
                margin, margin, w, h);
  os << buf;
  for (const Point& p : c.genes) {
    std::snprintf(buf, sizeof buf,
                  "  <circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"steelblue\" "
                  "fill-opacity=\"0.3\" stroke=\"steelblue\"/>\n",
                  margin + p.x * scale, margin + (roi.height() - p.y) * scale, radius * scale);
    os << buf;
  }
  std::snprintf(buf, sizeof buf,
                "  <text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"14\">"
                "coverage %s</text>\n",
                margin, h + 2.2 * margin, format_percent(coverage).c_str());
  os << buf << "</svg>\n";
  return os.str();
}

// --- experiments -----------------------------------------------------------

enum class Mode { Centralized, Distributed };
enum class Baseline { RandomOnly, VDOnly, GAOnly, VDGA };

inline const char* to_string(Mode m) { return m == Mode::Centralized ? "centralized" : "distributed"; }
inline const char* to_string(Baseline b) {
  switch (b) {
    case Baseline::RandomOnly: return "random_only";
    case Baseline::VDOnly: return "vd_only";
    case Baseline::GAOnly: return "ga_only";
    case Baseline::VDGA: return "vd_ga";
  }
  return "?";
}

struct ExperimentSpec {
  Mode mode = Mode::Distributed;
  std::vector<Baseline> baselines{Baseline::RandomOnly, Baseline::VDOnly, Baseline::GAOnly,
                                  Baseline::VDGA};
  std::size_t repetitions = 30;
  SessionConfig session;  // ga, roi, g_nodes, threshold, GA cost, protocol timing
  LinkModel link;
  std::uint64_t rng_seed = 1;
  double comm_range = 15.0;
  RssiModel rssi;
  std::size_t baseline_generations = 200;
  double variant_target = 0.90;

  void validate() const {
    if (repetitions == 0) throw InvalidConfig("repetitions must be >= 1");
    session.ga.validate();
    link.validate();
    if (!(comm_range > 0.0)) throw InvalidConfig("comm_range must be > 0");
  }
};

/// Seed of repetition `rep`; every mode and variant of a repetition shares it.
inline std::uint64_t repetition_seed(std::uint64_t base, std::size_t rep) {
  return mix_seed(base ^ mix_seed(0xc0ffee + rep));
}

struct MetricsRecord {
  std::string mode;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  double coverage = 0.0;
  std::optional<std::size_t> generations_to_target;
  std::int64_t simulated_time_ms = 0;
  std::optional<std::int64_t> time_to_target_ms;
  std::size_t frames_sent = 0;  // energy proxy
  std::vector<std::size_t> neighbor_counts;
  std::vector<double> rssi_synthetic_dbm;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline constexpr const char* kMetricsHeader =
    "mode,rep,seed,coverage,generations_to_target,simulated_time_ms,time_to_target_ms,"
    "frames_sent,neighbor_counts,rssi_synthetic_dbm";
inline constexpr const char* kNotReached = "not reached";

namespace detail {

template <class T, class F>
std::string join(const std::vector<T>& v, F fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += fmt(v[i]);
  }
  return s;
}

inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::string format_metrics(const MetricsRecord& m) {
  std::ostringstream os;
  os << m.mode << ',' << m.rep << ',' << m.seed << ',' << detail::fixed(m.coverage) << ','
     << (m.generations_to_target ? std::to_string(*m.generations_to_target) : kNotReached) << ','
     << m.simulated_time_ms << ','
     << (m.time_to_target_ms ? std::to_string(*m.time_to_target_ms) : kNotReached) << ','
     << m.frames_sent << ','
     << detail::join(m.neighbor_counts, [](std::size_t v) { return std::to_string(v); }) << ','
     << detail::join(m.rssi_synthetic_dbm, [](double v) { return detail::fixed(v, 2); });
  return os.str();
}

/// Inverse of format_metrics (RSSI comes back at 0.01 dB resolution).
inline MetricsRecord parse_metrics(const std::string& line) {
  const auto f = detail::split(line, ',');
  if (f.size() != 10) throw ConfigParse("metrics row needs 10 fields, got " + std::to_string(f.size()));
  MetricsRecord m;
  try {
    m.mode = f[0];
    m.rep = std::stoull(f[1]);
    m.seed = std::stoull(f[2]);
    m.coverage = std::stod(f[3]);
    if (f[4] != kNotReached) m.generations_to_target = std::stoull(f[4]);
    m.simulated_time_ms = std::stoll(f[5]);
    if (f[6] != kNotReached) m.time_to_target_ms = std::stoll(f[6]);
    m.frames_sent = std::stoull(f[7]);
    if (!f[8].empty())
      for (const auto& v : detail::split(f[8], ';')) m.neighbor_counts.push_back(std::stoull(v));
    if (!f[9].empty())
      for (const auto& v : detail::split(f[9], ';')) m.rssi_synthetic_dbm.push_back(std::stod(v));
  } catch (const std::logic_error& e) {
    throw ConfigParse(std::string("malformed metrics row: ") + e.what());
  }
  return m;
}

inline void attach_network_metrics(MetricsRecord& m, const Chromosome& c, const ExperimentSpec& spec) {
  m.neighbor_counts = neighbor_counts(c, spec.comm_range);
  m.rssi_synthetic_dbm = strongest_rssi(c, spec.rssi);
}

/// One centralized repetition: the whole wire population evolves on a single
/// node with the same GA stream an island 0 would use.
inline MetricsRecord run_centralized(const ExperimentSpec& spec, std::size_t rep,
                                     RunResult* out = nullptr) {
  const std::uint64_t seed = repetition_seed(spec.rng_seed, rep);
  GaConfig ga = spec.session.ga;
  ga.rng_seed = seed;
  const auto& roi = spec.session.roi;
  Rng rng = island_rng(seed, 0);
  RunResult res = run(wire_population(ga, roi), ga, roi, rng);
  MetricsRecord m;
  m.mode = to_string(Mode::Centralized);
  m.rep = rep;
  m.seed = seed;
  m.coverage = res.best_coverage;
  m.generations_to_target = res.generations_to_target;
  const std::int64_t cost = spec.session.ms_per_generation;
  m.simulated_time_ms = static_cast<std::int64_t>(res.generations) * cost;
  if (res.generations_to_target)
    m.time_to_target_ms = static_cast<std::int64_t>(*res.generations_to_target) * cost;
  attach_network_metrics(m, res.best, spec);
  if (out) *out = std::move(res);
  return m;
}

/// One distributed repetition through the simulated network. The target
/// counts as reached when the coordinator's decided coverage meets it; the
/// time to target is then the decision instant.
inline MetricsRecord run_distributed(const ExperimentSpec& spec, std::size_t rep,
                                     SessionResult* out = nullptr) {
  const std::uint64_t seed = repetition_seed(spec.rng_seed, rep);
  SessionConfig cfg = spec.session;
  cfg.ga.rng_seed = seed;
  LinkModel link = spec.link;
  link.rng_seed = mix_seed(seed ^ spec.link.rng_seed);
  SessionResult res = run_session(cfg, link);
  MetricsRecord m;
  m.mode = to_string(Mode::Distributed);
  m.rep = rep;
  m.seed = seed;
  m.coverage = res.decided_coverage;
  m.simulated_time_ms = res.end_time_ms;
  m.frames_sent = res.frames_sent;
  if (res.decided_coverage >= cfg.ga.coverage_target) {
    m.time_to_target_ms = res.decision_time_ms;
    for (const auto& island : res.islands) {
      if (island.best_coverage >= cfg.ga.coverage_target &&
          (!m.generations_to_target || island.generations < *m.generations_to_target)) {
        m.generations_to_target = island.generations;
      }
    }
  }
  attach_network_metrics(m, res.final_chromosome, spec);
  if (out) *out = std::move(res);
  return m;
}

/// Median with unreached entries ordered last; nullopt when the median
/// element itself is unreached.
template <class T>
std::optional<double> median_reached(std::vector<std::optional<T>> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (!a) return false;
    if (!b) return true;
    return *a < *b;
  });
  const std::size_t n = v.size();
  const auto& lo = v[(n - 1) / 2];
  const auto& hi = v[n / 2];
  if (!lo || !hi) return std::nullopt;
  return 0.5 * (static_cast<double>(*lo) + static_cast<double>(*hi));
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return 0.5 * (v[(n - 1) / 2] + v[n / 2]);
}

struct ModeSummary {
  std::string mode;
  std::optional<double> median_generations_to_target;
  std::optional<double> median_time_to_target_ms;
  double median_coverage = 0.0;
  double median_simulated_time_ms = 0.0;
};

struct CompareReport {
  std::vector<MetricsRecord> rows;
  ModeSummary centralized;
  ModeSummary distributed;
};

inline ModeSummary summarize(const std::string& mode, const std::vector<MetricsRecord>& rows) {
  ModeSummary s;
  s.mode = mode;
  std::vector<std::optional<std::size_t>> gens;
  std::vector<std::optional<std::int64_t>> times;
  std::vector<double> cov;
  std::vector<double> sim;
  for (const auto& r : rows) {
    if (r.mode != mode) continue;
    gens.push_back(r.generations_to_target);
    times.push_back(r.time_to_target_ms);
    cov.push_back(r.coverage);
    sim.push_back(static_cast<double>(r.simulated_time_ms));
  }
  s.median_generations_to_target = median_reached(gens);
  s.median_time_to_target_ms = median_reached(times);
  s.median_coverage = median(cov);
  s.median_simulated_time_ms = median(sim);
  return s;
}

/// Paired repetitions: both modes share each repetition's seed, hence the
/// same generated population and GA streams.
inline CompareReport compare_centralized_distributed(const ExperimentSpec& spec) {
  spec.validate();
  CompareReport report;
  for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
    report.rows.push_back(run_centralized(spec, rep));
    report.rows.push_back(run_distributed(spec, rep));
  }
  report.centralized = summarize(to_string(Mode::Centralized), report.rows);
  report.distributed = summarize(to_string(Mode::Distributed), report.rows);
  return report;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? detail::fixed(*v, 1) : std::string(kNotReached);
}

inline void write_compare_csv(std::ostream& os, const CompareReport& r) {
  os << kMetricsHeader << '\n';
  for (const auto& row : r.rows) os << format_metrics(row) << '\n';
}

inline void write_compare_summary(std::ostream& os, const CompareReport& r) {
  os << "mode,median_generations_to_target,median_time_to_target_ms,median_coverage,"
        "median_simulated_time_ms\n";
  for (const auto* s : {&r.centralized, &r.distributed}) {
    os << s->mode << ',' << format_optional(s->median_generations_to_target) << ','
       << format_optional(s->median_time_to_target_ms) << ',' << detail::fixed(s->median_coverage)
       << ',' << detail::fixed(s->median_simulated_time_ms, 1) << '\n';
  }
}

// Mutation study --------------------------------------------------------------

struct VariantRow {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  int mutation_points = 1;
  std::optional<std::size_t> generations_to_target;  // to spec.variant_target
  double final_coverage = 0.0;
  std::size_t generations = 0;
};

struct MutationReport {
  std::vector<VariantRow> rows;
  std::vector<double> mean_trace_one;  // mean best coverage per generation
  std::vector<double> mean_trace_two;
  std::vector<std::vector<double>> traces_one;
  std::vector<std::vector<double>> traces_two;
};

inline std::optional<std::size_t> first_reaching(const std::vector<HistoryPoint>& h, double target) {
  for (const auto& p : h)
    if (p.best_coverage >= target) return p.generation;
  return std::nullopt;
}

// Traces of unequal length are extended with their final value.
inline std::vector<double> mean_trace(const std::vector<std::vector<double>>& traces) {
  std::size_t len = 0;
  for (const auto& t : traces) len = std::max(len, t.size());
  std::vector<double> mean(len, 0.0);
  if (traces.empty()) return mean;
  for (const auto& t : traces) {
    for (std::size_t g = 0; g < len; ++g) mean[g] += t.empty() ? 0.0 : t[std::min(g, t.size() - 1)];
  }
  for (double& v : mean) v /= static_cast<double>(traces.size());
  return mean;
}

/// Single- vs two-point mutation from identical populations and GA streams.
inline MutationReport compare_mutation_variants(const ExperimentSpec& spec) {
  spec.validate();
  MutationReport report;
  for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
    const std::uint64_t seed = repetition_seed(spec.rng_seed, rep);
    GaConfig ga = spec.session.ga;
    ga.rng_seed = seed;
    const Population pop = wire_population(ga, spec.session.roi);
    for (int points : {1, 2}) {
      ga.mutation_points = points;
      Rng rng = island_rng(seed, 0);
      const RunResult res = run(pop, ga, spec.session.roi, rng);
      std::vector<double> trace;
      trace.reserve(res.history.size());
      for (const auto& h : res.history) trace.push_back(h.best_coverage);
      (points == 1 ? report.traces_one : report.traces_two).push_back(std::move(trace));
      report.rows.push_back({rep, seed, points, first_reaching(res.history, spec.variant_target),
                             res.best_coverage, res.generations});
    }
  }
  report.mean_trace_one = mean_trace(report.traces_one);
  report.mean_trace_two = mean_trace(report.traces_two);
  return report;
}

inline void write_variant_csv(std::ostream& os, const MutationReport& r) {
  os << "rep,seed,mutation_points,generations_to_target,final_coverage,generations\n";
  for (const auto& row : r.rows) {
    os << row.rep << ',' << row.seed << ',' << row.mutation_points << ','
       << (row.generations_to_target ? std::to_string(*row.generations_to_target) : kNotReached)
       << ',' << detail::fixed(row.final_coverage) << ',' << row.generations << '\n';
  }
}

inline void write_trace_csv(std::ostream& os, const MutationReport& r) {
  os << "generation,mean_best_one_point,mean_best_two_point\n";
  const std::size_t len = std::max(r.mean_trace_one.size(), r.mean_trace_two.size());
  auto at = [](const std::vector<double>& v, std::size_t g) {
    return v.empty() ? 0.0 : v[std::min(g, v.size() - 1)];
  };
  for (std::size_t g = 0; g < len; ++g) {
    os << g << ',' << detail::fixed(at(r.mean_trace_one, g)) << ','
       << detail::fixed(at(r.mean_trace_two, g)) << '\n';
  }
}

// Initializer baselines ------------------------------------------------------------

struct BaselineRow {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  double random_only = 0.0;
  double vd_only = 0.0;
  double ga_only = 0.0;
  double vd_ga = 0.0;
};

inline Population uniform_wire_population(const GaConfig& ga, const RegionOfInterest& roi,
                                          std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0x0a11);
  Population pop = initial_population(ga, roi, rng, Initializer::Uniform);
  std::vector<Chromosome> snapped;
  for (const auto& c : pop.individuals) snapped.push_back(quantize(c));
  return make_population(std::move(snapped), ga.radius, roi);
}

/// Best coverage after spec.baseline_generations generations for each
/// initializer; the GA-driven variants share the GA stream.
inline std::vector<BaselineRow> compare_baselines(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<BaselineRow> rows;
  for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
    const std::uint64_t seed = repetition_seed(spec.rng_seed, rep);
    GaConfig ga = spec.session.ga;
    ga.rng_seed = seed;
    ga.max_generations = spec.baseline_generations;
    ga.coverage_target = 1.0;  // fixed budget
    const auto& roi = spec.session.roi;
    const Population vd = wire_population(ga, roi);
    const Population uniform = uniform_wire_population(ga, roi, seed);
    BaselineRow row{rep, seed, uniform.best_coverage(), vd.best_coverage(), 0.0, 0.0};
    Rng ga_rng = island_rng(seed, 0);
    row.ga_only = run(uniform, ga, roi, ga_rng).best_coverage;
    Rng vd_rng = island_rng(seed, 0);
    row.vd_ga = run(vd, ga, roi, vd_rng).best_coverage;
    rows.push_back(row);
  }
  return rows;
}

inline void write_baseline_csv(std::ostream& os, const std::vector<BaselineRow>& rows) {
  os << "rep,seed,random_only,vd_only,ga_only,vd_ga\n";
  for (const auto& r : rows) {
    os << r.rep << ',' << r.seed << ',' << detail::fixed(r.random_only) << ','
       << detail::fixed(r.vd_only) << ',' << detail::fixed(r.ga_only) << ','
       << detail::fixed(r.vd_ga) << '\n';
  }
}

// Layout files ---------------------------------------------------------------------

inline void write_positions_csv(std::ostream& os, const Chromosome& c) {
  os << "node,x,y\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    os << i << ',' << detail::fixed(c.genes[i].x, 4) << ',' << detail::fixed(c.genes[i].y, 4) << '\n';
  }
}

/// Reads "node,x,y" rows (header optional); blank lines are skipped.
inline Chromosome read_positions_csv(std::istream& is) {
  Chromosome c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("node", 0) == 0) continue;
    const auto f = detail::split(line, ',');
    try {
      if (f.size() == 3) {
        c.genes.push_back({std::stod(f[1]), std::stod(f[2])});
      } else if (f.size() == 2) {
        c.genes.push_back({std::stod(f[0]), std::stod(f[1])});
      } else {
        throw std::invalid_argument("field count");
      }
    } catch (const std::logic_error&) {
      throw ConfigParse("positions line " + std::to_string(lineno) + " is malformed");
    }
  }
  return c;
}

}  // namespace vdga
