#pragma once

// Genetic algorithm over deployment layouts. A chromosome is the ordered list
// of node positions; fitness is raster coverage of the union of sensing
// disks.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vdga/errors.hpp"
#include "vdga/geometry.hpp"
#include "vdga/rng.hpp"

namespace vdga {

struct Chromosome {
  std::vector<Point> genes;

  std::size_t size() const { return genes.size(); }
  friend bool operator==(const Chromosome&, const Chromosome&) = default;
};

struct GaConfig {
  std::size_t pop_size = 100;
  std::size_t n_objects = 20;
  double radius = 10.0;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;
  int mutation_points = 1;
  double coverage_target = 0.94;
  std::size_t max_generations = 1500;
  std::uint64_t rng_seed = 1;

  void validate() const {
    auto rate_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!rate_ok(crossover_rate)) throw InvalidConfig("crossover_rate must be in [0,1]");
    if (!rate_ok(mutation_rate)) throw InvalidConfig("mutation_rate must be in [0,1]");
    if (mutation_points != 1 && mutation_points != 2)
      throw InvalidConfig("mutation_points must be 1 or 2");
    if (!(coverage_target > 0.0 && coverage_target <= 1.0))
      throw InvalidConfig("coverage_target must be in (0,1]");
    if (!(radius > 0.0)) throw InvalidConfig("radius must be > 0");
    if (n_objects == 0) throw InvalidConfig("n_objects must be >= 1");
    if (pop_size == 0) throw InvalidConfig("pop_size must be >= 1");
  }
};

struct FitnessReport {
  double coverage = 0.0;
  double uncovered_area = 0.0;  // m^2
  double total_overlap = 0.0;   // m, sum of pairwise 2r - d
};

inline std::vector<Disk> disks_of(const Chromosome& c, double radius) {
  std::vector<Disk> disks;
  disks.reserve(c.size());
  for (const Point& p : c.genes) disks.push_back({p, radius});
  return disks;
}

inline double coverage_of(const Chromosome& c, double radius, const RegionOfInterest& roi) {
  const auto disks = disks_of(c, radius);
  return coverage_fraction(disks, roi);
}

/// Coverage drives ranking. The pairwise overlap sum is diagnostic only and
/// never enters selection.
inline FitnessReport evaluate(const Chromosome& c, const GaConfig& cfg,
                              const RegionOfInterest& roi) {
  const auto disks = disks_of(c, cfg.radius);
  FitnessReport report;
  report.coverage = coverage_fraction(disks, roi);
  report.uncovered_area = roi.area() * (1.0 - report.coverage);
  for (std::size_t i = 0; i < disks.size(); ++i) {
    for (std::size_t j = i + 1; j < disks.size(); ++j) {
      report.total_overlap += pair_overlap(disks[i], disks[j]);
    }
  }
  return report;
}

// Individuals with their cached coverage; the two vectors are index-aligned.
struct Population {
  std::vector<Chromosome> individuals;
  std::vector<double> coverage;
  std::size_t generation = 0;

  std::size_t size() const { return individuals.size(); }

  // Highest coverage, lowest index on ties.
  std::size_t best_index() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < coverage.size(); ++i) {
      if (coverage[i] > coverage[best]) best = i;
    }
    return best;
  }
  double best_coverage() const { return coverage.empty() ? 0.0 : coverage[best_index()]; }
  double mean_coverage() const {
    if (coverage.empty()) return 0.0;
    double acc = 0.0;
    for (double c : coverage) acc += c;
    return acc / static_cast<double>(coverage.size());
  }

  friend bool operator==(const Population&, const Population&) = default;
};

inline Population make_population(std::vector<Chromosome> individuals, double radius,
                                  const RegionOfInterest& roi) {
  Population pop;
  pop.coverage.reserve(individuals.size());
  for (const auto& c : individuals) pop.coverage.push_back(coverage_of(c, radius, roi));
  pop.individuals = std::move(individuals);
  return pop;
}

struct Parents {
  std::size_t first = 0;
  std::size_t second = 0;
};

namespace detail {

inline std::size_t tournament(const Population& pop, std::size_t a, std::size_t b) {
  if (pop.coverage[a] != pop.coverage[b]) return pop.coverage[a] > pop.coverage[b] ? a : b;
  return std::min(a, b);
}

// Uniform index in [0, n) skipping `excluded`.
inline std::size_t index_except(Rng& rng, std::size_t n, std::size_t excluded) {
  const auto k = static_cast<std::size_t>(rng.index(n - 1));
  return k >= excluded ? k + 1 : k;
}

}  // namespace detail

/// Two size-2 tournaments on coverage. The second tournament draws only from
/// individuals other than the first winner, so the parents are distinct.
inline Parents select(const Population& pop, Rng& rng) {
  const std::size_t n = pop.size();
  if (n < 2) throw PopulationTooSmall("selection needs at least 2 individuals");
  const auto a = static_cast<std::size_t>(rng.index(n));
  const std::size_t b = detail::index_except(rng, n, a);
  const std::size_t first = detail::tournament(pop, a, b);
  if (n == 2) return {first, 1 - first};
  std::size_t c = detail::index_except(rng, n, first);
  std::size_t d;
  do {
    d = detail::index_except(rng, n, first);
  } while (d == c);
  return {first, detail::tournament(pop, c, d)};
}

/// Single-point crossover with the cut before gene `cut`.
inline std::pair<Chromosome, Chromosome> crossover_at(const Chromosome& p1, const Chromosome& p2,
                                                      std::size_t cut) {
  if (p1.size() != p2.size()) throw LengthMismatch("parents differ in length");
  cut = std::min(cut, p1.size());
  Chromosome o1 = p1;
  Chromosome o2 = p2;
  for (std::size_t i = cut; i < p1.size(); ++i) std::swap(o1.genes[i], o2.genes[i]);
  return {std::move(o1), std::move(o2)};
}

/// Cut drawn uniformly from 1..n-1; chromosomes of length 1 are cloned.
inline std::pair<Chromosome, Chromosome> crossover(const Chromosome& p1, const Chromosome& p2,
                                                   Rng& rng) {
  if (p1.size() != p2.size()) throw LengthMismatch("parents differ in length");
  if (p1.size() < 2) return {p1, p2};
  const std::size_t cut = 1 + static_cast<std::size_t>(rng.index(p1.size() - 1));
  return crossover_at(p1, p2, cut);
}

struct GeneEdit {
  std::size_t index = 0;
  Point position;
};

inline Point uniform_point(const RegionOfInterest& roi, Rng& rng) {
  const double x = roi.width() * rng.uniform_open();
  const double y = roi.height() * rng.uniform_open();
  return {x, y};
}

/// Picks `points` distinct gene indices and a fresh uniform position for each.
inline std::vector<GeneEdit> draw_mutation(std::size_t n, int points,
                                           const RegionOfInterest& roi, Rng& rng) {
  std::vector<GeneEdit> edits;
  const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(points));
  if (k == 0) return edits;
  const auto first = static_cast<std::size_t>(rng.index(n));
  edits.push_back({first, uniform_point(roi, rng)});
  if (k == 2) edits.push_back({detail::index_except(rng, n, first), uniform_point(roi, rng)});
  return edits;
}

inline Chromosome apply_edits(Chromosome c, std::span<const GeneEdit> edits) {
  for (const auto& e : edits) c.genes.at(e.index) = e.position;
  return c;
}

/// With probability mutation_rate, repositions mutation_points genes.
/// Returns whether the mutation fired.
inline bool mutate_in_place(Chromosome& c, const GaConfig& cfg, const RegionOfInterest& roi,
                            Rng& rng) {
  if (!rng.bernoulli(cfg.mutation_rate)) return false;
  const auto edits = draw_mutation(c.size(), cfg.mutation_points, roi, rng);
  for (const auto& e : edits) c.genes[e.index] = e.position;
  return !edits.empty();
}

inline Chromosome mutate(Chromosome c, const GaConfig& cfg, const RegionOfInterest& roi,
                         Rng& rng) {
  mutate_in_place(c, cfg, roi, rng);
  return c;
}

/// One mating: select, cross (or clone), mutate each child, and replace the
/// parents with the children only when the children's best coverage strictly
/// beats the parents' best. Returns true when the replacement happened.
inline bool mate(Population& pop, const GaConfig& cfg, const RegionOfInterest& roi, Rng& rng) {
  const Parents parents = select(pop, rng);
  const Chromosome& pa = pop.individuals[parents.first];
  const Chromosome& pb = pop.individuals[parents.second];

  const bool crossed = rng.bernoulli(cfg.crossover_rate);
  auto [child_a, child_b] = crossed ? crossover(pa, pb, rng) : std::pair{pa, pb};
  const bool mutated_a = mutate_in_place(child_a, cfg, roi, rng);
  const bool mutated_b = mutate_in_place(child_b, cfg, roi, rng);
  if (!crossed && !mutated_a && !mutated_b) return false;

  const double cov_pa = pop.coverage[parents.first];
  const double cov_pb = pop.coverage[parents.second];
  const double cov_a = (crossed || mutated_a) ? coverage_of(child_a, cfg.radius, roi) : cov_pa;
  const double cov_b = (crossed || mutated_b) ? coverage_of(child_b, cfg.radius, roi) : cov_pb;

  if (std::max(cov_a, cov_b) <= std::max(cov_pa, cov_pb)) return false;
  pop.individuals[parents.first] = std::move(child_a);
  pop.individuals[parents.second] = std::move(child_b);
  pop.coverage[parents.first] = cov_a;
  pop.coverage[parents.second] = cov_b;
  return true;
}

/// One generation.
inline Population step(Population pop, const GaConfig& cfg, const RegionOfInterest& roi,
                       Rng& rng) {
  mate(pop, cfg, roi, rng);
  ++pop.generation;
  return pop;
}

struct HistoryPoint {
  std::size_t generation = 0;
  double best_coverage = 0.0;
  double mean_coverage = 0.0;

  friend bool operator==(const HistoryPoint&, const HistoryPoint&) = default;
};

struct RunResult {
  Chromosome best;
  double best_coverage = 0.0;
  std::vector<HistoryPoint> history;  // entry 0 is the initial population
  std::optional<std::size_t> generations_to_target;
  std::size_t generations = 0;
};

/// Evolves until the best coverage reaches cfg.coverage_target or
/// cfg.max_generations generations have run.
inline RunResult run(Population pop, const GaConfig& cfg, const RegionOfInterest& roi, Rng& rng) {
  cfg.validate();
  if (pop.size() == 0) throw PopulationTooSmall("empty initial population");
  RunResult result;
  auto record = [&] {
    result.history.push_back({pop.generation, pop.best_coverage(), pop.mean_coverage()});
  };
  pop.generation = 0;
  record();
  while (pop.best_coverage() < cfg.coverage_target && pop.generation < cfg.max_generations) {
    if (pop.size() < 2) break;  // nothing to mate
    pop = step(std::move(pop), cfg, roi, rng);
    record();
  }
  const std::size_t best = pop.best_index();
  result.best = pop.individuals[best];
  result.best_coverage = pop.coverage[best];
  result.generations = pop.generation;
  if (result.best_coverage >= cfg.coverage_target) result.generations_to_target = pop.generation;
  return result;
}

inline void write_history_csv(std::ostream& os, std::span<const HistoryPoint> history) {
  os << "generation,best_coverage,mean_coverage\n";
  os.setf(std::ios::fixed);
  os.precision(6);
  for (const auto& h : history) {
    os << h.generation << ',' << h.best_coverage << ',' << h.mean_coverage << '\n';
  }
}

}  // namespace vdga
