#pragma once

// Initial layouts: Voronoi-spread individuals (centroids of the cells of a
// uniform seed sample) and the round-robin split of a population into
// islands.

#include <cstddef>
#include <vector>

#include "vdga/geometry.hpp"
#include "vdga/optimizer.hpp"
#include "vdga/rng.hpp"

namespace vdga {

inline std::vector<Point> uniform_points(std::size_t n, const RegionOfInterest& roi, Rng& rng) {
  std::vector<Point> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(uniform_point(roi, rng));
  return pts;
}

/// One Lloyd step from the given seeds: each node moves to the centroid of
/// its Voronoi cell.
inline Chromosome centroids_of(std::span<const Point> seeds, const RegionOfInterest& roi) {
  Chromosome c;
  c.genes.reserve(seeds.size());
  for (const auto& cell : voronoi(seeds, roi)) c.genes.push_back(cell_centroid(cell));
  return c;
}

inline Chromosome voronoi_individual(const GaConfig& cfg, const RegionOfInterest& roi, Rng& rng) {
  if (cfg.n_objects == 0) throw InvalidConfig("n_objects must be >= 1");
  const auto seeds = uniform_points(cfg.n_objects, roi, rng);
  return centroids_of(seeds, roi);
}

// Uniform placement; the initializer of the GA-only baseline.
inline Chromosome random_individual(const GaConfig& cfg, const RegionOfInterest& roi, Rng& rng) {
  return Chromosome{uniform_points(cfg.n_objects, roi, rng)};
}

enum class Initializer { Voronoi, Uniform };

inline Population initial_population(const GaConfig& cfg, const RegionOfInterest& roi, Rng& rng,
                                     Initializer init = Initializer::Voronoi) {
  if (cfg.pop_size == 0) throw InvalidConfig("pop_size must be >= 1");
  std::vector<Chromosome> individuals;
  individuals.reserve(cfg.pop_size);
  for (std::size_t i = 0; i < cfg.pop_size; ++i) {
    individuals.push_back(init == Initializer::Voronoi ? voronoi_individual(cfg, roi, rng)
                                                       : random_individual(cfg, roi, rng));
  }
  return make_population(std::move(individuals), cfg.radius, roi);
}

/// Individual i goes to island i mod g_nodes; island sizes differ by at most
/// one and keep their relative order.
inline std::vector<Population> partition(const Population& pop, std::size_t g_nodes) {
  if (g_nodes == 0) throw InvalidConfig("g_nodes must be >= 1");
  std::vector<Population> islands(g_nodes);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    auto& island = islands[i % g_nodes];
    island.individuals.push_back(pop.individuals[i]);
    island.coverage.push_back(pop.coverage[i]);
  }
  return islands;
}

}  // namespace vdga
