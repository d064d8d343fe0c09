#pragma once

// Planar geometry for deployment problems: the rectangular region of
// interest, Voronoi cells clipped to it, and raster coverage of disk unions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vdga/errors.hpp"

namespace vdga {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline constexpr double kSeedTolerance = 1e-9;
inline constexpr double kCollinearTolerance = 1e-9;

// Axis-aligned rectangle [0, width] x [0, height] with a raster used for
// coverage counting. The raster has ceil(width/step) x ceil(height/step)
// cells; a trailing partial cell is sampled at the middle of its in-region
// part.
class RegionOfInterest {
public:
  RegionOfInterest(double width, double height, double raster_step = 0.25)
      : width_(width), height_(height), step_(raster_step) {
    if (!(width > 0.0) || !(height > 0.0) || !(raster_step > 0.0)) {
      throw InvalidRegion("width, height and raster_step must be > 0");
    }
    cols_ = cells_along(width_, step_);
    rows_ = cells_along(height_, step_);
  }

  double width() const { return width_; }
  double height() const { return height_; }
  double raster_step() const { return step_; }
  double area() const { return width_ * height_; }
  std::size_t cols() const { return cols_; }
  std::size_t rows() const { return rows_; }
  std::size_t cell_count() const { return cols_ * rows_; }

  RegionOfInterest with_raster_step(double step) const { return {width_, height_, step}; }

  double cell_center_x(std::size_t i) const { return center_along(i, width_); }
  double cell_center_y(std::size_t j) const { return center_along(j, height_); }

  bool contains(Point p) const {
    return p.x >= 0.0 && p.x <= width_ && p.y >= 0.0 && p.y <= height_;
  }
  bool strictly_contains(Point p) const {
    return p.x > 0.0 && p.x < width_ && p.y > 0.0 && p.y < height_;
  }

  // Counterclockwise corners starting at the origin.
  std::vector<Point> corners() const {
    return {{0.0, 0.0}, {width_, 0.0}, {width_, height_}, {0.0, height_}};
  }

  friend bool operator==(const RegionOfInterest&, const RegionOfInterest&) = default;

private:
  static std::size_t cells_along(double extent, double step) {
    const auto n = static_cast<std::size_t>(std::ceil(extent / step - 1e-9));
    return std::max<std::size_t>(n, 1);
  }
  double center_along(std::size_t i, double extent) const {
    const double lo = static_cast<double>(i) * step_;
    const double hi = std::min(static_cast<double>(i + 1) * step_, extent);
    return 0.5 * (lo + hi);
  }

  double width_;
  double height_;
  double step_;
  std::size_t cols_ = 0;
  std::size_t rows_ = 0;
};

struct Disk {
  Point center;
  double radius = 0.0;

  bool contains(Point p) const {
    const double dx = p.x - center.x;
    const double dy = p.y - center.y;
    return dx * dx + dy * dy <= radius * radius;
  }
};

// Convex polygon, counterclockwise, collinear vertices removed.
struct VoronoiCell {
  Point seed;
  std::vector<Point> vertices;
};

/// Signed shoelace area; positive for counterclockwise input.
inline double signed_area(std::span<const Point> poly) {
  double acc = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    acc += cross(poly[i], poly[(i + 1) % n]);
  }
  return 0.5 * acc;
}

inline double polygon_area(std::span<const Point> poly) { return std::abs(signed_area(poly)); }

/// Point-in-convex-polygon test for counterclockwise vertices, boundary
/// inclusive up to `eps`.
inline bool convex_contains(std::span<const Point> poly, Point p, double eps = 1e-9) {
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Point a = poly[i];
    const Point b = poly[(i + 1) % n];
    if (cross(b - a, p - a) < -eps * std::max(1.0, distance(a, b))) return false;
  }
  return true;
}

/// Keeps the part of a convex polygon where dot(normal, x) <= offset
/// (one Sutherland-Hodgman pass).
inline std::vector<Point> clip_half_plane(const std::vector<Point>& poly, Point normal,
                                          double offset) {
  std::vector<Point> out;
  out.reserve(poly.size() + 1);
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point cur = poly[i];
    const Point nxt = poly[(i + 1) % n];
    const double dc = dot(normal, cur) - offset;
    const double dn = dot(normal, nxt) - offset;
    if (dc <= 0.0) out.push_back(cur);
    if ((dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0)) {
      const double t = dc / (dc - dn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

/// Drops repeated and collinear vertices.
inline std::vector<Point> simplify_polygon(std::vector<Point> poly,
                                           double tol = kCollinearTolerance) {
  bool changed = true;
  while (changed && poly.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < poly.size() && poly.size() >= 3; ++i) {
      const std::size_t n = poly.size();
      const Point prev = poly[(i + n - 1) % n];
      const Point cur = poly[i];
      const Point next = poly[(i + 1) % n];
      const double base = distance(prev, next);
      const bool repeated = distance(prev, cur) <= tol;
      const bool collinear = base > tol && std::abs(cross(next - prev, cur - prev)) / base <= tol &&
                             dot(cur - prev, next - cur) >= 0.0;
      if (repeated || collinear) {
        poly.erase(poly.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        --i;
      }
    }
  }
  return poly;
}

/// Voronoi tessellation of `seeds` clipped to the region. Cell i is the
/// rectangle intersected with every bisector half-plane
/// {x : |x - p_i| <= |x - q|}. O(n^2) per cell, intended for n in the low
/// hundreds.
inline std::vector<VoronoiCell> voronoi(std::span<const Point> seeds,
                                        const RegionOfInterest& roi) {
  if (seeds.empty()) throw SeedOutOfBounds("seed list is empty");
  for (const Point& s : seeds) {
    if (!roi.strictly_contains(s)) {
      throw SeedOutOfBounds("seed (" + std::to_string(s.x) + ", " + std::to_string(s.y) +
                            ") is not strictly inside the region");
    }
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t j = i + 1; j < seeds.size(); ++j) {
      if (distance(seeds[i], seeds[j]) <= kSeedTolerance) {
        throw DuplicateSeeds("seeds " + std::to_string(i) + " and " + std::to_string(j) +
                             " coincide");
      }
    }
  }

  std::vector<VoronoiCell> cells;
  cells.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const Point p = seeds[i];
    std::vector<Point> poly = roi.corners();
    for (std::size_t j = 0; j < seeds.size() && !poly.empty(); ++j) {
      if (j == i) continue;
      const Point q = seeds[j];
      const Point normal = q - p;
      const double offset = 0.5 * (dot(q, q) - dot(p, p));
      poly = clip_half_plane(poly, normal, offset);
    }
    cells.push_back({p, simplify_polygon(std::move(poly))});
  }
  return cells;
}

/// Area-weighted centroid of a cell polygon.
inline Point cell_centroid(const VoronoiCell& cell) {
  const auto& v = cell.vertices;
  if (v.size() < 3) throw DegeneratePolygon("cell has fewer than 3 vertices");
  double a2 = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  // Accumulate relative to the first vertex to limit cancellation.
  const Point o = v[0];
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    const Point p = v[i] - o;
    const Point q = v[(i + 1) % n] - o;
    const double c = cross(p, q);
    a2 += c;
    cx += (p.x + q.x) * c;
    cy += (p.y + q.y) * c;
  }
  if (std::abs(0.5 * a2) < 1e-12) throw DegeneratePolygon("cell area below 1e-12 m^2");
  return {o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)};
}

/// Number of raster cell centers lying in at least one disk. Each disk is
/// scanned row by row as a span of columns, and the spans of a row are merged.
inline std::size_t covered_cell_count(std::span<const Disk> disks, const RegionOfInterest& roi) {
  if (disks.empty()) return 0;
  const std::size_t nx = roi.cols();
  const std::size_t ny = roi.rows();
  const double step = roi.raster_step();

  std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> spans;
  spans.reserve(disks.size());
  std::size_t covered = 0;

  for (std::size_t j = 0; j < ny; ++j) {
    const double cy = roi.cell_center_y(j);
    spans.clear();
    for (const Disk& d : disks) {
      const double dy = cy - d.center.y;
      const double r2 = d.radius * d.radius;
      if (dy * dy > r2) continue;
      const double half = std::sqrt(r2 - dy * dy);
      auto inside = [&](std::ptrdiff_t i) {
        const double dx = roi.cell_center_x(static_cast<std::size_t>(i)) - d.center.x;
        return dx * dx + dy * dy <= r2;
      };
      const auto last = static_cast<std::ptrdiff_t>(nx) - 1;
      auto lo = static_cast<std::ptrdiff_t>(std::ceil((d.center.x - half) / step - 0.5));
      auto hi = static_cast<std::ptrdiff_t>(std::floor((d.center.x + half) / step - 0.5));
      lo = std::clamp<std::ptrdiff_t>(lo, 0, last);
      hi = std::clamp<std::ptrdiff_t>(hi, 0, last);
      // Rounding in the span estimate is corrected with the exact predicate.
      while (lo > 0 && inside(lo - 1)) --lo;
      while (lo <= hi && !inside(lo)) ++lo;
      while (hi < last && inside(hi + 1)) ++hi;
      while (hi >= lo && !inside(hi)) --hi;
      if (lo <= hi) spans.emplace_back(lo, hi);
    }
    if (spans.empty()) continue;
    std::sort(spans.begin(), spans.end());
    auto [run_lo, run_hi] = spans.front();
    for (std::size_t k = 1; k < spans.size(); ++k) {
      if (spans[k].first <= run_hi + 1) {
        run_hi = std::max(run_hi, spans[k].second);
      } else {
        covered += static_cast<std::size_t>(run_hi - run_lo + 1);
        std::tie(run_lo, run_hi) = spans[k];
      }
    }
    covered += static_cast<std::size_t>(run_hi - run_lo + 1);
  }
  return covered;
}

/// Fraction of raster cell centers covered by the disk union. Area outside
/// the rectangle never counts.
inline double coverage_fraction(std::span<const Disk> disks, const RegionOfInterest& roi) {
  return static_cast<double>(covered_cell_count(disks, roi)) /
         static_cast<double>(roi.cell_count());
}

/// Scalar overlap X = max(0, 2r - |c_a - c_b|) for two equal-radius disks.
inline double pair_overlap(const Disk& a, const Disk& b) {
  if (a.radius != b.radius) throw MixedRadii("pair_overlap requires equal radii");
  return std::max(0.0, 2.0 * a.radius - distance(a.center, b.center));
}

}  // namespace vdga
