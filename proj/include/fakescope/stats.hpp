#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fakescope/annotation.hpp"
#include "fakescope/error.hpp"
#include "fakescope/scoring.hpp"

namespace fakescope {

struct RankDistribution {
  std::string source;
  std::vector<double> bucket_fractions;
  std::size_t n_tokens = 0;
};

/// Token-level bucket fractions pooled over `docs`.
inline RankDistribution rank_distribution(std::span<const ScoredDocument* const> docs, const BucketScheme& scheme = {},
                                          std::string source = {}) {
  scheme.validate();
  RankDistribution out{std::move(source), std::vector<double>(scheme.bucket_count(), 0.0), 0};
  for (const auto* doc : docs) {
    for (const auto& s : doc->scores) {
      out.bucket_fractions[bucket_of(s.rank, scheme)] += 1.0;
      ++out.n_tokens;
    }
  }
  if (out.n_tokens == 0) throw DataError("rank distribution over an empty token pool");
  for (double& f : out.bucket_fractions) f /= static_cast<double>(out.n_tokens);
  return out;
}

/// Fraction of pooled tokens whose rank exceeds `threshold`.
inline double tail_fraction(std::span<const ScoredDocument* const> docs, std::size_t threshold) {
  std::size_t tail = 0;
  std::size_t total = 0;
  for (const auto* doc : docs) {
    for (const auto& s : doc->scores) {
      tail += s.rank > threshold ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw DataError("tail fraction over an empty token pool");
  return static_cast<double>(tail) / static_cast<double>(total);
}

struct TailRatio {
  double ratio = 0.0;
  double real_fraction = 0.0;
  double fake_fraction = 0.0;
  std::size_t threshold = 100;
  /// Set when the fake pool has no tail tokens and the ratio is +infinity.
  std::string warning;
};

/// How much more often real text uses tokens ranked past `threshold`.
inline TailRatio tail_ratio(std::span<const ScoredDocument* const> real_docs,
                            std::span<const ScoredDocument* const> fake_docs, std::size_t threshold = 100) {
  TailRatio out;
  out.threshold = threshold;
  out.real_fraction = tail_fraction(real_docs, threshold);
  out.fake_fraction = tail_fraction(fake_docs, threshold);
  if (out.fake_fraction == 0.0) {
    out.ratio = std::numeric_limits<double>::infinity();
    out.warning = "fake pool has no tokens ranked past " + std::to_string(threshold) + "; ratio is infinite";
  } else {
    out.ratio = out.real_fraction / out.fake_fraction;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernel density estimate over (entropy, log10 rank)
// ---------------------------------------------------------------------------

struct KdePoint {
  double x = 0.0;
  double y = 0.0;
};

struct Bandwidths {
  double x = 1.0;
  double y = 1.0;
};

struct GridSpec {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t nx = 100;
  double y_min = 0.0;
  double y_max = 1.0;
  std::size_t ny = 100;
};

struct KdeGrid {
  std::vector<double> x_axis;
  std::vector<double> y_axis;
  /// Row-major, one row per y value.
  std::vector<double> density;
  Bandwidths bandwidths;

  [[nodiscard]] double at(std::size_t ix, std::size_t iy) const { return density[iy * x_axis.size() + ix]; }
};

/// (entropy, log10 rank) of every scored token.
inline std::vector<KdePoint> entropy_rank_points(std::span<const ScoredDocument* const> docs) {
  std::vector<KdePoint> points;
  for (const auto* doc : docs) {
    for (const auto& s : doc->scores) points.push_back({s.entropy, std::log10(static_cast<double>(s.rank))});
  }
  return points;
}

/// Scott's rule for two dimensions: n^(-1/6) times the per-axis standard
/// deviation. A constant axis falls back to unit spread.
inline Bandwidths scott_bandwidths(std::span<const KdePoint> points) {
  if (points.size() < 2) throw ParameterError("KDE needs at least two points");
  const auto n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) mx += p.x, my += p.y;
  mx /= n, my /= n;
  double vx = 0.0, vy = 0.0;
  for (const auto& p : points) vx += (p.x - mx) * (p.x - mx), vy += (p.y - my) * (p.y - my);
  double sx = std::sqrt(vx / (n - 1.0));
  double sy = std::sqrt(vy / (n - 1.0));
  if (!(sx > 0.0)) sx = 1.0;
  if (!(sy > 0.0)) sy = 1.0;
  const double factor = std::pow(n, -1.0 / 6.0);
  return {sx * factor, sy * factor};
}

/// Grid over the data range extended by `margin` bandwidths on every side.
inline GridSpec covering_grid(std::span<const KdePoint> points, const Bandwidths& bw, std::size_t nx = 100,
                              std::size_t ny = 100, double margin = 3.0) {
  if (points.empty()) throw ParameterError("KDE needs at least two points");
  auto [xmin, xmax] = std::minmax_element(points.begin(), points.end(), [](auto& a, auto& b) { return a.x < b.x; });
  auto [ymin, ymax] = std::minmax_element(points.begin(), points.end(), [](auto& a, auto& b) { return a.y < b.y; });
  return {xmin->x - margin * bw.x, xmax->x + margin * bw.x, nx, ymin->y - margin * bw.y, ymax->y + margin * bw.y, ny};
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

/// Product-Gaussian kernel density evaluated on a regular grid.
inline KdeGrid kde2d(std::span<const KdePoint> points, const Bandwidths& bw, const GridSpec& grid) {
  if (points.size() < 2) throw ParameterError("KDE needs at least two points");
  if (!(bw.x > 0.0) || !(bw.y > 0.0)) throw ParameterError("KDE bandwidths must be positive");
  if (grid.nx < 1 || grid.ny < 1) throw ParameterError("KDE grid must be non-empty");
  KdeGrid out;
  out.bandwidths = bw;
  out.x_axis = linspace(grid.x_min, grid.x_max, grid.nx);
  out.y_axis = linspace(grid.y_min, grid.y_max, grid.ny);
  const std::size_t n = points.size();

  // Separable kernel: per-axis factors are computed once per (axis value, point).
  std::vector<double> kx(grid.nx * n);
  std::vector<double> ky(grid.ny * n);
  for (std::size_t i = 0; i < grid.nx; ++i) {
    for (std::size_t p = 0; p < n; ++p) {
      const double d = out.x_axis[i] - points[p].x;
      kx[i * n + p] = std::exp(-d * d / (2.0 * bw.x * bw.x));
    }
  }
  for (std::size_t j = 0; j < grid.ny; ++j) {
    for (std::size_t p = 0; p < n; ++p) {
      const double d = out.y_axis[j] - points[p].y;
      ky[j * n + p] = std::exp(-d * d / (2.0 * bw.y * bw.y));
    }
  }
  const double norm = 1.0 / (static_cast<double>(n) * 2.0 * std::numbers::pi * bw.x * bw.y);
  out.density.assign(grid.nx * grid.ny, 0.0);
  for (std::size_t j = 0; j < grid.ny; ++j) {
    const double* row_y = &ky[j * n];
    for (std::size_t i = 0; i < grid.nx; ++i) {
      const double* row_x = &kx[i * n];
      double sum = 0.0;
      for (std::size_t p = 0; p < n; ++p) sum += row_x[p] * row_y[p];
      out.density[j * grid.nx + i] = norm * sum;
    }
  }
  return out;
}

/// Riemann sum of density times cell area.
inline double integrate(const KdeGrid& grid) {
  if (grid.x_axis.size() < 2 || grid.y_axis.size() < 2) return 0.0;
  const double dx = (grid.x_axis.back() - grid.x_axis.front()) / static_cast<double>(grid.x_axis.size() - 1);
  const double dy = (grid.y_axis.back() - grid.y_axis.front()) / static_cast<double>(grid.y_axis.size() - 1);
  double sum = 0.0;
  for (double d : grid.density) sum += d;
  return sum * dx * dy;
}

inline void write_csv(std::ostream& out, const KdeGrid& grid) {
  out << "entropy,log10_rank,density\n";
  out.precision(17);
  for (std::size_t j = 0; j < grid.y_axis.size(); ++j) {
    for (std::size_t i = 0; i < grid.x_axis.size(); ++i) {
      out << grid.x_axis[i] << ',' << grid.y_axis[j] << ',' << grid.at(i, j) << '\n';
    }
  }
}

inline nlohmann::json to_json(const KdeGrid& grid) {
  return {{"x_axis", grid.x_axis},
          {"y_axis", grid.y_axis},
          {"density", grid.density},
          {"bandwidths", {grid.bandwidths.x, grid.bandwidths.y}}};
}

inline nlohmann::json to_json(const RankDistribution& rd) {
  return {{"source", rd.source}, {"bucket_fractions", rd.bucket_fractions}, {"n_tokens", rd.n_tokens}};
}

inline void write_csv(std::ostream& out, const std::vector<RankDistribution>& rows, const BucketScheme& scheme) {
  out << "source,n_tokens";
  for (const auto& c : scheme.colors) out << ',' << c;
  out << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    out << r.source << ',' << r.n_tokens;
    for (double f : r.bucket_fractions) out << ',' << f;
    out << '\n';
  }
}

}  // namespace fakescope
