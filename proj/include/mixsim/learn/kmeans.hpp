#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mixsim/error.hpp"
#include "mixsim/rng.hpp"

namespace mixsim::learn {

using Points = std::vector<std::vector<double>>;

inline constexpr std::size_t kKMeansMaxIterations = 300;
inline constexpr double kKMeansTolerance = 1e-6;

struct KMeansModel {
  std::size_t k = 0;
  Points centers;
  double wcss = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignments;

  std::vector<std::size_t> cluster_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignments) ++sizes[a];
    return sizes;
  }
};

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace detail {

inline double assign(const Points& pts, const Points& centers, std::vector<std::size_t>& out,
                     std::vector<double>& dist) {
  double wcss = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = squared_distance(pts[i], centers[c]);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    out[i] = arg;
    dist[i] = best;
    wcss += best;
  }
  return wcss;
}

inline std::size_t farthest(const std::vector<double>& dist) {
  return static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
}

inline Points plus_plus(const Points& pts, std::size_t k, Rng& rng) {
  Points centers;
  centers.push_back(pts[rng.index(pts.size())]);
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = squared_distance(pts[i], centers[0]);
  while (centers.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.index(pts.size());
    } else {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < pts.size(); ++pick) {
        u -= d2[pick];
        if (u < 0.0) break;
      }
    }
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = std::min(d2[i], squared_distance(pts[i], centers.back()));
  }
  return centers;
}

}  // namespace detail

/// Lloyd iterations from the given centers. An emptied cluster is moved to
/// the point currently farthest from its center.
inline KMeansModel lloyd(const Points& pts, Points centers) {
  KMeansModel m;
  m.k = centers.size();
  const std::size_t dim = pts.front().size();
  std::vector<std::size_t> assignment(pts.size());
  std::vector<double> dist(pts.size());
  for (m.iterations = 1; m.iterations <= kKMeansMaxIterations; ++m.iterations) {
    detail::assign(pts, centers, assignment, dist);
    Points next(m.k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> count(m.k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      ++count[assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) next[assignment[i]][j] += pts[i][j];
    }
    for (std::size_t c = 0; c < m.k; ++c) {
      if (count[c] == 0) {
        const auto f = detail::farthest(dist);
        next[c] = pts[f];
        dist[f] = 0.0;
      } else {
        for (auto& v : next[c]) v /= static_cast<double>(count[c]);
      }
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < m.k; ++c) shift = std::max(shift, std::sqrt(squared_distance(centers[c], next[c])));
    centers = std::move(next);
    if (shift < kKMeansTolerance) break;
  }
  m.iterations = std::min(m.iterations, kKMeansMaxIterations);
  m.assignments.resize(pts.size());
  m.wcss = detail::assign(pts, centers, m.assignments, dist);
  m.centers = std::move(centers);
  return m;
}

/// k-means++ seeding followed by Lloyd.
inline KMeansModel kmeans_fit(const Points& pts, std::size_t k, Rng& rng) {
  if (pts.empty() || k == 0) fail(Errc::EmptySample, "k-means needs points and k >= 1");
  if (k > pts.size()) fail(Errc::KTooLarge, "k = " + std::to_string(k) + " exceeds " + std::to_string(pts.size()));
  return lloyd(pts, detail::plus_plus(pts, k, rng));
}

struct ElbowPoint {
  std::size_t k = 0;
  double wcss = 0.0;
};

/// Best WCSS per k over `restarts` seeded runs. From k = 2 on, one extra
/// candidate starts from the previous best centers plus the farthest point,
/// which keeps the curve non-increasing in k.
inline std::vector<ElbowPoint> elbow_scan(const Points& pts, std::size_t k_min, std::size_t k_max,
                                          std::size_t restarts, std::uint64_t seed) {
  if (k_min == 0 || k_min > k_max) fail(Errc::OutOfRange, "invalid k range");
  if (k_max > pts.size()) fail(Errc::KTooLarge, "k_max exceeds sample count");
  std::vector<ElbowPoint> out;
  std::optional<KMeansModel> prev;
  Rng rng(seed);
  for (std::size_t k = k_min; k <= k_max; ++k) {
    std::optional<KMeansModel> best;
    for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
      Rng run = rng.fork(k * 1000 + r);
      auto m = kmeans_fit(pts, k, run);
      if (!best || m.wcss < best->wcss) best = std::move(m);
    }
    if (prev && prev->k + 1 == k) {
      std::vector<double> dist(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) dist[i] = squared_distance(pts[i], prev->centers[prev->assignments[i]]);
      Points warm = prev->centers;
      warm.push_back(pts[detail::farthest(dist)]);
      auto m = lloyd(pts, std::move(warm));
      if (m.wcss < best->wcss) best = std::move(m);
    }
    out.push_back({k, best->wcss});
    prev = std::move(best);
  }
  return out;
}

/// (W(k-1) - W(k)) / (W(k) - W(k+1)); large values mean a sharp bend at k.
inline double elbow_ratio(const std::vector<ElbowPoint>& curve, std::size_t k) {
  double before = 0.0;
  double at = 0.0;
  double after = 0.0;
  int found = 0;
  for (const auto& p : curve) {
    if (p.k == k - 1) before = p.wcss, ++found;
    if (p.k == k) at = p.wcss, ++found;
    if (p.k == k + 1) after = p.wcss, ++found;
  }
  if (found != 3) fail(Errc::OutOfRange, "elbow ratio needs k-1, k and k+1 on the curve");
  const double denom = at - after;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return (before - at) / denom;
}

/// Column-wise z-score, constant columns left centred.
inline Points standardize(Points pts) {
  if (pts.empty()) return pts;
  const std::size_t dim = pts.front().size();
  const double n = static_cast<double>(pts.size());
  for (std::size_t j = 0; j < dim; ++j) {
    double mu = 0.0;
    for (const auto& p : pts) mu += p[j];
    mu /= n;
    double ss = 0.0;
    for (const auto& p : pts) ss += (p[j] - mu) * (p[j] - mu);
    const double sd = std::sqrt(ss / n);
    for (auto& p : pts) p[j] = sd > 1e-12 ? (p[j] - mu) / sd : p[j] - mu;
  }
  return pts;
}

}  // namespace mixsim::learn
