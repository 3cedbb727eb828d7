#include "immf/encoders/sampling.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "immf/common/error.hpp"

namespace immf::encoders {

namespace {

double dist_sq(std::span<const float> p, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t a = 0; a < 3; ++a) {
    const double d = static_cast<double>(p[3 * i + a]) - p[3 * j + a];
    s += d * d;
  }
  return s;
}

// Strict ordering on candidates: larger key wins, then lexicographically
// smaller coordinates, then lower index.
bool lex_less(std::span<const float> p, std::size_t i, std::size_t j) {
  for (std::size_t a = 0; a < 3; ++a)
    if (p[3 * i + a] != p[3 * j + a]) return p[3 * i + a] < p[3 * j + a];
  return i < j;
}

}  // namespace

std::vector<std::size_t> fps(std::span<const float> points, std::size_t k) {
  if (points.size() % 3 != 0) throw ShapeError("fps: points must be n x 3");
  const std::size_t n = points.size() / 3;
  if (k == 0 || n < k)
    throw ValidationError("fps: need 1 <= k <= n, got k=" + std::to_string(k) +
                          ", n=" + std::to_string(n));
  double c[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < 3; ++a) c[a] += points[3 * i + a];
  for (double& v : c) v /= static_cast<double>(n);

  std::vector<double> key(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      const double d = points[3 * i + a] - c[a];
      s += d * d;
    }
    key[i] = s;
  }
  std::vector<std::size_t> out;
  out.reserve(k);
  std::vector<bool> taken(n, false);
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || key[i] > key[best] || (key[i] == key[best] && lex_less(points, i, best)))
        best = i;
    }
    out.push_back(best);
    taken[best] = true;
    if (step == 0) std::fill(key.begin(), key.end(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) key[i] = std::min(key[i], dist_sq(points, i, best));
  }
  return out;
}

std::vector<std::vector<std::size_t>> ball_group(std::span<const float> points,
                                                 std::span<const std::size_t> seeds, double radius,
                                                 std::size_t max_group) {
  if (points.size() % 3 != 0) throw ShapeError("ball_group: points must be n x 3");
  if (max_group == 0) throw ValidationError("ball_group: max_group must be positive");
  const std::size_t n = points.size() / 3;
  const double r2 = radius * radius;
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(seeds.size());
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t s : seeds) {
    if (s >= n) throw ValidationError("ball_group: seed index out of range");
    cand.clear();
    if (radius >= 0)
      for (std::size_t i = 0; i < n; ++i) {
        const double d = dist_sq(points, i, s);
        if (d <= r2) cand.emplace_back(d, i);
      }
    const std::size_t keep = std::min(max_group, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                      [&](const auto& x, const auto& y) {
                        if (x.first != y.first) return x.first < y.first;
                        return lex_less(points, x.second, y.second);
                      });
    std::vector<std::size_t> g;
    g.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) g.push_back(cand[i].second);
    if (g.empty()) g.push_back(s);
    groups.push_back(std::move(g));
  }
  return groups;
}

Grouping make_grouping(std::span<const float> points, std::size_t k, double radius,
                       std::size_t max_group) {
  Grouping g;
  g.seeds = fps(points, k);
  const auto groups = ball_group(points, g.seeds, radius, max_group);
  for (std::size_t s = 0; s < groups.size(); ++s)
    for (std::size_t i : groups[s]) {
      g.members.push_back(i);
      g.segment.push_back(s);
    }
  return g;
}

}  // namespace immf::encoders
