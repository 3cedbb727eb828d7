#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace immf::encoders {

/// Greedy farthest point sampling over points[n, 3]. The first seed is the point
/// farthest from the centroid; every tie (start or later) goes to the
/// lexicographically smallest coordinates, then the lowest index.
std::vector<std::size_t> fps(std::span<const float> points, std::size_t k);

/// Per-seed neighbours within `radius` (inclusive), nearest first, at most
/// `max_group`. Distance ties break like fps. A seed with no neighbour (only
/// possible for radius < 0) is its own group.
std::vector<std::vector<std::size_t>> ball_group(std::span<const float> points,
                                                 std::span<const std::size_t> seeds, double radius,
                                                 std::size_t max_group);

/// Flattened grouping used by the point encoder.
struct Grouping {
  std::vector<std::size_t> seeds;         // k
  std::vector<std::size_t> members;       // point index of every grouped neighbour
  std::vector<std::size_t> segment;       // seed slot of every grouped neighbour
};

Grouping make_grouping(std::span<const float> points, std::size_t k, double radius,
                       std::size_t max_group);

}  // namespace immf::encoders
