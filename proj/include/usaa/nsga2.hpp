#pragma once

#include <span>
#include <vector>

#include "usaa/metrics.hpp"

namespace usaa {

// Both objectives (AUC, ACC) are maximized.
bool dominates(const Fitness& a, const Fitness& b);

// Fronts of indices, best first; each front lists indices in ascending order.
std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const Fitness> points);

// Crowding distance within one front, computed on each objective's dense rank
// inside the front so that the result depends only on the objectives' order.
// Boundary points get +infinity.
std::vector<double> crowding_distance(std::span<const Fitness> points,
                                      std::span<const std::size_t> front);

// Indices of the `target` survivors, in the order they were admitted.
std::vector<std::size_t> nsga2_select(std::span<const Fitness> points, std::size_t target);

}  // namespace usaa
