#pragma once

#include <cmath>
#include <vector>

#include "blsat/grid_functions.hpp"

namespace fixture {

// Twelve even log-concave densities. Radii leave room for the Gaussian limit
// of repeated self-convolution (about six standard deviations).
inline std::vector<blsat::GridFunction> even_log_concave() {
  using namespace blsat;
  const double r = 10.0;
  const int n = 1001;
  std::vector<GridFunction> fs;
  fs.push_back(grid::gaussian(1.0, r, n));
  fs.push_back(grid::gaussian(3.0, r, n));
  fs.push_back(grid::exp_norm(30.0, 3001));
  fs.push_back(grid::indicator(1.0, 6.0, 1201));
  fs.push_back(grid::indicator(2.5, 12.0, 1201));
  fs.push_back(grid::quartic(1.0, 0.01, r, n));
  fs.push_back(grid::quartic(0.2, 0.05, r, n));
  fs.push_back(make_grid_function(1, 6.0, 801, [](const double* x) { return 0.25 * std::pow(x[0], 4); }));
  fs.push_back(make_grid_function(1, r, n, [](const double* x) { return std::cosh(x[0]) - 1.0; }));
  fs.push_back(make_grid_function(1, 30.0, 3001, [](const double* x) { return std::log(std::cosh(x[0])); }));
  fs.push_back(make_grid_function(1, 20.0, 2001, [](const double* x) {
    const double t = std::abs(x[0]);
    return t <= 1.0 ? 0.5 * t * t : t - 0.5;  // Huber
  }));
  fs.push_back(make_grid_function(1, 8.0, 801, [](const double* x) {
    const double t = std::abs(x[0]);
    return t < 2.0 ? 0.5 * t * t : INFINITY;  // truncated Gaussian
  }));
  return fs;
}

}  // namespace fixture
