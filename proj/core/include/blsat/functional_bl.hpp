#pragma once

#include <optional>
#include <vector>

#include "blsat/grid_functions.hpp"

namespace blsat {

struct BLGridResult {
  double value = 0.0;      // +inf when divergent
  double log_value = 0.0;
  std::optional<double> richardson_error;  // relative, from the 2h subgrid
  double boundary_fraction = 0.0;          // share of the numerator on the outer grid layer
  bool divergent = false;
};

// Tensor trapezoid for int e^{<x,Qx>} prod f_i^{c_i} / prod (int f_i)^{c_i}.
BLGridResult bl_functional_grid(const BLDatum& datum, const std::vector<GridFunction>& fs,
                                double boundary_tol = 1e-6);

enum class ConvolutionMethod { direct, fft };

// f1 * f2 on the grid of radius 2R with 2N-1 points. Both inputs 1-D on the
// same grid. The direct method sums in the log domain.
GridFunction convolve(const GridFunction& f1, const GridFunction& f2,
                      ConvolutionMethod method = ConvolutionMethod::direct);

// 2^{1/2} (f*f)(2^{1/2} x) back on the input grid.
GridFunction self_convolve_rescaled(const GridFunction& f, ConvolutionMethod method = ConvolutionMethod::direct,
                                    double tail_tol = 1e-9);

struct MonotonicityReport {
  double margin = 0.0;  // BL(f)^2 - reference * BL(convolved)
  double bl_input = 0.0;
  double bl_convolved = 0.0;
  double reference = 0.0;
};
MonotonicityReport ball_monotonicity_check(const BLDatum& datum, const std::vector<GridFunction>& fs,
                                           double reference);

struct ConvolutionStepReport {
  int step = 0;
  double l1_to_gaussian = 0.0;
  double mass = 0.0;
  double variance = 0.0;
  double lambda_est = 0.0;
  double Lambda_est = 0.0;
};
// Normalizes f, then reports step 0 and each of `steps` rescaled self-convolutions.
std::vector<ConvolutionStepReport> clt_experiment(const GridFunction& f, int steps,
                                                  ConvolutionMethod method = ConvolutionMethod::direct);
double l1_to_matched_gaussian(const GridFunction& f, double* variance = nullptr);

struct LogConcavityReport {
  double lambda1 = 0.0, lambda2 = 0.0, Lambda1 = 0.0, Lambda2 = 0.0;
  double lambda_out = 0.0, Lambda_out = 0.0;
  double lambda_bound = 0.0, Lambda_bound = 0.0;
  double tolerance = 0.0;
  bool lambda_ok = false;
  bool Lambda_checked = false;
  bool Lambda_ok = true;
  bool ok = false;
};
// Profiles f1*f2 on |y| <= window_fraction * R, where truncation of the
// inputs does not reach. Tolerance is tol_factor * h^2.
LogConcavityReport convolution_logconcavity_check(const GridFunction& f1, const GridFunction& f2,
                                                  double window_fraction = 0.5, double tol_factor = 10.0);

}  // namespace blsat
