#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "blsat/gaussian_bl.hpp"

namespace blsat {

// Squared Bures-Wasserstein distance between centered Gaussians with
// covariances a and b.
double w2_gaussian(const SymmetricMatrix& a, const SymmetricMatrix& b);
// H(gamma_A | gamma) = (Tr A - n - log det A) / 2.
double entropy_gaussian(const SymmetricMatrix& a);

struct BarycenterConfig {
  double tol = 1e-12;
  int max_iter = 10000;
};

struct BarycenterResult {
  SymmetricMatrix A0;
  int iterations = 0;
  double fixed_point_residual = 0.0;
  std::vector<double> trace_sequence;  // Tr S_1, Tr S_2, ... (one per iteration)
  bool converged = false;
};

// Fixed-point iteration S <- S^{-1/2} (mean_i (S^{1/2} A_i S^{1/2})^{1/2})^2 S^{-1/2}.
// S0 defaults to the identity. Returns with converged = false at max_iter.
BarycenterResult barycenter_fixed_point(const GaussianTuple& covariances,
                                        const std::optional<SymmetricMatrix>& s0 = std::nullopt,
                                        const BarycenterConfig& cfg = {});

struct DeficitReport {
  double deficit = 0.0;              // closed form
  double deficit_reassembled = 0.0;  // from entropies and distances
  std::vector<double> entropy_terms;
  double transport_term = 0.0;       // sum_i W2^2(A_i, A0)
  BarycenterResult barycenter;
};

DeficitReport talagrand_deficit(const GaussianTuple& covariances, const BarycenterConfig& cfg = {});
double deficit_lower_bound(const GaussianTuple& covariances);

struct DeficitMinConfig {
  int max_iter = 500;
  double grad_tol = 1e-8;
  double fd_step = 1e-6;
  int threads = 0;
};

// Minimizes the deficit over covariance tuples A_i = exp(S_i) by BFGS on
// central-difference gradients, from seeded Wishart starts.
OptimizationResult minimize_deficit(int m, int n, int starts, std::uint64_t seed, const DeficitMinConfig& cfg = {});

}  // namespace blsat
