#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "blsat/matrix_core.hpp"

namespace blsat {

// Brascamp-Lieb datum with coordinate projections: dims n_i, exponents c_i,
// kernel Q on R^N, N = sum n_i.
struct BLDatum {
  std::vector<int> dims;
  std::vector<double> exponents;
  SymmetricMatrix kernel;

  int m() const { return static_cast<int>(dims.size()); }
  int total_dim() const;
  std::vector<int> offsets() const;
  void validate() const;
  // All dims equal and all exponents 1.
  bool kw_shaped() const;
};

BLDatum make_datum(std::vector<int> dims, std::vector<double> exponents, const SymmetricMatrix& kernel);
BLDatum bs_datum(int n);
BLDatum kw_datum(int m, int n);
// c_i -> (c_i + p)/p, Q -> Q/p. Not idempotent: scaling twice compounds.
BLDatum scaled_datum(const BLDatum& base, double p);

enum class Convention { precision, covariance };

struct GaussianTuple {
  std::vector<SymmetricMatrix> blocks;
  Convention convention = Convention::precision;

  int m() const { return static_cast<int>(blocks.size()); }
  void validate() const;  // every block PD
};

GaussianTuple make_tuple(std::vector<SymmetricMatrix> blocks, Convention c = Convention::precision);
GaussianTuple identity_tuple(int m, int n, Convention c = Convention::precision);

SymmetricMatrix assemble_M(const BLDatum& datum, const GaussianTuple& a);
bool gaussian_feasible(const BLDatum& datum, const GaussianTuple& a, double tol = kPsdTol);

// log BL(A); +inf when M(A) is not positive definite.
double log_bl_gaussian_value(const BLDatum& datum, const GaussianTuple& a);
double bl_gaussian_value(const BLDatum& datum, const GaussianTuple& a);

// sum c_i (-log det A_i). The Gaussian constant is
// (2 pi)^{sum c_i n_i / 2} exp(objective / 2).
double kw_gaussian_objective(const BLDatum& datum, const GaussianTuple& a);
double kw_constant_prefactor_log(const BLDatum& datum);

struct OptimizerConfig {
  int max_iter = 5000;
  double grad_tol = 1e-9;
  double mu_start = 1.0;
  double mu_end = 1e-8;
  double unbounded_threshold = 1e6;
  double eig_cap = 1e6;         // inverse-constant divergence cap on A_i
  double boundary_rel = 1e-10;  // inverse-constant blow-up at det M -> 0
  double start_scale = 1.5;     // starts sit at this multiple of the boundary scale
  int threads = 0;
  bool keep_trace = true;
};

enum class Extremum { attained, asymptotic, infinite };
const char* to_string(Extremum e);

struct TraceEntry {
  int start = 0;
  int stage = 0;
  double mu = 0.0;
  double value = 0.0;
  double grad_norm = 0.0;
  double decrement = 0.0;
  int iterations = 0;
};

struct OptimizationResult {
  double best_value = 0.0;
  double best_log_value = 0.0;
  GaussianTuple argopt;
  std::map<std::string, double> residuals;
  int starts_used = 0;
  int best_start = 0;
  bool converged = false;
  Extremum extremum = Extremum::attained;
  std::vector<double> start_values;
  std::vector<TraceEntry> trace;
};

OptimizationResult optimize_kw_constant(const BLDatum& datum, int starts, std::uint64_t seed,
                                        const OptimizerConfig& cfg = {});

enum class Direction { inf, sup };
const char* to_string(Direction d);
OptimizationResult optimize_inverse_constant(const BLDatum& datum, Direction dir, int starts, std::uint64_t seed,
                                             const OptimizerConfig& cfg = {});

// Keys: product_pairwise, maximizer_average, barycenter_pairwise.
std::map<std::string, double> stationarity_residuals(const BLDatum& datum, const GaussianTuple& a);

struct BWReport {
  bool nondegenerate = false;
  int s_minus = 0;
};
BWReport bw_nondegenerate(const BLDatum& datum, double tol = kPsdTol);

// Normalized Wishart sample: L L^T with standard normal L, unit mean eigenvalue.
SymmetricMatrix wishart_sample(int n, std::mt19937_64& rng);
// lambda_max(D^{-1/2} 2Q D^{-1/2}), D = blockdiag(c_i A_i): M(tA) >= 0 iff t >= this.
double boundary_scale(const BLDatum& datum, const GaussianTuple& a);
// Wishart tuple scaled to t* (1 + u), u uniform in [0, spread).
GaussianTuple random_feasible_tuple(const BLDatum& datum, std::mt19937_64& rng, double spread = 2.0);

struct Prop52Report {
  double sum_residual = 0.0;     // |sum X_i - id|
  double equal_residual = 0.0;   // max |(X_i - X_i^2) - (X_j - X_j^2)|
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  bool bounds_ok = false;        // 0 < X_i < id
  double lambda = 0.0;           // common eigenvalue of X - X^2
  double scalar_residual = 0.0;  // |X_1 - X_1^2 - lambda id|
  double alpha = 0.0;            // eigenvalues of X_i are alpha or 1 - alpha
  double power_residual = 0.0;   // X^l identity, l <= 6
  double eigvec_residual = 0.0;  // sum of (1-alpha)-eigenprojectors
  double distance = 0.0;         // max |X_i - id/m|_2
  bool constraints_ok = false;
};
Prop52Report prop52_check(const GaussianTuple& x, double tol = 1e-8);

struct Prop52Search {
  int trials = 0;
  int successes = 0;
  double max_distance = 0.0;
  std::vector<double> distances;  // successful trials only
  std::vector<double> residuals;  // all trials
};
// Random starts with 0 < X_i < id summing to id, then Levenberg-Marquardt on
// the equal-defect constraints.
Prop52Search prop52_search(int m, int n, int trials, std::uint64_t seed, double tol = 1e-8);

}  // namespace blsat
