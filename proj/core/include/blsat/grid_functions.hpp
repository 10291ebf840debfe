#pragma once

#include <cmath>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include "blsat/gaussian_bl.hpp"

namespace blsat {

inline constexpr double kInfPotential = std::numeric_limits<double>::infinity();

// Even function f = exp(-phi) on the symmetric grid [-R, R]^dim with N
// points per axis. Potentials are stored row-major; +inf marks f = 0.
class GridFunction {
 public:
  GridFunction() = default;
  // Validates the shape, then averages phi with its reflection.
  GridFunction(int dim, double radius, int points, std::vector<double> potential);

  int dim() const { return dim_; }
  double radius() const { return radius_; }
  int points() const { return points_; }
  double spacing() const { return 2.0 * radius_ / (points_ - 1); }
  double coord(int j) const { return (j - (points_ - 1) / 2) * spacing(); }
  int size() const { return static_cast<int>(phi_.size()); }
  const std::vector<double>& potential() const { return phi_; }
  double phi(int j) const { return phi_[j]; }
  double phi(int i, int j) const { return phi_[static_cast<size_t>(i) * points_ + j]; }
  double value(int j) const { return std::exp(-phi_[j]); }

 private:
  int dim_ = 1;
  double radius_ = 1.0;
  int points_ = 3;
  std::vector<double> phi_;
};

// Samples phi(x) (x has dim entries) on the grid.
GridFunction make_grid_function(int dim, double radius, int points,
                                const std::function<double(const double*)>& phi);

namespace grid {
GridFunction gaussian(double a, double radius, int points, int dim = 1);  // phi = a|x|^2/2
GridFunction exp_norm(double radius, int points, int dim = 1);           // phi = |x|
// phi = a|x|^2/2 + eps|x|^4
GridFunction quartic(double a, double eps, double radius, int points, int dim = 1);
GridFunction indicator(double half_width, double radius, int points, int dim = 1);
GridFunction tabulated(int dim, double radius, int points, std::vector<double> potential);
}  // namespace grid

// Plain-text form: "dim <d>", "radius <R>", "points <N>", then one phi per
// line, row-major, "inf" for +inf. Bare numbers are accepted for the header.
void write_grid_function(std::ostream& os, const GridFunction& f);
GridFunction read_grid_function(std::istream& is);

// Per-point trapezoid weights over cells whose corners are all finite.
std::vector<double> trapezoid_weights(const GridFunction& f);
double integral(const GridFunction& f);
double log_integral(const GridFunction& f);

// Discrete conjugate phi*(y) = max_x <x,y> - phi(x). dual_radius <= 0 picks
// the slope range plus one spacing; dual_points <= 0 keeps spacing h. Dual
// points whose maximizer would sit beyond the grid edge are +inf.
// 2-D inputs are transformed one axis at a time, which is exact for the max.
GridFunction legendre_transform(const GridFunction& f, double dual_radius = 0.0, int dual_points = 0,
                                bool edge_rule = true);
// Potential of f°; identical to the Legendre transform of phi.
GridFunction polar_function(const GridFunction& f, double dual_radius = 0.0, int dual_points = 0);
double volume_product(const GridFunction& f, double dual_radius = 0.0, int dual_points = 0);

// Iterated-infimum tuple for 1-D factors, m <= 3, N <= 401. Output always
// satisfies the duality relation on the grid; domination F_i >= f_i holds
// when the input tuple does.
std::vector<GridFunction> polar_tuple(const BLDatum& datum, const std::vector<GridFunction>& fs);
// max over the product grid of <x,Qx> - sum c_i phi_i(x_i); <= 0 iff dual.
double duality_check(const BLDatum& datum, const std::vector<GridFunction>& fs);

double affine_surface_area_quadratic(const SymmetricMatrix& a, double lambda);
// 1-D grid potential V; finite differences for V', V''.
double affine_surface_area_grid(const GridFunction& v, double lambda, double convexity_tol = 1e-8);

struct AffineProductReport {
  double product = 0.0;
  double bound = 0.0;           // (2 pi)^{sum n_i / 2}
  bool hypothesis_holds = false;  // duality of V (lambda <= 1/2) or V* (lambda >= 1/2)
};
AffineProductReport affine_surface_product(const BLDatum& datum, const GaussianTuple& a, double lambda);

struct ConcavityProfile {
  double lambda_est = 0.0;
  double Lambda_est = 0.0;  // +inf when a finite/infinite transition is seen
  bool envelope_ok = false;
  double envelope_slack = 0.0;  // most negative margin seen
};
// window > 0 restricts the scan to |x|_inf <= window.
ConcavityProfile concavity_profile(const GridFunction& f, double window = 0.0, double envelope_tol = 1e-6);

}  // namespace blsat
