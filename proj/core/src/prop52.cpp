#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <cmath>

#include "blsat/gaussian_bl.hpp"

namespace blsat {

namespace {

double spectral_norm(const Eigen::MatrixXd& m) {
  const auto sd = sym_eigen(SymmetricMatrix(m));
  return std::max(std::abs(sd.eigenvalues(0)), std::abs(sd.eigenvalues(sd.eigenvalues.size() - 1)));
}

}  // namespace

Prop52Report prop52_check(const GaussianTuple& x, double tol) {
  if (x.blocks.empty()) throw Error(ErrorCode::InvalidInput, "empty tuple");
  const int m = x.m();
  const int n = x.blocks[0].dim();
  for (const auto& b : x.blocks)
    if (b.dim() != n) throw Error(ErrorCode::InvalidInput, "prop52_check: blocks must share a dimension");
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);

  Prop52Report r;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::MatrixXd> defect;
  r.min_eigenvalue = 1e300;
  r.max_eigenvalue = -1e300;
  for (const auto& b : x.blocks) {
    sum += b.mat();
    defect.push_back(b.mat() - b.mat() * b.mat());
    const auto sd = sym_eigen(b);
    r.min_eigenvalue = std::min(r.min_eigenvalue, sd.eigenvalues(0));
    r.max_eigenvalue = std::max(r.max_eigenvalue, sd.eigenvalues(n - 1));
    r.distance = std::max(r.distance, spectral_norm(b.mat() - id / m));
  }
  r.sum_residual = (sum - id).norm();
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) r.equal_residual = std::max(r.equal_residual, (defect[i] - defect[j]).norm());
  r.bounds_ok = r.min_eigenvalue > tol && r.max_eigenvalue < 1.0 - tol;
  r.constraints_ok = r.bounds_ok && r.sum_residual <= tol && r.equal_residual <= tol;

  r.lambda = defect[0].trace() / n;
  r.scalar_residual = (defect[0] - r.lambda * id).norm();
  const double a = 0.5 * (1.0 - std::sqrt(std::max(0.0, 1.0 - 4.0 * r.lambda)));
  r.alpha = a;
  const double gap = 1.0 - 2.0 * a;
  const bool degenerate = std::abs(gap) < 1e-6;
  for (const auto& b : x.blocks) {
    Eigen::MatrixXd pw = id;
    for (int l = 1; l <= 6; ++l) {
      pw = pw * b.mat();
      double cx, ci;
      if (degenerate) {
        cx = l * std::pow(0.5, l - 1);
        ci = 0.25 * (l - 1) * std::pow(0.5, l - 2);
      } else {
        cx = (std::pow(1.0 - a, l) - std::pow(a, l)) / gap;
        ci = (a - a * a) * (std::pow(1.0 - a, l - 1) - std::pow(a, l - 1)) / gap;
      }
      r.power_residual = std::max(r.power_residual, (pw - (cx * b.mat() - ci * id)).norm());
    }
  }
  if (!degenerate) {
    Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(n, n);
    for (const auto& b : x.blocks) proj += (b.mat() - a * id) / gap;
    r.eigvec_residual = (proj - (1.0 - m * a) / gap * id).norm();
  }
  return r;
}

namespace {

// Unknowns: upper triangles of X_1..X_{m-1}; X_m = id - sum. Residuals:
// upper triangles of (X_i - X_i^2) - (X_m - X_m^2).
struct EqualDefect {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  int m, n, tri;
  int inputs() const { return (m - 1) * tri; }
  int values() const { return (m - 1) * tri; }

  std::vector<Eigen::MatrixXd> unpack(const Eigen::VectorXd& v) const {
    std::vector<Eigen::MatrixXd> xs;
    Eigen::MatrixXd last = Eigen::MatrixXd::Identity(n, n);
    int k = 0;
    for (int i = 0; i < m - 1; ++i) {
      Eigen::MatrixXd x(n, n);
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) x(a, b) = x(b, a) = v(k++);
      last -= x;
      xs.push_back(x);
    }
    xs.push_back(last);
    return xs;
  }

  int operator()(const Eigen::VectorXd& v, Eigen::VectorXd& r) const {
    const auto xs = unpack(v);
    const Eigen::MatrixXd dm = xs[m - 1] - xs[m - 1] * xs[m - 1];
    int k = 0;
    for (int i = 0; i < m - 1; ++i) {
      const Eigen::MatrixXd d = xs[i] - xs[i] * xs[i] - dm;
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) r(k++) = d(a, b);
    }
    return 0;
  }
};

}  // namespace

Prop52Search prop52_search(int m, int n, int trials, std::uint64_t seed, double tol) {
  if (m < 2 || n < 1 || trials < 1) throw Error(ErrorCode::InvalidInput, "prop52_search: m >= 2, n >= 1, trials >= 1");
  std::mt19937_64 rng(seed);
  Prop52Search out;
  out.trials = trials;
  EqualDefect f{m, n, n * (n + 1) / 2};
  for (int t = 0; t < trials; ++t) {
    std::vector<SymmetricMatrix> w;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < m; ++i) {
      w.push_back(wishart_sample(n, rng));
      s += w.back().mat();
    }
    const Eigen::MatrixXd sh = inv_sqrt_spd(SymmetricMatrix(s)).mat();
    Eigen::VectorXd v(f.inputs());
    int k = 0;
    for (int i = 0; i < m - 1; ++i) {
      const Eigen::MatrixXd x = sh * w[i].mat() * sh;
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) v(k++) = x(a, b);
    }
    Eigen::NumericalDiff<EqualDefect> nd(f);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<EqualDefect>> lm(nd);
    lm.parameters.ftol = 1e-16;
    lm.parameters.xtol = 1e-16;
    lm.parameters.maxfev = 4000;
    lm.minimize(v);

    GaussianTuple xs;
    for (auto& x : f.unpack(v)) xs.blocks.emplace_back(x);
    const auto rep = prop52_check(xs, tol);
    const double res = std::max(rep.equal_residual, rep.sum_residual);
    out.residuals.push_back(res);
    // Strict interior margin keeps near-projector solutions (eigenvalues 0, 1) out.
    const bool interior = rep.min_eigenvalue > 1e-6 && rep.max_eigenvalue < 1.0 - 1e-6;
    if (res <= tol && interior) {
      ++out.successes;
      out.distances.push_back(rep.distance);
      out.max_distance = std::max(out.max_distance, rep.distance);
    }
  }
  return out;
}

}  // namespace blsat
