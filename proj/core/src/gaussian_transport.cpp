#include "blsat/gaussian_transport.hpp"

#include <cmath>

#include "newton.hpp"

namespace blsat {

namespace {

constexpr double kCovFloor = 1e-10;

void require_covariance(const SymmetricMatrix& a, const char* who) {
  const double lo = min_eigenvalue(a);
  if (!(lo >= kCovFloor))
    throw Error(ErrorCode::NotPositiveDefinite, std::string(who) + ": covariance eigenvalue " + std::to_string(lo));
}

void require_tuple(const GaussianTuple& t, const char* who) {
  if (t.blocks.empty()) throw Error(ErrorCode::InvalidInput, std::string(who) + ": empty tuple");
  for (const auto& b : t.blocks) {
    if (b.dim() != t.blocks[0].dim()) throw Error(ErrorCode::InvalidInput, std::string(who) + ": dimension mismatch");
    require_covariance(b, who);
  }
}

}  // namespace

double w2_gaussian(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::InvalidInput, "w2_gaussian: dimension mismatch");
  require_covariance(a, "w2_gaussian");
  require_covariance(b, "w2_gaussian");
  const auto ra = sqrt_spd(a);
  const auto cross = sqrt_spd(SymmetricMatrix(ra.mat() * b.mat() * ra.mat()));
  return std::max(0.0, a.trace() + b.trace() - 2.0 * cross.trace());
}

double entropy_gaussian(const SymmetricMatrix& a) {
  require_covariance(a, "entropy_gaussian");
  return 0.5 * (a.trace() - a.dim() - log_det_spd(a));
}

BarycenterResult barycenter_fixed_point(const GaussianTuple& cov, const std::optional<SymmetricMatrix>& s0,
                                        const BarycenterConfig& cfg) {
  require_tuple(cov, "barycenter_fixed_point");
  const int n = cov.blocks[0].dim();
  const int m = cov.m();
  SymmetricMatrix s = s0 ? *s0 : SymmetricMatrix::identity(n);
  if (s.dim() != n) throw Error(ErrorCode::InvalidInput, "barycenter_fixed_point: S0 dimension mismatch");
  require_covariance(s, "barycenter_fixed_point");

  auto mean_root = [&](const SymmetricMatrix& sh) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (const auto& a : cov.blocks) acc += sqrt_spd(SymmetricMatrix(sh.mat() * a.mat() * sh.mat())).mat();
    return SymmetricMatrix(acc / m);
  };

  // Traces start at S_1: the monotone chain does not constrain the seed.
  BarycenterResult r;
  for (int k = 0; k < cfg.max_iter; ++k) {
    const auto sd = sym_eigen(s);
    const Eigen::VectorXd root = sd.eigenvalues.cwiseSqrt();
    const SymmetricMatrix sh(sd.eigenvectors * root.asDiagonal() * sd.eigenvectors.transpose());
    const Eigen::MatrixXd shi = sd.eigenvectors * root.cwiseInverse().asDiagonal() * sd.eigenvectors.transpose();
    const Eigen::MatrixXd t = mean_root(sh).mat();
    const SymmetricMatrix next(shi * t * t * shi);
    const double step = (next.mat() - s.mat()).norm();
    const double scale = 1.0 + s.frobenius();
    s = next;
    r.iterations = k + 1;
    r.trace_sequence.push_back(s.trace());
    if (step <= cfg.tol * scale) {
      r.converged = true;
      break;
    }
  }
  r.A0 = s;
  r.fixed_point_residual = (s.mat() - mean_root(sqrt_spd(s)).mat()).norm();
  return r;
}

DeficitReport talagrand_deficit(const GaussianTuple& cov, const BarycenterConfig& cfg) {
  require_tuple(cov, "talagrand_deficit");
  const int m = cov.m();
  const int n = cov.blocks[0].dim();
  DeficitReport r;
  r.barycenter = barycenter_fixed_point(cov, std::nullopt, cfg);
  const auto& a0 = r.barycenter.A0;
  double tr = 0.0, ld = 0.0, ent = 0.0;
  for (const auto& a : cov.blocks) {
    tr += a.trace();
    ld += log_det_spd(a);
    r.entropy_terms.push_back(entropy_gaussian(a));
    ent += r.entropy_terms.back();
    r.transport_term += w2_gaussian(a, a0);
  }
  const double mm = static_cast<double>(m) * m;
  r.deficit = 0.5 * a0.trace() - tr / (2.0 * mm) - n * (m - 1.0) / (2.0 * m) - (m - 1.0) / (2.0 * mm) * ld;
  r.deficit_reassembled = (m - 1.0) / mm * ent - r.transport_term / (2.0 * m);
  return r;
}

double deficit_lower_bound(const GaussianTuple& cov) {
  require_tuple(cov, "deficit_lower_bound");
  const int m = cov.m();
  const int n = cov.blocks[0].dim();
  std::vector<SymmetricMatrix> q, h;
  double ld = 0.0;
  for (const auto& a : cov.blocks) {
    q.push_back(power_spd(a, 0.25));
    h.push_back(sqrt_spd(a));
    ld += log_det_spd(a);
  }
  double cross = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j) cross += (q[i].mat() * h[j].mat() * q[i].mat()).trace();
  const double mm = static_cast<double>(m) * m;
  return cross / (2.0 * mm) - (m - 1.0) / (2.0 * mm) * ld - n * (m - 1.0) / (2.0 * m);
}

OptimizationResult minimize_deficit(int m, int n, int starts, std::uint64_t seed, const DeficitMinConfig& cfg) {
  if (m < 2 || n < 1 || starts < 1) throw Error(ErrorCode::InvalidInput, "minimize_deficit: m >= 2, n >= 1, starts >= 1");
  const int tri = n * (n + 1) / 2;
  auto unpack = [&](const Eigen::VectorXd& x) {
    GaussianTuple t;
    t.convention = Convention::covariance;
    int k = 0;
    for (int i = 0; i < m; ++i) {
      Eigen::MatrixXd s(n, n);
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) s(a, b) = s(b, a) = x(k++);
      t.blocks.push_back(exp_sym(SymmetricMatrix(s)));
    }
    return t;
  };
  auto value = [&](const Eigen::VectorXd& x) -> double {
    try {
      return talagrand_deficit(unpack(x)).deficit;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto grad = [&](const Eigen::VectorXd& x) {
    return detail::fd_gradient(value, x, cfg.fd_step * (1.0 + x.norm()));
  };

  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> init;
  for (int s = 0; s < starts; ++s) {
    Eigen::VectorXd x(m * tri);
    int k = 0;
    for (int i = 0; i < m; ++i) {
      const auto l = log_spd(wishart_sample(n, rng));
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) x(k++) = l(a, b);
    }
    init.push_back(x);
  }

  std::vector<detail::BfgsOutcome> outs(starts);
  detail::run_indexed(starts, cfg.threads, [&](int s) {
    outs[s] = detail::bfgs_minimize(value, grad, init[s], cfg.max_iter, cfg.grad_tol);
  });

  OptimizationResult r;
  r.starts_used = starts;
  int best = 0;
  for (int s = 0; s < starts; ++s) {
    r.start_values.push_back(outs[s].value);
    r.trace.push_back({s, 0, 0.0, outs[s].value, outs[s].grad_norm, 0.0, outs[s].iterations});
    if (outs[s].value < outs[best].value) best = s;
  }
  r.best_start = best;
  r.best_value = r.best_log_value = outs[best].value;
  r.argopt = unpack(outs[best].x);
  r.converged = outs[best].converged;
  r.residuals["gradient_norm"] = outs[best].grad_norm;
  double dist = 0.0;
  for (const auto& b : r.argopt.blocks) dist += (b.mat() - Eigen::MatrixXd::Identity(n, n)).squaredNorm();
  r.residuals["identity_distance"] = std::sqrt(dist);
  if (m == 2)
    r.residuals["inverse_family"] =
        (r.argopt.blocks[0].mat() * r.argopt.blocks[1].mat() - Eigen::MatrixXd::Identity(n, n)).norm();
  return r;
}

}  // namespace blsat
