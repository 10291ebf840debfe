#include "blsat/gaussian_bl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "newton.hpp"

namespace blsat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * M_PI);

}  // namespace

const char* to_string(Extremum e) {
  switch (e) {
    case Extremum::attained: return "attained";
    case Extremum::asymptotic: return "asymptotic";
    case Extremum::infinite: return "infinite";
  }
  return "unknown";
}

const char* to_string(Direction d) { return d == Direction::inf ? "inf" : "sup"; }

int BLDatum::total_dim() const { return std::accumulate(dims.begin(), dims.end(), 0); }

std::vector<int> BLDatum::offsets() const {
  std::vector<int> off(dims.size(), 0);
  for (size_t i = 1; i < dims.size(); ++i) off[i] = off[i - 1] + dims[i - 1];
  return off;
}

void BLDatum::validate() const {
  if (dims.empty()) throw Error(ErrorCode::InvalidInput, "datum needs at least one factor");
  if (dims.size() != exponents.size()) throw Error(ErrorCode::InvalidInput, "dims and exponents differ in length");
  for (int d : dims)
    if (d < 1) throw Error(ErrorCode::InvalidInput, "dims must be positive");
  for (double c : exponents)
    if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::InvalidInput, "exponents must be positive");
  if (kernel.dim() != total_dim()) throw Error(ErrorCode::InvalidInput, "kernel dimension must equal sum of dims");
}

bool BLDatum::kw_shaped() const {
  for (size_t i = 0; i < dims.size(); ++i)
    if (dims[i] != dims[0] || std::abs(exponents[i] - 1.0) > 1e-12) return false;
  return true;
}

BLDatum make_datum(std::vector<int> dims, std::vector<double> exponents, const SymmetricMatrix& kernel) {
  BLDatum d{std::move(dims), std::move(exponents), kernel};
  d.validate();
  return d;
}

BLDatum bs_datum(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidInput, "bs_datum: n >= 1");
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  q.block(0, n, n, n) = 0.5 * Eigen::MatrixXd::Identity(n, n);
  q.block(n, 0, n, n) = 0.5 * Eigen::MatrixXd::Identity(n, n);
  return make_datum({n, n}, {1.0, 1.0}, SymmetricMatrix(q));
}

BLDatum kw_datum(int m, int n) {
  if (m < 2 || n < 1) throw Error(ErrorCode::InvalidInput, "kw_datum: m >= 2, n >= 1");
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m * n, m * n);
  const double w = 1.0 / (2.0 * (m - 1));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j) q.block(i * n, j * n, n, n) = w * Eigen::MatrixXd::Identity(n, n);
  return make_datum(std::vector<int>(m, n), std::vector<double>(m, 1.0), SymmetricMatrix(q));
}

BLDatum scaled_datum(const BLDatum& base, double p) {
  if (!(p > 0.0) || !std::isfinite(p)) throw Error(ErrorCode::InvalidInput, "scaled_datum: p > 0");
  base.validate();
  std::vector<double> c(base.exponents.size());
  for (size_t i = 0; i < c.size(); ++i) c[i] = (base.exponents[i] + p) / p;
  return make_datum(base.dims, c, base.kernel * (1.0 / p));
}

void GaussianTuple::validate() const {
  if (blocks.empty()) throw Error(ErrorCode::InvalidInput, "empty Gaussian tuple");
  for (const auto& b : blocks) {
    Eigen::LLT<Eigen::MatrixXd> llt(b.mat());
    if (llt.info() != Eigen::Success || !(min_eigenvalue(b) > 0.0))
      throw Error(ErrorCode::InvalidInput, "Gaussian tuple block is not positive definite");
  }
}

GaussianTuple make_tuple(std::vector<SymmetricMatrix> blocks, Convention c) {
  GaussianTuple t{std::move(blocks), c};
  t.validate();
  return t;
}

GaussianTuple identity_tuple(int m, int n, Convention c) {
  return GaussianTuple{std::vector<SymmetricMatrix>(m, SymmetricMatrix::identity(n)), c};
}

namespace {

void check_shape(const BLDatum& datum, const GaussianTuple& a) {
  if (a.m() != datum.m()) throw Error(ErrorCode::InvalidInput, "tuple length does not match datum");
  for (int i = 0; i < datum.m(); ++i)
    if (a.blocks[i].dim() != datum.dims[i]) throw Error(ErrorCode::InvalidInput, "block dimension mismatch");
}

Eigen::MatrixXd assemble_raw(const BLDatum& datum, const std::vector<Eigen::MatrixXd>& a) {
  Eigen::MatrixXd mm = -2.0 * datum.kernel.mat();
  const auto off = datum.offsets();
  for (int i = 0; i < datum.m(); ++i)
    mm.block(off[i], off[i], datum.dims[i], datum.dims[i]) += datum.exponents[i] * a[i];
  return mm;
}

}  // namespace

SymmetricMatrix assemble_M(const BLDatum& datum, const GaussianTuple& a) {
  check_shape(datum, a);
  std::vector<Eigen::MatrixXd> raw;
  for (const auto& b : a.blocks) raw.push_back(b.mat());
  return SymmetricMatrix(assemble_raw(datum, raw));
}

bool gaussian_feasible(const BLDatum& datum, const GaussianTuple& a, double tol) {
  const auto mm = assemble_M(datum, a);
  return min_eigenvalue(mm) >= -tol * mm.frobenius();
}

double kw_constant_prefactor_log(const BLDatum& datum) {
  double s = 0.0;
  for (int i = 0; i < datum.m(); ++i) s += datum.exponents[i] * datum.dims[i];
  return 0.5 * s * kLog2Pi;
}

double log_bl_gaussian_value(const BLDatum& datum, const GaussianTuple& a) {
  check_shape(datum, a);
  for (const auto& b : a.blocks)
    if (!(min_eigenvalue(b) > 0.0)) throw Error(ErrorCode::InvalidInput, "bl_gaussian_value: block not PD");
  const auto mm = assemble_M(datum, a);
  const auto sd = sym_eigen(mm);
  if (!(sd.eigenvalues(0) > 0.0)) return kInf;
  double logdet_m = 0.0;
  for (int i = 0; i < sd.eigenvalues.size(); ++i) logdet_m += std::log(sd.eigenvalues(i));
  double cn = 0.0, s = 0.0;
  for (int i = 0; i < datum.m(); ++i) {
    cn += datum.exponents[i] * datum.dims[i];
    s += 0.5 * datum.exponents[i] * log_det_spd(a.blocks[i]);
  }
  return 0.5 * (datum.total_dim() - cn) * kLog2Pi - 0.5 * logdet_m + s;
}

double bl_gaussian_value(const BLDatum& datum, const GaussianTuple& a) {
  return std::exp(log_bl_gaussian_value(datum, a));
}

double kw_gaussian_objective(const BLDatum& datum, const GaussianTuple& a) {
  check_shape(datum, a);
  double s = 0.0;
  for (int i = 0; i < datum.m(); ++i) s -= datum.exponents[i] * log_det_spd(a.blocks[i]);
  return s;
}

BWReport bw_nondegenerate(const BLDatum& datum, double tol) {
  datum.validate();
  BWReport r;
  r.s_minus = signature(datum.kernel, tol).n_neg;
  r.nondegenerate = r.s_minus == 0;
  return r;
}

SymmetricMatrix wishart_sample(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd l(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) l(i, j) = nd(rng);
  Eigen::MatrixXd w = l * l.transpose();
  return SymmetricMatrix(w * (n / w.trace()));
}

double boundary_scale(const BLDatum& datum, const GaussianTuple& a) {
  check_shape(datum, a);
  std::vector<SymmetricMatrix> d;
  for (int i = 0; i < datum.m(); ++i) d.push_back(inv_sqrt_spd(a.blocks[i] * datum.exponents[i]));
  const auto dh = block_diagonal(d);
  return max_eigenvalue(SymmetricMatrix(dh.mat() * (2.0 * datum.kernel.mat()) * dh.mat()));
}

GaussianTuple random_feasible_tuple(const BLDatum& datum, std::mt19937_64& rng, double spread) {
  GaussianTuple t;
  for (int d : datum.dims) t.blocks.push_back(wishart_sample(d, rng));
  std::uniform_real_distribution<double> u(0.0, spread);
  const double ts = boundary_scale(datum, t);
  const double scale = (ts > 0.0 ? ts : 1.0) * (1.0 + u(rng));
  for (auto& b : t.blocks) b = b * scale;
  return t;
}

// ---------------------------------------------------------------------------
// Optimization in direct matrix coordinates. Each parameter is one upper
// triangular entry of one block; E_e = s_e (e_u e_v^T + e_v e_u^T) with
// s_e = 1/2 on the diagonal.

namespace {

struct BasisEntry {
  int block, a, b;  // local indices
  int u, v;         // global indices in M
  double s;
};

struct Chart {
  const BLDatum* datum;
  std::vector<BasisEntry> basis;

  explicit Chart(const BLDatum& d) : datum(&d) {
    const auto off = d.offsets();
    for (int i = 0; i < d.m(); ++i)
      for (int a = 0; a < d.dims[i]; ++a)
        for (int b = a; b < d.dims[i]; ++b)
          basis.push_back({i, a, b, off[i] + a, off[i] + b, a == b ? 0.5 : 1.0});
  }

  int size() const { return static_cast<int>(basis.size()); }

  std::vector<Eigen::MatrixXd> unpack(const Eigen::VectorXd& x) const {
    std::vector<Eigen::MatrixXd> out;
    for (int d : datum->dims) out.push_back(Eigen::MatrixXd::Zero(d, d));
    for (int e = 0; e < size(); ++e) {
      const auto& be = basis[e];
      out[be.block](be.a, be.b) = x(e);
      out[be.block](be.b, be.a) = x(e);
    }
    return out;
  }

  Eigen::VectorXd pack(const GaussianTuple& t) const {
    Eigen::VectorXd x(size());
    for (int e = 0; e < size(); ++e) x(e) = t.blocks[basis[e].block](basis[e].a, basis[e].b);
    return x;
  }

  GaussianTuple tuple(const Eigen::VectorXd& x) const {
    GaussianTuple t;
    for (auto& m : unpack(x)) t.blocks.emplace_back(m);
    return t;
  }
};

// tr(W E_e W E_f) for the symmetric basis pair (u,v), (x,y).
inline double trace_pair(const Eigen::MatrixXd& w, int u, int v, double se, int x, int y, double sf) {
  return se * sf * 2.0 * (w(v, x) * w(u, y) + w(v, y) * w(u, x));
}

// L(x) = alpha sum c_i log det A_i + beta log det M(A).
struct LogDetObjective {
  const Chart* chart;
  double alpha, beta;

  double value(const Eigen::VectorXd& x) const {
    const auto& d = *chart->datum;
    const auto a = chart->unpack(x);
    double s = 0.0;
    for (int i = 0; i < d.m(); ++i) {
      Eigen::LLT<Eigen::MatrixXd> llt(a[i]);
      if (llt.info() != Eigen::Success) return kInf;
      const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
      if ((diag.array() <= 0.0).any()) return kInf;
      s += alpha * d.exponents[i] * 2.0 * diag.array().log().sum();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(assemble_raw(d, a));
    if (llt.info() != Eigen::Success) return kInf;
    const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
    if ((diag.array() <= 0.0).any()) return kInf;
    s += beta * 2.0 * diag.array().log().sum();
    return std::isfinite(s) ? s : kInf;
  }

  void derivs(const Eigen::VectorXd& x, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
    const auto& d = *chart->datum;
    const auto a = chart->unpack(x);
    std::vector<Eigen::MatrixXd> wa;
    for (const auto& ai : a) wa.push_back(ai.llt().solve(Eigen::MatrixXd::Identity(ai.rows(), ai.cols())));
    const Eigen::MatrixXd mm = assemble_raw(d, a);
    const Eigen::MatrixXd wm = mm.llt().solve(Eigen::MatrixXd::Identity(mm.rows(), mm.cols()));
    const int p = chart->size();
    g.resize(p);
    h.resize(p, p);
    for (int e = 0; e < p; ++e) {
      const auto& be = chart->basis[e];
      const double ce = d.exponents[be.block];
      g(e) = alpha * ce * 2.0 * be.s * wa[be.block](be.a, be.b) + beta * ce * 2.0 * be.s * wm(be.u, be.v);
      for (int f = e; f < p; ++f) {
        const auto& bf = chart->basis[f];
        const double cf = d.exponents[bf.block];
        double hv = -beta * ce * cf * trace_pair(wm, be.u, be.v, be.s, bf.u, bf.v, bf.s);
        if (be.block == bf.block) hv -= alpha * ce * trace_pair(wa[be.block], be.a, be.b, be.s, bf.a, bf.b, bf.s);
        h(e, f) = h(f, e) = hv;
      }
    }
  }
};

std::vector<GaussianTuple> draw_starts(const BLDatum& datum, int starts, std::uint64_t seed, double scale_factor,
                                       bool& unbounded) {
  std::mt19937_64 rng(seed);
  std::vector<GaussianTuple> out;
  unbounded = false;
  for (int s = 0; s < starts; ++s) {
    GaussianTuple t;
    for (int d : datum.dims) t.blocks.push_back(wishart_sample(d, rng));
    const double ts = boundary_scale(datum, t);
    if (!(ts > 0.0)) {
      unbounded = true;
    } else {
      for (auto& b : t.blocks) b = b * (scale_factor * ts);
    }
    out.push_back(std::move(t));
  }
  return out;
}

double identity_distance(const GaussianTuple& t) {
  double s = 0.0;
  for (const auto& b : t.blocks) s += (b.mat() - Eigen::MatrixXd::Identity(b.dim(), b.dim())).squaredNorm();
  return std::sqrt(s);
}

void tuple_extremes(const GaussianTuple& t, double& lo, double& hi) {
  lo = kInf;
  hi = -kInf;
  for (const auto& b : t.blocks) {
    const auto sd = sym_eigen(b);
    lo = std::min(lo, sd.eigenvalues(0));
    hi = std::max(hi, sd.eigenvalues(sd.eigenvalues.size() - 1));
  }
}

}  // namespace

OptimizationResult optimize_kw_constant(const BLDatum& datum, int starts, std::uint64_t seed,
                                        const OptimizerConfig& cfg) {
  datum.validate();
  if (starts < 1) throw Error(ErrorCode::InvalidInput, "starts >= 1");
  if (signature(datum.kernel).n_pos == 0)
    throw Error(ErrorCode::Unbounded, "kernel has no positive eigenvalue; objective grows without bound");
  bool unbounded = false;
  const auto init = draw_starts(datum, starts, seed, cfg.start_scale, unbounded);
  if (unbounded) throw Error(ErrorCode::Unbounded, "no finite boundary scale for a start");

  const Chart chart(datum);
  struct StartOutcome {
    Eigen::VectorXd x;
    double objective = -kInf;
    double grad_norm = 0.0, decrement = 0.0;
    bool converged = false, unbounded = false;
    std::vector<TraceEntry> trace;
  };
  std::vector<StartOutcome> outcomes(starts);

  detail::run_indexed(starts, cfg.threads, [&](int s) {
    auto& out = outcomes[s];
    Eigen::VectorXd x = chart.pack(init[s]);
    double mu = cfg.mu_start;
    for (int stage = 0;; ++stage) {
      LogDetObjective obj{&chart, 1.0, -mu};
      detail::NewtonProblem prob;
      prob.value = [&](const Eigen::VectorXd& y) { return obj.value(y); };
      prob.derivs = [&](const Eigen::VectorXd& y, Eigen::VectorXd& g, Eigen::MatrixXd& h) { obj.derivs(y, g, h); };
      prob.stop = [&](const Eigen::VectorXd& y, double) {
        LogDetObjective raw{&chart, -1.0, 0.0};
        return raw.value(y) > cfg.unbounded_threshold;
      };
      const bool last = mu <= cfg.mu_end;
      detail::NewtonOptions opt;
      opt.max_iter = cfg.max_iter;
      opt.tol = last ? cfg.grad_tol : std::max(cfg.grad_tol, 1e-6);
      const auto res = detail::newton_minimize(prob, x, opt);
      x = res.x;
      LogDetObjective raw{&chart, -1.0, 0.0};
      const double objective = raw.value(x);
      if (cfg.keep_trace) out.trace.push_back({s, stage, mu, objective, res.grad_norm, res.decrement, res.iterations});
      if (res.stopped || objective > cfg.unbounded_threshold) {
        out.unbounded = true;
        break;
      }
      if (last) {
        out.grad_norm = res.grad_norm;
        out.decrement = res.decrement;
        out.converged = res.converged;
        break;
      }
      mu = std::max(mu * 0.5, cfg.mu_end);
    }
    out.x = x;
    out.objective = kw_gaussian_objective(datum, chart.tuple(x));
  });

  OptimizationResult r;
  r.starts_used = starts;
  int best = -1;
  for (int s = 0; s < starts; ++s) {
    if (outcomes[s].unbounded) throw Error(ErrorCode::Unbounded, "objective exceeded threshold on the barrier path");
    r.start_values.push_back(outcomes[s].objective);
    if (best < 0 || outcomes[s].objective > outcomes[best].objective) best = s;
    for (auto& t : outcomes[s].trace) r.trace.push_back(t);
  }
  const auto& b = outcomes[best];
  r.best_start = best;
  r.best_value = b.objective;
  r.best_log_value = b.objective;
  r.argopt = chart.tuple(b.x);
  r.converged = b.converged;
  r.extremum = Extremum::attained;
  r.residuals["gradient_norm"] = b.grad_norm;
  r.residuals["newton_decrement"] = b.decrement;
  r.residuals["min_eig_M"] = min_eigenvalue(assemble_M(datum, r.argopt));
  bool square = true;
  for (int d : datum.dims) square = square && d == datum.dims[0];
  if (square) r.residuals["identity_distance"] = identity_distance(r.argopt);
  if (datum.kw_shaped())
    for (const auto& [k, v] : stationarity_residuals(datum, r.argopt)) r.residuals[k] = v;
  if (datum.m() == 2 && square) {
    const int n = datum.dims[0];
    r.residuals["inverse_family"] =
        (r.argopt.blocks[0].mat() * r.argopt.blocks[1].mat() - Eigen::MatrixXd::Identity(n, n)).norm();
  }
  return r;
}

OptimizationResult optimize_inverse_constant(const BLDatum& datum, Direction dir, int starts, std::uint64_t seed,
                                             const OptimizerConfig& cfg) {
  datum.validate();
  if (starts < 1) throw Error(ErrorCode::InvalidInput, "starts >= 1");
  bool unbounded_scale = false;
  auto init = draw_starts(datum, starts, seed, cfg.start_scale, unbounded_scale);

  const Chart chart(datum);
  const double sign = dir == Direction::inf ? 1.0 : -1.0;
  const LogDetObjective obj{&chart, 0.5 * sign, -0.5 * sign};
  double cn = 0.0;
  for (int i = 0; i < datum.m(); ++i) cn += datum.exponents[i] * datum.dims[i];
  const double log_const = 0.5 * (datum.total_dim() - cn) * kLog2Pi;

  struct StartOutcome {
    Eigen::VectorXd x;
    double log_value = 0.0;
    double grad_norm = 0.0, decrement = 0.0;
    int iterations = 0;
    bool converged = false;
    Extremum kind = Extremum::attained;
  };
  std::vector<StartOutcome> outcomes(starts);

  detail::run_indexed(starts, cfg.threads, [&](int s) {
    auto& out = outcomes[s];
    Extremum kind = Extremum::attained;
    detail::NewtonProblem prob;
    prob.value = [&](const Eigen::VectorXd& y) { return obj.value(y); };
    prob.derivs = [&](const Eigen::VectorXd& y, Eigen::VectorXd& g, Eigen::MatrixXd& h) { obj.derivs(y, g, h); };
    prob.stop = [&](const Eigen::VectorXd& y, double) {
      const auto t = chart.tuple(y);
      double lo, hi;
      tuple_extremes(t, lo, hi);
      if (hi > cfg.eig_cap || lo < 1.0 / cfg.eig_cap) {
        kind = Extremum::asymptotic;
        return true;
      }
      if (dir == Direction::sup) {
        const auto mm = assemble_M(datum, t);
        if (min_eigenvalue(mm) < cfg.boundary_rel * mm.frobenius()) {
          kind = Extremum::infinite;
          return true;
        }
      }
      return false;
    };
    detail::NewtonOptions opt;
    opt.max_iter = cfg.max_iter;
    opt.tol = cfg.grad_tol;
    opt.use_grad_norm = false;
    const auto res = detail::newton_minimize(prob, chart.pack(init[s]), opt);
    out.x = res.x;
    out.grad_norm = res.grad_norm;
    out.decrement = res.decrement;
    out.iterations = res.iterations;
    out.converged = res.converged;
    out.kind = kind;
    out.log_value = kind == Extremum::infinite ? kInf : log_bl_gaussian_value(datum, chart.tuple(res.x));
  });

  OptimizationResult r;
  r.starts_used = starts;
  int best = -1;
  for (int s = 0; s < starts; ++s) {
    const auto& o = outcomes[s];
    r.start_values.push_back(o.log_value);
    if (cfg.keep_trace) r.trace.push_back({s, 0, 0.0, o.log_value, o.grad_norm, o.decrement, o.iterations});
    if (best < 0) {
      best = s;
      continue;
    }
    const bool better = dir == Direction::inf ? o.log_value < outcomes[best].log_value
                                              : o.log_value > outcomes[best].log_value;
    if (better) best = s;
  }
  const auto& b = outcomes[best];
  r.best_start = best;
  r.best_log_value = b.log_value;
  r.best_value = std::exp(b.log_value);
  r.argopt = chart.tuple(b.x);
  r.extremum = b.kind;
  r.converged = b.converged || b.kind != Extremum::attained;
  r.residuals["gradient_norm"] = b.grad_norm;
  r.residuals["newton_decrement"] = b.decrement;
  r.residuals["log_prefactor"] = log_const;
  return r;
}

std::map<std::string, double> stationarity_residuals(const BLDatum& datum, const GaussianTuple& a) {
  datum.validate();
  if (!datum.kw_shaped()) throw Error(ErrorCode::UnsupportedDatum, "stationarity residuals need a KW-shaped datum");
  check_shape(datum, a);
  const int m = datum.m();
  const int n = datum.dims[0];
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const double w = (m - 1.0) / m;
  std::vector<Eigen::MatrixXd> prod, a0;
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(n, n);
  for (const auto& ai : a.blocks) {
    const Eigen::MatrixXd inv = inverse_spd(ai).mat();
    const Eigen::MatrixXd p = (w * ai.mat() + id / m) * (w * id + inv / m);
    prod.push_back(p);
    a0.push_back(inverse_spd(SymmetricMatrix(p)).mat());
    avg += inverse_spd(SymmetricMatrix((m - 1.0) * ai.mat() + id)).mat();
  }
  double pp = 0.0, bp = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      pp = std::max(pp, (prod[i] - prod[j]).norm());
      bp = std::max(bp, (a0[i] - a0[j]).norm());
    }
  return {{"product_pairwise", pp}, {"maximizer_average", (avg - id).norm()}, {"barycenter_pairwise", bp}};
}

}  // namespace blsat
