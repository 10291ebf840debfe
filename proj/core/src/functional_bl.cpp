#include "blsat/functional_bl.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>

namespace blsat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline bool finite(double v) { return v < kInfPotential; }

// Streaming log-sum-exp.
struct LogAccumulator {
  double mx = kNegInf;
  double s = 0.0;
  void add(double t) {
    if (t == kNegInf) return;
    if (t > mx) {
      s = s * std::exp(mx - t) + 1.0;
      mx = t;
    } else {
      s += std::exp(t - mx);
    }
  }
  double log() const { return mx == kNegInf ? kNegInf : mx + std::log(s); }
};

struct Factor {
  std::vector<double> x;     // dim entries per point
  std::vector<double> logw;  // log weight - c phi
  std::vector<char> edge;
  int dim;
  int count() const { return static_cast<int>(logw.size()); }
};

Factor make_factor(const GridFunction& f, double c, int stride) {
  Factor fa;
  fa.dim = f.dim();
  // Subgrid of every `stride`-th point keeps the same radius.
  const int n = f.points();
  const int ns = (n - 1) / stride + 1;
  std::vector<double> sub;
  if (f.dim() == 1) {
    for (int j = 0; j < n; j += stride) sub.push_back(f.phi(j));
  } else {
    for (int i = 0; i < n; i += stride)
      for (int j = 0; j < n; j += stride) sub.push_back(f.phi(i, j));
  }
  const GridFunction g(f.dim(), f.radius(), ns, sub);
  const auto w = trapezoid_weights(g);
  for (int k = 0; k < g.size(); ++k) {
    if (f.dim() == 1) {
      fa.x.push_back(g.coord(k));
      fa.edge.push_back(k == 0 || k == ns - 1);
    } else {
      const int i = k / ns, j = k % ns;
      fa.x.push_back(g.coord(i));
      fa.x.push_back(g.coord(j));
      fa.edge.push_back(i == 0 || j == 0 || i == ns - 1 || j == ns - 1);
    }
    fa.logw.push_back(w[k] > 0.0 ? std::log(w[k]) - c * g.phi(k) : kNegInf);
  }
  return fa;
}

void log_numerator(const BLDatum& datum, const std::vector<GridFunction>& fs, int stride, double& total,
                   double& shell) {
  const int m = datum.m();
  const int nt = datum.total_dim();
  const auto off = datum.offsets();
  const Eigen::MatrixXd& q = datum.kernel.mat();
  std::vector<Factor> fac;
  for (int i = 0; i < m; ++i) fac.push_back(make_factor(fs[i], datum.exponents[i], stride));
  LogAccumulator all, edge;
  std::vector<int> idx(m, 0);
  std::vector<double> x(nt);
  while (true) {
    double t = 0.0;
    bool on_edge = false;
    for (int i = 0; i < m; ++i) {
      t += fac[i].logw[idx[i]];
      on_edge = on_edge || fac[i].edge[idx[i]];
      for (int d = 0; d < fac[i].dim; ++d) x[off[i] + d] = fac[i].x[idx[i] * fac[i].dim + d];
    }
    if (t != kNegInf) {
      double quad = 0.0;
      for (int a = 0; a < nt; ++a) {
        double row = 0.0;
        for (int b = 0; b < nt; ++b) row += q(a, b) * x[b];
        quad += x[a] * row;
      }
      all.add(t + quad);
      if (on_edge) edge.add(t + quad);
    }
    int k = m - 1;
    while (k >= 0 && ++idx[k] == fac[k].count()) idx[k--] = 0;
    if (k < 0) break;
  }
  total = all.log();
  shell = edge.log();
}

}  // namespace

BLGridResult bl_functional_grid(const BLDatum& datum, const std::vector<GridFunction>& fs, double boundary_tol) {
  datum.validate();
  if (static_cast<int>(fs.size()) != datum.m()) throw Error(ErrorCode::InvalidInput, "need one grid function per factor");
  for (int i = 0; i < datum.m(); ++i)
    if (fs[i].dim() != datum.dims[i]) throw Error(ErrorCode::InvalidInput, "grid function dim does not match datum");
  if (datum.total_dim() > 3) throw Error(ErrorCode::UnsupportedScale, "tensor quadrature limited to 3 axes");

  BLGridResult r;
  double total, shell;
  log_numerator(datum, fs, 1, total, shell);
  double log_den = 0.0;
  for (int i = 0; i < datum.m(); ++i) log_den += datum.exponents[i] * log_integral(fs[i]);
  r.boundary_fraction = shell == kNegInf ? 0.0 : std::exp(shell - total);
  r.log_value = total - log_den;
  r.divergent = r.boundary_fraction > boundary_tol;
  r.value = r.divergent ? kInfPotential : std::exp(r.log_value);
  if (r.divergent) r.log_value = kInfPotential;

  bool sub_ok = true;
  for (const auto& f : fs) sub_ok = sub_ok && (f.points() % 4 == 1) && f.points() >= 9;
  if (sub_ok && !r.divergent) {
    double t2, s2;
    log_numerator(datum, fs, 2, t2, s2);
    double den2 = 0.0;
    for (int i = 0; i < datum.m(); ++i) {
      const auto fa = make_factor(fs[i], 1.0, 2);
      LogAccumulator acc;
      for (double v : fa.logw) acc.add(v);
      den2 += datum.exponents[i] * acc.log();
    }
    r.richardson_error = std::abs(std::expm1((t2 - den2) - r.log_value)) / 3.0;
  }
  return r;
}

namespace {

std::mutex fftw_planner_mutex;

std::vector<double> convolve_fft(const GridFunction& f1, const GridFunction& f2) {
  const int n = f1.points();
  const int out_n = 2 * n - 1;
  int len = 1;
  while (len < out_n) len <<= 1;
  const double h = f1.spacing();
  double s1 = kInfPotential, s2 = kInfPotential;
  for (double v : f1.potential()) s1 = std::min(s1, v);
  for (double v : f2.potential()) s2 = std::min(s2, v);

  const int nc = len / 2 + 1;
  double* in1 = fftw_alloc_real(len);
  double* in2 = fftw_alloc_real(len);
  fftw_complex* o1 = fftw_alloc_complex(nc);
  fftw_complex* o2 = fftw_alloc_complex(nc);
  fftw_plan p1, p2, pb;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    p1 = fftw_plan_dft_r2c_1d(len, in1, o1, FFTW_ESTIMATE);
    p2 = fftw_plan_dft_r2c_1d(len, in2, o2, FFTW_ESTIMATE);
    pb = fftw_plan_dft_c2r_1d(len, o1, in1, FFTW_ESTIMATE);
  }
  for (int k = 0; k < len; ++k) {
    in1[k] = k < n && finite(f1.phi(k)) ? std::exp(s1 - f1.phi(k)) : 0.0;
    in2[k] = k < n && finite(f2.phi(k)) ? std::exp(s2 - f2.phi(k)) : 0.0;
  }
  fftw_execute(p1);
  fftw_execute(p2);
  for (int k = 0; k < nc; ++k) {
    const double re = o1[k][0] * o2[k][0] - o1[k][1] * o2[k][1];
    const double im = o1[k][0] * o2[k][1] + o1[k][1] * o2[k][0];
    o1[k][0] = re;
    o1[k][1] = im;
  }
  fftw_execute(pb);
  std::vector<double> out(out_n);
  for (int k = 0; k < out_n; ++k) {
    const double g = in1[k] * h / len;
    out[k] = g > 0.0 ? s1 + s2 - std::log(g) : kInfPotential;
  }
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    fftw_destroy_plan(p1);
    fftw_destroy_plan(p2);
    fftw_destroy_plan(pb);
  }
  fftw_free(in1);
  fftw_free(in2);
  fftw_free(o1);
  fftw_free(o2);
  return out;
}

std::vector<double> convolve_direct(const GridFunction& f1, const GridFunction& f2) {
  const int n = f1.points();
  const double lh = std::log(f1.spacing());
  const double lhalf = std::log(0.5 * f1.spacing());
  std::vector<double> out(2 * n - 1, kInfPotential);
  std::vector<double> terms;
  for (int k = 0; k < 2 * n - 1; ++k) {
    const int lo = std::max(0, k - (n - 1));
    const int hi = std::min(n - 1, k);
    auto ok = [&](int j) { return j >= lo && j <= hi && finite(f1.phi(j)) && finite(f2.phi(k - j)); };
    LogAccumulator acc;
    for (int j = lo; j <= hi; ++j) {
      if (!ok(j)) continue;
      const bool end = !ok(j - 1) || !ok(j + 1);
      if (end && !ok(j - 1) && !ok(j + 1)) continue;  // isolated point: no finite segment
      acc.add((end ? lhalf : lh) - f1.phi(j) - f2.phi(k - j));
    }
    const double lg = acc.log();
    out[k] = lg == kNegInf ? kInfPotential : -lg;
  }
  return out;
}

}  // namespace

GridFunction convolve(const GridFunction& f1, const GridFunction& f2, ConvolutionMethod method) {
  if (f1.dim() != 1 || f2.dim() != 1) throw Error(ErrorCode::InvalidInput, "convolution is 1-D");
  if (f1.points() != f2.points() || std::abs(f1.radius() - f2.radius()) > 1e-12 * f1.radius())
    throw Error(ErrorCode::InvalidInput, "convolution needs a common grid");
  auto pot = method == ConvolutionMethod::fft ? convolve_fft(f1, f2) : convolve_direct(f1, f2);
  return GridFunction(1, 2.0 * f1.radius(), 2 * f1.points() - 1, std::move(pot));
}

GridFunction self_convolve_rescaled(const GridFunction& f, ConvolutionMethod method, double tail_tol) {
  if (f.dim() != 1) throw Error(ErrorCode::InvalidInput, "self_convolve_rescaled is 1-D");
  const GridFunction g = convolve(f, f, method);
  const int ng = g.points();
  const double h = g.spacing();
  const double reach = std::sqrt(2.0) * f.radius();

  const auto w = trapezoid_weights(g);
  LogAccumulator all, tail;
  for (int k = 0; k < ng; ++k) {
    if (w[k] <= 0.0) continue;
    const double t = std::log(w[k]) - g.phi(k);
    all.add(t);
    if (std::abs(g.coord(k)) > reach + 1e-12) tail.add(t);
  }
  const double tail_frac = tail.log() == kNegInf ? 0.0 : std::exp(tail.log() - all.log());
  if (tail_frac > tail_tol)
  {
    char buf[128];
    std::snprintf(buf, sizeof buf, "convolution tail mass fraction %.3g beyond sqrt(2) R; enlarge the grid radius",
                  tail_frac);
    throw Error(ErrorCode::GridTooSmall, buf);
  }

  const int c = (ng - 1) / 2;
  const double half_log2 = 0.5 * std::log(2.0);
  std::vector<double> out(f.points());
  for (int j = 0; j < f.points(); ++j) {
    const double t = std::sqrt(2.0) * f.coord(j);
    const double u = t / h + c;
    int i0 = static_cast<int>(std::floor(u));
    i0 = std::clamp(i0, 1, ng - 3);
    const double s = u - i0;
    const double p[4] = {g.phi(i0 - 1), g.phi(i0), g.phi(i0 + 1), g.phi(i0 + 2)};
    double psi;
    if (finite(p[0]) && finite(p[1]) && finite(p[2]) && finite(p[3])) {
      const double l0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
      const double l1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
      const double l2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
      const double l3 = (s + 1.0) * s * (s - 1.0) / 6.0;
      psi = l0 * p[0] + l1 * p[1] + l2 * p[2] + l3 * p[3];
    } else {
      const double v = (1.0 - s) * (finite(p[1]) ? std::exp(-p[1]) : 0.0) + s * (finite(p[2]) ? std::exp(-p[2]) : 0.0);
      psi = v > 0.0 ? -std::log(v) : kInfPotential;
    }
    out[j] = finite(psi) ? psi - half_log2 : kInfPotential;
  }
  // Resampling is not mass exact near kinks and jumps; restore the exact
  // discrete mass (int f)^2 with a constant shift of the potential.
  GridFunction r(1, f.radius(), f.points(), std::move(out));
  const double shift = log_integral(r) - 2.0 * log_integral(f);
  std::vector<double> p = r.potential();
  for (auto& v : p)
    if (finite(v)) v += shift;
  return GridFunction(1, f.radius(), f.points(), std::move(p));
}

namespace {

GridFunction normalized(const GridFunction& f) {
  const double li = log_integral(f);
  std::vector<double> p = f.potential();
  for (auto& v : p)
    if (finite(v)) v += li;
  return GridFunction(f.dim(), f.radius(), f.points(), std::move(p));
}

}  // namespace

MonotonicityReport ball_monotonicity_check(const BLDatum& datum, const std::vector<GridFunction>& fs,
                                           double reference) {
  std::vector<GridFunction> in, conv;
  for (const auto& f : fs) {
    in.push_back(normalized(f));
    conv.push_back(self_convolve_rescaled(in.back()));
  }
  MonotonicityReport r;
  r.reference = reference;
  r.bl_input = bl_functional_grid(datum, in).value;
  r.bl_convolved = bl_functional_grid(datum, conv).value;
  r.margin = r.bl_input * r.bl_input - reference * r.bl_convolved;
  return r;
}

double l1_to_matched_gaussian(const GridFunction& f, double* variance) {
  if (f.dim() != 1) throw Error(ErrorCode::InvalidInput, "CLT distance is 1-D");
  const auto w = trapezoid_weights(f);
  double mass = 0.0, second = 0.0;
  for (int j = 0; j < f.points(); ++j) {
    const double v = finite(f.phi(j)) ? std::exp(-f.phi(j)) : 0.0;
    mass += w[j] * v;
    second += w[j] * v * f.coord(j) * f.coord(j);
  }
  const double var = second / mass;
  if (variance) *variance = var;
  const double h = f.spacing();
  double l1 = 0.0;
  for (int j = 0; j < f.points(); ++j) {
    const double x = f.coord(j);
    const double v = finite(f.phi(j)) ? std::exp(-f.phi(j)) / mass : 0.0;
    const double gauss = std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * M_PI * var);
    const double wt = (j == 0 || j == f.points() - 1) ? 0.5 * h : h;
    l1 += wt * std::abs(v - gauss);
  }
  return l1;
}

std::vector<ConvolutionStepReport> clt_experiment(const GridFunction& f, int steps, ConvolutionMethod method) {
  if (steps < 0) throw Error(ErrorCode::InvalidInput, "steps >= 0");
  GridFunction cur = normalized(f);
  std::vector<ConvolutionStepReport> out;
  for (int s = 0; s <= steps; ++s) {
    if (s > 0) cur = self_convolve_rescaled(cur, method);
    ConvolutionStepReport r;
    r.step = s;
    r.mass = integral(cur);
    r.l1_to_gaussian = l1_to_matched_gaussian(cur, &r.variance);
    const auto prof = concavity_profile(cur);
    r.lambda_est = prof.lambda_est;
    r.Lambda_est = prof.Lambda_est;
    out.push_back(r);
  }
  return out;
}

LogConcavityReport convolution_logconcavity_check(const GridFunction& f1, const GridFunction& f2,
                                                  double window_fraction, double tol_factor) {
  const auto p1 = concavity_profile(f1);
  const auto p2 = concavity_profile(f2);
  if (!(p1.lambda_est > 0.0) || !(p2.lambda_est > 0.0))
    throw Error(ErrorCode::InvalidInput, "inputs must be uniformly log-concave (lambda_est > 0)");
  const auto g = convolve(f1, f2);
  const auto po = concavity_profile(g, window_fraction * f1.radius());
  LogConcavityReport r;
  r.lambda1 = p1.lambda_est;
  r.lambda2 = p2.lambda_est;
  r.Lambda1 = p1.Lambda_est;
  r.Lambda2 = p2.Lambda_est;
  r.lambda_out = po.lambda_est;
  r.Lambda_out = po.Lambda_est;
  r.lambda_bound = 1.0 / (1.0 / r.lambda1 + 1.0 / r.lambda2);
  r.tolerance = tol_factor * f1.spacing() * f1.spacing();
  r.lambda_ok = r.lambda_out >= r.lambda_bound - r.tolerance;
  r.Lambda_checked = std::isfinite(r.Lambda1) && std::isfinite(r.Lambda2);
  if (r.Lambda_checked) {
    r.Lambda_bound = 1.0 / (1.0 / r.Lambda1 + 1.0 / r.Lambda2);
    r.Lambda_ok = r.Lambda_out <= r.Lambda_bound + r.tolerance;
  } else {
    r.Lambda_bound = kInfPotential;
  }
  r.ok = r.lambda_ok && r.Lambda_ok;
  return r;
}

}  // namespace blsat
