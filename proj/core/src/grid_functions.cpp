#include "blsat/grid_functions.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace blsat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline bool finite(double v) { return v < kInfPotential; }

double log_sum_exp(const std::vector<double>& terms) {
  double mx = kNegInf;
  for (double t : terms) mx = std::max(mx, t);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

}  // namespace

GridFunction::GridFunction(int dim, double radius, int points, std::vector<double> potential)
    : dim_(dim), radius_(radius), points_(points), phi_(std::move(potential)) {
  if (dim != 1 && dim != 2) throw Error(ErrorCode::InvalidInput, "grid function dim must be 1 or 2");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw Error(ErrorCode::InvalidInput, "grid radius must be > 0");
  if (points < 3 || points % 2 == 0) throw Error(ErrorCode::InvalidInput, "points per axis must be odd and >= 3");
  const size_t expect = dim == 1 ? points : static_cast<size_t>(points) * points;
  if (phi_.size() != expect) throw Error(ErrorCode::InvalidInput, "potential size does not match grid");
  bool any = false;
  for (double v : phi_) {
    if (std::isnan(v) || v == kNegInf) throw Error(ErrorCode::InvalidInput, "potential must be finite or +inf");
    any = any || finite(v);
  }
  if (!any) throw Error(ErrorCode::InvalidInput, "potential is +inf everywhere");
  const size_t n = phi_.size();
  std::vector<double> sym(n);
  for (size_t k = 0; k < n; ++k) {
    const double a = phi_[k], b = phi_[n - 1 - k];
    sym[k] = (finite(a) && finite(b)) ? 0.5 * (a + b) : kInfPotential;
  }
  phi_ = std::move(sym);
}

GridFunction make_grid_function(int dim, double radius, int points,
                                const std::function<double(const double*)>& phi) {
  if (points < 3 || points % 2 == 0) throw Error(ErrorCode::InvalidInput, "points per axis must be odd and >= 3");
  const double h = 2.0 * radius / (points - 1);
  const int c = (points - 1) / 2;
  std::vector<double> v;
  if (dim == 1) {
    for (int j = 0; j < points; ++j) {
      const double x = (j - c) * h;
      v.push_back(phi(&x));
    }
  } else {
    for (int i = 0; i < points; ++i)
      for (int j = 0; j < points; ++j) {
        const double x[2] = {(i - c) * h, (j - c) * h};
        v.push_back(phi(x));
      }
  }
  return GridFunction(dim, radius, points, std::move(v));
}

namespace grid {

namespace {
double sq(const double* x, int dim) { return dim == 1 ? x[0] * x[0] : x[0] * x[0] + x[1] * x[1]; }
}  // namespace

GridFunction gaussian(double a, double radius, int points, int dim) {
  return make_grid_function(dim, radius, points, [=](const double* x) { return 0.5 * a * sq(x, dim); });
}

GridFunction exp_norm(double radius, int points, int dim) {
  return make_grid_function(dim, radius, points, [=](const double* x) { return std::sqrt(sq(x, dim)); });
}

GridFunction quartic(double a, double eps, double radius, int points, int dim) {
  return make_grid_function(dim, radius, points, [=](const double* x) {
    const double r2 = sq(x, dim);
    return 0.5 * a * r2 + eps * r2 * r2;
  });
}

GridFunction indicator(double half_width, double radius, int points, int dim) {
  const double slack = 1e-9 * (1.0 + half_width);
  return make_grid_function(dim, radius, points, [=](const double* x) {
    for (int k = 0; k < dim; ++k)
      if (std::abs(x[k]) > half_width + slack) return kInfPotential;
    return 0.0;
  });
}

GridFunction tabulated(int dim, double radius, int points, std::vector<double> potential) {
  return GridFunction(dim, radius, points, std::move(potential));
}

}  // namespace grid

void write_grid_function(std::ostream& os, const GridFunction& f) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "dim " << f.dim() << "\nradius " << f.radius() << "\npoints " << f.points() << "\n";
  for (double v : f.potential()) {
    if (finite(v))
      buf << v << "\n";
    else
      buf << "inf\n";
  }
  os << buf.str();
}

GridFunction read_grid_function(std::istream& is) {
  auto header = [&](const char* key) {
    std::string line;
    while (std::getline(is, line) && line.find_first_not_of(" \t\r") == std::string::npos) {
    }
    std::istringstream ls(line);
    std::string first;
    ls >> first;
    if (first == key) ls >> first;
    try {
      size_t used = 0;
      const double v = std::stod(first, &used);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidInput, std::string("grid file: bad header line for ") + key);
    }
  };
  const int dim = static_cast<int>(header("dim"));
  const double radius = header("radius");
  const int points = static_cast<int>(header("points"));
  std::vector<double> v;
  std::string tok;
  while (is >> tok) {
    if (tok == "inf" || tok == "+inf" || tok == "Infinity") {
      v.push_back(kInfPotential);
    } else {
      try {
        v.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidInput, "grid file: bad value '" + tok + "'");
      }
    }
  }
  return GridFunction(dim, radius, points, std::move(v));
}

std::vector<double> trapezoid_weights(const GridFunction& f) {
  const int n = f.points();
  const double h = f.spacing();
  std::vector<double> w(f.size(), 0.0);
  if (f.dim() == 1) {
    for (int j = 0; j + 1 < n; ++j)
      if (finite(f.phi(j)) && finite(f.phi(j + 1))) {
        w[j] += 0.5 * h;
        w[j + 1] += 0.5 * h;
      }
  } else {
    const double q = 0.25 * h * h;
    for (int i = 0; i + 1 < n; ++i)
      for (int j = 0; j + 1 < n; ++j)
        if (finite(f.phi(i, j)) && finite(f.phi(i + 1, j)) && finite(f.phi(i, j + 1)) && finite(f.phi(i + 1, j + 1))) {
          w[i * n + j] += q;
          w[(i + 1) * n + j] += q;
          w[i * n + j + 1] += q;
          w[(i + 1) * n + j + 1] += q;
        }
  }
  return w;
}

double log_integral(const GridFunction& f) {
  const auto w = trapezoid_weights(f);
  std::vector<double> t;
  for (int k = 0; k < f.size(); ++k)
    if (w[k] > 0.0) t.push_back(std::log(w[k]) - f.phi(k));
  return log_sum_exp(t);
}

double integral(const GridFunction& f) { return std::exp(log_integral(f)); }

// ---------------------------------------------------------------------------
// Legendre transform

namespace {

// Conjugate of a 1-D potential sampled at x_k = (k - c) h, evaluated at ys.
// An all-infinite input yields -inf everywhere.
std::vector<double> conj1d(const double* phi, int n, double h, const std::vector<double>& ys, bool edge_rule) {
  const int c = (n - 1) / 2;
  std::vector<double> out(ys.size(), kNegInf);
  double thr_hi = kInfPotential, thr_lo = -kInfPotential;
  if (edge_rule) {
    if (finite(phi[n - 1]) && finite(phi[n - 2])) {
      const double s1 = (phi[n - 1] - phi[n - 2]) / h;
      thr_hi = (n >= 3 && finite(phi[n - 3])) ? 2.0 * s1 - (phi[n - 2] - phi[n - 3]) / h : s1;
    }
    if (finite(phi[0]) && finite(phi[1])) {
      const double s1 = (phi[0] - phi[1]) / h;
      thr_lo = -((n >= 3 && finite(phi[2])) ? 2.0 * s1 - (phi[1] - phi[2]) / h : s1);
    }
  }
  for (size_t j = 0; j < ys.size(); ++j) {
    const double y = ys[j];
    double best = kNegInf;
    int arg = -1;
    for (int k = 0; k < n; ++k) {
      if (!finite(phi[k])) continue;
      const double v = (k - c) * h * y - phi[k];
      if (v > best) {
        best = v;
        arg = k;
      }
    }
    if (arg == n - 1 && y > thr_hi + 1e-9 * (1.0 + std::abs(thr_hi))) best = kInfPotential;
    if (arg == 0 && y < thr_lo - 1e-9 * (1.0 + std::abs(thr_lo))) best = kInfPotential;
    out[j] = best;
  }
  return out;
}

double max_finite_slope(const GridFunction& f) {
  const int n = f.points();
  const double h = f.spacing();
  double s = 0.0;
  auto pair = [&](double a, double b) {
    if (finite(a) && finite(b)) s = std::max(s, std::abs(b - a) / h);
  };
  if (f.dim() == 1) {
    for (int j = 0; j + 1 < n; ++j) pair(f.phi(j), f.phi(j + 1));
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j + 1 < n; ++j) {
        pair(f.phi(i, j), f.phi(i, j + 1));
        pair(f.phi(j, i), f.phi(j + 1, i));
      }
  }
  return s;
}

}  // namespace

GridFunction legendre_transform(const GridFunction& f, double dual_radius, int dual_points, bool edge_rule) {
  const double h = f.spacing();
  double rs = dual_radius;
  int ns = dual_points;
  if (!(rs > 0.0)) {
    rs = h * std::ceil((max_finite_slope(f) + h) / h - 1e-9);
    if (ns <= 0) ns = 2 * static_cast<int>(std::llround(rs / h)) + 1;
  }
  if (ns <= 0) ns = 2 * static_cast<int>(std::ceil(rs / h - 1e-9)) + 1;
  if (ns < 3 || ns % 2 == 0) throw Error(ErrorCode::InvalidInput, "dual points must be odd and >= 3");

  const int n = f.points();
  const double hs = 2.0 * rs / (ns - 1);
  std::vector<double> ys(ns);
  for (int j = 0; j < ns; ++j) ys[j] = (j - (ns - 1) / 2) * hs;

  std::vector<double> out;
  if (f.dim() == 1) {
    out = conj1d(f.potential().data(), n, h, ys, edge_rule);
  } else {
    // psi(i, l) = max_j x_j y_l - phi(i, j), then max_i x_i y_k + psi(i, l).
    std::vector<double> psi(static_cast<size_t>(n) * ns);
    for (int i = 0; i < n; ++i) {
      const auto row = conj1d(f.potential().data() + static_cast<size_t>(i) * n, n, h, ys, edge_rule);
      for (int l = 0; l < ns; ++l) psi[static_cast<size_t>(i) * ns + l] = row[l];
    }
    out.assign(static_cast<size_t>(ns) * ns, 0.0);
    std::vector<double> col(n);
    for (int l = 0; l < ns; ++l) {
      for (int i = 0; i < n; ++i) {
        const double p = psi[static_cast<size_t>(i) * ns + l];
        col[i] = p == kNegInf ? kInfPotential : -p;
      }
      bool any = false;
      for (double v : col) any = any || finite(v);
      if (!any) {
        for (int k = 0; k < ns; ++k) out[static_cast<size_t>(k) * ns + l] = kInfPotential;
        continue;
      }
      const auto res = conj1d(col.data(), n, h, ys, edge_rule);
      for (int k = 0; k < ns; ++k) out[static_cast<size_t>(k) * ns + l] = res[k];
    }
  }
  return GridFunction(f.dim(), rs, ns, std::move(out));
}

GridFunction polar_function(const GridFunction& f, double dual_radius, int dual_points) {
  return legendre_transform(f, dual_radius, dual_points);
}

double volume_product(const GridFunction& f, double dual_radius, int dual_points) {
  const double a = integral(f);
  if (!(a > 0.0)) throw Error(ErrorCode::InvalidInput, "volume_product: zero mass");
  return a * integral(polar_function(f, dual_radius, dual_points));
}

// ---------------------------------------------------------------------------
// Duality

namespace {

struct Axis {
  std::vector<double> x;    // coordinates, dim entries per point
  std::vector<double> phi;  // c_i phi_i
  int dim;
  int count() const { return static_cast<int>(phi.size()); }
};

Axis make_axis(const GridFunction& f, double c) {
  Axis a;
  a.dim = f.dim();
  const int n = f.points();
  if (f.dim() == 1) {
    for (int j = 0; j < n; ++j) {
      a.x.push_back(f.coord(j));
      a.phi.push_back(finite(f.phi(j)) ? c * f.phi(j) : kInfPotential);
    }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        a.x.push_back(f.coord(i));
        a.x.push_back(f.coord(j));
        a.phi.push_back(finite(f.phi(i, j)) ? c * f.phi(i, j) : kInfPotential);
      }
  }
  return a;
}

void check_factors(const BLDatum& datum, const std::vector<GridFunction>& fs) {
  datum.validate();
  if (static_cast<int>(fs.size()) != datum.m()) throw Error(ErrorCode::InvalidInput, "need one grid function per factor");
  for (int i = 0; i < datum.m(); ++i)
    if (fs[i].dim() != datum.dims[i]) throw Error(ErrorCode::InvalidInput, "grid function dim does not match datum");
  if (datum.total_dim() > 3) throw Error(ErrorCode::UnsupportedScale, "product grid limited to 3 axes");
}

}  // namespace

double duality_check(const BLDatum& datum, const std::vector<GridFunction>& fs) {
  check_factors(datum, fs);
  std::vector<Axis> axes;
  for (int i = 0; i < datum.m(); ++i) axes.push_back(make_axis(fs[i], datum.exponents[i]));
  const int m = datum.m();
  const int nt = datum.total_dim();
  const Eigen::MatrixXd& q = datum.kernel.mat();
  const auto off = datum.offsets();

  std::vector<int> idx(m, 0);
  std::vector<double> x(nt);
  double best = kNegInf;
  while (true) {
    double pen = 0.0;
    for (int i = 0; i < m && pen < kInfPotential; ++i) {
      pen += axes[i].phi[idx[i]];
      for (int d = 0; d < axes[i].dim; ++d) x[off[i] + d] = axes[i].x[idx[i] * axes[i].dim + d];
    }
    if (pen < kInfPotential) {
      double quad = 0.0;
      for (int a = 0; a < nt; ++a)
        for (int b = 0; b < nt; ++b) quad += q(a, b) * x[a] * x[b];
      best = std::max(best, quad - pen);
    }
    int k = m - 1;
    while (k >= 0 && ++idx[k] == axes[k].count()) idx[k--] = 0;
    if (k < 0) break;
  }
  return best;
}

std::vector<GridFunction> polar_tuple(const BLDatum& datum, const std::vector<GridFunction>& fs) {
  datum.validate();
  const int m = datum.m();
  if (m > 3) throw Error(ErrorCode::UnsupportedDatum, "polar_tuple supports m <= 3");
  for (int d : datum.dims)
    if (d != 1) throw Error(ErrorCode::UnsupportedDatum, "polar_tuple supports 1-D factors only");
  check_factors(datum, fs);
  for (const auto& f : fs)
    if (f.points() > 401) throw Error(ErrorCode::UnsupportedScale, "polar_tuple limited to 401 points per axis");

  const Eigen::MatrixXd& q = datum.kernel.mat();
  // Current weighted potentials c_i * (Phi_i or phi_i).
  std::vector<std::vector<double>> pot(m);
  for (int i = 0; i < m; ++i) {
    pot[i].resize(fs[i].points());
    for (int j = 0; j < fs[i].points(); ++j)
      pot[i][j] = finite(fs[i].phi(j)) ? datum.exponents[i] * fs[i].phi(j) : kInfPotential;
  }

  std::vector<GridFunction> out;
  for (int k = 0; k < m; ++k) {
    std::vector<int> others;
    for (int i = 0; i < m; ++i)
      if (i != k) others.push_back(i);
    std::vector<double> phik(fs[k].points());
    std::vector<double> x(m);
    for (int j = 0; j < fs[k].points(); ++j) {
      x[k] = fs[k].coord(j);
      double best = kNegInf;
      std::vector<int> idx(others.size(), 0);
      while (true) {
        double pen = 0.0;
        for (size_t o = 0; o < others.size(); ++o) {
          pen += pot[others[o]][idx[o]];
          x[others[o]] = fs[others[o]].coord(idx[o]);
        }
        if (pen < kInfPotential) {
          double quad = 0.0;
          for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) quad += q(a, b) * x[a] * x[b];
          best = std::max(best, quad - pen);
        }
        int t = static_cast<int>(others.size()) - 1;
        while (t >= 0 && ++idx[t] == fs[others[t]].points()) idx[t--] = 0;
        if (t < 0) break;
      }
      phik[j] = best / datum.exponents[k];
    }
    GridFunction fk(1, fs[k].radius(), fs[k].points(), phik);
    for (int j = 0; j < fk.points(); ++j) pot[k][j] = datum.exponents[k] * fk.phi(j);
    out.push_back(std::move(fk));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Affine surface area

double affine_surface_area_quadratic(const SymmetricMatrix& a, double lambda) {
  const double ld = log_det_spd(a);
  return std::exp(0.5 * a.dim() * std::log(2.0 * M_PI) + (lambda - 0.5) * ld);
}

double affine_surface_area_grid(const GridFunction& v, double lambda, double convexity_tol) {
  if (v.dim() != 1) throw Error(ErrorCode::InvalidInput, "grid affine surface area is 1-D");
  const int n = v.points();
  const double h = v.spacing();
  for (double p : v.potential())
    if (!finite(p)) throw Error(ErrorCode::InvalidInput, "grid affine surface area needs a finite potential");
  std::vector<double> integrand(n, 0.0);
  double scale = 0.0;
  std::vector<double> d2(n, 0.0);
  for (int j = 1; j + 1 < n; ++j) {
    d2[j] = (v.phi(j + 1) - 2.0 * v.phi(j) + v.phi(j - 1)) / (h * h);
    scale = std::max(scale, std::abs(d2[j]));
  }
  for (int j = 1; j + 1 < n; ++j)
    if (d2[j] < -convexity_tol * (1.0 + scale))
      throw Error(ErrorCode::NotConvex, "second difference " + std::to_string(d2[j]) + " at x = " + std::to_string(v.coord(j)));
  for (int j = 1; j + 1 < n; ++j) {
    const double x = v.coord(j);
    const double d1 = (v.phi(j + 1) - v.phi(j - 1)) / (2.0 * h);
    const double curv = std::max(0.0, d2[j]);
    const double e = (2.0 * lambda - 1.0) * v.phi(j) - lambda * x * d1;
    integrand[j] = curv > 0.0 || lambda == 0.0 ? std::exp(e) * std::pow(curv, lambda) : 0.0;
  }
  double s = 0.0;
  for (int j = 0; j + 1 < n; ++j) s += 0.5 * h * (integrand[j] + integrand[j + 1]);
  return s;
}

AffineProductReport affine_surface_product(const BLDatum& datum, const GaussianTuple& a, double lambda) {
  AffineProductReport r;
  double logp = 0.0;
  for (const auto& b : a.blocks) logp += std::log(affine_surface_area_quadratic(b, lambda));
  r.product = std::exp(logp);
  r.bound = std::exp(0.5 * datum.total_dim() * std::log(2.0 * M_PI));
  // V = <x,Ax>/2 satisfies sum V_i >= <x,Qx> iff M(A) >= 0 (unit exponents).
  GaussianTuple test = a;
  if (lambda > 0.5)
    for (auto& b : test.blocks) b = inverse_spd(b);
  r.hypothesis_holds = gaussian_feasible(datum, test);
  return r;
}

// ---------------------------------------------------------------------------
// Concavity profile

ConcavityProfile concavity_profile(const GridFunction& f, double window, double envelope_tol) {
  const int n = f.points();
  const double h = f.spacing();
  const double lim = window > 0.0 ? window + 1e-12 : kInfPotential;
  double lo = kInfPotential, hi = -kInfPotential;
  bool transition = false;
  auto triple = [&](double a, double b, double c) {
    const int nf = finite(a) + finite(b) + finite(c);
    if (nf == 3) {
      const double d = (a - 2.0 * b + c) / (h * h);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    } else if (nf > 0) {
      transition = true;
    }
  };
  if (f.dim() == 1) {
    for (int j = 1; j + 1 < n; ++j)
      if (std::abs(f.coord(j)) <= lim) triple(f.phi(j - 1), f.phi(j), f.phi(j + 1));
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 1; j + 1 < n; ++j) {
        if (std::abs(f.coord(i)) <= lim && std::abs(f.coord(j)) <= lim) triple(f.phi(i, j - 1), f.phi(i, j), f.phi(i, j + 1));
        if (std::abs(f.coord(j)) <= lim && std::abs(f.coord(i)) <= lim) triple(f.phi(j - 1, i), f.phi(j, i), f.phi(j + 1, i));
      }
  }
  ConcavityProfile p;
  p.lambda_est = std::isfinite(lo) ? lo : 0.0;
  p.Lambda_est = (transition || !std::isfinite(hi)) ? kInfPotential : hi;

  // Envelope of the mass-normalized potential.
  const double shift = log_integral(f);
  const double lam = std::max(0.0, p.lambda_est);
  const double big = p.Lambda_est;
  const double dn = f.dim();
  double worst = kInfPotential;
  for (int k = 0; k < f.size(); ++k) {
    const double v = f.phi(k);
    if (!finite(v)) continue;
    double r2;
    if (f.dim() == 1) {
      r2 = f.coord(k) * f.coord(k);
      if (std::abs(f.coord(k)) > lim) continue;
    } else {
      const double a = f.coord(k / n), b = f.coord(k % n);
      if (std::abs(a) > lim || std::abs(b) > lim) continue;
      r2 = a * a + b * b;
    }
    const double phi = v + shift;
    if (std::isfinite(big)) worst = std::min(worst, phi - (0.5 * lam * r2 + 0.5 * dn * std::log(2.0 * M_PI / big)));
    if (lam > 0.0 && std::isfinite(big))
      worst = std::min(worst, 0.5 * big * r2 + 0.5 * dn * std::log(2.0 * M_PI / lam) - phi);
  }
  p.envelope_slack = worst;
  p.envelope_ok = !(worst < -envelope_tol);
  return p;
}

}  // namespace blsat
