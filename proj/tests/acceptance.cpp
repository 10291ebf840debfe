// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance                 run every criterion
//   acceptance --criterion N   run only criterion N
//
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "blsat/functional_bl.hpp"
#include "blsat/gaussian_transport.hpp"
#include "fixtures.hpp"

using namespace blsat;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Detail {
 public:
  template <typename... Args>
  void add(const char* fmt, Args... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, args...);
    if (!text_.empty()) text_ += "; ";
    text_ += buf;
  }
  std::string str() const { return text_; }

 private:
  std::string text_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

GaussianTuple scalars(const std::vector<double>& a, Convention c = Convention::precision) {
  std::vector<SymmetricMatrix> b;
  for (double v : a) b.push_back(SymmetricMatrix::scalar(1, v));
  return make_tuple(b, c);
}

GaussianTuple random_covariances(int m, int n, std::mt19937_64& rng) {
  std::vector<SymmetricMatrix> b;
  for (int i = 0; i < m; ++i) b.push_back(wishart_sample(n, rng) + SymmetricMatrix::scalar(n, 0.05));
  return make_tuple(b, Convention::covariance);
}

GridFunction normalized(const GridFunction& f) {
  auto p = f.potential();
  const double li = log_integral(f);
  for (auto& v : p)
    if (std::isfinite(v)) v += li;
  return grid::tabulated(f.dim(), f.radius(), f.points(), p);
}

// Quadrature agrees with the closed form on seeded Gaussian tuples.
Outcome criterion_1() {
  Outcome o;
  Detail d;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> spread(0.25, 2.0);
  double worst = 0.0;
  int cases = 0;
  for (int k = 0; k < 20; ++k) {
    const BLDatum datum = k % 2 == 0 ? bs_datum(1) : kw_datum(3, 1);
    std::vector<SymmetricMatrix> b;
    for (int i = 0; i < datum.m(); ++i) b.push_back(wishart_sample(1, rng));
    auto t = make_tuple(b);
    const double scale = boundary_scale(datum, t) * (1.0 + spread(rng));
    for (auto& x : t.blocks) x = x * scale;

    // Axis i needs to reach the tail of the numerator marginal (variance
    // (M^{-1})_ii) and to resolve the factor itself (spacing below a_i^{-1/2}).
    const auto cov = inverse_spd(assemble_M(datum, t));
    std::vector<GridFunction> fs;
    for (int i = 0; i < datum.m(); ++i) {
      const double a = t.blocks[i](0, 0);
      const double h = 0.6 / std::sqrt(a);
      const double reach = 9.0 * std::sqrt(cov(i, i));
      int n = 2 * static_cast<int>(std::ceil(reach / h)) + 1;
      while (n % 4 != 1) n += 2;
      fs.push_back(grid::gaussian(a, h * (n - 1) / 2, n));
    }
    const auto q = bl_functional_grid(datum, fs);
    const double closed = bl_gaussian_value(datum, t);
    const double rel = std::abs(q.value / closed - 1.0);
    worst = std::max(worst, rel);
    ++cases;
    if (!(rel <= 1e-6)) o.pass = false;
  }
  const double secs = seconds_since(t0);
  if (!(secs < 30.0)) o.pass = false;
  d.add("%d tuples, max relative gap %.3e (tol 1e-6), %.2f s (limit 30 s)", cases, worst, secs);
  o.detail = d.str();
  return o;
}

// KW constant: maximum 0 at the identity, never exceeded by samples.
Outcome criterion_2() {
  Outcome o;
  Detail d;
  double worst_obj = 0.0, worst_dist = 0.0, worst_sample = -INFINITY;
  for (int m : {3, 4, 5}) {
    for (int n : {1, 2, 3}) {
      const auto datum = kw_datum(m, n);
      const auto r = optimize_kw_constant(datum, 32, 1000 + 10 * m + n);
      worst_obj = std::max(worst_obj, std::abs(r.best_value));
      worst_dist = std::max(worst_dist, r.residuals.at("identity_distance"));
      std::mt19937_64 rng(5000 + 10 * m + n);
      double top = -INFINITY;
      for (int s = 0; s < 10000; ++s) top = std::max(top, kw_gaussian_objective(datum, random_feasible_tuple(datum, rng)));
      worst_sample = std::max(worst_sample, top);
    }
  }
  o.pass = worst_obj <= 1e-6 && worst_dist <= 1e-4 && worst_sample <= 1e-9;
  d.add("max |objective| %.3e (tol 1e-6)", worst_obj);
  d.add("max identity distance %.3e (tol 1e-4)", worst_dist);
  d.add("max sampled objective %.3e (tol 1e-9)", worst_sample);
  o.detail = d.str();
  return o;
}

// Two-factor case: the inverse family attains 0 and the constant is (2 pi)^n.
Outcome criterion_3() {
  Outcome o;
  Detail d;
  std::mt19937_64 rng(31);
  double worst_family = 0.0, worst_const = 0.0, worst_opt = 0.0;
  for (int n : {1, 2, 3}) {
    const auto datum = bs_datum(n);
    for (int k = 0; k < 100; ++k) {
      const auto a = wishart_sample(n, rng) + SymmetricMatrix::scalar(n, 0.01);
      const double obj = kw_gaussian_objective(datum, make_tuple({a, inverse_spd(a)}));
      worst_family = std::max(worst_family, std::abs(obj));
      const double constant = std::exp(kw_constant_prefactor_log(datum) + 0.5 * obj);
      worst_const = std::max(worst_const, std::abs(constant / std::pow(2 * M_PI, n) - 1.0));
    }
    const auto r = optimize_kw_constant(datum, 16, 300 + n);
    worst_opt = std::max(worst_opt, std::abs(r.best_value));
  }
  o.pass = worst_family <= 1e-10 && worst_const <= 1e-10 && worst_opt <= 1e-6;
  d.add("family max |objective| %.3e (tol 1e-10)", worst_family);
  d.add("constant vs (2pi)^n max rel %.3e", worst_const);
  d.add("optimizer max |objective| %.3e", worst_opt);
  o.detail = d.str();
  return o;
}

// Barycenter iteration: trace monotonicity, upper bound, residual, 1-D closed form.
Outcome criterion_4() {
  Outcome o;
  Detail d;
  std::mt19937_64 rng(44);
  double worst_drop = 0.0, worst_upper = -INFINITY, worst_res = 0.0, worst_1d = 0.0;
  int runs = 0;
  for (int k = 0; k < 500; ++k) {
    const int m = 2 + k % 3, n = 1 + (k / 3) % 4;
    const auto t = random_covariances(m, n, rng);
    const auto r = barycenter_fixed_point(t);
    ++runs;
    for (size_t s = 1; s < r.trace_sequence.size(); ++s)
      worst_drop = std::max(worst_drop, r.trace_sequence[s - 1] - r.trace_sequence[s]);
    double mean_tr = 0.0;
    for (const auto& b : t.blocks) mean_tr += b.trace() / m;
    worst_upper = std::max(worst_upper, r.A0.trace() - mean_tr);
    worst_res = std::max(worst_res, r.fixed_point_residual);
    if (n == 1) {
      double root = 0.0;
      for (const auto& b : t.blocks) root += std::sqrt(b(0, 0)) / m;
      worst_1d = std::max(worst_1d, std::abs(r.A0(0, 0) - root * root));
    }
  }
  o.pass = worst_drop <= 1e-12 && worst_upper <= 1e-12 && worst_res <= 1e-10 && worst_1d <= 1e-10;
  d.add("%d runs", runs);
  d.add("max trace drop %.3e (tol 1e-12)", worst_drop);
  d.add("max Tr A0 - mean Tr A_i %.3e (tol 1e-12)", worst_upper);
  d.add("max residual %.3e (tol 1e-10)", worst_res);
  d.add("1-D closed-form gap %.3e (tol 1e-10)", worst_1d);
  o.detail = d.str();
  return o;
}

// Gaussian barycentric Talagrand: nonnegative deficit, zero at identity, lower bound.
Outcome criterion_5() {
  Outcome o;
  Detail d;
  std::mt19937_64 rng(55);
  double min_def = INFINITY, worst_bound = -INFINITY;
  for (int k = 0; k < 1000; ++k) {
    const int m = 2 + k % 3, n = 1 + (k / 3) % 3;
    const auto t = random_covariances(m, n, rng);
    const double def = talagrand_deficit(t).deficit;
    min_def = std::min(min_def, def);
    worst_bound = std::max(worst_bound, deficit_lower_bound(t) - def);
  }
  double at_id = 0.0;
  for (int m : {2, 3, 4})
    for (int n : {1, 2, 3}) at_id = std::max(at_id, std::abs(talagrand_deficit(identity_tuple(m, n, Convention::covariance)).deficit));
  o.pass = min_def >= -1e-9 && at_id <= 1e-15 && worst_bound <= 1e-9;
  d.add("min deficit %.3e (tol -1e-9)", min_def);
  d.add("deficit at identity %.3e (zero up to rounding, tol 1e-15)", at_id);
  d.add("max bound - deficit %.3e (tol 1e-9)", worst_bound);
  o.detail = d.str();
  return o;
}

// Deficit minimization reaches 0 at the identity; flat family for m = 2.
Outcome criterion_6() {
  Outcome o;
  Detail d;
  for (int n : {1, 2}) {
    const auto r = minimize_deficit(3, n, 16, 600 + n);
    const double dist = r.residuals.at("identity_distance");
    if (!(std::abs(r.best_value) <= 1e-7 && dist <= 1e-3)) o.pass = false;
    d.add("m=3 n=%d min %.3e dist %.3e", n, r.best_value, dist);
  }
  double flat = 0.0;
  for (double a : {0.5, 1.0, 2.0, 4.0})
    flat = std::max(flat, std::abs(talagrand_deficit(scalars({a, 1.0 / a}, Convention::covariance)).deficit));
  if (!(flat <= 1e-10)) o.pass = false;
  d.add("m=2 family max |deficit| %.3e (tol 1e-10)", flat);
  o.detail = d.str();
  return o;
}

// The linear-algebra step: m = 2 counterexample, rigidity for m >= 3, power identity.
Outcome criterion_7() {
  Outcome o;
  Detail d;
  const double alpha = 0.3;
  const auto rep2 = prop52_check(make_tuple({SymmetricMatrix::diagonal(Eigen::Vector2d(alpha, 1 - alpha)),
                                             SymmetricMatrix::diagonal(Eigen::Vector2d(1 - alpha, alpha))}));
  if (!(rep2.constraints_ok && rep2.distance >= 0.1)) o.pass = false;
  double power = rep2.power_residual;
  d.add("m=2 family ok=%d distance %.3f", rep2.constraints_ok ? 1 : 0, rep2.distance);
  for (int m : {3, 4}) {
    const auto s = prop52_search(m, 2, 200, 700 + m);
    if (!(s.max_distance <= 1e-6)) o.pass = false;
    d.add("m=%d %d/%d trials satisfied constraints, max distance %.3e (tol 1e-6)", m, s.successes, s.trials,
          s.max_distance);
    std::vector<SymmetricMatrix> x(m, SymmetricMatrix::scalar(2, 1.0 / m));
    power = std::max(power, prop52_check(make_tuple(x)).power_residual);
  }
  for (double a : {0.1, 0.25, 0.4}) {
    const auto r = prop52_check(make_tuple({SymmetricMatrix::diagonal(Eigen::Vector3d(a, 1 - a, a)),
                                            SymmetricMatrix::diagonal(Eigen::Vector3d(1 - a, a, 1 - a))}));
    power = std::max(power, r.power_residual);
  }
  if (!(power <= 1e-10)) o.pass = false;
  d.add("power identity max residual %.3e (tol 1e-10)", power);
  o.detail = d.str();
  return o;
}

// Functional volume product.
Outcome criterion_8() {
  Outcome o;
  Detail d;
  const double vg = volume_product(grid::gaussian(1.0, 8.0, 801));
  const double ve = volume_product(grid::exp_norm(20.0, 2001));
  double top = -INFINITY;
  for (const auto& f : fixture::even_log_concave()) top = std::max(top, volume_product(f));
  o.pass = std::abs(vg - 2 * M_PI) <= 1e-5 && std::abs(ve - 4.0) <= 1e-3 && top <= 2 * M_PI + 1e-3;
  d.add("v(gaussian) - 2pi = %.3e (tol 1e-5)", vg - 2 * M_PI);
  d.add("v(e^-|x|) - 4 = %.3e (tol 1e-3)", ve - 4.0);
  d.add("fixture max - 2pi = %.3e (tol 1e-3)", top - 2 * M_PI);
  o.detail = d.str();
  return o;
}

// Monotonicity along the rescaled self-convolution.
Outcome criterion_9() {
  Outcome o;
  Detail d;
  const double r8 = 8.0;
  const auto bs = scaled_datum(bs_datum(1), 1.0);
  const auto kw = scaled_datum(kw_datum(3, 1), 1.0);
  const auto inf_bs = optimize_inverse_constant(bs, Direction::inf, 8, 91);
  const auto inf_kw = optimize_inverse_constant(kw, Direction::inf, 8, 92);

  // Equality at Gaussian minimizers.
  double eq = 0.0;
  {
    std::vector<GridFunction> g;
    for (const auto& b : inf_bs.argopt.blocks) g.push_back(grid::gaussian(b(0, 0), 12.0, 801));
    eq = std::max(eq, std::abs(ball_monotonicity_check(bs, g, inf_bs.best_value).margin));
    // Another point of the minimizing curve a_1 a_2 = const.
    const double p = inf_bs.argopt.blocks[0](0, 0) * inf_bs.argopt.blocks[1](0, 0);
    g = {grid::gaussian(2.0 * std::sqrt(p), 12.0, 801), grid::gaussian(0.5 * std::sqrt(p), 12.0, 801)};
    eq = std::max(eq, std::abs(ball_monotonicity_check(bs, g, inf_bs.best_value).margin));
    std::vector<GridFunction> g3;
    for (const auto& b : inf_kw.argopt.blocks) g3.push_back(grid::gaussian(b(0, 0), r8, 161));
    eq = std::max(eq, std::abs(ball_monotonicity_check(kw, g3, inf_kw.best_value).margin));
  }

  // Non-Gaussian fixtures.
  double worst = INFINITY;
  auto quartic = [](double a, double e, double r, int n) {
    return make_grid_function(1, r, n, [=](const double* x) { return 0.5 * a * x[0] * x[0] + e * std::pow(x[0], 4); });
  };
  const std::vector<std::vector<GridFunction>> bs_cases = {
      {quartic(1.0, 0.05, r8, 801), quartic(1.0, 0.05, r8, 801)},
      {quartic(0.5, 0.1, r8, 801), grid::gaussian(1.0, r8, 801)},
      {make_grid_function(1, 12.0, 801, [](const double* x) { return std::log(std::cosh(2 * x[0])); }),
       quartic(1.0, 0.01, 12.0, 801)},
      {make_grid_function(1, r8, 801, [](const double* x) { return std::cosh(x[0]) - 1.0; }),
       quartic(2.0, 0.0, r8, 801)},
  };
  for (const auto& fs : bs_cases) worst = std::min(worst, ball_monotonicity_check(bs, fs, inf_bs.best_value).margin);
  const std::vector<std::vector<GridFunction>> kw_cases = {
      {quartic(1.0, 0.05, r8, 161), quartic(1.5, 0.0, r8, 161), quartic(0.5, 0.1, r8, 161)},
      {make_grid_function(1, r8, 161, [](const double* x) { return std::cosh(x[0]) - 1.0; }),
       quartic(1.0, 0.02, r8, 161), grid::gaussian(1.0, r8, 161)},
  };
  for (const auto& fs : kw_cases) worst = std::min(worst, ball_monotonicity_check(kw, fs, inf_kw.best_value).margin);

  o.pass = worst >= -1e-6 && eq <= 1e-6;
  d.add("min margin %.3e (tol -1e-6)", worst);
  d.add("max |margin| at Gaussian minimizers %.3e (tol 1e-6)", eq);
  o.detail = d.str();
  return o;
}

// CLT: monotone L1 distance and the uniform density at step 6.
Outcome criterion_10() {
  Outcome o;
  Detail d;
  double worst_rise = -INFINITY;
  for (const auto& f : fixture::even_log_concave()) {
    const auto steps = clt_experiment(f, 6);
    for (size_t k = 1; k < steps.size(); ++k)
      worst_rise = std::max(worst_rise, steps[k].l1_to_gaussian - steps[k - 1].l1_to_gaussian);
  }
  const auto u = clt_experiment(grid::indicator(1.0, 6.0, 1201), 6);
  const double last = u.back().l1_to_gaussian;
  o.pass = worst_rise <= 1e-9 && last <= 1e-3;
  d.add("max step-to-step increase %.3e (slack 1e-9)", worst_rise);
  d.add("uniform L1 at step 6 = %.4e (tol 1e-3)", last);
  o.detail = d.str();
  return o;
}

// Uniform log-concavity of convolutions over the (lambda1, lambda2) sweep.
Outcome criterion_11() {
  Outcome o;
  Detail d;
  const std::vector<double> ls = {0.5, 1.0, 2.0, 4.0};
  double worst = INFINITY;
  int cases = 0;
  for (size_t i = 0; i < ls.size(); ++i) {
    for (size_t j = i; j < ls.size(); ++j) {
      auto q = [](double l) {
        return make_grid_function(1, 8.0, 801, [l](const double* x) { return 0.5 * l * x[0] * x[0] + std::pow(x[0], 4) / 50; });
      };
      const auto f1 = q(ls[i]), f2 = q(ls[j]);
      const auto r = convolution_logconcavity_check(f1, f2);
      const double h = f1.spacing();
      const double bound = 1.0 / (1.0 / ls[i] + 1.0 / ls[j]);
      worst = std::min(worst, r.lambda_out - (bound - 10 * h * h));
      ++cases;
    }
  }
  o.pass = worst >= 0.0;
  d.add("%d pairs, min lambda_out - (bound - 10h^2) = %.3e", cases, worst);
  o.detail = d.str();
  return o;
}

// Affine surface area: identity attains the bound; grid mode matches closed form.
Outcome criterion_12() {
  Outcome o;
  Detail d;
  double worst_id = 0.0;
  for (int m : {2, 3, 4})
    for (int n : {1, 2, 3})
      for (double lam : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const auto r = affine_surface_product(kw_datum(m, n), identity_tuple(m, n), lam);
        worst_id = std::max(worst_id, std::abs(r.product / std::pow(2 * M_PI, n * m / 2.0) - 1.0));
      }
  double worst_grid = 0.0;
  for (double a : {0.5, 1.0, 2.0, 4.0}) {
    const auto v = grid::gaussian(a, 12.0 / std::sqrt(a), 2001);
    for (double lam : {0.0, 0.25, 0.5, 0.75, 1.0})
      worst_grid = std::max(worst_grid, std::abs(affine_surface_area_grid(v, lam) -
                                                 affine_surface_area_quadratic(SymmetricMatrix::scalar(1, a), lam)));
  }
  o.pass = worst_id <= 1e-14 && worst_grid <= 1e-4;
  d.add("identity product max rel gap %.3e", worst_id);
  d.add("grid vs closed form max gap %.3e (tol 1e-4)", worst_grid);
  o.detail = d.str();
  return o;
}

// p-limit: I_G(scaled kw(3,1))^{-p} against (2 pi)^{3/2}.
Outcome criterion_13() {
  Outcome o;
  Detail d;
  const double target = std::pow(2 * M_PI, 1.5);
  double gap = 0.0;
  std::string seq;
  for (double p : {0.5, 0.2, 0.1, 0.05, 0.02}) {
    const auto r = optimize_inverse_constant(scaled_datum(kw_datum(3, 1), p), Direction::inf, 16, 1300);
    const double v = std::exp(-p * r.best_log_value);
    gap = std::abs(v / target - 1.0);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%g:%.5f", seq.empty() ? "" : " ", p, v);
    seq += buf;
  }
  o.pass = gap <= 0.02;
  d.add("I^-p by p: %s", seq.c_str());
  d.add("target %.5f, final relative gap %.4f (tol 0.02)", target, gap);
  o.detail = d.str();
  return o;
}

const std::vector<std::pair<const char*, std::function<Outcome()>>> kCriteria = {
    {"closed form vs quadrature", criterion_1},
    {"KW constant", criterion_2},
    {"two-factor constant", criterion_3},
    {"barycenter trace bounds", criterion_4},
    {"Talagrand deficit", criterion_5},
    {"deficit minimization", criterion_6},
    {"linear-algebra rigidity", criterion_7},
    {"volume product", criterion_8},
    {"self-convolution monotonicity", criterion_9},
    {"CLT experiment", criterion_10},
    {"convolution regularity", criterion_11},
    {"affine surface area", criterion_12},
    {"p-limit", criterion_13},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  if (only < 0 || only > static_cast<int>(kCriteria.size())) {
    std::fprintf(stderr, "criterion must be in 1..%zu\n", kCriteria.size());
    return 2;
  }
  bool all = true;
  for (size_t k = 0; k < kCriteria.size(); ++k) {
    if (only != 0 && static_cast<int>(k + 1) != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = kCriteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("criterion %2zu %-30s %s  [%.1f s] %s\n", k + 1, kCriteria[k].first, o.pass ? "PASS" : "FAIL",
                seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
