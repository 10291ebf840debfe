#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "blsat/functional_bl.hpp"
#include "blsat/gaussian_transport.hpp"
#include "blsat_cli/cli.hpp"

#ifndef BLSAT_VERSION
#define BLSAT_VERSION "unknown"
#endif

namespace blsat::cli {

json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

namespace {

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

json matrix_json(const SymmetricMatrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.dim(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.dim(); ++j) r.push_back(number(m(i, j)));
    rows.push_back(r);
  }
  return rows;
}

json tuple_json(const GaussianTuple& t) {
  json a = json::array();
  for (const auto& b : t.blocks) a.push_back(matrix_json(b));
  return a;
}

SymmetricMatrix to_matrix(const json& v) {
  if (v.is_number()) return SymmetricMatrix::scalar(1, v.get<double>());
  const int n = static_cast<int>(v.size());
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = v[i][j].get<double>();
  return SymmetricMatrix(m);
}

GaussianTuple to_tuple(const json& v, Convention c) {
  std::vector<SymmetricMatrix> b;
  for (const auto& x : v) b.push_back(to_matrix(x));
  return make_tuple(b, c);
}

Convention to_convention(const json& p) {
  return p.value("convention", "precision") == "covariance" ? Convention::covariance : Convention::precision;
}

BLDatum to_datum(const json& d) {
  const auto kind = d["kind"].get<std::string>();
  BLDatum out;
  if (kind == "bs") {
    out = bs_datum(d["n"].get<int>());
  } else if (kind == "kw") {
    out = kw_datum(d["m"].get<int>(), d["n"].get<int>());
  } else {
    out = make_datum(d["dims"].get<std::vector<int>>(), d["exponents"].get<std::vector<double>>(), to_matrix(d["kernel"]));
  }
  if (d.contains("p")) out = scaled_datum(out, d["p"].get<double>());
  return out;
}

GridFunction to_function(const json& f, const std::filesystem::path& base) {
  const auto kind = f["kind"].get<std::string>();
  if (kind == "file") {
    std::filesystem::path p = f["path"].get<std::string>();
    if (p.is_relative()) p = base / p;
    std::ifstream is(p);
    if (!is) throw Error(ErrorCode::ConfigError, "$.path: cannot open " + p.string());
    return read_grid_function(is);
  }
  const double r = f["R"].get<double>();
  const int n = f["N"].get<int>();
  const int dim = f["dim"].get<int>();
  if (kind == "gaussian") return grid::gaussian(f["a"].get<double>(), r, n, dim);
  if (kind == "exp_norm") return grid::exp_norm(r, n, dim);
  if (kind == "quartic") return grid::quartic(f["a"].get<double>(), f["eps"].get<double>(), r, n, dim);
  if (kind == "indicator") return grid::indicator(f["half_width"].get<double>(), r, n, dim);
  std::vector<double> phi;
  for (const auto& x : f["potential"]) phi.push_back(x.is_string() ? kInfPotential : x.get<double>());
  return grid::tabulated(dim, r, n, std::move(phi));
}

std::vector<GridFunction> to_functions(const json& fs, const std::filesystem::path& base) {
  std::vector<GridFunction> out;
  for (const auto& f : fs) out.push_back(to_function(f, base));
  return out;
}

std::string grid_text(const GridFunction& f) {
  std::ostringstream os;
  write_grid_function(os, f);
  return os.str();
}

json datum_json(const BLDatum& d) {
  return {{"dims", d.dims}, {"exponents", numbers(d.exponents)}, {"kernel", matrix_json(d.kernel)}};
}

OptimizerConfig optimizer_config(const json& p, int threads) {
  OptimizerConfig c;
  c.max_iter = p["max_iter"].get<int>();
  c.grad_tol = p["grad_tol"].get<double>();
  c.mu_end = p["mu_end"].get<double>();
  c.threads = threads;
  return c;
}

Table trace_table(const OptimizationResult& r) {
  Table t{"trace", {"start", "stage", "mu", "value", "grad_norm", "decrement", "iterations"}, {}};
  for (const auto& e : r.trace)
    t.rows.push_back({double(e.start), double(e.stage), e.mu, e.value, e.grad_norm, e.decrement, double(e.iterations)});
  return t;
}

void put_optimization(ExperimentReport& rep, const OptimizationResult& r) {
  rep.results["best_value"] = number(r.best_value);
  rep.results["best_log_value"] = number(r.best_log_value);
  rep.results["converged"] = r.converged;
  rep.results["extremum"] = to_string(r.extremum);
  rep.results["starts_used"] = r.starts_used;
  rep.results["best_start"] = r.best_start;
  rep.results["start_values"] = numbers(r.start_values);
  if (!r.argopt.blocks.empty()) rep.results["argopt"] = tuple_json(r.argopt);
  for (const auto& [k, v] : r.residuals) rep.residuals[k] = number(v);
  rep.tables.push_back(trace_table(r));
  if (!r.converged) rep.exit_code = 4;
}

std::uint64_t seed_of(const ExperimentConfig& c) { return c.seed.value_or(0); }

using Handler = std::function<void(const ExperimentConfig&, int, ExperimentReport&)>;

void cmd_datum(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto d = to_datum(c.params["datum"]);
  rep.results = datum_json(d);
  rep.results["total_dim"] = d.total_dim();
  const auto sig = signature(d.kernel);
  rep.results["kernel_signature"] = {{"negative", sig.n_neg}, {"zero", sig.n_zero}, {"positive", sig.n_pos}};
  const auto bw = bw_nondegenerate(d);
  rep.results["nondegenerate"] = bw.nondegenerate;
  rep.results["s_minus"] = bw.s_minus;
  rep.results["gaussian_constant_prefactor_log"] = number(kw_constant_prefactor_log(d));
}

void cmd_bl_value(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto d = to_datum(c.params["datum"]);
  const auto t = to_tuple(c.params["tuple"], to_convention(c.params));
  const auto m = assemble_M(d, t);
  rep.results["log_bl"] = number(log_bl_gaussian_value(d, t));
  rep.results["bl"] = number(bl_gaussian_value(d, t));
  rep.results["feasible"] = gaussian_feasible(d, t);
  rep.results["kw_objective"] = number(kw_gaussian_objective(d, t));
  rep.results["M_min_eigenvalue"] = number(min_eigenvalue(m));
  rep.results["boundary_scale"] = number(boundary_scale(d, t));
}

void cmd_kw_verify(const ExperimentConfig& c, int threads, ExperimentReport& rep) {
  const auto& p = c.params;
  // An explicit datum replaces kw(m, n); the (2 pi)^{nm/2} target only applies to the latter.
  const bool custom = p.contains("datum");
  const auto d = custom ? to_datum(p["datum"]) : kw_datum(p["m"].get<int>(), p["n"].get<int>());
  const auto r = optimize_kw_constant(d, p["starts"].get<int>(), seed_of(c), optimizer_config(p, threads));
  put_optimization(rep, r);
  rep.results["constant"] = number(std::exp(kw_constant_prefactor_log(d) + 0.5 * r.best_value));
  if (!custom) rep.results["target"] = number(std::pow(2 * M_PI, 0.5 * d.total_dim()));

  // Independent sampling on a stream separate from the optimizer's.
  std::mt19937_64 rng(seed_of(c) ^ 0x9e3779b97f4a7c15ULL);
  const int samples = p["samples"].get<int>();
  double top = -INFINITY;
  for (int s = 0; s < samples; ++s) top = std::max(top, kw_gaussian_objective(d, random_feasible_tuple(d, rng)));
  rep.results["samples"] = samples;
  rep.results["max_sampled_objective"] = number(top);
}

void cmd_inverse_constant(const ExperimentConfig& c, int threads, ExperimentReport& rep) {
  const auto& p = c.params;
  const auto d = to_datum(p["datum"]);
  const auto dir = p["direction"] == "sup" ? Direction::sup : Direction::inf;
  const auto r = optimize_inverse_constant(d, dir, p["starts"].get<int>(), seed_of(c), optimizer_config(p, threads));
  put_optimization(rep, r);
  rep.results["direction"] = to_string(dir);
}

void cmd_stationarity(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto d = to_datum(c.params["datum"]);
  const auto t = to_tuple(c.params["tuple"], to_convention(c.params));
  for (const auto& [k, v] : stationarity_residuals(d, t)) rep.residuals[k] = number(v);
  rep.results["log_bl"] = number(log_bl_gaussian_value(d, t));
}

void cmd_prop52(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto& p = c.params;
  const double tol = p["tol"].get<double>();
  if (p["mode"] == "check") {
    const auto r = prop52_check(to_tuple(p["tuple"], Convention::precision), tol);
    rep.results["constraints_ok"] = r.constraints_ok;
    rep.results["bounds_ok"] = r.bounds_ok;
    rep.results["min_eigenvalue"] = number(r.min_eigenvalue);
    rep.results["max_eigenvalue"] = number(r.max_eigenvalue);
    rep.results["lambda"] = number(r.lambda);
    rep.results["alpha"] = number(r.alpha);
    rep.results["distance"] = number(r.distance);
    rep.residuals["sum"] = number(r.sum_residual);
    rep.residuals["equal"] = number(r.equal_residual);
    rep.residuals["scalar"] = number(r.scalar_residual);
    rep.residuals["power"] = number(r.power_residual);
    rep.residuals["eigenvector"] = number(r.eigvec_residual);
    return;
  }
  const auto r = prop52_search(p["m"].get<int>(), p["n"].get<int>(), p["trials"].get<int>(), seed_of(c), tol);
  rep.results["trials"] = r.trials;
  rep.results["successes"] = r.successes;
  rep.results["max_distance"] = number(r.max_distance);
  rep.results["distances"] = numbers(r.distances);
  Table t{"trials", {"trial", "residual"}, {}};
  for (size_t i = 0; i < r.residuals.size(); ++i) t.rows.push_back({double(i), r.residuals[i]});
  rep.tables.push_back(t);
}

BarycenterConfig barycenter_config(const json& p) {
  BarycenterConfig b;
  b.tol = p["tol"].get<double>();
  b.max_iter = p["max_iter"].get<int>();
  return b;
}

void put_barycenter(ExperimentReport& rep, const BarycenterResult& r) {
  rep.results["A0"] = matrix_json(r.A0);
  rep.results["iterations"] = r.iterations;
  rep.results["converged"] = r.converged;
  rep.results["trace_A0"] = number(r.A0.trace());
  rep.residuals["fixed_point"] = number(r.fixed_point_residual);
  Table t{"trace_sequence", {"iteration", "trace"}, {}};
  for (size_t k = 0; k < r.trace_sequence.size(); ++k) t.rows.push_back({double(k + 1), r.trace_sequence[k]});
  rep.tables.push_back(t);
  if (!r.converged) rep.exit_code = 4;
}

void cmd_barycenter(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto& p = c.params;
  const auto t = to_tuple(p["covariances"], Convention::covariance);
  std::optional<SymmetricMatrix> s0;
  if (p.contains("start")) s0 = to_matrix(p["start"]);
  put_barycenter(rep, barycenter_fixed_point(t, s0, barycenter_config(p)));
  double mean_tr = 0.0;
  for (const auto& b : t.blocks) mean_tr += b.trace() / t.m();
  rep.results["mean_trace"] = number(mean_tr);
}

void cmd_deficit(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto t = to_tuple(c.params["covariances"], Convention::covariance);
  const auto r = talagrand_deficit(t, barycenter_config(c.params));
  put_barycenter(rep, r.barycenter);
  rep.results["deficit"] = number(r.deficit);
  rep.results["deficit_reassembled"] = number(r.deficit_reassembled);
  rep.results["lower_bound"] = number(deficit_lower_bound(t));
  rep.results["entropy_terms"] = numbers(r.entropy_terms);
  rep.results["transport_term"] = number(r.transport_term);
  rep.residuals["reassembly"] = number(std::abs(r.deficit - r.deficit_reassembled));
}

void cmd_deficit_minimize(const ExperimentConfig& c, int threads, ExperimentReport& rep) {
  const auto& p = c.params;
  DeficitMinConfig cfg;
  cfg.max_iter = p["max_iter"].get<int>();
  cfg.grad_tol = p["grad_tol"].get<double>();
  cfg.fd_step = p["fd_step"].get<double>();
  cfg.threads = threads;
  put_optimization(rep, minimize_deficit(p["m"].get<int>(), p["n"].get<int>(), p["starts"].get<int>(), seed_of(c), cfg));
}

Table profile_table(const std::string& name, const GridFunction& f, const char* x, const char* y) {
  Table t{name, {x, y}, {}};
  if (f.dim() != 1) return t;
  for (int j = 0; j < f.points(); ++j) t.rows.push_back({f.coord(j), f.phi(j)});
  return t;
}

void put_grid(ExperimentReport& rep, const std::string& name, const GridFunction& g) {
  rep.results[name] = {{"dim", g.dim()}, {"radius", number(g.radius())}, {"points", g.points()}};
  rep.grids.push_back({name, grid_text(g)});
  if (g.dim() == 1) rep.tables.push_back(profile_table(name, g, "x", "potential"));
}

void cmd_legendre(const ExperimentConfig& c, int, ExperimentReport& rep, bool polar) {
  const auto& p = c.params;
  const auto f = to_function(p["function"], c.base_dir);
  const double r = p["dual_radius"].get<double>();
  const int n = p["dual_points"].get<int>();
  const auto g = polar ? polar_function(f, r, n) : legendre_transform(f, r, n, p["edge_rule"].get<bool>());
  put_grid(rep, polar ? "polar" : "legendre", g);
  int finite = 0;
  for (double v : g.potential()) finite += std::isfinite(v);
  rep.results["finite_points"] = finite;
  rep.results["log_integral"] = number(log_integral(g));
}

void cmd_polar_tuple(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto d = to_datum(c.params["datum"]);
  const auto fs = to_functions(c.params["functions"], c.base_dir);
  const auto out = polar_tuple(d, fs);
  double violation = -INFINITY;
  for (size_t i = 0; i < out.size(); ++i) {
    for (int j = 0; j < out[i].size(); ++j) {
      const double a = out[i].potential()[j], b = fs[i].potential()[j];
      if (std::isfinite(b)) violation = std::max(violation, std::isfinite(a) ? a - b : INFINITY);
    }
    put_grid(rep, "polar_tuple_" + std::to_string(i), out[i]);
  }
  rep.results["duality_max_input"] = number(duality_check(d, fs));
  rep.results["duality_max_output"] = number(duality_check(d, out));
  // max (Phi_i - phi_i); <= 0 means F_i >= f_i everywhere.
  rep.results["domination_violation"] = number(violation);
}

void cmd_duality_check(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto d = to_datum(c.params["datum"]);
  const double v = duality_check(d, to_functions(c.params["functions"], c.base_dir));
  rep.results["max_value"] = number(v);
  rep.results["dual"] = v <= c.params["tol"].get<double>();
}

void cmd_volume_product(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto& p = c.params;
  const auto f = to_function(p["function"], c.base_dir);
  const double v = volume_product(f, p["dual_radius"].get<double>(), p["dual_points"].get<int>());
  const double bound = std::pow(2 * M_PI, f.dim());
  rep.results["volume_product"] = number(v);
  rep.results["bound"] = number(bound);
  rep.results["gap"] = number(v - bound);
}

void cmd_surface_area(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto& p = c.params;
  const double lambda = p["lambda"].get<double>();
  const auto mode = p["mode"].get<std::string>();
  rep.results["mode"] = mode;
  if (mode == "quadratic") {
    rep.results["surface_area"] = number(affine_surface_area_quadratic(to_matrix(p["matrix"]), lambda));
  } else if (mode == "grid") {
    rep.results["surface_area"] =
        number(affine_surface_area_grid(to_function(p["function"], c.base_dir), lambda, p["convexity_tol"].get<double>()));
  } else {
    const auto r = affine_surface_product(to_datum(p["datum"]), to_tuple(p["tuple"], Convention::precision), lambda);
    rep.results["product"] = number(r.product);
    rep.results["bound"] = number(r.bound);
    rep.results["hypothesis_holds"] = r.hypothesis_holds;
  }
}

void cmd_bl_grid(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto d = to_datum(c.params["datum"]);
  const auto r = bl_functional_grid(d, to_functions(c.params["functions"], c.base_dir), c.params["boundary_tol"].get<double>());
  rep.results["value"] = number(r.value);
  rep.results["log_value"] = number(r.log_value);
  rep.results["divergent"] = r.divergent;
  rep.residuals["boundary_fraction"] = number(r.boundary_fraction);
  rep.residuals["richardson_error"] = r.richardson_error ? number(*r.richardson_error) : json(nullptr);
}

void cmd_ball_monotonicity(const ExperimentConfig& c, int threads, ExperimentReport& rep) {
  const auto& p = c.params;
  const auto d = to_datum(p["datum"]);
  double reference;
  if (p.contains("reference")) {
    reference = p["reference"].get<double>();
  } else {
    OptimizerConfig oc;
    oc.threads = threads;
    const auto r = optimize_inverse_constant(d, Direction::inf, p["starts"].get<int>(), seed_of(c), oc);
    reference = r.best_value;
    rep.results["reference_converged"] = r.converged;
  }
  const auto r = ball_monotonicity_check(d, to_functions(p["functions"], c.base_dir), reference);
  rep.results["margin"] = number(r.margin);
  rep.results["bl_input"] = number(r.bl_input);
  rep.results["bl_convolved"] = number(r.bl_convolved);
  rep.results["reference"] = number(r.reference);
}

void cmd_clt(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto& p = c.params;
  const auto method = p["method"] == "fft" ? ConvolutionMethod::fft : ConvolutionMethod::direct;
  const auto steps = clt_experiment(to_function(p["function"], c.base_dir), p["steps"].get<int>(), method);
  Table t{"clt", {"step", "l1_to_gaussian", "mass", "variance", "lambda_est", "Lambda_est"}, {}};
  double worst = -INFINITY;
  for (size_t k = 0; k < steps.size(); ++k) {
    const auto& s = steps[k];
    t.rows.push_back({double(s.step), s.l1_to_gaussian, s.mass, s.variance, s.lambda_est, s.Lambda_est});
    if (k > 0) worst = std::max(worst, s.l1_to_gaussian - steps[k - 1].l1_to_gaussian);
  }
  rep.tables.push_back(t);
  rep.results["final_l1"] = number(steps.back().l1_to_gaussian);
  rep.results["max_increase"] = number(worst);
  rep.results["final_variance"] = number(steps.back().variance);
}

void cmd_logconcavity(const ExperimentConfig& c, int, ExperimentReport& rep) {
  const auto& p = c.params;
  const auto fs = to_functions(p["functions"], c.base_dir);
  const auto r = convolution_logconcavity_check(fs[0], fs[1], p["window_fraction"].get<double>(), p["tol_factor"].get<double>());
  rep.results["lambda"] = numbers({r.lambda1, r.lambda2});
  rep.results["Lambda"] = numbers({r.Lambda1, r.Lambda2});
  rep.results["lambda_out"] = number(r.lambda_out);
  rep.results["Lambda_out"] = number(r.Lambda_out);
  rep.results["lambda_bound"] = number(r.lambda_bound);
  rep.results["Lambda_bound"] = number(r.Lambda_bound);
  rep.results["tolerance"] = number(r.tolerance);
  rep.results["lambda_ok"] = r.lambda_ok;
  rep.results["Lambda_checked"] = r.Lambda_checked;
  rep.results["Lambda_ok"] = r.Lambda_ok;
  rep.results["ok"] = r.ok;
}

void cmd_p_limit(const ExperimentConfig& c, int threads, ExperimentReport& rep) {
  const auto& p = c.params;
  const auto base = to_datum(p["datum"]);
  const double target = std::pow(2 * M_PI, 0.5 * base.total_dim());
  const auto oc = optimizer_config(p, threads);
  Table t{"p_limit", {"p", "log_constant", "inverse_power", "relative_gap"}, {}};
  bool all_converged = true;
  double gap = 0.0;
  for (const auto& pj : p["ps"]) {
    const double pv = pj.get<double>();
    const auto r = optimize_inverse_constant(scaled_datum(base, pv), Direction::inf, p["starts"].get<int>(), seed_of(c), oc);
    const double v = std::exp(-pv * r.best_log_value);
    gap = std::abs(v / target - 1.0);
    t.rows.push_back({pv, r.best_log_value, v, gap});
    all_converged = all_converged && r.converged;
  }
  rep.tables.push_back(t);
  rep.results["target"] = number(target);
  rep.results["final_relative_gap"] = number(gap);
  rep.results["converged"] = all_converged;
  if (!all_converged) rep.exit_code = 4;
}

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h = {
      {"datum", cmd_datum},
      {"bl-value", cmd_bl_value},
      {"kw-verify", cmd_kw_verify},
      {"inverse-constant", cmd_inverse_constant},
      {"stationarity", cmd_stationarity},
      {"prop52", cmd_prop52},
      {"barycenter", cmd_barycenter},
      {"deficit", cmd_deficit},
      {"deficit-minimize", cmd_deficit_minimize},
      {"legendre", [](const ExperimentConfig& c, int t, ExperimentReport& r) { cmd_legendre(c, t, r, false); }},
      {"polar", [](const ExperimentConfig& c, int t, ExperimentReport& r) { cmd_legendre(c, t, r, true); }},
      {"polar-tuple", cmd_polar_tuple},
      {"duality-check", cmd_duality_check},
      {"volume-product", cmd_volume_product},
      {"surface-area", cmd_surface_area},
      {"bl-grid", cmd_bl_grid},
      {"ball-monotonicity", cmd_ball_monotonicity},
      {"clt", cmd_clt},
      {"logconcavity-check", cmd_logconcavity},
      {"p-limit", cmd_p_limit},
  };
  return h;
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json table_json(const Table& t) {
  json rows = json::array();
  for (const auto& r : t.rows) rows.push_back(numbers(r));
  return {{"columns", t.columns}, {"rows", rows}};
}

}  // namespace

int effective_threads(const ExperimentConfig& cfg) {
  int t = cfg.threads;
  if (const char* env = std::getenv("BLSAT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) t = static_cast<int>(v);
  }
  if (t <= 0) t = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return t;
}

json ExperimentReport::to_json() const {
  json doc;
  doc["command"] = command;
  doc["config"] = config;
  doc["results"] = results;
  doc["residuals"] = residuals;
  json trace = json::object();
  for (const auto& t : tables) trace[t.name] = table_json(t);
  doc["trace"] = trace;
  json files = json::array();
  for (const auto& t : tables) files.push_back(t.name + ".csv");
  for (const auto& g : grids) files.push_back(g.name + ".grid");
  doc["outputs"] = files;
  doc["exit_code"] = exit_code;
  doc["provenance"] = provenance;
  return doc;
}

ExperimentReport execute(const ExperimentConfig& cfg) {
  const auto h = handlers().find(cfg.command);
  if (h == handlers().end()) throw Error(ErrorCode::ConfigError, "$.command: unknown command '" + cfg.command + "'");
  ExperimentReport rep;
  rep.command = cfg.command;
  rep.config = json::object();
  rep.config["command"] = cfg.command;
  for (auto it = cfg.params.begin(); it != cfg.params.end(); ++it) rep.config[it.key()] = it.value();
  rep.config["seed"] = cfg.seed ? json(*cfg.seed) : json(nullptr);
  rep.config["threads"] = cfg.threads;

  const int threads = effective_threads(cfg);
  const auto started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  h->second(cfg, threads, rep);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  rep.provenance = {{"version", BLSAT_VERSION},
                    {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)},
                    {"threads", threads},
                    {"started_at", started},
                    {"wall_time_s", wall}};
  return rep;
}

void write_outputs(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "report.json");
    os << report.to_json().dump(2) << "\n";
    if (!os) throw Error(ErrorCode::InvalidInput, "cannot write " + (dir / "report.json").string());
  }
  for (const auto& t : report.tables) {
    std::ofstream os(dir / (t.name + ".csv"));
    for (size_t j = 0; j < t.columns.size(); ++j) os << (j ? "," : "") << t.columns[j];
    os << "\n";
    char buf[32];
    for (const auto& row : t.rows) {
      for (size_t j = 0; j < row.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", row[j]);
        os << (j ? "," : "") << buf;
      }
      os << "\n";
    }
  }
  for (const auto& g : report.grids) {
    std::ofstream os(dir / (g.name + ".grid"));
    os << g.text;
  }
}

int exit_code_for(const std::exception& e) {
  if (const auto* be = dynamic_cast<const Error*>(&e)) {
    switch (be->code()) {
      case ErrorCode::ConfigError:
        return 2;
      case ErrorCode::Infeasible:
      case ErrorCode::Unbounded:
        return 3;
      case ErrorCode::NotConverged:
        return 4;
      default:
        return 1;
    }
  }
  return 1;
}

}  // namespace blsat::cli
