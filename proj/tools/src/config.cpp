#include <cmath>
#include <functional>
#include <limits>
#include <map>

#include "blsat/error.hpp"
#include "blsat_cli/cli.hpp"

namespace blsat::cli {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ConfigError, path + ": " + what);
}

enum class Kind { integer, number, boolean, choice, matrix, matrices, numbers, datum, function, functions };

struct Key {
  std::string name;
  Kind kind;
  json def = nullptr;  // null: no default
  bool required = false;
  double min = -std::numeric_limits<double>::infinity();
  std::vector<std::string> choices = {};
};

Key req(std::string name, Kind k, double min = -std::numeric_limits<double>::infinity()) {
  return {std::move(name), k, nullptr, true, min};
}
Key opt(std::string name, Kind k, json def, double min = -std::numeric_limits<double>::infinity()) {
  return {std::move(name), k, std::move(def), false, min};
}
Key pick(std::string name, json def, std::vector<std::string> choices) {
  return {std::move(name), Kind::choice, std::move(def), false, -std::numeric_limits<double>::infinity(),
          std::move(choices)};
}

const double kTiny = std::numeric_limits<double>::min();

std::vector<Key> optimizer_keys() {
  return {opt("max_iter", Kind::integer, 5000, 1), opt("grad_tol", Kind::number, 1e-9, kTiny),
          opt("mu_end", Kind::number, 1e-8, kTiny)};
}

std::vector<Key> join(std::vector<Key> a, const std::vector<Key>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const json kDefaultPs = json::array({0.5, 0.2, 0.1, 0.05, 0.02});

const std::map<std::string, std::vector<Key>>& schemas() {
  static const std::map<std::string, std::vector<Key>> s = {
      {"datum", {req("datum", Kind::datum)}},
      {"bl-value",
       {req("datum", Kind::datum), req("tuple", Kind::matrices), pick("convention", "precision", {"precision", "covariance"})}},
      {"kw-verify", join({opt("m", Kind::integer, 3, 2), opt("n", Kind::integer, 1, 1), opt("datum", Kind::datum, nullptr),
                          opt("starts", Kind::integer, 32, 1),
                          opt("samples", Kind::integer, 10000, 0)},
                         optimizer_keys())},
      {"inverse-constant", join({req("datum", Kind::datum), pick("direction", "inf", {"inf", "sup"}),
                                 opt("starts", Kind::integer, 16, 1)},
                                optimizer_keys())},
      {"stationarity",
       {req("datum", Kind::datum), req("tuple", Kind::matrices), pick("convention", "precision", {"precision", "covariance"})}},
      {"prop52",
       {pick("mode", nullptr, {"check", "search"}), opt("tuple", Kind::matrices, nullptr), opt("m", Kind::integer, 3, 2),
        opt("n", Kind::integer, 1, 1), opt("trials", Kind::integer, 200, 1), opt("tol", Kind::number, 1e-8, kTiny)}},
      {"barycenter",
       {req("covariances", Kind::matrices), opt("start", Kind::matrix, nullptr), opt("tol", Kind::number, 1e-12, kTiny),
        opt("max_iter", Kind::integer, 10000, 1)}},
      {"deficit",
       {req("covariances", Kind::matrices), opt("tol", Kind::number, 1e-12, kTiny), opt("max_iter", Kind::integer, 10000, 1)}},
      {"deficit-minimize",
       {opt("m", Kind::integer, 3, 2), opt("n", Kind::integer, 1, 1), opt("starts", Kind::integer, 16, 1),
        opt("max_iter", Kind::integer, 500, 1), opt("grad_tol", Kind::number, 1e-8, kTiny),
        opt("fd_step", Kind::number, 1e-6, kTiny)}},
      {"legendre",
       {req("function", Kind::function), opt("dual_radius", Kind::number, 0.0, 0.0), opt("dual_points", Kind::integer, 0, 0),
        opt("edge_rule", Kind::boolean, true)}},
      {"polar",
       {req("function", Kind::function), opt("dual_radius", Kind::number, 0.0, 0.0), opt("dual_points", Kind::integer, 0, 0)}},
      {"polar-tuple", {req("datum", Kind::datum), req("functions", Kind::functions)}},
      {"duality-check", {req("datum", Kind::datum), req("functions", Kind::functions), opt("tol", Kind::number, 1e-9, 0.0)}},
      {"volume-product",
       {req("function", Kind::function), opt("dual_radius", Kind::number, 0.0, 0.0), opt("dual_points", Kind::integer, 0, 0)}},
      {"surface-area",
       {pick("mode", nullptr, {"quadratic", "grid", "product"}), req("lambda", Kind::number),
        opt("matrix", Kind::matrix, nullptr), opt("function", Kind::function, nullptr), opt("datum", Kind::datum, nullptr),
        opt("tuple", Kind::matrices, nullptr), opt("convexity_tol", Kind::number, 1e-8, 0.0)}},
      {"bl-grid",
       {req("datum", Kind::datum), req("functions", Kind::functions), opt("boundary_tol", Kind::number, 1e-6, 0.0)}},
      {"ball-monotonicity",
       {req("datum", Kind::datum), req("functions", Kind::functions), opt("reference", Kind::number, nullptr, kTiny),
        opt("starts", Kind::integer, 8, 1)}},
      {"clt",
       {req("function", Kind::function), opt("steps", Kind::integer, 6, 0), pick("method", "direct", {"direct", "fft"})}},
      {"logconcavity-check",
       {req("functions", Kind::functions), opt("window_fraction", Kind::number, 0.5, kTiny),
        opt("tol_factor", Kind::number, 10.0, 0.0)}},
      {"p-limit", join({opt("datum", Kind::datum, json{{"kind", "kw"}, {"m", 3}, {"n", 1}}), opt("ps", Kind::numbers, kDefaultPs),
                        opt("starts", Kind::integer, 16, 1)},
                       optimizer_keys())},
  };
  return s;
}

std::string member(const std::string& path, const std::string& key) { return path + "." + key; }
std::string index(const std::string& path, size_t i) { return path + "[" + std::to_string(i) + "]"; }

void check_number(const json& v, const std::string& path, double min = -std::numeric_limits<double>::infinity()) {
  if (!v.is_number()) fail(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "expected a finite number");
  if (x < min) fail(path, "must be >= " + json(min).dump());
}

void check_integer(const json& v, const std::string& path, double min) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  if (static_cast<double>(v.get<std::int64_t>()) < min) fail(path, "must be >= " + json(min).dump());
}

void check_matrix(const json& v, const std::string& path) {
  if (v.is_number()) return check_number(v, path);
  if (!v.is_array() || v.empty()) fail(path, "expected a number or a square array of rows");
  const size_t n = v.size();
  for (size_t i = 0; i < n; ++i) {
    const auto& row = v[i];
    if (!row.is_array() || row.size() != n) fail(index(path, i), "expected a row of length " + std::to_string(n));
    for (size_t j = 0; j < n; ++j) check_number(row[j], index(index(path, i), j));
  }
}

// Validates an object against keys, filling defaults. Returns the canonical
// object with keys in schema order.
json check_object(const json& v, const std::string& path, const std::vector<Key>& keys,
                  const std::vector<std::string>& extra = {});

json check_value(const json& v, const std::string& path, const Key& k);

json check_datum(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  if (!v.contains("kind")) fail(member(path, "kind"), "missing required key");
  const auto& kind = v["kind"];
  if (!kind.is_string()) fail(member(path, "kind"), "expected a string");
  const auto s = kind.get<std::string>();
  std::vector<Key> keys{{"kind", Kind::choice, nullptr, true, 0, {"bs", "kw", "custom"}}};
  if (s == "bs") {
    keys.push_back(opt("n", Kind::integer, 1, 1));
  } else if (s == "kw") {
    keys.push_back(opt("m", Kind::integer, 3, 2));
    keys.push_back(opt("n", Kind::integer, 1, 1));
  } else if (s == "custom") {
    keys.push_back(req("dims", Kind::numbers));
    keys.push_back(req("exponents", Kind::numbers));
    keys.push_back(req("kernel", Kind::matrix));
  } else {
    fail(member(path, "kind"), "expected one of bs, kw, custom");
  }
  keys.push_back(opt("p", Kind::number, nullptr, kTiny));
  auto out = check_object(v, path, keys);
  if (s == "custom") {
    for (size_t i = 0; i < out["dims"].size(); ++i) check_integer(out["dims"][i], index(member(path, "dims"), i), 1);
    for (size_t i = 0; i < out["exponents"].size(); ++i)
      check_number(out["exponents"][i], index(member(path, "exponents"), i), kTiny);
  }
  return out;
}

json check_function(const json& v, const std::string& path) {
  if (!v.is_object()) fail(path, "expected an object");
  if (!v.contains("kind")) fail(member(path, "kind"), "missing required key");
  if (!v["kind"].is_string()) fail(member(path, "kind"), "expected a string");
  const auto s = v["kind"].get<std::string>();
  std::vector<Key> keys{{"kind", Kind::choice, nullptr, true, 0, {"gaussian", "exp_norm", "quartic", "indicator", "file", "values"}}};
  auto grid_keys = [&](bool with_defaults) {
    if (with_defaults) {
      keys.push_back(opt("R", Kind::number, 8.0, kTiny));
      keys.push_back(opt("N", Kind::integer, 801, 3));
    } else {
      keys.push_back(req("R", Kind::number, kTiny));
      keys.push_back(req("N", Kind::integer, 3));
    }
    keys.push_back(opt("dim", Kind::integer, 1, 1));
  };
  if (s == "gaussian") {
    keys.push_back(opt("a", Kind::number, 1.0, kTiny));
    grid_keys(true);
  } else if (s == "exp_norm") {
    grid_keys(true);
  } else if (s == "quartic") {
    keys.push_back(opt("a", Kind::number, 1.0, 0.0));
    keys.push_back(opt("eps", Kind::number, 0.01, 0.0));
    grid_keys(true);
  } else if (s == "indicator") {
    keys.push_back(opt("half_width", Kind::number, 1.0, kTiny));
    grid_keys(true);
  } else if (s == "file") {
    keys.push_back(req("path", Kind::choice));
  } else if (s == "values") {
    grid_keys(false);
    keys.push_back(req("potential", Kind::numbers));
  } else {
    fail(member(path, "kind"), "expected one of gaussian, exp_norm, quartic, indicator, file, values");
  }
  auto out = check_object(v, path, keys);
  if (out.contains("N") && out["N"].get<int>() % 2 == 0) fail(member(path, "N"), "grid size must be odd");
  if (s == "values") {
    const auto& p = out["potential"];
    for (size_t i = 0; i < p.size(); ++i) {
      const auto& x = p[i];
      if (x.is_string() && x.get<std::string>() == "inf") continue;
      if (!x.is_number()) fail(index(member(path, "potential"), i), "expected a number or \"inf\"");
    }
  }
  return out;
}

json check_value(const json& v, const std::string& path, const Key& k) {
  switch (k.kind) {
    case Kind::integer:
      check_integer(v, path, k.min);
      return v;
    case Kind::number:
      check_number(v, path, k.min);
      return v;
    case Kind::boolean:
      if (!v.is_boolean()) fail(path, "expected true or false");
      return v;
    case Kind::choice: {
      if (!v.is_string()) fail(path, "expected a string");
      if (k.choices.empty()) return v;
      const auto s = v.get<std::string>();
      for (const auto& c : k.choices)
        if (c == s) return v;
      std::string all;
      for (const auto& c : k.choices) all += (all.empty() ? "" : ", ") + c;
      fail(path, "expected one of " + all);
    }
    case Kind::matrix:
      check_matrix(v, path);
      return v;
    case Kind::matrices:
      if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of matrices");
      for (size_t i = 0; i < v.size(); ++i) check_matrix(v[i], index(path, i));
      return v;
    case Kind::numbers:
      if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array");
      // Element types are checked by the caller where they matter.
      for (size_t i = 0; i < v.size(); ++i)
        if (!v[i].is_number() && !v[i].is_string()) fail(index(path, i), "expected a number");
      return v;
    case Kind::datum:
      return check_datum(v, path);
    case Kind::function:
      return check_function(v, path);
    case Kind::functions: {
      if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of functions");
      json out = json::array();
      for (size_t i = 0; i < v.size(); ++i) out.push_back(check_function(v[i], index(path, i)));
      return out;
    }
  }
  return v;
}

json check_object(const json& v, const std::string& path, const std::vector<Key>& keys,
                  const std::vector<std::string>& extra) {
  if (!v.is_object()) fail(path, "expected an object");
  for (auto it = v.begin(); it != v.end(); ++it) {
    bool known = false;
    for (const auto& k : keys) known = known || k.name == it.key();
    for (const auto& e : extra) known = known || e == it.key();
    if (!known) fail(member(path, it.key()), "unknown key");
  }
  json out = json::object();
  for (const auto& k : keys) {
    const auto p = member(path, k.name);
    if (v.contains(k.name)) {
      out[k.name] = check_value(v[k.name], p, k);
    } else if (k.required) {
      fail(p, "missing required key");
    } else if (!k.def.is_null()) {
      out[k.name] = k.def;
    }
  }
  return out;
}

// Commands with two shapes pick theirs from which inputs are present.
void resolve_mode(const std::string& command, json& p) {
  if (command == "prop52") {
    if (!p.contains("mode")) p["mode"] = p.contains("tuple") ? "check" : "search";
    if (p["mode"] == "check" && !p.contains("tuple")) fail("$.tuple", "required when mode is check");
  } else if (command == "surface-area") {
    if (!p.contains("mode")) {
      const int given = p.contains("matrix") + p.contains("function") + p.contains("tuple");
      if (given != 1) fail("$", "give exactly one of matrix, function, tuple (or set mode)");
      p["mode"] = p.contains("matrix") ? "quadratic" : p.contains("function") ? "grid" : "product";
    }
    const auto mode = p["mode"].get<std::string>();
    if (mode == "quadratic" && !p.contains("matrix")) fail("$.matrix", "required when mode is quadratic");
    if (mode == "grid" && !p.contains("function")) fail("$.function", "required when mode is grid");
    if (mode == "product") {
      if (!p.contains("tuple")) fail("$.tuple", "required when mode is product");
      if (!p.contains("datum")) fail("$.datum", "required when mode is product");
    }
  } else if (command == "logconcavity-check") {
    if (p["functions"].size() != 2) fail("$.functions", "expected exactly two functions");
  } else if (command == "p-limit") {
    for (size_t i = 0; i < p["ps"].size(); ++i) check_number(p["ps"][i], index("$.ps", i), kTiny);
  }
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : schemas()) n.push_back(k);
    return n;
  }();
  return names;
}

bool is_stochastic(const std::string& command, const json& params) {
  if (command == "kw-verify" || command == "inverse-constant" || command == "deficit-minimize" || command == "p-limit")
    return true;
  if (command == "prop52") return params.value("mode", "search") == "search";
  if (command == "ball-monotonicity") return !params.contains("reference");
  return false;
}

ExperimentConfig parse_config(const std::string& document, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    fail("$", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("$", "expected an object");
  if (!doc.contains("command")) fail("$.command", "missing required key");
  if (!doc["command"].is_string()) fail("$.command", "expected a string");
  ExperimentConfig cfg;
  cfg.command = doc["command"].get<std::string>();
  cfg.base_dir = base_dir;
  const auto it = schemas().find(cfg.command);
  if (it == schemas().end()) fail("$.command", "unknown command '" + cfg.command + "'");

  cfg.params = check_object(doc, "$", it->second, {"command", "seed", "threads"});
  resolve_mode(cfg.command, cfg.params);

  if (doc.contains("seed")) {
    check_integer(doc["seed"], "$.seed", 0);
    cfg.seed = doc["seed"].get<std::uint64_t>();
  } else if (is_stochastic(cfg.command, cfg.params)) {
    fail("$.seed", "required for command " + cfg.command);
  }
  if (doc.contains("threads")) {
    check_integer(doc["threads"], "$.threads", 0);
    cfg.threads = doc["threads"].get<int>();
  }
  return cfg;
}

}  // namespace blsat::cli
