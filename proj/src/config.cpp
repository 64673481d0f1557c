#include "stokeshom/config.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <set>

#include "stokeshom/errors.hpp"

namespace stokeshom {

using json = nlohmann::json;

namespace {

const std::vector<std::string> kKeys = {
    "dim",          "box",          "target_kind",     "target",     "radius_law",      "radius_min",
    "radius_max",   "gap_law",      "gap_min",         "gap_max",    "delta",           "max_attempts",
    "seeds",        "particles",    "grid",            "kappa",      "tol",             "max_iter",
    "boundary_points", "bisection_steps", "cutoff_dims", "cutoff_rs", "cutoff_kinds",  "rho_grid",
    "cutoff_a",     "cutoff_resolution", "eps",        "cell_grid",  "hom_kappa",       "pressure_q",
    "force_amplitude", "moment",    "fault_injection"};

std::string type_name(const json& v) { return v.type_name(); }

class Reader {
 public:
  Reader(const json& obj, std::vector<std::string>& diag) : obj_(obj), diag_(diag) {}

  void number(const char* key, double& out) {
    if (!obj_.contains(key)) return;
    const json& v = obj_[key];
    if (!v.is_number()) return bad(key, "a number", v);
    out = v.get<double>();
  }
  void integer(const char* key, int& out) {
    if (!obj_.contains(key)) return;
    const json& v = obj_[key];
    if (!v.is_number_integer()) return bad(key, "an integer", v);
    out = v.get<int>();
  }
  void count(const char* key, std::uint64_t& out) {
    if (!obj_.contains(key)) return;
    const json& v = obj_[key];
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      return bad(key, "a non-negative integer", v);
    out = v.get<std::uint64_t>();
  }
  void text(const char* key, std::string& out) {
    if (!obj_.contains(key)) return;
    const json& v = obj_[key];
    if (!v.is_string()) return bad(key, "a string", v);
    out = v.get<std::string>();
  }
  void flag(const char* key, bool& out) {
    if (!obj_.contains(key)) return;
    const json& v = obj_[key];
    if (!v.is_boolean()) return bad(key, "a boolean", v);
    out = v.get<bool>();
  }
  // Arrays; a bare scalar counts as a one-element list.
  template <class T, class Check>
  void list(const json& holder, const char* key, std::vector<T>& out, const char* what, Check ok) {
    if (!holder.contains(key)) return;
    json v = holder[key];
    if (!v.is_array()) v = json::array({v});
    std::vector<T> tmp;
    for (const auto& e : v) {
      if (!ok(e)) return bad(key, what, e);
      tmp.push_back(e.get<T>());
    }
    out = tmp;
  }
  template <class T, class Check>
  void list(const char* key, std::vector<T>& out, const char* what, Check ok) {
    list(obj_, key, out, what, ok);
  }

 private:
  void bad(const char* key, const char* want, const json& got) {
    diag_.push_back(std::string("field '") + key + "': expected " + want + ", got " + type_name(got));
  }
  const json& obj_;
  std::vector<std::string>& diag_;
};

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> config_keys() { return kKeys; }

RunConfig validate_config_text(const std::string& text) {
  std::vector<std::string> diag;
  json root;
  try {
    root = json::parse(text.empty() ? std::string("{}") : text);
  } catch (const json::parse_error& e) {
    throw ConfigError({"line " + std::to_string(line_of(text, e.byte)) + ": " + e.what()});
  }
  if (!root.is_object()) throw ConfigError({"top level must be a JSON object"});

  for (const auto& [key, value] : root.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end()) continue;
    std::string best;
    std::size_t best_d = 4;
    for (const auto& k : kKeys) {
      std::size_t d = edit_distance(key, k);
      if (d < best_d) best_d = d, best = k;
    }
    diag.push_back("unknown key '" + key + "'" + (best.empty() ? "" : "; did you mean '" + best + "'?"));
  }

  RunConfig c;
  Reader r(root, diag);
  auto is_num = [](const json& e) { return e.is_number(); };
  auto is_int = [](const json& e) { return e.is_number_integer(); };
  auto is_uint = [](const json& e) { return e.is_number_unsigned() || (e.is_number_integer() && e.get<std::int64_t>() >= 0); };
  auto is_str = [](const json& e) { return e.is_string(); };

  r.integer("dim", c.dim);
  r.number("box", c.box);
  r.text("target_kind", c.target_kind);
  r.number("target", c.target);
  r.text("radius_law", c.radius_law);
  r.number("radius_min", c.radius_min);
  r.number("radius_max", c.radius_max);
  if (root.contains("radius_min") && !root.contains("radius_max") && c.radius_law == "constant")
    c.radius_max = c.radius_min;
  r.text("gap_law", c.gap_law);
  r.number("gap_min", c.gap_min);
  r.number("gap_max", c.gap_max);
  if (root.contains("gap_min") && !root.contains("gap_max") && c.gap_law == "constant") c.gap_max = c.gap_min;
  r.number("delta", c.delta);
  r.count("max_attempts", c.max_attempts);
  r.list("seeds", c.seeds, "non-negative integers", is_uint);
  r.text("particles", c.particles);
  r.integer("grid", c.grid);
  r.list("kappa", c.kappa, "numbers", is_num);
  r.number("tol", c.tol);
  r.integer("max_iter", c.max_iter);
  r.integer("boundary_points", c.boundary_points);
  r.integer("bisection_steps", c.bisection_steps);
  r.list("cutoff_dims", c.cutoff_dims, "integers", is_int);
  r.list("cutoff_rs", c.cutoff_rs, "numbers", is_num);
  r.list("cutoff_kinds", c.cutoff_kinds, "strings", is_str);
  r.list("rho_grid", c.rho_grid, "numbers", is_num);
  r.number("cutoff_a", c.cutoff_a);
  r.integer("cutoff_resolution", c.cutoff_resolution);
  r.list("eps", c.eps, "numbers", is_num);
  r.integer("cell_grid", c.cell_grid);
  r.number("hom_kappa", c.hom_kappa);
  r.number("pressure_q", c.pressure_q);
  r.number("force_amplitude", c.force_amplitude);
  r.flag("moment", c.moment);
  if (root.contains("fault_injection")) {
    const json& fi = root["fault_injection"];
    if (!fi.is_object()) {
      diag.push_back("field 'fault_injection': expected an object, got " + type_name(fi));
    } else {
      for (const auto& [key, value] : fi.items())
        if (key != "fail_seeds") diag.push_back("unknown key 'fault_injection." + key + "'");
      r.list(fi, "fail_seeds", c.fail_seeds, "non-negative integers", is_uint);
    }
  }

  auto need = [&](bool ok, const char* key, const std::string& msg) {
    if (!ok) diag.push_back(std::string("field '") + key + "': " + msg);
  };
  auto finite_pos = [](double v) { return std::isfinite(v) && v > 0; };
  need(c.dim == 2 || c.dim == 3, "dim", "must be 2 or 3");
  need(finite_pos(c.box), "box", "must be positive");
  need(c.target_kind == "fraction" || c.target_kind == "count", "target_kind", "must be 'fraction' or 'count'");
  if (c.target_kind == "fraction")
    need(finite_pos(c.target) && c.target < 1, "target", "volume fraction must lie in (0, 1)");
  else
    need(c.target >= 1 && c.target == std::floor(c.target), "target", "particle count must be a positive integer");
  std::set<std::string> laws{"constant", "uniform", "log_uniform"};
  need(laws.count(c.radius_law) > 0, "radius_law", "must be constant, uniform or log_uniform");
  need(laws.count(c.gap_law) > 0, "gap_law", "must be constant, uniform or log_uniform");
  need(finite_pos(c.radius_min), "radius_min", "must be positive");
  need(std::isfinite(c.radius_max) && c.radius_max >= c.radius_min, "radius_max", "must be >= radius_min");
  need(std::isfinite(c.gap_min) && (c.gap_min > 0 || (c.gap_min == 0 && c.gap_law != "log_uniform")), "gap_min",
       "must be non-negative (positive for log_uniform)");
  need(std::isfinite(c.gap_max) && c.gap_max >= c.gap_min, "gap_max", "must be >= gap_min");
  need(finite_pos(c.delta), "delta", "must be positive");
  need(c.max_attempts >= 1, "max_attempts", "must be at least 1");
  need(!c.seeds.empty(), "seeds", "at least one seed required");
  need(c.grid == 0 || c.grid >= 16, "grid", "must be at least 16");
  need(!c.kappa.empty(), "kappa", "ladder must not be empty");
  for (std::size_t i = 0; i < c.kappa.size(); ++i) {
    need(std::isfinite(c.kappa[i]) && c.kappa[i] >= 1, "kappa", "entries must be >= 1");
    if (i > 0) need(c.kappa[i] > c.kappa[i - 1], "kappa", "ladder must be strictly increasing");
  }
  need(finite_pos(c.tol) && c.tol < 1, "tol", "must lie in (0, 1)");
  need(c.max_iter >= 1, "max_iter", "must be at least 1");
  need(c.boundary_points == 0 || c.boundary_points >= 8, "boundary_points", "must be 0 (auto) or at least 8");
  need(c.bisection_steps >= 1, "bisection_steps", "must be at least 1");
  for (int d : c.cutoff_dims) need(d == 2 || d == 3, "cutoff_dims", "entries must be 2 or 3");
  for (double v : c.cutoff_rs) need(std::isfinite(v) && v >= 1, "cutoff_rs", "entries must be >= 1");
  for (const auto& k : c.cutoff_kinds)
    need(k == "grad" || k == "hess" || k == "weighted", "cutoff_kinds", "entries must be grad, hess or weighted");
  need(c.rho_grid.size() >= 4, "rho_grid", "needs at least 4 points");
  for (double v : c.rho_grid) need(finite_pos(v) && v < 1, "rho_grid", "entries must lie in (0, 1)");
  need(finite_pos(c.cutoff_a), "cutoff_a", "must be positive");
  need(c.cutoff_resolution >= 64, "cutoff_resolution", "must be at least 64");
  need(!c.eps.empty(), "eps", "ladder must not be empty");
  for (std::size_t i = 0; i < c.eps.size(); ++i) {
    need(finite_pos(c.eps[i]) && c.eps[i] <= 1, "eps", "entries must lie in (0, 1]");
    if (i > 0) need(c.eps[i] < c.eps[i - 1], "eps", "ladder must be strictly decreasing");
  }
  need(c.cell_grid >= 16, "cell_grid", "must be at least 16");
  need(std::isfinite(c.hom_kappa) && c.hom_kappa >= 1, "hom_kappa", "must be >= 1");
  need(std::isfinite(c.pressure_q) && c.pressure_q >= 1, "pressure_q", "must be >= 1");
  need(std::isfinite(c.force_amplitude), "force_amplitude", "must be finite");

  if (!diag.empty()) throw ConfigError(diag);

  if (c.grid == 0) c.grid = c.dim == 2 ? 256 : 64;
  if (c.boundary_points == 0) c.boundary_points = c.dim == 2 ? 256 : 1024;
  return c;
}

std::string emit_config(const RunConfig& c) {
  json j;
  j["dim"] = c.dim;
  j["box"] = c.box;
  j["target_kind"] = c.target_kind;
  j["target"] = c.target;
  j["radius_law"] = c.radius_law;
  j["radius_min"] = c.radius_min;
  j["radius_max"] = c.radius_max;
  j["gap_law"] = c.gap_law;
  j["gap_min"] = c.gap_min;
  j["gap_max"] = c.gap_max;
  j["delta"] = c.delta;
  j["max_attempts"] = c.max_attempts;
  j["seeds"] = c.seeds;
  j["particles"] = c.particles;
  j["grid"] = c.grid;
  j["kappa"] = c.kappa;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["boundary_points"] = c.boundary_points;
  j["bisection_steps"] = c.bisection_steps;
  j["cutoff_dims"] = c.cutoff_dims;
  j["cutoff_rs"] = c.cutoff_rs;
  j["cutoff_kinds"] = c.cutoff_kinds;
  j["rho_grid"] = c.rho_grid;
  j["cutoff_a"] = c.cutoff_a;
  j["cutoff_resolution"] = c.cutoff_resolution;
  j["eps"] = c.eps;
  j["cell_grid"] = c.cell_grid;
  j["hom_kappa"] = c.hom_kappa;
  j["pressure_q"] = c.pressure_q;
  j["force_amplitude"] = c.force_amplitude;
  j["moment"] = c.moment;
  j["fault_injection"] = {{"fail_seeds", c.fail_seeds}};
  return j.dump(2) + "\n";
}

namespace {

Law make_law(const std::string& kind, double lo, double hi) {
  if (kind == "uniform") return Law::uniform(lo, hi);
  if (kind == "log_uniform") return Law::log_uniform(lo, hi);
  return Law::constant(lo);
}

}  // namespace

EnsembleSpec RunConfig::ensemble() const {
  EnsembleSpec s;
  s.dim = dim;
  s.box = box;
  s.target = target_kind == "count" ? Target::count(static_cast<std::size_t>(target)) : Target::fraction(target);
  s.radius = make_law(radius_law, radius_min, radius_max);
  s.min_gap = make_law(gap_law, gap_min, gap_max);
  s.delta = delta;
  s.max_attempts = max_attempts;
  return s;
}

SolverParams RunConfig::solver() const {
  SolverParams p;
  p.tol_mom = tol;
  p.tol_div = tol;
  p.max_iter = max_iter;
  return p;
}

}  // namespace stokeshom
