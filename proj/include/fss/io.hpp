#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fss/best_constants.hpp"
#include "fss/grid.hpp"
#include "fss/kernel.hpp"
#include "fss/nonlocal_ops.hpp"
#include "fss/singular_chain.hpp"

namespace fss {

using json = nlohmann::json;

/// Configuration problem: unreadable file, syntax error or violated rule.
class ConfigError : public InvalidArgument {
public:
  explicit ConfigError(const std::string& what, std::vector<std::string> issues = {})
      : InvalidArgument(what), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
  std::vector<std::string> issues_;
};

struct GridConfig {
  Box box;
  double h = 0.0;
  double collar_width = 0.0;
  bool tail = true;
};

struct WeightConfig {
  std::string kind = "constant";
  double value = 1.0;
  double amplitude = 1.0;
  std::optional<Point> center;
  double sigma = 0.25;
  std::optional<double> radius;
  std::string path;
  double r = std::numeric_limits<double>::infinity();
};

struct ProblemConfig {
  std::optional<double> alpha;
  std::vector<double> alpha_grid;
  std::vector<double> n_schedule;
  double chain_tol = 1e-7;
  double fp_tol = 1e-9;
  double gradient_tol = 1e-10;
  int max_levels = 64;
  std::optional<double> alpha0;
};

struct VerificationConfig {
  int trials = 1000;
  std::uint64_t seed = 42;
};

struct OutputConfig {
  std::string solution;
  std::string diagnostics;
  std::string sweep_csv;
  std::string mu_json;
};

struct RunConfig {
  GridConfig grid;
  double s = 0.5;
  double p = 2.0;
  WeightConfig weight;
  ProblemConfig problem;
  VerificationConfig verification;
  OutputConfig output;
  /// Directory of the config file; relative paths inside it resolve here.
  std::filesystem::path base_dir;
  /// FNV-1a hash of the canonical JSON text, as 16 hex digits.
  std::string hash;

  FracParams params() const { return FracParams(s, p, grid.box.dimension); }
  Grid make_grid() const { return build_grid(grid.box, grid.h, grid.collar_width); }
  Kernel make_kernel() const { return build_kernel(make_grid(), params(), grid.tail); }

  /// Alpha grid of a sweep, with alpha0 prepended when it lies below the grid.
  std::vector<double> sweep_grid() const {
    std::vector<double> g = problem.alpha_grid;
    if (problem.alpha0 && (g.empty() || *problem.alpha0 < g.front())) g.insert(g.begin(), *problem.alpha0);
    return g;
  }

  ChainOptions chain_options() const {
    ChainOptions co;
    co.schedule = problem.n_schedule;
    co.max_levels = problem.max_levels;
    co.chain_tol = problem.chain_tol;
    co.level.fp_tol = problem.fp_tol;
    co.level.solve.gradient_tol = problem.gradient_tol;
    co.embedding.solve.gradient_tol = problem.gradient_tol;
    return co;
  }
};

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

/// Parses JSON text; syntax errors report the line and column.
inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is one past the offending character.
    auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    auto colon = msg.rfind(": ");
    std::string reason = colon == std::string::npos ? msg : msg.substr(colon + 2);
    throw ConfigError(what + ": parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                      ": " + reason);
  }
}

/// Collects every violated rule before reporting.
class Checker {
public:
  void fail(const std::string& path, const std::string& rule) { issues_.push_back(path + ": " + rule); }
  bool ok() const { return issues_.empty(); }
  const std::vector<std::string>& issues() const { return issues_; }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      std::string s = v.get<std::string>();
      if (s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
    }
    fail(path, "must be a number");
    return std::nullopt;
  }

  std::optional<std::vector<double>> numbers(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const json& v = obj.at(key);
    if (!v.is_array()) {
      fail(path, "must be an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        fail(path + "[" + std::to_string(i) + "]", "must be a number");
        return std::nullopt;
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::optional<std::string> string(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_string()) {
      fail(path, "must be a string");
      return std::nullopt;
    }
    return obj.at(key).get<std::string>();
  }

  const json* block(const json& root, const std::string& key, bool required) {
    if (!root.contains(key)) {
      if (required) fail(key, "missing block");
      return nullptr;
    }
    if (!root.at(key).is_object()) {
      fail(key, "must be an object");
      return nullptr;
    }
    return &root.at(key);
  }

  void unknown_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : obj.items()) {
      bool found = false;
      for (const char* a : allowed) found = found || k == a;
      if (!found) fail(path.empty() ? k : path + "." + k, "unknown field");
    }
  }

private:
  std::vector<std::string> issues_;
};

inline bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

} // namespace detail

/// Builds and validates a RunConfig from parsed JSON. All violated rules are
/// collected; the thrown ConfigError lists each with its field path.
inline RunConfig parse_config(const json& root, const std::filesystem::path& base_dir = {}) {
  detail::Checker ck;
  RunConfig cfg;
  cfg.base_dir = base_dir;
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  ck.unknown_keys(root, "", {"grid", "params", "weight", "problem", "verification", "output"});

  // grid
  bool grid_ok = false;
  if (const json* g = ck.block(root, "grid", true)) {
    ck.unknown_keys(*g, "grid", {"box", "h", "collar_width", "tail"});
    grid_ok = true;
    if (!g->contains("box")) {
      ck.fail("grid.box", "missing");
      grid_ok = false;
    } else {
      const json& b = g->at("box");
      auto is_pair = [](const json& x) { return x.is_array() && x.size() == 2 && x[0].is_number() && x[1].is_number(); };
      if (is_pair(b)) {
        cfg.grid.box = Box::interval(b[0].get<double>(), b[1].get<double>());
      } else if (b.is_array() && b.size() == 2 && is_pair(b[0]) && is_pair(b[1])) {
        cfg.grid.box = Box::rectangle({b[0][0].get<double>(), b[1][0].get<double>()},
                                      {b[0][1].get<double>(), b[1][1].get<double>()});
      } else {
        ck.fail("grid.box", "must be [a,b] or [[x0,x1],[y0,y1]]");
        grid_ok = false;
      }
      if (grid_ok)
        for (int d = 0; d < cfg.grid.box.dimension; ++d)
          if (!(std::isfinite(cfg.grid.box.lo[d]) && std::isfinite(cfg.grid.box.hi[d]) &&
                cfg.grid.box.hi[d] > cfg.grid.box.lo[d])) {
            ck.fail("grid.box", "each interval must satisfy lo < hi");
            grid_ok = false;
            break;
          }
    }
    if (auto h = ck.number(*g, "h", "grid.h")) {
      cfg.grid.h = *h;
      if (!detail::finite_positive(*h)) {
        ck.fail("grid.h", "must be positive");
        grid_ok = false;
      }
    } else {
      if (!g->contains("h")) ck.fail("grid.h", "missing");
      grid_ok = false;
    }
    if (auto c = ck.number(*g, "collar_width", "grid.collar_width")) {
      cfg.grid.collar_width = *c;
    } else if (!g->contains("collar_width")) {
      cfg.grid.collar_width = 4.0 * cfg.grid.h;
    } else {
      grid_ok = false;
    }
    if (grid_ok && !(std::isfinite(cfg.grid.collar_width) && cfg.grid.collar_width >= cfg.grid.h * (1.0 - 1e-12))) {
      ck.fail("grid.collar_width", "must be finite and >= grid.h");
      grid_ok = false;
    }
    if (g->contains("tail")) {
      if (g->at("tail").is_boolean()) cfg.grid.tail = g->at("tail").get<bool>();
      else ck.fail("grid.tail", "must be true or false");
    }
    if (grid_ok) {
      try {
        (void)cfg.make_grid();
      } catch (const InvalidArgument& e) {
        ck.fail("grid.h", e.what());
        grid_ok = false;
      }
    }
  }

  // params
  bool params_ok = false;
  if (const json* pr = ck.block(root, "params", true)) {
    ck.unknown_keys(*pr, "params", {"s", "p"});
    params_ok = true;
    if (auto s = ck.number(*pr, "s", "params.s")) {
      cfg.s = *s;
      if (!(*s > 0.0 && *s < 1.0)) {
        ck.fail("params.s", "must lie in (0,1)");
        params_ok = false;
      }
    } else {
      if (!pr->contains("s")) ck.fail("params.s", "missing");
      params_ok = false;
    }
    if (auto p = ck.number(*pr, "p", "params.p")) {
      cfg.p = *p;
      if (!(*p > 1.0 && std::isfinite(*p))) {
        ck.fail("params.p", "must lie in (1,inf)");
        params_ok = false;
      }
    } else {
      if (!pr->contains("p")) ck.fail("params.p", "missing");
      params_ok = false;
    }
  }

  // weight
  if (const json* w = ck.block(root, "weight", true)) {
    ck.unknown_keys(*w, "weight", {"kind", "value", "amplitude", "center", "sigma", "radius", "path", "r"});
    if (auto k = ck.string(*w, "kind", "weight.kind")) cfg.weight.kind = *k;
    else if (!w->contains("kind")) ck.fail("weight.kind", "missing");
    const auto& kind = cfg.weight.kind;
    if (kind != "constant" && kind != "gaussian-bump" && kind != "compact-bump" && kind != "file")
      ck.fail("weight.kind", "must be one of constant, gaussian-bump, compact-bump, file");
    if (auto v = ck.number(*w, "value", "weight.value")) {
      cfg.weight.value = *v;
      if (!detail::finite_positive(*v)) ck.fail("weight.value", "must be positive");
    }
    if (auto v = ck.number(*w, "amplitude", "weight.amplitude")) {
      cfg.weight.amplitude = *v;
      if (!detail::finite_positive(*v)) ck.fail("weight.amplitude", "must be positive");
    }
    if (auto v = ck.number(*w, "sigma", "weight.sigma")) {
      cfg.weight.sigma = *v;
      if (!detail::finite_positive(*v)) ck.fail("weight.sigma", "must be positive");
    }
    if (auto v = ck.number(*w, "radius", "weight.radius")) {
      cfg.weight.radius = *v;
      if (!detail::finite_positive(*v)) ck.fail("weight.radius", "must be positive");
    }
    if (auto c = ck.numbers(*w, "center", "weight.center")) {
      if (grid_ok && static_cast<int>(c->size()) != cfg.grid.box.dimension) {
        ck.fail("weight.center", "must have one coordinate per dimension");
      } else if (!c->empty() && c->size() <= 2) {
        Point pt{0.0, 0.0};
        for (std::size_t d = 0; d < c->size(); ++d) pt[d] = (*c)[d];
        cfg.weight.center = pt;
      }
    }
    if (auto v = ck.string(*w, "path", "weight.path")) cfg.weight.path = *v;
    if (kind == "file" && cfg.weight.path.empty()) ck.fail("weight.path", "required when weight.kind is file");
    if (auto r = ck.number(*w, "r", "weight.r")) {
      cfg.weight.r = *r;
      if (!(*r >= 1.0)) ck.fail("weight.r", "must be >= 1 or \"inf\"");
    }
    if (kind == "compact-bump" && grid_ok) {
      const Box& b = cfg.grid.box;
      Point c = cfg.weight.center.value_or(Point{0.5 * (b.lo[0] + b.hi[0]), 0.5 * (b.lo[1] + b.hi[1])});
      double room = std::numeric_limits<double>::infinity();
      for (int d = 0; d < b.dimension; ++d) room = std::min({room, c[d] - b.lo[d], b.hi[d] - c[d]});
      if (!cfg.weight.radius) cfg.weight.radius = 0.5 * room;
      if (!(room - *cfg.weight.radius >= cfg.grid.h)) ck.fail("weight.radius", "support must stay at least grid.h inside the domain");
    }
  }

  // problem
  if (const json* pb = ck.block(root, "problem", true)) {
    ck.unknown_keys(*pb, "problem",
                    {"alpha", "alpha_grid", "n_schedule", "chain_tol", "fp_tol", "gradient_tol", "max_levels", "alpha0"});
    auto& P = cfg.problem;
    if (auto a = ck.number(*pb, "alpha", "problem.alpha")) {
      P.alpha = *a;
      if (!detail::finite_positive(*a)) ck.fail("problem.alpha", "must be positive");
    }
    if (auto g = ck.numbers(*pb, "alpha_grid", "problem.alpha_grid")) {
      P.alpha_grid = *g;
      for (std::size_t k = 0; k < g->size(); ++k) {
        std::string path = "problem.alpha_grid[" + std::to_string(k) + "]";
        if (!((*g)[k] > 0.0 && (*g)[k] < 1.0)) ck.fail(path, "must lie in (0,1)");
        if (k > 0 && !((*g)[k] > (*g)[k - 1])) ck.fail(path, "alpha_grid must be strictly increasing");
      }
      if (g->empty()) ck.fail("problem.alpha_grid", "must not be empty");
    }
    if (!P.alpha && P.alpha_grid.empty()) ck.fail("problem", "needs alpha or alpha_grid");
    if (auto n = ck.numbers(*pb, "n_schedule", "problem.n_schedule")) {
      P.n_schedule = *n;
      for (std::size_t k = 0; k < n->size(); ++k) {
        std::string path = "problem.n_schedule[" + std::to_string(k) + "]";
        if (!((*n)[k] >= 1.0 && std::isfinite((*n)[k]))) ck.fail(path, "must be finite and >= 1");
        if (k > 0 && !((*n)[k] > (*n)[k - 1])) ck.fail(path, "n_schedule must be strictly increasing");
      }
    }
    auto tol = [&](const char* key, double& dst) {
      std::string path = std::string("problem.") + key;
      if (auto v = ck.number(*pb, key, path)) {
        dst = *v;
        if (!detail::finite_positive(*v)) ck.fail(path, "must be positive");
      }
    };
    tol("chain_tol", P.chain_tol);
    tol("fp_tol", P.fp_tol);
    tol("gradient_tol", P.gradient_tol);
    if (pb->contains("max_levels")) {
      const json& v = pb->at("max_levels");
      if (v.is_number_integer() && v.get<long long>() >= 1 && v.get<long long>() <= 1024) P.max_levels = v.get<int>();
      else ck.fail("problem.max_levels", "must be an integer in [1,1024]");
    }
    if (auto a0 = ck.number(*pb, "alpha0", "problem.alpha0")) {
      P.alpha0 = *a0;
      if (!(*a0 > 0.0 && *a0 < 1.0)) ck.fail("problem.alpha0", "must lie in (0,1)");
      if (P.alpha_grid.empty()) ck.fail("problem.alpha0", "only meaningful with alpha_grid");
    }

    if (P.alpha && *P.alpha > 1.0 && cfg.weight.kind != "compact-bump" && cfg.weight.kind != "file")
      ck.fail("problem.alpha",
              "alpha>1 requires a compactly supported weight (weight.kind compact-bump, or a file weight vanishing "
              "near the boundary)");

    if (params_ok && grid_ok) {
      FracParams fp = cfg.params();
      auto check_r = [&](double a, const std::string& path) {
        if (!(a > 0.0 && a <= 1.0)) return;
        double ra = r_alpha(a, fp);
        if (cfg.weight.r < ra * (1.0 - 1e-12))
          ck.fail("weight.r", "must be >= r_alpha = " + json(ra).dump() + " required by " + path);
      };
      if (P.alpha) check_r(*P.alpha, "problem.alpha");
      for (std::size_t k = 0; k < P.alpha_grid.size(); ++k)
        check_r(P.alpha_grid[k], "problem.alpha_grid[" + std::to_string(k) + "]");
      if (P.alpha0) check_r(*P.alpha0, "problem.alpha0");
    }
  }

  // verification
  if (const json* v = ck.block(root, "verification", false)) {
    ck.unknown_keys(*v, "verification", {"trials", "seed"});
    if (v->contains("trials")) {
      const json& t = v->at("trials");
      if (t.is_number_integer() && t.get<long long>() >= 0 && t.get<long long>() <= 10000000)
        cfg.verification.trials = t.get<int>();
      else
        ck.fail("verification.trials", "must be a nonnegative integer");
    }
    if (v->contains("seed")) {
      const json& s = v->at("seed");
      if (s.is_number_unsigned()) cfg.verification.seed = s.get<std::uint64_t>();
      else ck.fail("verification.seed", "must be a nonnegative integer");
    }
  }

  // output
  if (const json* o = ck.block(root, "output", false)) {
    ck.unknown_keys(*o, "output", {"solution", "diagnostics", "sweep_csv", "mu_json"});
    if (auto s = ck.string(*o, "solution", "output.solution")) cfg.output.solution = *s;
    if (auto s = ck.string(*o, "diagnostics", "output.diagnostics")) cfg.output.diagnostics = *s;
    if (auto s = ck.string(*o, "sweep_csv", "output.sweep_csv")) cfg.output.sweep_csv = *s;
    if (auto s = ck.string(*o, "mu_json", "output.mu_json")) cfg.output.mu_json = *s;
  }

  if (!ck.ok()) {
    std::string msg = "invalid config:";
    for (const auto& i : ck.issues()) msg += "\n  " + i;
    throw ConfigError(msg, ck.issues());
  }

  if (const char* env = std::getenv("FSS_SEED"); env && *env) {
    char* end = nullptr;
    unsigned long long s = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("FSS_SEED must be a nonnegative integer");
    cfg.verification.seed = s;
  }
  cfg.hash = fnv1a_hex(root.dump());
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::string text = read_text(path);
  json root = detail::parse_json(text, path.string());
  return parse_config(root, path.parent_path());
}

/// Resolves a config-relative path.
inline std::filesystem::path resolve(const RunConfig& cfg, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || cfg.base_dir.empty()) return p;
  return cfg.base_dir / p;
}

/// Nodal values of the configured weight on the interior of `grid`.
inline WeightField make_weight(const RunConfig& cfg, const Grid& grid) {
  const auto& w = cfg.weight;
  const Box& b = grid.box;
  Point c = w.center.value_or(Point{0.5 * (b.lo[0] + b.hi[0]), 0.5 * (b.lo[1] + b.hi[1])});
  std::vector<double> vals(grid.size(), 0.0);
  auto dist2 = [&](const Point& x) {
    double r2 = 0.0;
    for (int d = 0; d < grid.dimension(); ++d) r2 += (x[d] - c[d]) * (x[d] - c[d]);
    return r2;
  };
  if (w.kind == "constant") {
    std::fill(vals.begin(), vals.end(), w.value);
  } else if (w.kind == "gaussian-bump") {
    for (std::size_t i = 0; i < grid.size(); ++i)
      vals[i] = w.amplitude * std::exp(-0.5 * dist2(grid.interior[i]) / (w.sigma * w.sigma));
  } else if (w.kind == "compact-bump") {
    double R = w.radius.value_or(0.25 * (b.hi[0] - b.lo[0]));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double t = dist2(grid.interior[i]) / (R * R);
      vals[i] = t < 1.0 ? w.amplitude * std::exp(1.0 - 1.0 / (1.0 - t)) : 0.0;
    }
  } else if (w.kind == "file") {
    auto path = resolve(cfg, w.path);
    json j = detail::parse_json(read_text(path), path.string());
    if (j.is_object() && j.contains("values")) j = j.at("values");
    if (!j.is_array()) throw ConfigError("weight.path: file must hold an array of values");
    if (j.size() != grid.size())
      throw ConfigError("weight.path: expected " + std::to_string(grid.size()) + " values, found " +
                        std::to_string(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) throw ConfigError("weight.path: entry " + std::to_string(i) + " is not a number");
      vals[i] = j[i].get<double>();
    }
  } else {
    throw ConfigError("weight.kind: unknown kind '" + w.kind + "'");
  }
  try {
    return WeightField(std::move(vals), grid.cell_measure(), w.r);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("weight: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Solution files

inline constexpr int kSolutionFormatVersion = 1;

struct SolutionFile {
  int format_version = kSolutionFormatVersion;
  std::string config_hash;
  Box box;
  double h = 0.0;
  double collar_width = 0.0;
  std::array<std::size_t, 2> shape{0, 1};
  bool tail = true;
  double s = 0.0;
  double p = 0.0;
  double alpha = 0.0;
  /// "lambda" for alpha < 1, "mu" for alpha = 1, "none" otherwise.
  std::string constant_kind = "none";
  double constant = std::numeric_limits<double>::quiet_NaN();
  double log_constant = std::numeric_limits<double>::quiet_NaN();
  double seminorm_p = 0.0;
  double seminorm_V = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int levels = 0;
  double weight_r = std::numeric_limits<double>::infinity();
  std::vector<double> weight;
  /// Interior node values, row-major (x fastest varying last, as in Grid).
  std::vector<double> values;

  Grid grid() const { return build_grid(box, h, collar_width); }
  FracParams params() const { return FracParams(s, p, box.dimension); }
  Kernel kernel() const { return build_kernel(grid(), params(), tail); }
  WeightField omega() const { return WeightField(weight, grid().cell_measure(), weight_r); }
};

namespace detail {

// JSON has no non-finite numbers; those are written as strings.
inline json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

inline double get_num(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw std::runtime_error("expected a number");
}

inline json num_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline std::vector<double> get_num_array(const json& j) {
  if (!j.is_array()) throw std::runtime_error("expected an array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(get_num(x));
  return v;
}

inline json box_json(const Box& b) {
  if (b.dimension == 1) return json::array({b.lo[0], b.hi[0]});
  return json::array({json::array({b.lo[0], b.hi[0]}), json::array({b.lo[1], b.hi[1]})});
}

} // namespace detail

inline json solution_to_json(const SolutionFile& sol) {
  json j;
  j["format_version"] = sol.format_version;
  j["config_hash"] = sol.config_hash;
  j["grid"] = {{"dimension", sol.box.dimension},
               {"box", detail::box_json(sol.box)},
               {"h", sol.h},
               {"collar_width", sol.collar_width},
               {"shape", {sol.shape[0], sol.shape[1]}},
               {"tail", sol.tail}};
  j["params"] = {{"s", sol.s}, {"p", sol.p}};
  j["alpha"] = detail::num(sol.alpha);
  j["constant_kind"] = sol.constant_kind;
  j["constant"] = detail::num(sol.constant);
  j["log_constant"] = detail::num(sol.log_constant);
  j["seminorm_p"] = detail::num(sol.seminorm_p);
  j["seminorm_V"] = detail::num(sol.seminorm_V);
  j["converged"] = sol.converged;
  j["levels"] = sol.levels;
  j["weight"] = {{"r", detail::num(sol.weight_r)}, {"values", detail::num_array(sol.weight)}};
  j["values"] = detail::num_array(sol.values);
  return j;
}

inline void save_solution(const std::filesystem::path& path, const SolutionFile& sol) {
  write_text(path, solution_to_json(sol).dump(1) + "\n");
}

inline SolutionFile load_solution(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const ConfigError& e) {
    throw Error(std::string("solution file: ") + e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("corrupt solution file '" + path.string() + "': not valid JSON");
  }
  if (!j.is_object() || !j.contains("format_version") || !j.at("format_version").is_number_integer())
    throw Error("corrupt solution file '" + path.string() + "': missing format_version");
  int version = j.at("format_version").get<int>();
  if (version != kSolutionFormatVersion)
    throw Error("unsupported solution format version " + std::to_string(version) + " (supported versions: " +
                std::to_string(kSolutionFormatVersion) + ")");
  SolutionFile sol;
  try {
    sol.config_hash = j.at("config_hash").get<std::string>();
    const json& g = j.at("grid");
    int dim = g.at("dimension").get<int>();
    const json& b = g.at("box");
    if (dim == 1) sol.box = Box::interval(b.at(0).get<double>(), b.at(1).get<double>());
    else if (dim == 2)
      sol.box = Box::rectangle({b.at(0).at(0).get<double>(), b.at(1).at(0).get<double>()},
                               {b.at(0).at(1).get<double>(), b.at(1).at(1).get<double>()});
    else throw std::runtime_error("bad dimension");
    sol.h = g.at("h").get<double>();
    sol.collar_width = g.at("collar_width").get<double>();
    sol.shape = {g.at("shape").at(0).get<std::size_t>(), g.at("shape").at(1).get<std::size_t>()};
    sol.tail = g.at("tail").get<bool>();
    sol.s = j.at("params").at("s").get<double>();
    sol.p = j.at("params").at("p").get<double>();
    sol.alpha = detail::get_num(j.at("alpha"));
    sol.constant_kind = j.at("constant_kind").get<std::string>();
    sol.constant = detail::get_num(j.at("constant"));
    sol.log_constant = detail::get_num(j.at("log_constant"));
    sol.seminorm_p = detail::get_num(j.at("seminorm_p"));
    sol.seminorm_V = detail::get_num(j.at("seminorm_V"));
    sol.converged = j.at("converged").get<bool>();
    sol.levels = j.at("levels").get<int>();
    sol.weight_r = detail::get_num(j.at("weight").at("r"));
    sol.weight = detail::get_num_array(j.at("weight").at("values"));
    sol.values = detail::get_num_array(j.at("values"));
  } catch (const std::exception& e) {
    throw Error("corrupt solution file '" + path.string() + "': " + e.what());
  }
  std::size_t expected = sol.shape[0] * sol.shape[1];
  if (sol.values.size() != expected || sol.weight.size() != expected)
    throw Error("corrupt solution file '" + path.string() + "': array length does not match the grid shape");
  return sol;
}

/// Throws "grid mismatch" unless the solution was computed on `grid`.
inline void check_grid(const SolutionFile& sol, const Grid& grid) {
  if (!(sol.box == grid.box && sol.h == grid.h && sol.shape == grid.shape && sol.values.size() == grid.size()))
    throw InvalidArgument("grid mismatch: solution shape " + std::to_string(sol.shape[0]) + "x" +
                          std::to_string(sol.shape[1]) + " vs config shape " + std::to_string(grid.shape[0]) + "x" +
                          std::to_string(grid.shape[1]));
}

// ---------------------------------------------------------------------------
// Diagnostics and sweep outputs

inline json level_diagnostics(const ChainResult& chain) {
  json lv = json::array();
  for (const auto& l : chain.levels)
    lv.push_back({{"n", l.n},
                  {"seminorm_p", detail::num(l.seminorm_p)},
                  {"min_u", detail::num(l.min_u)},
                  {"max_u", detail::num(l.max_u)},
                  {"fp_iters", l.fp_iters},
                  {"residual", detail::num(l.residual)}});
  json j;
  j["alpha"] = chain.alpha;
  j["converged"] = chain.converged;
  j["polished"] = chain.polished;
  j["m_alpha"] = detail::num(chain.m_alpha);
  j["monotone_violation"] = detail::num(chain.monotone_violation);
  j["seminorm_violation"] = detail::num(chain.seminorm_violation);
  j["barrier_violation"] = detail::num(chain.barrier_violation);
  j["limit_violation"] = detail::num(chain.limit_violation);
  if (chain.apriori)
    j["apriori"] = {{"theta", chain.apriori->theta},
                    {"S", detail::num(chain.apriori->S)},
                    {"rhs", detail::num(chain.apriori->rhs)},
                    {"lhs", detail::num(chain.apriori->lhs)}};
  if (!chain.ufinite_seminorm.empty()) j["ufinite_seminorm"] = detail::num_array(chain.ufinite_seminorm);
  j["levels"] = lv;
  return j;
}

inline std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline constexpr const char* kSweepCsvHeader = "alpha,lambda,scaled,seminorm_V,converged";

inline std::string sweep_csv(const SweepResult& sweep) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const auto& r : sweep.records)
    out += format_g17(r.alpha) + "," + format_g17(r.lambda) + "," + format_g17(r.scaled) + "," +
           format_g17(r.seminorm_V) + "," + (r.converged ? "1" : "0") + "\n";
  return out;
}

inline json mu_json(const MuEstimate& est) {
  json j;
  j["mu_sweep"] = detail::num(est.mu_sweep);
  j["mu_direct"] = detail::num(est.mu_direct);
  j["log_mu_direct"] = detail::num(est.log_mu_direct);
  j["mu_richardson"] = detail::num(est.mu_richardson);
  j["trend"] = est.trend;
  j["grid"] = {{"alpha", detail::num_array(est.alpha_grid)}, {"scaled", detail::num_array(est.scaled)}};
  return j;
}

} // namespace fss
