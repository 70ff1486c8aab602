#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rmap/bundle.hpp"
#include "rmap/errors.hpp"
#include "rmap/fd_oracle.hpp"
#include "rmap/hessian_chart.hpp"
#include "rmap/polynomial_json.hpp"
#include "rmap/report.hpp"

namespace rmap {

/// Uniform sampling of well-conditioned domain points in a box.
struct SampleSpec {
  std::size_t count = 0;
  std::vector<std::pair<double, double>> box;
  double cond_cap = 1e6;
  double fiber_radius = 1.0; // fibers drawn from [-r, r]^n
  std::size_t max_rejections = 1000;
};

struct RunSpec {
  std::optional<HessianChart> chart;
  std::vector<std::vector<double>> points;
  std::vector<BundlePoint> bundle_points;
  std::optional<SampleSpec> sample;
  std::optional<std::uint64_t> seed;
  fd::OracleConfig oracle;
  double perturb = 0.0;
  std::vector<std::string> commands; // run by `rmap_cli run`
  std::string output;                // empty: stdout

  const HessianChart &hessian() const {
    if (!chart)
      throw InputError("run spec has no chart");
    return *chart;
  }
};

namespace detail {

inline double number_at(const json &j, const std::string &path) {
  if (!j.is_number())
    throw InputError(path + ": expected a number");
  return j.get<double>();
}

inline std::vector<double> vector_at(const json &j, const std::string &path,
                                     std::size_t n) {
  if (!j.is_array() || j.size() != n)
    throw InputError(path + ": expected an array of " + std::to_string(n) +
                     " numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i)
    v.push_back(number_at(j[i], path + "/" + std::to_string(i)));
  for (double x : v)
    if (!std::isfinite(x))
      throw InputError(path + ": coordinates must be finite");
  return v;
}

} // namespace detail

/// {"potential": <polynomial>, "degeneracy_tol": t}
inline HessianChart chart_from_json(const json &j,
                                    const std::string &path = "/chart") {
  if (!j.is_object() || !j.contains("potential"))
    throw InputError(path + ": chart needs a \"potential\"");
  Polynomial h = polynomial_from_json(j["potential"], path + "/potential");
  double tol = 1e-10;
  if (j.contains("degeneracy_tol"))
    tol = detail::number_at(j["degeneracy_tol"], path + "/degeneracy_tol");
  if (!(tol > 0.0))
    throw InputError(path + "/degeneracy_tol: must be positive");
  return HessianChart(std::move(h), tol);
}

inline json chart_to_json(const HessianChart &c) {
  return {{"potential", polynomial_to_json(c.potential())},
          {"degeneracy_tol", c.degeneracy_tol()}};
}

/// {"base_step": s, "scheme": "...", "tol_abs": a, "tol_rel": r}
inline fd::OracleConfig oracle_from_json(const json &j,
                                         fd::OracleConfig cfg = {}) {
  if (!j.is_object())
    throw InputError("/oracle: expected an object");
  if (j.contains("base_step"))
    cfg.base_step = detail::number_at(j["base_step"], "/oracle/base_step");
  if (j.contains("scheme")) {
    if (!j["scheme"].is_string())
      throw InputError("/oracle/scheme: expected a string");
    cfg.scheme = fd::parse_scheme(j["scheme"].get<std::string>());
  }
  if (j.contains("tol_abs"))
    cfg.tol_abs = detail::number_at(j["tol_abs"], "/oracle/tol_abs");
  if (j.contains("tol_rel"))
    cfg.tol_rel = detail::number_at(j["tol_rel"], "/oracle/tol_rel");
  cfg.validate();
  return cfg;
}

inline json oracle_to_json(const fd::OracleConfig &c) {
  return {{"base_step", decimal(c.base_step)},
          {"scheme", fd::scheme_name(c.scheme)},
          {"tol_abs", decimal(c.tol_abs)},
          {"tol_rel", decimal(c.tol_rel)}};
}

/// {"x": [...], "u": [...]}
inline BundlePoint bundle_point_from_json(const json &j,
                                          const std::string &path,
                                          std::size_t n) {
  if (!j.is_object() || !j.contains("x"))
    throw InputError(path + ": bundle point needs \"x\"");
  BundlePoint bp;
  bp.x = detail::vector_at(j["x"], path + "/x", n);
  bp.u = j.contains("u") ? detail::vector_at(j["u"], path + "/u", n)
                         : std::vector<double>(n, 0.0);
  return bp;
}

/// Reads "points" and "bundle_points" arrays into the spec.
inline void points_from_json(const json &j, RunSpec &spec) {
  const std::size_t n = spec.hessian().dimension();
  if (j.contains("points")) {
    if (!j["points"].is_array())
      throw InputError("/points: expected an array");
    for (std::size_t i = 0; i < j["points"].size(); ++i)
      spec.points.push_back(detail::vector_at(
          j["points"][i], "/points/" + std::to_string(i), n));
  }
  if (j.contains("bundle_points")) {
    if (!j["bundle_points"].is_array())
      throw InputError("/bundle_points: expected an array");
    for (std::size_t i = 0; i < j["bundle_points"].size(); ++i)
      spec.bundle_points.push_back(bundle_point_from_json(
          j["bundle_points"][i], "/bundle_points/" + std::to_string(i), n));
  }
}

inline SampleSpec sample_from_json(const json &j, std::size_t n) {
  if (!j.is_object())
    throw InputError("/sample: expected an object");
  SampleSpec s;
  if (!j.contains("count") || !j["count"].is_number_integer() ||
      j["count"].get<std::int64_t>() < 1)
    throw InputError("/sample/count: expected a positive integer");
  s.count = j["count"].get<std::size_t>();
  if (!j.contains("box") || !j["box"].is_array() || j["box"].size() != n)
    throw InputError("/sample/box: expected " + std::to_string(n) +
                     " [lo, hi] pairs");
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = detail::vector_at(j["box"][i],
                                     "/sample/box/" + std::to_string(i), 2);
    if (!(v[0] < v[1]))
      throw InputError("/sample/box/" + std::to_string(i) +
                       ": lo must be below hi");
    s.box.emplace_back(v[0], v[1]);
  }
  if (j.contains("cond_cap"))
    s.cond_cap = detail::number_at(j["cond_cap"], "/sample/cond_cap");
  if (j.contains("fiber_radius"))
    s.fiber_radius =
        detail::number_at(j["fiber_radius"], "/sample/fiber_radius");
  if (j.contains("max_rejections")) {
    if (!j["max_rejections"].is_number_integer() ||
        j["max_rejections"].get<std::int64_t>() < 0)
      throw InputError("/sample/max_rejections: expected a non-negative "
                       "integer");
    s.max_rejections = j["max_rejections"].get<std::size_t>();
  }
  return s;
}

inline RunSpec run_spec_from_json(const json &j) {
  if (!j.is_object())
    throw InputError("<root>: run spec must be a JSON object");
  RunSpec spec;
  if (!j.contains("chart"))
    throw InputError("/chart: missing");
  spec.chart = chart_from_json(j["chart"]);
  points_from_json(j, spec);
  if (j.contains("sample"))
    spec.sample = sample_from_json(j["sample"], spec.hessian().dimension());
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned())
      throw InputError("/seed: expected a nonnegative integer");
    spec.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("oracle"))
    spec.oracle = oracle_from_json(j["oracle"]);
  if (j.contains("perturb"))
    spec.perturb = detail::number_at(j["perturb"], "/perturb");
  if (j.contains("commands")) {
    if (!j["commands"].is_array())
      throw InputError("/commands: expected an array of names");
    for (std::size_t i = 0; i < j["commands"].size(); ++i) {
      const json &c = j["commands"][i];
      const std::string path = "/commands/" + std::to_string(i);
      if (!c.is_string())
        throw InputError(path + ": expected a string");
      const std::string name = c.get<std::string>();
      if (name != "analyze" && name != "rmap" && name != "verify" &&
          name != "roundtrip")
        throw InputError(path + ": unknown command \"" + name + "\"");
      spec.commands.push_back(name);
    }
  }
  if (j.contains("output")) {
    if (!j["output"].is_string())
      throw InputError("/output: expected a path string");
    spec.output = j["output"].get<std::string>();
  }
  return spec;
}

/// Parses JSON text; syntax errors become InputErrors carrying the byte
/// offset of the failure.
inline json parse_json_text(const std::string &text,
                            const std::string &source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    throw InputError(source + ": JSON syntax error at byte " +
                     std::to_string(e.byte) + ": " + e.what());
  }
}

inline RunSpec load_run_spec(const std::string &text,
                             const std::string &source = "<input>") {
  const json j = parse_json_text(text, source);
  try {
    return run_spec_from_json(j);
  } catch (const InputError &e) {
    throw InputError(source + ": " + e.what());
  } catch (const json::exception &e) {
    throw InputError(source + ": " + e.what());
  }
}

/// Replaces the spec's points with those of a points file: either a bare
/// array of base points or {"points": [...], "bundle_points": [...]}.
inline void replace_points(RunSpec &spec, const std::string &text,
                           const std::string &source) {
  json j = parse_json_text(text, source);
  if (j.is_array())
    j = json{{"points", std::move(j)}};
  if (!j.is_object())
    throw InputError(source + ": expected an array or an object of points");
  spec.points.clear();
  spec.bundle_points.clear();
  try {
    points_from_json(j, spec);
  } catch (const InputError &e) {
    throw InputError(source + ": " + e.what());
  }
}

/// Draws well-conditioned domain points (and fibers) from the box.
inline std::vector<BundlePoint> sample_points(const HessianChart &chart,
                                              const SampleSpec &s,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = chart.dimension();
  std::vector<BundlePoint> out;
  std::size_t rejections = 0;
  while (out.size() < s.count) {
    BundlePoint bp{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i)
      bp.x[i] = s.box[i].first + (s.box[i].second - s.box[i].first) * unit(rng);
    for (std::size_t i = 0; i < n; ++i)
      bp.u[i] = s.fiber_radius * (2.0 * unit(rng) - 1.0);
    const MetricDiagnostics d = chart.diagnose(bp.x);
    if (d.nondegenerate && d.condition <= s.cond_cap) {
      out.push_back(std::move(bp));
      continue;
    }
    if (++rejections > s.max_rejections)
      throw InputError("sampling rejected more than " +
                       std::to_string(s.max_rejections) +
                       " points; the box barely meets the domain");
  }
  return out;
}

/// All bundle points of a spec: explicit bundle points, base points lifted
/// with zero fiber, then sampled points. Requires at least one.
inline std::vector<BundlePoint> resolve_bundle_points(const RunSpec &spec) {
  const std::size_t n = spec.hessian().dimension();
  std::vector<BundlePoint> out = spec.bundle_points;
  for (const auto &p : spec.points)
    out.push_back({p, std::vector<double>(n, 0.0)});
  if (spec.sample) {
    if (!spec.seed)
      throw InputError("/seed: random sampling requested without a seed");
    auto drawn = sample_points(spec.hessian(), *spec.sample, *spec.seed);
    out.insert(out.end(), drawn.begin(), drawn.end());
  }
  if (out.empty())
    throw InputError("run spec has no points");
  return out;
}

} // namespace rmap
