#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "rmap/bundle.hpp"
#include "rmap/errors.hpp"
#include "rmap/fd_oracle.hpp"
#include "rmap/hessian_chart.hpp"
#include "rmap/report.hpp"
#include "rmap/run_spec.hpp"

namespace rmap {

namespace cmd_detail {

/// Tolerance for identities that hold exactly in floating point up to
/// rounding of O(1) operations.
inline constexpr double kRoundoff = 1e-12;

inline nlohmann::json decimal_vector(std::span<const double> v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v)
    a.push_back(decimal(x));
  return a;
}

inline nlohmann::json point_json(long index, const BundlePoint &bp) {
  return {{"index", std::to_string(index)},
          {"x", decimal_vector(bp.x)},
          {"u", decimal_vector(bp.u)}};
}

inline double oracle_tol(const fd::OracleConfig &cfg, double scale) {
  return cfg.tol_abs + cfg.tol_rel * scale;
}

/// Runs `body`; a DomainError or UnsupportedModeError becomes a failed
/// record under `check` for this point.
inline void guarded(Report &r, const std::string &check, long index,
                    const std::function<void()> &body) {
  try {
    body();
  } catch (const DomainError &e) {
    r.fail(check, index, std::string("domain: ") + e.what());
  } catch (const UnsupportedModeError &e) {
    r.fail(check, index, std::string("unsupported: ") + e.what());
  }
}

inline void fill_context(Report &r, const RunSpec &spec) {
  const HessianChart &c = spec.hessian();
  auto &ctx = r.context();
  ctx["chart"] = {{"potential", c.potential().to_string()},
                  {"degeneracy_tol", decimal(c.degeneracy_tol())}};
  ctx["dimension"] = std::to_string(c.dimension());
  ctx["special_real"] = c.is_special_real();
  ctx["oracle"] = oracle_to_json(spec.oracle);
  ctx["seed"] = spec.seed ? nlohmann::json(std::to_string(*spec.seed))
                          : nlohmann::json();
}

inline std::vector<double> basis(std::size_t n, std::size_t i) {
  std::vector<double> e(n, 0.0);
  e[i] = 1.0;
  return e;
}

/// sup_X |[S^_i, S^_j]|, the natural size of the curvature-type identities.
inline double bracket_scale(const HessianChart &c, std::span<const double> x) {
  return c.shat_bracket_at(x).sup_norm();
}

} // namespace cmd_detail

/// Metric, signature, S^ and Levi-Civita curvature at each base point.
inline Report cmd_analyze(const RunSpec &spec) {
  using namespace cmd_detail;
  const HessianChart &c = spec.hessian();
  const auto pts = resolve_bundle_points(spec);
  const fd::OracleConfig &cfg = spec.oracle;
  Report r("analyze");
  fill_context(r, spec);
  const Polynomial delta = c.relative_invariant();
  r.context()["relative_invariant"] = delta.to_string();

  for (std::size_t k = 0; k < pts.size(); ++k) {
    const long idx = static_cast<long>(k);
    const auto &x = pts[k].x;
    const MetricDiagnostics d = c.diagnose(x);
    nlohmann::json info = point_json(idx, pts[k]);
    info["det"] = decimal(d.det);
    info["condition"] = decimal(d.condition);
    info["signature"] = {std::to_string(d.positive),
                         std::to_string(d.negative)};
    info["metric"] = decimal_matrix(c.metric_at(x));
    if (!d.nondegenerate) {
      r.fail("domain", idx, "metric is degenerate at this point");
      r.point_info().push_back(std::move(info));
      continue;
    }
    r.compare("domain", idx, 0.0, 0.0);

    nlohmann::json shat = nlohmann::json::array();
    for (std::size_t i = 0; i < c.dimension(); ++i)
      shat.push_back(decimal_matrix(c.shat_at(x, basis(c.dimension(), i))));
    info["shat"] = std::move(shat);
    r.point_info().push_back(std::move(info));

    guarded(r, "base_curvature", idx, [&] {
      const DenseTensor closed = c.curvature_at(x, Connection::levi_civita);
      const DenseTensor fdv = fd::riemann_curvature(c.metric_field(), x, cfg);
      r.compare("base_curvature", idx, sup_distance(closed, fdv),
                oracle_tol(cfg, fdv.sup_norm()), closed.sup_norm(),
                fdv.sup_norm());
    });

    const double dv = delta.evaluate(x);
    r.compare("relative_invariant", idx, std::abs(dv - d.det),
              kRoundoff * std::max({1.0, std::abs(d.det), d.scale}), dv,
              d.det);
  }
  r.finalize();
  return r;
}

/// Special Kähler data on TM at each bundle point, with the axioms of the
/// flat connection and the closed-form curvatures checked by the oracle.
inline Report cmd_rmap(const RunSpec &spec) {
  using namespace cmd_detail;
  const HessianChart &c = spec.hessian();
  const auto pts = resolve_bundle_points(spec);
  const fd::OracleConfig &cfg = spec.oracle;
  const bool special = c.is_special_real();
  const std::size_t n = c.dimension();
  Report r("rmap");
  fill_context(r, spec);

  for (std::size_t k = 0; k < pts.size(); ++k) {
    const long idx = static_cast<long>(k);
    const BundlePoint &bp = pts[k];
    const std::vector<double> q = bp.coords();
    nlohmann::json info = point_json(idx, bp);
    if (!c.in_domain(bp.x)) {
      r.fail("domain", idx, "base point is off the domain");
      r.point_info().push_back(std::move(info));
      continue;
    }
    const KahlerData kd = kahler_data_at(c, bp);
    info["g_N"] = decimal_matrix(kd.gN);
    info["omega"] = decimal_matrix(kd.omega);

    guarded(r, "flatness", idx, [&] {
      const SpecialKahlerReport sk = special_kahler_check(c, bp, cfg);
      info["axioms"] = {{"torsion", decimal(sk.torsion)},
                        {"nabla_omega", decimal(sk.nabla_omega)},
                        {"nabla_J_symmetry", decimal(sk.nabla_J_symmetry)},
                        {"flatness", decimal(sk.flatness)}};
      const double scale = sup_norm(kd.gN);
      r.compare("torsion", idx, sk.torsion, kRoundoff * scale);
      r.compare("nabla_omega", idx, sk.nabla_omega, oracle_tol(cfg, scale));
      r.compare("nabla_J_symmetry", idx, sk.nabla_J_symmetry,
                kRoundoff * std::max(1.0, kd.gammaN.sup_norm()));
      r.compare("flatness", idx, sk.flatness,
                oracle_tol(cfg, bracket_scale(c, bp.x)));
    });

    guarded(r, "curvature_nablaN", idx, [&] {
      const DenseTensor closed = curvature_nablaN_at(c, bp);
      const DenseTensor fdv =
          fd::curvature_of_connection(bundle::gammaN_field(c), q, cfg);
      r.compare("curvature_nablaN", idx, sup_distance(closed, fdv),
                oracle_tol(cfg, fdv.sup_norm()), closed.sup_norm(),
                fdv.sup_norm());
      const RicciN ric = ricci_N_at(c, bp, basis(n, 0), basis(n, 0));
      const Eigen::MatrixXd fric = fd::ricci_of_curvature(fdv);
      info["ricci_nablaN"] = decimal_matrix(ric.nabla_matrix);
      r.compare("ricci_nablaN", idx, sup_norm(ric.nabla_matrix - fric),
                oracle_tol(cfg, sup_norm(fric)), sup_norm(ric.nabla_matrix),
                sup_norm(fric));
    });

    if (!special) {
      r.skip("curvature_gN", idx, "chart is not special real");
      r.skip("ricci_gN", idx, "chart is not special real");
    } else {
      guarded(r, "curvature_gN", idx, [&] {
        const DenseTensor closed = curvature_gN_at(c, bp);
        const DenseTensor fdv =
            fd::riemann_curvature(bundle::gN_field(c), q, cfg);
        r.compare("curvature_gN", idx, sup_distance(closed, fdv),
                  oracle_tol(cfg, fdv.sup_norm()), closed.sup_norm(),
                  fdv.sup_norm());
        const RicciN ric = ricci_N_at(c, bp, basis(n, 0), basis(n, 0));
        const Eigen::MatrixXd fric = fd::ricci_of_curvature(fdv);
        info["ricci_gN"] = decimal_matrix(*ric.metric_matrix);
        r.compare("ricci_gN", idx, sup_norm(*ric.metric_matrix - fric),
                  oracle_tol(cfg, sup_norm(fric)),
                  sup_norm(*ric.metric_matrix), sup_norm(fric));
      });
    }
    r.point_info().push_back(std::move(info));
  }
  r.finalize();
  return r;
}

/// Every identity of the base chart and of TM at every point. Identities
/// that need a special real chart are skipped on other charts.
inline Report cmd_verify(const RunSpec &spec) {
  using namespace cmd_detail;
  const HessianChart &c = spec.hessian();
  const auto pts = resolve_bundle_points(spec);
  const fd::OracleConfig &cfg = spec.oracle;
  const bool special = c.is_special_real();
  const std::size_t n = c.dimension(), N = 2 * n;
  Report r("verify");
  fill_context(r, spec);
  const Polynomial delta = c.relative_invariant();

  auto special_only = [&](const std::string &check, long idx,
                          const std::function<void()> &body) {
    if (!special)
      r.skip(check, idx, "chart is not special real");
    else
      guarded(r, check, idx, body);
  };

  for (std::size_t k = 0; k < pts.size(); ++k) {
    const long idx = static_cast<long>(k);
    const BundlePoint &bp = pts[k];
    const auto &x = bp.x;
    const std::vector<double> q = bp.coords();
    r.point_info().push_back(point_json(idx, bp));
    const MetricDiagnostics d = c.diagnose(x);
    if (!d.nondegenerate) {
      r.fail("domain", idx, "metric is degenerate at this point");
      continue;
    }
    r.compare("domain", idx, 0.0, 0.0);
    const double bscale = bracket_scale(c, x);

    // Base chart.
    guarded(r, "base_curvature", idx, [&] {
      const DenseTensor closed = c.curvature_at(x, Connection::levi_civita);
      const DenseTensor fdv = fd::riemann_curvature(c.metric_field(), x, cfg);
      r.compare("base_curvature", idx, sup_distance(closed, fdv),
                oracle_tol(cfg, fdv.sup_norm()), closed.sup_norm(),
                fdv.sup_norm());
    });
    guarded(r, "conjugate_flatness", idx, [&] {
      r.compare("conjugate_flatness", idx,
                c.conjugate_flatness_residual(x, cfg),
                oracle_tol(cfg, 4.0 * bscale));
    });
    guarded(r, "dS_levi_civita", idx, [&] {
      const DSResiduals ds = c.dS_identities_at(x, cfg);
      r.compare("dS_levi_civita", idx, ds.levi_civita,
                oracle_tol(cfg, bscale));
      r.compare("dS_flat", idx, ds.flat, oracle_tol(cfg, 2.0 * bscale));
    });
    guarded(r, "gradient_commutators", idx, [&] {
      const Eigen::MatrixXd ginv = c.metric_at(x).inverse();
      const double scale =
          sup_norm(ginv) * c.shat_tensor_at(x).sup_norm() * double(n);
      r.compare("gradient_commutators", idx,
                c.gradient_commutator_check(x, cfg), oracle_tol(cfg, scale));
    });
    {
      const double dv = delta.evaluate(x);
      r.compare("relative_invariant", idx, std::abs(dv - d.det),
                kRoundoff * std::max({1.0, std::abs(d.det), d.scale}), dv,
                d.det);
    }
    {
      const Eigen::MatrixXd g = c.metric_at(x);
      double asym = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::MatrixXd gs = g * c.shat_at(x, basis(n, i));
        asym = std::max(asym, sup_norm(gs - gs.transpose()));
      }
      r.compare("shat_self_adjoint", idx, asym,
                kRoundoff * std::max(1.0, c.cubic_form_at(x).sup_norm()));
    }

    // Bundle.
    const KahlerData kd = kahler_data_at(c, bp);
    const double gscale = sup_norm(kd.gN);
    guarded(r, "domega", idx, [&] {
      r.compare("domega", idx, domega_residual(c, bp, cfg),
                oracle_tol(cfg, gscale));
    });
    guarded(r, "christoffel_gN", idx, [&] {
      const DenseTensor fdv =
          fd::christoffels_of_metric(bundle::gN_field(c), q, cfg);
      r.compare("christoffel_gN", idx, sup_distance(kd.gammaLC, fdv),
                oracle_tol(cfg, fdv.sup_norm()), kd.gammaLC.sup_norm(),
                fdv.sup_norm());
    });
    guarded(r, "torsion", idx, [&] {
      const SpecialKahlerReport sk = special_kahler_check(c, bp, cfg);
      r.compare("torsion", idx, sk.torsion, kRoundoff * gscale);
      r.compare("nabla_omega", idx, sk.nabla_omega, oracle_tol(cfg, gscale));
      r.compare("nabla_J_symmetry", idx, sk.nabla_J_symmetry,
                kRoundoff * std::max(1.0, kd.gammaN.sup_norm()));
      if (special)
        r.compare("flatness", idx, sk.flatness, oracle_tol(cfg, bscale));
      else
        r.skip("flatness", idx, "chart is not special real");
    });
    {
      const DistributionReport dr = distribution_check(c, bp);
      r.compare("distributions", idx, dr.max(),
                kRoundoff * std::max(1.0, kd.gammaLC.sup_norm() + gscale));
    }
    {
      double anti = 0.0;
      for (std::size_t I = 0; I < N; ++I) {
        std::vector<double> e(N, 0.0);
        e[I] = 1.0;
        const Eigen::MatrixXd s = shatN_at(c, bp, e);
        anti = std::max(anti, sup_norm(s * kd.J + kd.J * s));
      }
      r.compare("shatN_J_anticommute", idx, anti,
                kRoundoff * std::max(1.0, kd.gammaLC.sup_norm()));
    }
    guarded(r, "curvature_nablaN", idx, [&] {
      const DenseTensor closed = curvature_nablaN_at(c, bp);
      const DenseTensor fdv =
          fd::curvature_of_connection(bundle::gammaN_field(c), q, cfg);
      r.compare("curvature_nablaN", idx, sup_distance(closed, fdv),
                oracle_tol(cfg, fdv.sup_norm()), closed.sup_norm(),
                fdv.sup_norm());
      const RicciN ric = ricci_N_at(c, bp, basis(n, 0), basis(n, 0));
      const Eigen::MatrixXd fric = fd::ricci_of_curvature(fdv);
      r.compare("ricci_nablaN", idx, sup_norm(ric.nabla_matrix - fric),
                oracle_tol(cfg, sup_norm(fric)), sup_norm(ric.nabla_matrix),
                sup_norm(fric));
    });
    special_only("curvature_gN", idx, [&] {
      const DenseTensor closed = curvature_gN_at(c, bp);
      const DenseTensor fdv =
          fd::riemann_curvature(bundle::gN_field(c), q, cfg);
      r.compare("curvature_gN", idx, sup_distance(closed, fdv),
                oracle_tol(cfg, fdv.sup_norm()), closed.sup_norm(),
                fdv.sup_norm());
      const DenseTensor bracket = shatN_bracket_at(c, bp);
      r.compare("curvature_gN_bracket", idx,
                sup_distance(closed, -1.0 * bracket),
                kRoundoff * std::max(1.0, bracket.sup_norm()));
      const RicciN ric = ricci_N_at(c, bp, basis(n, 0), basis(n, 0));
      const Eigen::MatrixXd fric = fd::ricci_of_curvature(fdv);
      r.compare("ricci_gN", idx, sup_norm(*ric.metric_matrix - fric),
                oracle_tol(cfg, sup_norm(fric)), sup_norm(*ric.metric_matrix),
                sup_norm(fric));
    });
    if (!special) {
      r.skip("curvature_gN_bracket", idx, "chart is not special real");
      r.skip("ricci_gN", idx, "chart is not special real");
    }
    if (special && (d.positive == 0 || d.negative == 0)) {
      const RicciN ric = ricci_N_at(c, bp, basis(n, 0), basis(n, 0));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*ric.metric_matrix);
      const double lowest = es.eigenvalues().minCoeff();
      r.compare("ricci_gN_nonnegative", idx, std::max(0.0, -lowest),
                kRoundoff * std::max(1.0, sup_norm(*ric.metric_matrix)),
                lowest);
    } else {
      r.skip("ricci_gN_nonnegative", idx,
             special ? "metric is indefinite" : "chart is not special real");
    }
    special_only("exterior_levi_civita", idx, [&] {
      const ExteriorReport er = shatN_exterior_check(c, bp, cfg);
      r.compare("exterior_levi_civita", idx, er.levi_civita,
                oracle_tol(cfg, bscale));
      r.compare("exterior_nablaN", idx, er.nabla_mismatch,
                oracle_tol(cfg, er.nabla_norm), std::nullopt, er.nabla_norm);
    });
    if (!special)
      r.skip("exterior_nablaN", idx, "chart is not special real");

    // Fiber reflection about u0 = u + 1/2.
    {
      std::vector<double> u0 = bp.u;
      for (double &v : u0)
        v += 0.5;
      const ReflectionReport rr = reflection_isometry_check(c, bp, u0);
      const double tol = kRoundoff * std::max(1.0, gscale);
      r.compare("reflection_metric", idx, rr.metric, tol);
      r.compare("reflection_nablaN", idx, rr.connection,
                kRoundoff * std::max(1.0, kd.gammaN.sup_norm()));
      r.compare("reflection_levi_civita", idx, rr.lc_connection,
                kRoundoff * std::max(1.0, kd.gammaLC.sup_norm()));
      r.compare("reflection_J_reversed", idx, rr.J_antiholomorphic,
                kRoundoff, std::nullopt, std::nullopt,
                "d sigma J = -J d sigma; J-preservation residual " +
                    decimal(rr.J_holomorphic));
      r.compare("reflection_involution", idx, rr.involution,
                kRoundoff * std::max(1.0, sup_norm(to_vector(u0))));

      std::vector<double> u1 = u0;
      for (double &v : u1)
        v += 0.25;
      const BundlePoint twice = reflect(reflect(bp, u0), u1);
      double shift = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        shift = std::max({shift, std::abs(twice.x[i] - bp.x[i]),
                          std::abs(twice.u[i] -
                                   (bp.u[i] + 2.0 * (u1[i] - u0[i])))});
      r.compare("reflection_composition", idx, shift,
                kRoundoff * std::max(1.0, std::abs(u1[0]) + 1.0));
    }
  }
  r.finalize();
  return r;
}

/// Reconstructs the base metric from g^N (optionally perturbed off the
/// image of the r-map) and compares it with the chart's metric.
inline Report cmd_roundtrip(const RunSpec &spec) {
  using namespace cmd_detail;
  const HessianChart &c = spec.hessian();
  const auto pts = resolve_bundle_points(spec);
  const fd::OracleConfig &cfg = spec.oracle;
  Report r("roundtrip");
  fill_context(r, spec);
  r.context()["perturb"] = decimal(spec.perturb);
  const BundleMetricField field = bundle_metric_of(c, spec.perturb);

  for (std::size_t k = 0; k < pts.size(); ++k) {
    const long idx = static_cast<long>(k);
    const BundlePoint &bp = pts[k];
    nlohmann::json info = point_json(idx, bp);
    if (!c.in_domain(bp.x)) {
      r.fail("domain", idx, "base point is off the domain");
      r.point_info().push_back(std::move(info));
      continue;
    }
    try {
      const ReconstructedBase rb =
          reconstruct_base(field, std::span(&bp, 1), cfg);
      const Eigen::MatrixXd g = c.metric_at(bp.x);
      info["metric"] = decimal_matrix(rb.metric[0]);
      r.compare("roundtrip_metric", idx, sup_norm(rb.metric[0] - g),
                kRoundoff * std::max(1.0, sup_norm(g)), sup_norm(rb.metric[0]),
                sup_norm(g));
      r.compare("roundtrip_hessian", idx, rb.hessian_asymmetry,
                oracle_tol(cfg, c.cubic_form_at(bp.x).sup_norm()));
    } catch (const NotInImageError &e) {
      r.fail("roundtrip_metric", idx, std::string("not in image: ") + e.what());
    } catch (const DomainError &e) {
      r.fail("roundtrip_metric", idx, std::string("domain: ") + e.what());
    }
    r.point_info().push_back(std::move(info));
  }
  r.finalize();
  return r;
}

/// Dispatches on the subcommand name.
inline Report run_command(const std::string &name, const RunSpec &spec) {
  if (name == "analyze")
    return cmd_analyze(spec);
  if (name == "rmap")
    return cmd_rmap(spec);
  if (name == "verify")
    return cmd_verify(spec);
  if (name == "roundtrip")
    return cmd_roundtrip(spec);
  throw InputError("unknown command \"" + name + "\"");
}

} // namespace rmap
