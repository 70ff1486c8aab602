#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmap/errors.hpp"
#include "rmap/fd_oracle.hpp"
#include "rmap/hessian_chart.hpp"
#include "rmap/tensor.hpp"

// The tangent bundle N = TM of a Hessian chart, in canonical coordinates
// (x^1..x^n, u^1..u^n). Horizontal indices come first, vertical second.

namespace rmap {

struct BundlePoint {
  std::vector<double> x;
  std::vector<double> u;

  std::vector<double> coords() const {
    std::vector<double> q(x);
    q.insert(q.end(), u.begin(), u.end());
    return q;
  }

  static BundlePoint from_coords(std::span<const double> q) {
    const std::size_t n = q.size() / 2;
    return {std::vector<double>(q.begin(), q.begin() + n),
            std::vector<double>(q.begin() + n, q.end())};
  }
};

struct KahlerData {
  Eigen::MatrixXd gN;
  Eigen::MatrixXd J;
  Eigen::MatrixXd omega;
  DenseTensor gammaN;  // connection nabla^N = D^N - S^N
  DenseTensor gammaLC; // Levi-Civita connection D^N of gN
};

namespace bundle {

inline Eigen::MatrixXd block_diag(const Eigen::MatrixXd &a,
                                  const Eigen::MatrixXd &b) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(a.rows() + b.rows(),
                                            a.cols() + b.cols());
  m.topLeftCorner(a.rows(), a.cols()) = a;
  m.bottomRightCorner(b.rows(), b.cols()) = b;
  return m;
}

/// [[tl, tr], [bl, br]] from n x n blocks.
inline Eigen::MatrixXd blocks(const Eigen::MatrixXd &tl,
                              const Eigen::MatrixXd &tr,
                              const Eigen::MatrixXd &bl,
                              const Eigen::MatrixXd &br) {
  const Eigen::Index n = tl.rows();
  Eigen::MatrixXd m(2 * n, 2 * n);
  m << tl, tr, bl, br;
  return m;
}

/// J = [[0, -I], [I, 0]]: J d/dx^i = d/du^i.
inline Eigen::MatrixXd complex_structure(std::size_t n) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
  return blocks(Z, -I, I, Z);
}

inline void set_connection_matrix(DenseTensor &gamma, std::size_t I,
                                  const Eigen::MatrixXd &m) {
  for (Eigen::Index k = 0; k < m.rows(); ++k)
    for (Eigen::Index l = 0; l < m.cols(); ++l)
      gamma(k, I, l) = m(k, l);
}

inline void check_point(const HessianChart &chart, const BundlePoint &bp) {
  if (bp.x.size() != chart.dimension() || bp.u.size() != chart.dimension())
    throw InputError("bundle point does not match the chart dimension " +
                     std::to_string(chart.dimension()));
  for (double v : bp.u)
    if (!std::isfinite(v))
      throw InputError("bundle point has a non-finite fiber coordinate");
}

inline std::vector<Eigen::MatrixXd> shat_matrices(const HessianChart &chart,
                                                  std::span<const double> x) {
  const DenseTensor s = chart.shat_tensor_at(x);
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t i = 0; i < chart.dimension(); ++i)
    out.push_back(connection_matrix(s, i));
  return out;
}

/// (P_{e_i, e_j})^k_l = g^{km} (d^4 h)_{ijlm}.
inline std::vector<std::vector<Eigen::MatrixXd>>
p_matrices(const HessianChart &chart, std::span<const double> x) {
  const std::size_t n = chart.dimension();
  const auto lu = chart.factor(x);
  const DenseTensor dS = chart.cubic_form_derivative_at(x);
  std::vector<std::vector<Eigen::MatrixXd>> P(
      n, std::vector<Eigen::MatrixXd>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Eigen::MatrixXd rhs(n, n); // rhs(m, l) = dS(i, j, l, m)
      for (std::size_t m = 0; m < n; ++m)
        for (std::size_t l = 0; l < n; ++l)
          rhs(m, l) = dS(i, j, l, m);
      P[i][j] = lu.solve(rhs);
    }
  return P;
}

} // namespace bundle

/// g^N = diag(g, g), J, omega = g^N J and the coefficients of D^N and nabla^N.
inline KahlerData kahler_data_at(const HessianChart &chart,
                                 const BundlePoint &bp) {
  bundle::check_point(chart, bp);
  const std::size_t n = chart.dimension();
  const Eigen::MatrixXd g = chart.metric_at(bp.x);
  const auto S = bundle::shat_matrices(chart, bp.x);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);

  KahlerData k;
  k.gN = bundle::block_diag(g, g);
  k.J = bundle::complex_structure(n);
  k.omega = k.gN * k.J;
  k.gammaLC = DenseTensor::cube(2 * n, 3);
  k.gammaN = DenseTensor::cube(2 * n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::MatrixXd lc = bundle::block_diag(S[i], S[i]);
    bundle::set_connection_matrix(k.gammaLC, i, lc);
    bundle::set_connection_matrix(k.gammaLC, n + i, k.J * lc);
    bundle::set_connection_matrix(k.gammaN, i,
                                  bundle::block_diag(Z, 2.0 * S[i]));
    bundle::set_connection_matrix(k.gammaN, n + i,
                                  bundle::blocks(Z, Z, 2.0 * S[i], Z));
  }
  return k;
}

/// S^N along a 2n-direction: X^h -> diag(S^_X, -S^_X),
/// X^v -> [[0, -S^_X], [-S^_X, 0]].
inline Eigen::MatrixXd shatN_at(const HessianChart &chart,
                                const BundlePoint &bp,
                                std::span<const double> direction) {
  bundle::check_point(chart, bp);
  const std::size_t n = chart.dimension();
  if (direction.size() != 2 * n)
    throw InputError("bundle direction must have 2n components");
  const auto S = bundle::shat_matrices(chart, bp.x);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (direction[i] != 0.0)
      out += direction[i] * bundle::block_diag(S[i], -S[i]);
    if (direction[n + i] != 0.0)
      out += direction[n + i] * bundle::blocks(Z, -S[i], -S[i], Z);
  }
  return out;
}

/// S^N as coefficients: C(K, I, L) = (S^N_{e_I})^K_L.
inline DenseTensor shatN_coefficients(const HessianChart &chart,
                                      const BundlePoint &bp) {
  const std::size_t N = 2 * chart.dimension();
  DenseTensor c = DenseTensor::cube(N, 3);
  std::vector<double> e(N, 0.0);
  for (std::size_t I = 0; I < N; ++I) {
    e[I] = 1.0;
    bundle::set_connection_matrix(c, I, shatN_at(chart, bp, e));
    e[I] = 0.0;
  }
  return c;
}

/// Closed-form curvature of the Levi-Civita connection of g^N, valid for
/// special real charts:
///   R(X^h, Y^h) = R(X^v, Y^v) = -diag([S^_X, S^_Y], [S^_X, S^_Y])
///   R(X^h, Y^v) = [[0, {S^_X, S^_Y}], [-{S^_X, S^_Y}, 0]]
inline DenseTensor curvature_gN_at(const HessianChart &chart,
                                   const BundlePoint &bp) {
  bundle::check_point(chart, bp);
  if (!chart.is_special_real())
    throw UnsupportedModeError("closed-form curvature of g^N requires a "
                               "special real chart (deg h <= 3)");
  const std::size_t n = chart.dimension();
  const auto S = bundle::shat_matrices(chart, bp.x);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
  return assemble_two_form(2 * n, 2 * n, [&](std::size_t c, std::size_t d) {
    const bool ch = c < n, dh = d < n;
    const std::size_t i = c % n, j = d % n;
    if (ch == dh) {
      const Eigen::MatrixXd br = -commutator(S[i], S[j]);
      return bundle::block_diag(br, br);
    }
    if (ch) {
      const Eigen::MatrixXd ac = anticommutator(S[i], S[j]);
      return bundle::blocks(Z, ac, -ac, Z);
    }
    const Eigen::MatrixXd ac = anticommutator(S[j], S[i]);
    return Eigen::MatrixXd(-bundle::blocks(Z, ac, -ac, Z));
  });
}

/// [S^N, S^N](K, L, I, J) = [S^N_{e_I}, S^N_{e_J}]^K_L.
inline DenseTensor shatN_bracket_at(const HessianChart &chart,
                                    const BundlePoint &bp) {
  const std::size_t N = 2 * chart.dimension();
  std::vector<Eigen::MatrixXd> s;
  std::vector<double> e(N, 0.0);
  for (std::size_t I = 0; I < N; ++I) {
    e[I] = 1.0;
    s.push_back(shatN_at(chart, bp, e));
    e[I] = 0.0;
  }
  return assemble_two_form(N, N, [&](std::size_t I, std::size_t J) {
    return commutator(s[I], s[J]);
  });
}

/// P(i, j, k, l) = (P_{e_i, e_j})^k_l with P_{X,Y}Z = g^{-1}(nabla_X S)(Y,Z,.).
inline DenseTensor p_tensor_at(const HessianChart &chart,
                               std::span<const double> x) {
  const std::size_t n = chart.dimension();
  const auto P = bundle::p_matrices(chart, x);
  DenseTensor t = DenseTensor::cube(n, 4);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      t.set_matrix({i, j}, P[i][j]);
  return t;
}

/// Closed-form curvature of nabla^N:
///   R(X^h, Y^h) = diag(0, P_{X,Y} - P_{Y,X}), R(X^v, Y^v) = 0,
///   R(X^h, Y^v) = [[0, 0], [P_{X,Y}, 0]].
inline DenseTensor curvature_nablaN_at(const HessianChart &chart,
                                       const BundlePoint &bp) {
  bundle::check_point(chart, bp);
  const std::size_t n = chart.dimension();
  const auto P = bundle::p_matrices(chart, bp.x);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
  return assemble_two_form(2 * n, 2 * n, [&](std::size_t c, std::size_t d) {
    const bool ch = c < n, dh = d < n;
    const std::size_t i = c % n, j = d % n;
    if (ch && dh)
      return bundle::block_diag(Z, P[i][j] - P[j][i]);
    if (!ch && !dh)
      return Eigen::MatrixXd(Eigen::MatrixXd::Zero(2 * n, 2 * n));
    if (ch)
      return bundle::blocks(Z, Z, P[i][j], Z);
    return Eigen::MatrixXd(-bundle::blocks(Z, Z, P[j][i], Z));
  });
}

struct RicciN {
  /// ric^{g^N}(X^h + Y^v, X^h + Y^v) = 2 tr S^_X^2 + 2 tr S^_Y^2; empty for
  /// charts that are not special real.
  std::optional<double> metric;
  /// ric^{nabla^N}(X^h, Y^h) = -tr P_{X,Y}.
  double nabla_hh = 0.0;
  /// Full 2n x 2n Ricci matrices in the convention ric(X, Y) = tr(Z ->
  /// R(Z, X) Y).
  std::optional<Eigen::MatrixXd> metric_matrix;
  Eigen::MatrixXd nabla_matrix;
};

inline RicciN ricci_N_at(const HessianChart &chart, const BundlePoint &bp,
                         std::span<const double> X,
                         std::span<const double> Y) {
  bundle::check_point(chart, bp);
  const std::size_t n = chart.dimension();
  if (X.size() != n || Y.size() != n)
    throw InputError("Ricci directions must have n components");
  RicciN out;
  const auto P = bundle::p_matrices(chart, bp.x);
  out.nabla_matrix = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.nabla_matrix(i, j) = -P[i][j].trace();
  const Eigen::VectorXd x = to_vector(X), y = to_vector(Y);
  out.nabla_hh = x.dot(out.nabla_matrix.topLeftCorner(n, n) * y);

  if (chart.is_special_real()) {
    const auto S = bundle::shat_matrices(chart, bp.x);
    Eigen::MatrixXd block(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        block(i, j) = 2.0 * (S[i] * S[j]).trace();
    out.metric_matrix = bundle::block_diag(block, block);
    const Eigen::MatrixXd SX = chart.shat_at(bp.x, X);
    const Eigen::MatrixXd SY = chart.shat_at(bp.x, Y);
    out.metric = 2.0 * (SX * SX).trace() + 2.0 * (SY * SY).trace();
  }
  return out;
}

// Fields on N for the oracle. Coordinates q = (x, u).

namespace bundle {

template <typename F>
fd::TensorField field_on(const HessianChart &chart,
                         std::vector<std::size_t> shape,
                         std::vector<fd::Slot> variance, F &&f) {
  return {2 * chart.dimension(), std::move(shape), std::move(variance),
          [chart, f = std::forward<F>(f)](std::span<const double> q) {
            return f(chart, BundlePoint::from_coords(q));
          }};
}

inline fd::TensorField gN_field(const HessianChart &chart) {
  const std::size_t N = 2 * chart.dimension();
  return field_on(chart, {N, N}, {fd::Slot::lower, fd::Slot::lower},
                  [](const HessianChart &c, const BundlePoint &bp) {
                    const Eigen::MatrixXd g = c.checked_metric_at(bp.x);
                    return DenseTensor::from_matrix(block_diag(g, g));
                  });
}

inline fd::TensorField omega_field(const HessianChart &chart) {
  const std::size_t N = 2 * chart.dimension();
  return field_on(chart, {N, N}, {fd::Slot::lower, fd::Slot::lower},
                  [](const HessianChart &c, const BundlePoint &bp) {
                    const Eigen::MatrixXd g = c.checked_metric_at(bp.x);
                    return DenseTensor::from_matrix(
                        block_diag(g, g) * complex_structure(c.dimension()));
                  });
}

inline fd::TensorField J_field(const HessianChart &chart) {
  const std::size_t n = chart.dimension();
  return fd::constant_field(
      2 * n, DenseTensor::from_matrix(complex_structure(n)),
      {fd::Slot::upper, fd::Slot::lower});
}

inline fd::TensorField gammaN_field(const HessianChart &chart) {
  const std::size_t N = 2 * chart.dimension();
  return field_on(chart, {N, N, N},
                  {fd::Slot::upper, fd::Slot::lower, fd::Slot::lower},
                  [](const HessianChart &c, const BundlePoint &bp) {
                    return kahler_data_at(c, bp).gammaN;
                  });
}

inline fd::TensorField gammaLC_field(const HessianChart &chart) {
  const std::size_t N = 2 * chart.dimension();
  return field_on(chart, {N, N, N},
                  {fd::Slot::upper, fd::Slot::lower, fd::Slot::lower},
                  [](const HessianChart &c, const BundlePoint &bp) {
                    return kahler_data_at(c, bp).gammaLC;
                  });
}

/// S^N as an endomorphism-valued 1-form A(I, K, L) = (S^N_{e_I})^K_L.
inline fd::TensorField shatN_form_field(const HessianChart &chart) {
  const std::size_t N = 2 * chart.dimension();
  return field_on(chart, {N, N, N},
                  {fd::Slot::lower, fd::Slot::upper, fd::Slot::lower},
                  [](const HessianChart &c, const BundlePoint &bp) {
                    const DenseTensor coeff = shatN_coefficients(c, bp);
                    DenseTensor a = DenseTensor::cube(coeff.shape()[0], 3);
                    a.for_each_index([&](std::span<const std::size_t> idx) {
                      a.at(idx) = coeff(idx[1], idx[0], idx[2]);
                    });
                    return a;
                  });
}

} // namespace bundle

/// Sup-norm of the FD exterior derivative of omega over all index triples.
inline double domega_residual(const HessianChart &chart, const BundlePoint &bp,
                              const fd::OracleConfig &cfg) {
  bundle::check_point(chart, bp);
  return fd::exterior_derivative(bundle::omega_field(chart), bp.coords(), cfg)
      .sup_norm();
}

struct SpecialKahlerReport {
  double torsion = 0.0;          // a) Gamma^K_{IJ} - Gamma^K_{JI}
  double nabla_omega = 0.0;      // b) nabla^N omega
  double nabla_J_symmetry = 0.0; // c) (nabla_X J)Y - (nabla_Y J)X
  double flatness = 0.0;         // d) FD curvature of nabla^N
};

inline SpecialKahlerReport special_kahler_check(const HessianChart &chart,
                                                const BundlePoint &bp,
                                                const fd::OracleConfig &cfg) {
  bundle::check_point(chart, bp);
  const std::size_t N = 2 * chart.dimension();
  const std::vector<double> q = bp.coords();
  const fd::TensorField gamma = bundle::gammaN_field(chart);
  SpecialKahlerReport r;
  r.torsion = fd::torsion_residual(gamma(q));
  r.nabla_omega =
      fd::covariant_derivative(bundle::omega_field(chart), gamma, q, cfg)
          .sup_norm();
  const DenseTensor dJ =
      fd::covariant_derivative(bundle::J_field(chart), gamma, q, cfg);
  for (std::size_t I = 0; I < N; ++I)
    for (std::size_t K = 0; K < N; ++K)
      for (std::size_t L = 0; L < N; ++L)
        r.nabla_J_symmetry =
            std::max(r.nabla_J_symmetry, std::abs(dJ(I, K, L) - dJ(L, K, I)));
  r.flatness = fd::curvature_of_connection(gamma, q, cfg).sup_norm();
  return r;
}

struct DistributionReport {
  double orthogonality = 0.0;     // gN(T^h, T^v)
  double lagrangian_h = 0.0;      // omega on T^h
  double lagrangian_v = 0.0;      // omega on T^v
  double nablaN_horizontal = 0.0; // Gamma^N on horizontal pairs
  double nablaN_vertical = 0.0;   // Gamma^N on vertical pairs
  double lc_horizontal = 0.0;     // vertical part of Gamma^LC on horizontal pairs

  double max() const {
    return std::max({orthogonality, lagrangian_h, lagrangian_v,
                     nablaN_horizontal, nablaN_vertical, lc_horizontal});
  }
};

inline DistributionReport distribution_check(const HessianChart &chart,
                                             const BundlePoint &bp) {
  const std::size_t n = chart.dimension();
  const KahlerData k = kahler_data_at(chart, bp);
  DistributionReport r;
  r.orthogonality = sup_norm(k.gN.topRightCorner(n, n));
  r.lagrangian_h = sup_norm(k.omega.topLeftCorner(n, n));
  r.lagrangian_v = sup_norm(k.omega.bottomRightCorner(n, n));
  for (std::size_t K = 0; K < 2 * n; ++K)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        r.nablaN_horizontal =
            std::max(r.nablaN_horizontal, std::abs(k.gammaN(K, i, j)));
        r.nablaN_vertical =
            std::max(r.nablaN_vertical, std::abs(k.gammaN(K, n + i, n + j)));
        if (K >= n)
          r.lc_horizontal =
              std::max(r.lc_horizontal, std::abs(k.gammaLC(K, i, j)));
      }
  return r;
}

/// sigma(x, u) = (x, 2 u0 - u).
inline BundlePoint reflect(const BundlePoint &bp, std::span<const double> u0) {
  if (u0.size() != bp.u.size())
    throw InputError("reflection centre has wrong dimension");
  BundlePoint out = bp;
  for (std::size_t i = 0; i < u0.size(); ++i)
    out.u[i] = 2.0 * u0[i] - bp.u[i];
  return out;
}

struct ReflectionReport {
  double metric = 0.0;            // d sigma^T gN(sigma p) d sigma - gN(p)
  double J_holomorphic = 0.0;     // d sigma J(p) d sigma^-1 - J(sigma p)
  double J_antiholomorphic = 0.0; // d sigma J(p) d sigma^-1 + J(sigma p)
  double connection = 0.0;        // pushed-forward Gamma^N - Gamma^N(sigma p)
  double lc_connection = 0.0;     // same for Gamma^LC
  double involution = 0.0;        // sigma(sigma(p)) - p
};

/// Compares the structures at sigma(bp) with their transport from bp. The
/// differential d sigma = diag(I, -I) is constant, so transport is a
/// similarity with no second-derivative term.
inline ReflectionReport reflection_isometry_check(const HessianChart &chart,
                                                  const BundlePoint &bp,
                                                  std::span<const double> u0) {
  bundle::check_point(chart, bp);
  const std::size_t n = chart.dimension(), N = 2 * n;
  const BundlePoint image = reflect(bp, u0);
  const KahlerData here = kahler_data_at(chart, bp);
  const KahlerData there = kahler_data_at(chart, image);
  Eigen::VectorXd eps(N);
  eps << Eigen::VectorXd::Ones(n), -Eigen::VectorXd::Ones(n);
  const Eigen::MatrixXd D = eps.asDiagonal();

  ReflectionReport r;
  r.metric = sup_norm(D.transpose() * there.gN * D - here.gN);
  const Eigen::MatrixXd pushed_J = D * here.J * D; // D^-1 = D
  r.J_holomorphic = sup_norm(pushed_J - there.J);
  r.J_antiholomorphic = sup_norm(pushed_J + there.J);
  for (std::size_t K = 0; K < N; ++K)
    for (std::size_t I = 0; I < N; ++I)
      for (std::size_t L = 0; L < N; ++L) {
        const double sign = eps(K) * eps(I) * eps(L);
        r.connection = std::max(
            r.connection,
            std::abs(sign * here.gammaN(K, I, L) - there.gammaN(K, I, L)));
        r.lc_connection = std::max(
            r.lc_connection,
            std::abs(sign * here.gammaLC(K, I, L) - there.gammaLC(K, I, L)));
      }
  const BundlePoint back = reflect(image, u0);
  for (std::size_t i = 0; i < n; ++i)
    r.involution = std::max({r.involution, std::abs(back.u[i] - bp.u[i]),
                             std::abs(back.x[i] - bp.x[i])});
  return r;
}

/// Closed form of d^{nabla^N} S^N for special real charts:
///   (X^h, Y^h), (X^v, Y^v): -2 diag([S^_X, S^_Y], [S^_X, S^_Y])
///   (X^h, Y^v):             2 [[0, {S^_X, S^_Y}], [-{S^_X, S^_Y}, 0]]
inline DenseTensor shatN_exterior_closed_form(const HessianChart &chart,
                                              const BundlePoint &bp) {
  bundle::check_point(chart, bp);
  if (!chart.is_special_real())
    throw UnsupportedModeError("closed form of d^nabla S^N requires a special "
                               "real chart");
  const std::size_t n = chart.dimension();
  const auto S = bundle::shat_matrices(chart, bp.x);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
  return assemble_two_form(2 * n, 2 * n, [&](std::size_t c, std::size_t d) {
    const bool ch = c < n, dh = d < n;
    const std::size_t i = c % n, j = d % n;
    if (ch == dh) {
      const Eigen::MatrixXd br = commutator(S[i], S[j]);
      return Eigen::MatrixXd(-2.0 * bundle::block_diag(br, br));
    }
    if (ch) {
      const Eigen::MatrixXd ac = anticommutator(S[i], S[j]);
      return Eigen::MatrixXd(2.0 * bundle::blocks(Z, ac, -ac, Z));
    }
    const Eigen::MatrixXd ac = anticommutator(S[j], S[i]);
    return Eigen::MatrixXd(-2.0 * bundle::blocks(Z, ac, -ac, Z));
  });
}

struct ExteriorReport {
  double levi_civita = 0.0;    // sup |d^{D^N} S^N| (FD)
  double nabla_mismatch = 0.0; // sup |FD d^{nabla^N} S^N - closed form|
  double nabla_norm = 0.0;     // sup |FD d^{nabla^N} S^N|
};

/// Both exterior covariant derivatives of S^N by the oracle. The Levi-Civita
/// coefficients come from the oracle's own Christoffel computation on g^N.
inline ExteriorReport shatN_exterior_check(const HessianChart &chart,
                                           const BundlePoint &bp,
                                           const fd::OracleConfig &cfg) {
  const std::size_t N = 2 * chart.dimension();
  const fd::TensorField A = bundle::shatN_form_field(chart);
  const fd::TensorField gN = bundle::gN_field(chart);
  fd::TensorField lc{N,
                     {N, N, N},
                     {fd::Slot::upper, fd::Slot::lower, fd::Slot::lower},
                     [gN, cfg](std::span<const double> q) {
                       return fd::christoffels_of_metric(gN, q, cfg);
                     }};
  fd::TensorField nabla = lc;
  nabla.eval = [lc, chart](std::span<const double> q) {
    return lc(q) - shatN_coefficients(chart, BundlePoint::from_coords(q));
  };
  const std::vector<double> q = bp.coords();
  ExteriorReport r;
  r.levi_civita = fd::covariant_exterior_derivative(A, lc, q, cfg).sup_norm();
  const DenseTensor dn = fd::covariant_exterior_derivative(A, nabla, q, cfg);
  r.nabla_norm = dn.sup_norm();
  r.nabla_mismatch = sup_distance(dn, shatN_exterior_closed_form(chart, bp));
  return r;
}

/// A bundle metric in canonical coordinates, as handed to reconstruct_base.
struct BundleMetricField {
  std::size_t dimension = 0; // n; the field is 2n x 2n
  std::function<Eigen::MatrixXd(const BundlePoint &)> eval;
};

/// g^N of a chart, optionally with injected u-dependence
/// gN(x, u) + perturb * (u^1 + ... + u^n) * I.
inline BundleMetricField bundle_metric_of(const HessianChart &chart,
                                          double perturb = 0.0) {
  return {chart.dimension(), [chart, perturb](const BundlePoint &bp) {
            const Eigen::MatrixXd g = chart.metric_at(bp.x);
            Eigen::MatrixXd gN = bundle::block_diag(g, g);
            if (perturb != 0.0) {
              double s = 0.0;
              for (double v : bp.u)
                s += v;
              gN += perturb * s *
                    Eigen::MatrixXd::Identity(gN.rows(), gN.cols());
            }
            return gN;
          }};
}

struct ReconstructedBase {
  std::vector<std::vector<double>> points;
  std::vector<Eigen::MatrixXd> metric; // g_ij(x) at each sample
  Eigen::MatrixXd frame;               // columns X_j = -J U_j in (x, u)
  double u_dependence = 0.0;
  double block_mismatch = 0.0;
  double hessian_asymmetry = 0.0; // sup |d_i g_jk - d_j g_ik| (FD)
};

/// Inverts the r-map in canonical coordinates: checks that the bundle metric
/// is u-independent and of the form diag(g, g), extracts g, and checks by FD
/// that d_i g_jk is totally symmetric. Anything else is not in the image.
inline ReconstructedBase reconstruct_base(const BundleMetricField &field,
                                          std::span<const BundlePoint> samples,
                                          const fd::OracleConfig &cfg,
                                          double tol = 1e-10) {
  const std::size_t n = field.dimension;
  if (samples.empty())
    throw InputError("reconstruct_base needs at least one sample");
  const Eigen::MatrixXd J = bundle::complex_structure(n);
  ReconstructedBase out;
  out.frame.resize(2 * n, n);
  for (std::size_t j = 0; j < n; ++j)
    out.frame.col(j) = -J.col(n + j);

  // g(x) read from the upper-left block at u = 0.
  fd::TensorField base{n,
                       {n, n},
                       {fd::Slot::lower, fd::Slot::lower},
                       [&field, n](std::span<const double> x) {
                         BundlePoint bp{{x.begin(), x.end()},
                                        std::vector<double>(n, 0.0)};
                         return DenseTensor::from_matrix(
                             field.eval(bp).topLeftCorner(n, n));
                       }};

  for (const BundlePoint &bp : samples) {
    if (bp.x.size() != n || bp.u.size() != n)
      throw InputError("sample does not match the bundle dimension");
    const Eigen::MatrixXd gN = field.eval(bp);
    if (gN.rows() != static_cast<Eigen::Index>(2 * n) ||
        gN.cols() != static_cast<Eigen::Index>(2 * n))
      throw InputError("bundle metric has the wrong shape");
    const double scale = std::max(1.0, sup_norm(gN));

    // Killing property of the fiber translations: probe shifted fibers.
    for (std::size_t k = 0; k < n; ++k)
      for (double shift : {1.0, -1.0}) {
        BundlePoint moved = bp;
        moved.u[k] += shift;
        out.u_dependence =
            std::max(out.u_dependence, sup_norm(field.eval(moved) - gN));
      }
    const Eigen::MatrixXd g = gN.topLeftCorner(n, n);
    out.block_mismatch = std::max(
        {out.block_mismatch, sup_norm(gN.topRightCorner(n, n)),
         sup_norm(gN.bottomLeftCorner(n, n)),
         sup_norm(gN.bottomRightCorner(n, n) - g)});
    if (out.u_dependence > tol * scale)
      throw NotInImageError("bundle metric depends on the fiber coordinates "
                            "(deviation " +
                            std::to_string(out.u_dependence) + ")");
    if (out.block_mismatch > tol * scale)
      throw NotInImageError("bundle metric is not of the form diag(g, g) "
                            "(deviation " +
                            std::to_string(out.block_mismatch) + ")");

    const DenseTensor dg = fd::fd_gradient(base, bp.x, cfg); // dg(i, j, k)
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k)
          asym = std::max(asym, std::abs(dg(i, j, k) - dg(j, i, k)));
    out.hessian_asymmetry = std::max(out.hessian_asymmetry, asym);
    if (!cfg.accepts(asym, dg.sup_norm()))
      throw NotInImageError("d_i g_jk is not totally symmetric (deviation " +
                            std::to_string(asym) +
                            "); the base metric is not Hessian");

    out.points.push_back(bp.x);
    out.metric.push_back(g);
  }
  return out;
}

} // namespace rmap
