#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rmap/errors.hpp"
#include "rmap/tensor.hpp"

// Finite-difference differential geometry. Everything here is computed from
// sampled fields with the textbook coordinate formulas; nothing in this
// header knows about potentials, cubic forms or the tangent-bundle blocks.

namespace rmap::fd {

enum class Scheme { central_2nd, richardson_4th };

struct OracleConfig {
  double base_step = 1e-4;
  Scheme scheme = Scheme::richardson_4th;
  double tol_abs = 1e-8;
  double tol_rel = 1e-6;

  void validate() const {
    if (!(base_step > 0.0) || !std::isfinite(base_step))
      throw InputError("oracle base_step must be a positive finite number");
    if (!(tol_abs > 0.0) || !(tol_rel > 0.0))
      throw InputError("oracle tolerances must be positive");
  }

  /// ||closed - oracle|| <= tol_abs + tol_rel * ||oracle||
  bool accepts(double residual, double oracle_norm) const {
    return residual <= tol_abs + tol_rel * oracle_norm;
  }
};

inline const char *scheme_name(Scheme s) {
  return s == Scheme::central_2nd ? "central_2nd" : "richardson_4th";
}

inline Scheme parse_scheme(const std::string &s) {
  if (s == "central_2nd")
    return Scheme::central_2nd;
  if (s == "richardson_4th")
    return Scheme::richardson_4th;
  throw InputError("unknown finite-difference scheme \"" + s + "\"");
}

enum class Slot { upper, lower };

/// A tensor field on a coordinate domain of the given dimension. `eval` may
/// throw DomainError; the oracle never retries with a smaller step.
struct TensorField {
  std::size_t dimension = 0;
  std::vector<std::size_t> shape;
  std::vector<Slot> variance;
  std::function<DenseTensor(std::span<const double>)> eval;

  DenseTensor operator()(std::span<const double> p) const {
    DenseTensor t = eval(p);
    if (t.shape() != shape)
      throw InputError("tensor field returned a value of unexpected shape");
    return t;
  }
};

inline double step_for(double base_step, double coordinate) {
  return base_step * std::max(1.0, std::abs(coordinate));
}

/// Partial derivative of a field along coordinate `dir` at p.
inline DenseTensor fd_partial(const TensorField &field,
                              std::span<const double> p, std::size_t dir,
                              const OracleConfig &cfg) {
  if (p.size() != field.dimension)
    throw InputError("fd_partial: point dimension mismatch");
  if (dir >= field.dimension)
    throw InputError("fd_partial: direction out of range");
  std::vector<double> q(p.begin(), p.end());
  auto central = [&](double h) {
    q[dir] = p[dir] + h;
    DenseTensor plus = field(q);
    q[dir] = p[dir] - h;
    DenseTensor minus = field(q);
    q[dir] = p[dir];
    // Divide by the realised step so coordinate rounding does not bias it.
    const double width = (p[dir] + h) - (p[dir] - h);
    return (1.0 / width) * (plus - minus);
  };
  const double h = step_for(cfg.base_step, p[dir]);
  if (cfg.scheme == Scheme::central_2nd)
    return central(h);
  DenseTensor coarse = central(h);
  DenseTensor fine = central(0.5 * h);
  return (1.0 / 3.0) * (4.0 * fine - coarse);
}

/// All partials, derivative index first: out(d, ...) = d_d T(...).
inline DenseTensor fd_gradient(const TensorField &field,
                               std::span<const double> p,
                               const OracleConfig &cfg) {
  std::vector<std::size_t> shape{field.dimension};
  shape.insert(shape.end(), field.shape.begin(), field.shape.end());
  DenseTensor out(shape);
  const std::size_t block = out.size() / field.dimension;
  for (std::size_t d = 0; d < field.dimension; ++d) {
    DenseTensor part = fd_partial(field, p, d, cfg);
    std::copy(part.data().begin(), part.data().end(),
              out.data().begin() + d * block);
  }
  return out;
}

namespace detail {

inline Eigen::PartialPivLU<Eigen::MatrixXd>
factor_metric(const Eigen::MatrixXd &g) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(g);
  const double rc = lu.rcond();
  if (!(rc > 1e-14))
    throw DomainError("metric is numerically singular", lu.determinant(),
                      rc > 0 ? 1.0 / rc : INFINITY);
  return lu;
}

} // namespace detail

/// Gamma^k_{ij} = 1/2 g^{kl} (d_i g_{jl} + d_j g_{il} - d_l g_{ij}).
inline DenseTensor christoffels_of_metric(const TensorField &g,
                                          std::span<const double> p,
                                          const OracleConfig &cfg) {
  const std::size_t n = g.dimension;
  if (g.shape != std::vector<std::size_t>{n, n})
    throw InputError("christoffels_of_metric: field is not an n x n metric");
  const auto lu = detail::factor_metric(g(p).to_matrix());
  const DenseTensor dg = fd_gradient(g, p, cfg);
  DenseTensor gamma = DenseTensor::cube(n, 3);
  Eigen::VectorXd rhs(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      for (std::size_t l = 0; l < n; ++l)
        rhs(l) = 0.5 * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j));
      const Eigen::VectorXd col = lu.solve(rhs);
      for (std::size_t k = 0; k < n; ++k)
        gamma(k, i, j) = gamma(k, j, i) = col(k);
    }
  return gamma;
}

inline TensorField christoffel_field(TensorField g, const OracleConfig &cfg) {
  const std::size_t n = g.dimension;
  TensorField out;
  out.dimension = n;
  out.shape = {n, n, n};
  out.variance = {Slot::upper, Slot::lower, Slot::lower};
  out.eval = [g = std::move(g), cfg](std::span<const double> p) {
    return christoffels_of_metric(g, p, cfg);
  };
  return out;
}

/// R_IJ = d_I Gamma_J - d_J Gamma_I + [Gamma_I, Gamma_J], stored as
/// R(a, b, c, d) = (R(e_c, e_d) e_b)^a.
inline DenseTensor curvature_of_connection(const TensorField &gamma,
                                           std::span<const double> p,
                                           const OracleConfig &cfg) {
  const std::size_t n = gamma.dimension;
  if (gamma.shape != std::vector<std::size_t>{n, n, n})
    throw InputError("curvature_of_connection: expected n x n x n "
                     "coefficients");
  const DenseTensor G = gamma(p);
  const DenseTensor dG = fd_gradient(gamma, p, cfg); // dG(c, a, d, b)
  DenseTensor R = DenseTensor::cube(n, 4);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        for (std::size_t d = 0; d < n; ++d) {
          double v = dG(c, a, d, b) - dG(d, a, c, b);
          for (std::size_t m = 0; m < n; ++m)
            v += G(a, c, m) * G(m, d, b) - G(a, d, m) * G(m, c, b);
          R(a, b, c, d) = v;
        }
  return R;
}

/// Step for the two layers of a nested derivative. Roundoff in a second
/// difference grows like eps / h^2 rather than eps / h, so the balance with
/// the h^4 truncation error sits at a larger step than base_step.
inline OracleConfig nested_config(const OracleConfig &cfg) {
  OracleConfig out = cfg;
  out.base_step = std::pow(cfg.base_step, 2.0 / 3.0);
  return out;
}

/// Riemann tensor of a metric by differencing its finite-difference
/// Christoffel symbols, both layers at the nested step.
inline DenseTensor riemann_curvature(const TensorField &g,
                                     std::span<const double> p,
                                     const OracleConfig &cfg) {
  const OracleConfig nested = nested_config(cfg);
  return curvature_of_connection(christoffel_field(g, nested), p, nested);
}

/// ric(X, Y) = tr(Z -> R(Z, X) Y): contraction of the first and third slots.
inline Eigen::MatrixXd ricci_of_curvature(const DenseTensor &R) {
  const std::size_t n = R.shape()[0];
  Eigen::MatrixXd ric = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t a = 0; a < n; ++a)
        ric(x, y) += R(a, y, a, x);
  return ric;
}

inline Eigen::MatrixXd ricci(const TensorField &g, std::span<const double> p,
                             const OracleConfig &cfg) {
  return ricci_of_curvature(riemann_curvature(g, p, cfg));
}

/// (nabla T) with the derivative slot first:
///   out(i, ...) = d_i T(...) + sum_upper Gamma^a_{i m} T(..m..)
///                            - sum_lower Gamma^m_{i b} T(..m..).
inline DenseTensor covariant_derivative(const TensorField &T,
                                        const TensorField &gamma,
                                        std::span<const double> p,
                                        const OracleConfig &cfg) {
  const std::size_t n = T.dimension;
  if (gamma.dimension != n || T.variance.size() != T.shape.size())
    throw InputError("covariant_derivative: incompatible field declarations");
  for (std::size_t s : T.shape)
    if (s != n)
      throw InputError("covariant_derivative: tensor slots must be tangent "
                       "slots");
  const DenseTensor G = gamma(p);
  const DenseTensor value = T(p);
  DenseTensor out = fd_gradient(T, p, cfg);
  std::vector<std::size_t> src;
  out.for_each_index([&](std::span<const std::size_t> idx) {
    const std::size_t i = idx[0];
    std::span<const std::size_t> slots = idx.subspan(1);
    double corr = 0.0;
    src.assign(slots.begin(), slots.end());
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const std::size_t keep = src[s];
      for (std::size_t m = 0; m < n; ++m) {
        src[s] = m;
        corr += T.variance[s] == Slot::upper ? G(keep, i, m) * value.at(src)
                                             : -G(m, i, keep) * value.at(src);
      }
      src[s] = keep;
    }
    out.at(idx) += corr;
  });
  return out;
}

/// (d alpha)_{i0..ik} = sum_m (-1)^m d_{i_m} alpha_{i0..^i_m..ik} for a
/// k-form given by its fully antisymmetric lower-index components. A field
/// with an empty shape is treated as a 0-form.
inline DenseTensor exterior_derivative(const TensorField &form,
                                       std::span<const double> p,
                                       const OracleConfig &cfg) {
  const std::size_t n = form.dimension;
  const std::size_t k = form.shape.size();
  const DenseTensor grad = fd_gradient(form, p, cfg); // grad(d, slots...)
  DenseTensor out = DenseTensor::cube(n, k + 1);
  std::vector<std::size_t> gidx(k + 1);
  out.for_each_index([&](std::span<const std::size_t> idx) {
    double v = 0.0;
    for (std::size_t m = 0; m <= k; ++m) {
      gidx[0] = idx[m];
      for (std::size_t s = 0, t = 1; s <= k; ++s)
        if (s != m)
          gidx[t++] = idx[s];
      v += (m % 2 == 0 ? 1.0 : -1.0) * grad.at(gidx);
    }
    out.at(idx) = v;
  });
  return out;
}

/// Covariant exterior derivative of an endomorphism-valued 1-form
/// A(i, a, b) = (A_{e_i})^a_b along a connection:
///   (d^nabla A)(e_i, e_j) = d_i A_j - d_j A_i + [Gamma_i, A_j] - [Gamma_j, A_i]
/// returned as out(a, b, i, j).
inline DenseTensor covariant_exterior_derivative(const TensorField &A,
                                                 const TensorField &gamma,
                                                 std::span<const double> p,
                                                 const OracleConfig &cfg) {
  const std::size_t n = A.dimension;
  if (A.shape.size() != 3 || A.shape[0] != n)
    throw InputError("covariant_exterior_derivative: expected an "
                     "endomorphism-valued 1-form");
  const std::size_t m = A.shape[1];
  if (gamma.shape != std::vector<std::size_t>{m, n, m})
    throw InputError("covariant_exterior_derivative: connection shape does "
                     "not match the endomorphism bundle");
  const DenseTensor value = A(p);
  const DenseTensor dA = fd_gradient(A, p, cfg); // dA(d, i, a, b)
  const DenseTensor G = gamma(p);
  auto gamma_matrix = [&](std::size_t i) {
    Eigen::MatrixXd g(m, m);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        g(a, b) = G(a, i, b);
    return g;
  };
  return assemble_two_form(n, m, [&](std::size_t i, std::size_t j) {
    Eigen::MatrixXd v = dA.matrix({i, j}) - dA.matrix({j, i});
    v += commutator(gamma_matrix(i), value.matrix({j}));
    v -= commutator(gamma_matrix(j), value.matrix({i}));
    return v;
  });
}

/// Sup-norm of Gamma^k_{ij} - Gamma^k_{ji}.
inline double torsion_residual(const DenseTensor &gamma) {
  const std::size_t n = gamma.shape()[0];
  double r = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        r = std::max(r, std::abs(gamma(k, i, j) - gamma(k, j, i)));
  return r;
}

/// A field that ignores its argument.
inline TensorField constant_field(std::size_t dimension, DenseTensor value,
                                  std::vector<Slot> variance) {
  TensorField f;
  f.dimension = dimension;
  f.shape = value.shape();
  f.variance = std::move(variance);
  f.eval = [value = std::move(value)](std::span<const double>) {
    return value;
  };
  return f;
}

} // namespace rmap::fd
