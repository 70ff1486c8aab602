#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rmap/errors.hpp"
#include "rmap/fd_oracle.hpp"
#include "rmap/polynomial.hpp"
#include "rmap/tensor.hpp"

namespace rmap {

enum class Connection { flat, levi_civita, conjugate };

inline const char *connection_name(Connection c) {
  switch (c) {
  case Connection::flat:
    return "flat";
  case Connection::levi_civita:
    return "levi_civita";
  case Connection::conjugate:
    return "conjugate";
  }
  return "?";
}

struct MetricDiagnostics {
  double det = 0.0;
  double scale = 1.0;     // product of row sup-norms
  double condition = 0.0; // 2-norm condition number
  int positive = 0;       // signature (positive, negative)
  int negative = 0;
  bool nondegenerate = false;
};

struct DSResiduals {
  double levi_civita = 0.0; // sup |d^D S^|
  double flat = 0.0;        // sup |d^nabla S^ + 2[S^, S^]|
};

/// A Hessian manifold in its global affine chart: a polynomial potential h on
/// a domain of R^n with metric g = d^2 h. The flat connection is the
/// coordinate connection, so it has no explicit representation.
class HessianChart {
public:
  explicit HessianChart(Polynomial potential, double degeneracy_tol = 1e-10)
      : h_(std::move(potential)), tol_(degeneracy_tol),
        d2_(std::make_shared<DerivativeTable>(h_, 2)),
        d3_(std::make_shared<DerivativeTable>(h_, 3)),
        d4_(std::make_shared<DerivativeTable>(h_, 4)) {
    check_caps(h_);
    if (!(tol_ > 0.0) || !std::isfinite(tol_))
      throw InputError("degeneracy_tol must be a positive finite number");
  }

  std::size_t dimension() const noexcept { return h_.dimension(); }
  const Polynomial &potential() const noexcept { return h_; }
  double degeneracy_tol() const noexcept { return tol_; }

  Eigen::MatrixXd metric_at(std::span<const double> p) const {
    check_point(p);
    return d2_->evaluate(p).to_matrix();
  }

  MetricDiagnostics diagnose(std::span<const double> p) const {
    const Eigen::MatrixXd g = metric_at(p);
    MetricDiagnostics d;
    d.det = g.determinant();
    d.scale = row_scale(g);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g,
                                                       Eigen::EigenvaluesOnly);
    const auto &ev = eig.eigenvalues();
    const double big = ev.cwiseAbs().maxCoeff();
    const double small = ev.cwiseAbs().minCoeff();
    d.condition = small > 0.0 ? big / small : INFINITY;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev(i) > 0.0)
        ++d.positive;
      else if (ev(i) < 0.0)
        ++d.negative;
    }
    d.nondegenerate = std::abs(d.det) > tol_ * d.scale;
    return d;
  }

  bool in_domain(std::span<const double> p) const {
    return diagnose(p).nondegenerate;
  }

  /// S = d^3 h at p.
  DenseTensor cubic_form_at(std::span<const double> p) const {
    check_point(p);
    return d3_->evaluate(p);
  }

  /// nabla S = d^4 h at p.
  DenseTensor cubic_form_derivative_at(std::span<const double> p) const {
    check_point(p);
    return d4_->evaluate(p);
  }

  bool is_special_real() const { return d4_->identically_zero(); }

  /// S^(k, i, j) = S^k_{ij} = 1/2 (g^{-1})^{kl} S_{lij}, by LU solves.
  DenseTensor shat_tensor_at(std::span<const double> p) const {
    const std::size_t n = dimension();
    const auto lu = factor(p);
    const DenseTensor S = cubic_form_at(p);
    DenseTensor out = DenseTensor::cube(n, 3);
    Eigen::VectorXd rhs(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        for (std::size_t l = 0; l < n; ++l)
          rhs(l) = 0.5 * S(l, i, j);
        const Eigen::VectorXd col = lu.solve(rhs);
        for (std::size_t k = 0; k < n; ++k)
          out(k, i, j) = out(k, j, i) = col(k);
      }
    return out;
  }

  /// The endomorphism S^_X = 1/2 g^{-1} S(X, ., .).
  Eigen::MatrixXd shat_at(std::span<const double> p,
                          std::span<const double> X) const {
    const std::size_t n = dimension();
    if (X.size() != n)
      throw InputError("direction has wrong dimension");
    const DenseTensor s = shat_tensor_at(p);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i)
      if (X[i] != 0.0)
        m += X[i] * connection_matrix(s, i);
    return m;
  }

  /// Coordinate Christoffel symbols of nabla (0), D (S^) and the conjugate
  /// connection (2 S^).
  DenseTensor christoffels_at(std::span<const double> p,
                              Connection which) const {
    if (which == Connection::flat) {
      require_domain(p);
      return DenseTensor::cube(dimension(), 3);
    }
    DenseTensor s = shat_tensor_at(p);
    if (which == Connection::conjugate)
      s *= 2.0;
    return s;
  }

  /// Closed-form curvature: 0 for the flat and conjugate connections,
  /// -[S^_i, S^_j] for the Levi-Civita connection.
  DenseTensor curvature_at(std::span<const double> p, Connection which) const {
    const std::size_t n = dimension();
    if (which != Connection::levi_civita) {
      require_domain(p);
      return DenseTensor::cube(n, 4);
    }
    const DenseTensor s = shat_tensor_at(p);
    return assemble_two_form(n, n, [&](std::size_t i, std::size_t j) {
      return Eigen::MatrixXd(
          -commutator(connection_matrix(s, i), connection_matrix(s, j)));
    });
  }

  /// [S^, S^](a, b, i, j) = [S^_i, S^_j]^a_b.
  DenseTensor shat_bracket_at(std::span<const double> p) const {
    const std::size_t n = dimension();
    const DenseTensor s = shat_tensor_at(p);
    return assemble_two_form(n, n, [&](std::size_t i, std::size_t j) {
      return Eigen::MatrixXd(
          commutator(connection_matrix(s, i), connection_matrix(s, j)));
    });
  }

  // Fields for the finite-difference oracle.

  fd::TensorField metric_field() const {
    const std::size_t n = dimension();
    return {n,
            {n, n},
            {fd::Slot::lower, fd::Slot::lower},
            [self = *this](std::span<const double> p) {
              return DenseTensor::from_matrix(self.checked_metric_at(p));
            }};
  }

  fd::TensorField inverse_metric_field() const {
    const std::size_t n = dimension();
    return {n,
            {n, n},
            {fd::Slot::upper, fd::Slot::upper},
            [self = *this](std::span<const double> p) {
              const auto lu = self.factor(p);
              return DenseTensor::from_matrix(
                  lu.solve(Eigen::MatrixXd::Identity(self.dimension(),
                                                     self.dimension())));
            }};
  }

  fd::TensorField christoffel_field(Connection which) const {
    const std::size_t n = dimension();
    return {n,
            {n, n, n},
            {fd::Slot::upper, fd::Slot::lower, fd::Slot::lower},
            [self = *this, which](std::span<const double> p) {
              return self.christoffels_at(p, which);
            }};
  }

  /// S^ as an endomorphism-valued 1-form: A(i, a, b) = (S^_{e_i})^a_b.
  fd::TensorField shat_form_field() const {
    const std::size_t n = dimension();
    return {n,
            {n, n, n},
            {fd::Slot::lower, fd::Slot::upper, fd::Slot::lower},
            [self = *this](std::span<const double> p) {
              const DenseTensor s = self.shat_tensor_at(p);
              DenseTensor a = DenseTensor::cube(self.dimension(), 3);
              a.for_each_index([&](std::span<const std::size_t> idx) {
                a.at(idx) = s(idx[1], idx[0], idx[2]);
              });
              return a;
            }};
  }

  /// d^D S^ = 0 and d^nabla S^ + 2[S^, S^] = 0, both via the oracle's
  /// covariant exterior derivative.
  DSResiduals dS_identities_at(std::span<const double> p,
                               const fd::OracleConfig &cfg) const {
    const fd::TensorField A = shat_form_field();
    DSResiduals r;
    r.levi_civita = fd::covariant_exterior_derivative(
                        A, christoffel_field(Connection::levi_civita), p, cfg)
                        .sup_norm();
    DenseTensor flat = fd::covariant_exterior_derivative(
        A, christoffel_field(Connection::flat), p, cfg);
    flat += 2.0 * shat_bracket_at(p);
    r.flat = flat.sup_norm();
    return r;
  }

  /// FD curvature of the conjugate connection's coefficients 2 S^.
  double conjugate_flatness_residual(std::span<const double> p,
                                     const fd::OracleConfig &cfg) const {
    return fd::curvature_of_connection(christoffel_field(Connection::conjugate),
                                       p, cfg)
        .sup_norm();
  }

  /// det(d^2 h) expanded exactly, by Laplace expansion memoised on column
  /// subsets. Degree at most n (deg h - 2); for special real charts, <= n.
  Polynomial relative_invariant() const {
    const std::size_t n = dimension();
    std::vector<std::vector<Polynomial>> g(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        g[i].push_back(d2_->entry({i, j}));
    std::map<unsigned, Polynomial> memo;
    // minor(row, cols) = det of rows row..n-1 restricted to `cols`.
    std::function<Polynomial(std::size_t, unsigned)> minor =
        [&](std::size_t row, unsigned cols) -> Polynomial {
      if (row == n)
        return Polynomial::constant(n, 1);
      if (auto it = memo.find(cols); it != memo.end())
        return it->second;
      Polynomial acc(n);
      int sign = 1;
      for (std::size_t c = 0; c < n; ++c) {
        if (!(cols & (1u << c)))
          continue;
        if (!g[row][c].is_zero()) {
          Polynomial term = g[row][c] * minor(row + 1, cols & ~(1u << c));
          acc += Rational(sign) * term;
        }
        sign = -sign;
      }
      memo.emplace(cols, acc);
      return acc;
    };
    return minor(0, (1u << n) - 1);
  }

  /// sup_{i,k,l} |[grad x^i, grad x^k]^l| with grad x^i = g^{ij} d_j, from FD
  /// partials of the rows of g^{-1}.
  double gradient_commutator_check(std::span<const double> p,
                                   const fd::OracleConfig &cfg) const {
    const std::size_t n = dimension();
    require_domain(p);
    if (n == 1)
      return 0.0;
    const fd::TensorField ginv = inverse_metric_field();
    const DenseTensor G = ginv(p);
    const DenseTensor dG = fd::fd_gradient(ginv, p, cfg); // dG(j, i, l)
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
          double v = 0.0;
          for (std::size_t j = 0; j < n; ++j)
            v += G(i, j) * dG(j, k, l) - G(k, j) * dG(j, i, l);
          r = std::max(r, std::abs(v));
        }
    return r;
  }

  /// LU factors of g(p); fails with a DomainError off the domain.
  Eigen::PartialPivLU<Eigen::MatrixXd>
  factor(std::span<const double> p) const {
    const Eigen::MatrixXd g = metric_at(p);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(g);
    if (!(std::abs(lu.determinant()) > tol_ * row_scale(g))) {
      const MetricDiagnostics d = diagnose(p);
      throw DomainError(degenerate_message(p, d), d.det, d.condition);
    }
    return lu;
  }

  /// g(p), failing with a DomainError off the domain. Finite-difference
  /// fields use this so a stencil point on the degenerate locus aborts.
  Eigen::MatrixXd checked_metric_at(std::span<const double> p) const {
    Eigen::MatrixXd g = metric_at(p);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(g);
    if (!(std::abs(lu.determinant()) > tol_ * row_scale(g))) {
      const MetricDiagnostics d = diagnose(p);
      throw DomainError(degenerate_message(p, d), d.det, d.condition);
    }
    return g;
  }

  void require_domain(std::span<const double> p) const {
    const MetricDiagnostics d = diagnose(p);
    if (!d.nondegenerate)
      throw DomainError(degenerate_message(p, d), d.det, d.condition);
  }

private:
  static double row_scale(const Eigen::MatrixXd &g) {
    double scale = 1.0;
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double row = g.row(r).cwiseAbs().maxCoeff();
      if (row > 0.0)
        scale *= row;
    }
    return scale;
  }

  void check_point(std::span<const double> p) const {
    if (p.size() != dimension())
      throw InputError("point has dimension " + std::to_string(p.size()) +
                       ", chart has dimension " +
                       std::to_string(dimension()));
    for (double v : p)
      if (!std::isfinite(v))
        throw InputError("point has a non-finite coordinate");
  }

  static std::string degenerate_message(std::span<const double> p,
                                        const MetricDiagnostics &d) {
    std::string s = "metric is degenerate at (";
    for (std::size_t i = 0; i < p.size(); ++i)
      s += (i ? ", " : "") + std::to_string(p[i]);
    return s + "): det = " + std::to_string(d.det) +
           ", condition = " + std::to_string(d.condition);
  }

  Polynomial h_;
  double tol_;
  std::shared_ptr<const DerivativeTable> d2_;
  std::shared_ptr<const DerivativeTable> d3_;
  std::shared_ptr<const DerivativeTable> d4_;
};

inline Eigen::VectorXd to_vector(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

} // namespace rmap
