#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rmap/errors.hpp"
#include "rmap/tensor.hpp"

namespace rmap {

using Integer = boost::multiprecision::number<
    boost::multiprecision::cpp_int_backend<>, boost::multiprecision::et_off>;
using Rational = boost::multiprecision::number<
    boost::multiprecision::rational_adaptor<
        boost::multiprecision::cpp_int_backend<>>,
    boost::multiprecision::et_off>;

inline constexpr std::size_t kMaxDimension = 16;
inline constexpr unsigned kMaxDegree = 12;

using Exponents = std::vector<unsigned>;

struct Monomial {
  Exponents exponents;
  Rational coefficient;
};

inline unsigned total_degree(const Exponents &e) {
  return std::accumulate(e.begin(), e.end(), 0u);
}

inline double to_double(const Rational &q) { return q.convert_to<double>(); }

/// Exact sparse multivariate polynomial with rational coefficients.
///
/// Terms are kept in a sorted map keyed by exponent vector, so no two terms
/// share an exponent and iteration order is deterministic. Zero coefficients
/// are never stored. A floating copy of the coefficients is kept alongside
/// for evaluation; it is derived, never edited directly.
class Polynomial {
public:
  explicit Polynomial(std::size_t dimension) : dim_(dimension) {
    if (dim_ == 0 || dim_ > kMaxDimension)
      throw InputError("polynomial dimension must be in [1, " +
                       std::to_string(kMaxDimension) + "], got " +
                       std::to_string(dim_));
  }

  static Polynomial from_terms(std::size_t dimension,
                               const std::vector<Monomial> &terms) {
    Polynomial p(dimension);
    for (const auto &t : terms) {
      p.check_exponents(t.exponents);
      if (p.terms_.count(t.exponents))
        throw InputError("duplicate exponent vector in polynomial terms");
      if (t.coefficient != 0)
        p.terms_.emplace(t.exponents, t.coefficient);
    }
    p.refresh();
    return p;
  }

  static Polynomial constant(std::size_t dimension, const Rational &c) {
    Polynomial p(dimension);
    p.add_term(Exponents(dimension, 0), c);
    return p;
  }

  static Polynomial coordinate(std::size_t dimension, std::size_t i) {
    Polynomial p(dimension);
    Exponents e(dimension, 0);
    e.at(i) = 1;
    p.add_term(e, 1);
    return p;
  }

  std::size_t dimension() const noexcept { return dim_; }
  bool is_zero() const noexcept { return terms_.empty(); }

  /// Total degree; 0 for constants and for the zero polynomial.
  unsigned degree() const {
    unsigned d = 0;
    for (const auto &[e, c] : terms_)
      d = std::max(d, total_degree(e));
    return d;
  }

  std::vector<Monomial> terms() const {
    std::vector<Monomial> out;
    out.reserve(terms_.size());
    for (const auto &[e, c] : terms_)
      out.push_back({e, c});
    return out;
  }
  std::size_t term_count() const noexcept { return terms_.size(); }

  Rational coefficient(const Exponents &e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  void add_term(const Exponents &e, const Rational &c) {
    check_exponents(e);
    if (c == 0)
      return;
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0)
        terms_.erase(it);
    }
    refresh();
  }

  Polynomial derivative(std::size_t i) const {
    if (i >= dim_)
      throw InputError("derivative index out of range");
    Polynomial d(dim_);
    for (const auto &[e, c] : terms_) {
      if (e[i] == 0)
        continue;
      Exponents f = e;
      --f[i];
      d.terms_.emplace(std::move(f), c * e[i]);
    }
    d.refresh();
    return d;
  }

  /// Sum of monomial values in double precision; coefficients are rounded
  /// once, when the polynomial is built.
  double evaluate(std::span<const double> p) const {
    check_point(p.size());
    double sum = 0.0;
    for (const auto &t : fast_) {
      double m = t.coefficient;
      for (std::size_t k = 0; k < dim_; ++k)
        for (unsigned r = 0; r < t.exponents[k]; ++r)
          m *= p[k];
      sum += m;
    }
    return sum;
  }

  Rational evaluate_exact(std::span<const Rational> p) const {
    check_point(p.size());
    Rational sum = 0;
    for (const auto &[e, c] : terms_) {
      Rational m = c;
      for (std::size_t k = 0; k < dim_; ++k)
        for (unsigned r = 0; r < e[k]; ++r)
          m *= p[k];
      sum += m;
    }
    return sum;
  }

  Polynomial &operator+=(const Polynomial &o) {
    check_same_dim(o);
    for (const auto &[e, c] : o.terms_) {
      auto [it, inserted] = terms_.try_emplace(e, c);
      if (!inserted) {
        it->second += c;
        if (it->second == 0)
          terms_.erase(it);
      }
    }
    refresh();
    return *this;
  }
  Polynomial &operator-=(const Polynomial &o) { return *this += (-1) * o; }

  Polynomial &operator*=(const Rational &s) {
    if (s == 0)
      terms_.clear();
    else
      for (auto &[e, c] : terms_)
        c *= s;
    refresh();
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial &b) {
    return a += b;
  }
  friend Polynomial operator-(Polynomial a, const Polynomial &b) {
    return a -= b;
  }
  friend Polynomial operator*(const Rational &s, Polynomial a) {
    return a *= s;
  }

  /// Product without the degree cap; callers that need the cap check it.
  friend Polynomial operator*(const Polynomial &a, const Polynomial &b) {
    a.check_same_dim(b);
    Polynomial r(a.dim_);
    for (const auto &[ea, ca] : a.terms_)
      for (const auto &[eb, cb] : b.terms_) {
        Exponents e(a.dim_);
        for (std::size_t k = 0; k < a.dim_; ++k)
          e[k] = ea[k] + eb[k];
        auto [it, inserted] = r.terms_.try_emplace(e, ca * cb);
        if (!inserted) {
          it->second += ca * cb;
          if (it->second == 0)
            r.terms_.erase(it);
        }
      }
    r.refresh();
    return r;
  }

  friend bool operator==(const Polynomial &a, const Polynomial &b) {
    return a.dim_ == b.dim_ && a.terms_ == b.terms_;
  }

  /// Human-readable form, e.g. "1/6*x1^3 + x1*x2".
  std::string to_string() const {
    if (terms_.empty())
      return "0";
    std::ostringstream os;
    bool first = true;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
      const auto &[e, c] = *it;
      Rational mag = c < 0 ? Rational(-c) : c;
      os << (first ? (c < 0 ? "-" : "") : (c < 0 ? " - " : " + "));
      first = false;
      bool any = false;
      if (mag != 1 || total_degree(e) == 0) {
        os << mag;
        any = true;
      }
      for (std::size_t k = 0; k < dim_; ++k) {
        if (e[k] == 0)
          continue;
        os << (any ? "*" : "") << "x" << (k + 1);
        if (e[k] > 1)
          os << "^" << e[k];
        any = true;
      }
    }
    return os.str();
  }

private:
  struct FastTerm {
    Exponents exponents;
    double coefficient;
  };

  void refresh() {
    fast_.clear();
    fast_.reserve(terms_.size());
    for (const auto &[e, c] : terms_)
      fast_.push_back({e, to_double(c)});
  }

  void check_exponents(const Exponents &e) const {
    if (e.size() != dim_)
      throw InputError("exponent vector has length " +
                       std::to_string(e.size()) + ", expected " +
                       std::to_string(dim_));
  }
  void check_point(std::size_t n) const {
    if (n != dim_)
      throw InputError("point has dimension " + std::to_string(n) +
                       ", polynomial has dimension " + std::to_string(dim_));
  }
  void check_same_dim(const Polynomial &o) const {
    if (o.dim_ != dim_)
      throw InputError("polynomial dimension mismatch");
  }

  std::size_t dim_;
  std::map<Exponents, Rational> terms_;
  std::vector<FastTerm> fast_;
};

/// Enforces the parse-time caps on dimension and degree.
inline void check_caps(const Polynomial &h) {
  if (h.degree() > kMaxDegree)
    throw InputError("polynomial degree " + std::to_string(h.degree()) +
                     " exceeds the cap of " + std::to_string(kMaxDegree));
}

/// All order-k partial derivatives of a polynomial, differentiated exactly
/// once and evaluated on demand. One entry per nondecreasing index tuple;
/// evaluation fans each value out to every permutation, so the resulting
/// tensor is symmetric by construction.
class DerivativeTable {
public:
  DerivativeTable(const Polynomial &h, std::size_t order)
      : dim_(h.dimension()), order_(order) {
    if (order == 0)
      throw InputError("derivative order must be at least 1");
    std::vector<std::size_t> idx(order, 0);
    build(h, idx, 0, 0);
  }

  std::size_t order() const noexcept { return order_; }
  std::size_t dimension() const noexcept { return dim_; }

  DenseTensor evaluate(std::span<const double> p) const {
    if (p.size() != dim_)
      throw InputError("point has dimension " + std::to_string(p.size()) +
                       ", expected " + std::to_string(dim_));
    DenseTensor t = DenseTensor::cube(dim_, order_);
    for (const auto &entry : entries_) {
      const double v = entry.second.evaluate(p);
      if (v == 0.0)
        continue;
      std::vector<std::size_t> perm = entry.first;
      do {
        t.at(perm) = v;
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
    return t;
  }

  /// True when every derivative of this order vanishes identically.
  bool identically_zero() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const auto &e) { return e.second.is_zero(); });
  }

  const Polynomial &entry(std::vector<std::size_t> sorted_index) const {
    std::sort(sorted_index.begin(), sorted_index.end());
    for (const auto &e : entries_)
      if (e.first == sorted_index)
        return e.second;
    throw InputError("derivative index out of range");
  }

private:
  void build(const Polynomial &current, std::vector<std::size_t> &idx,
             std::size_t depth, std::size_t start) {
    if (depth == order_) {
      entries_.emplace_back(idx, current);
      return;
    }
    for (std::size_t i = start; i < dim_; ++i) {
      idx[depth] = i;
      build(current.derivative(i), idx, depth + 1, i);
    }
  }

  std::size_t dim_;
  std::size_t order_;
  std::vector<std::pair<std::vector<std::size_t>, Polynomial>> entries_;
};

/// The order-k array of partials of h at p.
inline DenseTensor derivative_tensor(const Polynomial &h, std::size_t order,
                                     std::span<const double> p) {
  return DerivativeTable(h, order).evaluate(p);
}

/// h = 1/6 sum S_ijk x^i x^j x^k + 1/2 sum b_ij x^i x^j, with S and b given
/// row-major (n^3 and n^2 entries).
inline Polynomial canonical_cubic(std::size_t n, const std::vector<Rational> &S,
                                  const std::vector<Rational> &b) {
  if (S.size() != n * n * n || b.size() != n * n)
    throw InputError("canonical_cubic: expected n^3 cubic and n^2 quadratic "
                     "coefficients");
  auto s = [&](std::size_t i, std::size_t j, std::size_t k) -> const Rational & {
    return S[(i * n + j) * n + k];
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (b[i * n + j] != b[j * n + i])
        throw InputError("canonical_cubic: quadratic part is not symmetric");
      for (std::size_t k = 0; k < n; ++k)
        if (s(i, j, k) != s(j, i, k) || s(i, j, k) != s(i, k, j))
          throw InputError("canonical_cubic: cubic part is not totally "
                           "symmetric");
    }
  Polynomial h(n);
  const Rational sixth(1, 6), half(1, 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      Exponents e(n, 0);
      ++e[i];
      ++e[j];
      h.add_term(e, half * b[i * n + j]);
      for (std::size_t k = 0; k < n; ++k) {
        Exponents f = e;
        ++f[k];
        h.add_term(f, sixth * s(i, j, k));
      }
    }
  return h;
}

using RationalMatrix = std::vector<std::vector<Rational>>;

/// Exact determinant by fraction-bearing Gaussian elimination.
inline Rational determinant(RationalMatrix m) {
  const std::size_t n = m.size();
  Rational det = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    while (piv < n && m[piv][col] == 0)
      ++piv;
    if (piv == n)
      return 0;
    if (piv != col) {
      std::swap(m[piv], m[col]);
      det = -det;
    }
    det *= m[col][col];
    for (std::size_t r = col + 1; r < n; ++r) {
      if (m[r][col] == 0)
        continue;
      const Rational f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < n; ++c)
        m[r][c] -= f * m[col][c];
    }
  }
  return det;
}

/// h o (A . + c), expanded exactly.
inline Polynomial affine_pullback(const Polynomial &h, const RationalMatrix &A,
                                  const std::vector<Rational> &c) {
  const std::size_t n = h.dimension();
  if (A.size() != n || c.size() != n)
    throw InputError("affine_pullback: shape mismatch");
  for (const auto &row : A)
    if (row.size() != n)
      throw InputError("affine_pullback: matrix is not square");
  if (determinant(A) == 0)
    throw InputError("affine_pullback: matrix is singular");

  // x_i = sum_j A_ij y_j + c_i, and cached powers of each.
  std::vector<std::vector<Polynomial>> powers(n);
  const unsigned deg = h.degree();
  for (std::size_t i = 0; i < n; ++i) {
    Polynomial lin = Polynomial::constant(n, c[i]);
    for (std::size_t j = 0; j < n; ++j)
      lin += A[i][j] * Polynomial::coordinate(n, j);
    powers[i].push_back(Polynomial::constant(n, 1));
    for (unsigned d = 1; d <= deg; ++d)
      powers[i].push_back(powers[i].back() * lin);
  }

  Polynomial out(n);
  for (const auto &t : h.terms()) {
    Polynomial m = Polynomial::constant(n, t.coefficient);
    for (std::size_t i = 0; i < n; ++i)
      if (t.exponents[i] > 0)
        m = m * powers[i][t.exponents[i]];
    out += m;
  }
  return out;
}

/// Overload for floating input; every finite double is an exact dyadic
/// rational, so the conversion loses nothing.
inline Polynomial affine_pullback(const Polynomial &h, const Eigen::MatrixXd &A,
                                  const Eigen::VectorXd &c) {
  RationalMatrix a(A.rows(), std::vector<Rational>(A.cols()));
  std::vector<Rational> shift(c.size());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      a[i][j] = Rational(A(i, j));
  for (Eigen::Index i = 0; i < c.size(); ++i)
    shift[i] = Rational(c(i));
  return affine_pullback(h, a, shift);
}

} // namespace rmap
