#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include "rmap/errors.hpp"

namespace rmap {

/// Row-major dense array of doubles with a fixed shape.
///
/// Index conventions used throughout the library:
///   connection coefficients   G(k, i, j) = Gamma^k_{ij}
///   endomorphism 1-forms      A(i, a, b) = (A_{e_i})^a_b
///   curvature / 2-form values R(a, b, c, d) = (R(e_c, e_d) e_b)^a
class DenseTensor {
public:
  DenseTensor() = default;

  explicit DenseTensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

  static DenseTensor cube(std::size_t n, std::size_t rank) {
    return DenseTensor(std::vector<std::size_t>(rank, n));
  }

  static DenseTensor from_matrix(const Eigen::MatrixXd &m) {
    DenseTensor t({static_cast<std::size_t>(m.rows()),
                   static_cast<std::size_t>(m.cols())});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        t(i, j) = m(i, j);
    return t;
  }

  Eigen::MatrixXd to_matrix() const {
    assert(rank() == 2);
    Eigen::MatrixXd m(shape_[0], shape_[1]);
    for (std::size_t i = 0; i < shape_[0]; ++i)
      for (std::size_t j = 0; j < shape_[1]; ++j)
        m(i, j) = (*this)(i, j);
    return m;
  }

  const std::vector<std::size_t> &shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  template <typename... Idx> double &operator()(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx> double operator()(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  double &at(std::span<const std::size_t> idx) { return data_[offset(idx)]; }
  double at(std::span<const std::size_t> idx) const {
    return data_[offset(idx)];
  }

  /// Matrix slice obtained by fixing the leading indices.
  Eigen::MatrixXd matrix(std::initializer_list<std::size_t> lead) const {
    assert(lead.size() + 2 == rank());
    std::vector<std::size_t> idx(lead);
    idx.resize(rank());
    const std::size_t r = shape_[rank() - 2], c = shape_[rank() - 1];
    Eigen::MatrixXd m(r, c);
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t b = 0; b < c; ++b) {
        idx[rank() - 2] = a;
        idx[rank() - 1] = b;
        m(a, b) = at(idx);
      }
    return m;
  }

  void set_matrix(std::initializer_list<std::size_t> lead,
                  const Eigen::MatrixXd &m) {
    assert(lead.size() + 2 == rank());
    std::vector<std::size_t> idx(lead);
    idx.resize(rank());
    for (Eigen::Index a = 0; a < m.rows(); ++a)
      for (Eigen::Index b = 0; b < m.cols(); ++b) {
        idx[rank() - 2] = a;
        idx[rank() - 1] = b;
        at(idx) = m(a, b);
      }
  }

  double sup_norm() const {
    double s = 0.0;
    for (double v : data_)
      s = std::max(s, std::abs(v));
    return s;
  }

  bool same_shape(const DenseTensor &o) const { return shape_ == o.shape_; }

  DenseTensor &operator+=(const DenseTensor &o) {
    assert(same_shape(o));
    for (std::size_t i = 0; i < data_.size(); ++i)
      data_[i] += o.data_[i];
    return *this;
  }
  DenseTensor &operator-=(const DenseTensor &o) {
    assert(same_shape(o));
    for (std::size_t i = 0; i < data_.size(); ++i)
      data_[i] -= o.data_[i];
    return *this;
  }
  DenseTensor &operator*=(double s) {
    for (double &v : data_)
      v *= s;
    return *this;
  }

  friend DenseTensor operator+(DenseTensor a, const DenseTensor &b) {
    return a += b;
  }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor &b) {
    return a -= b;
  }
  friend DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

  friend bool operator==(const DenseTensor &, const DenseTensor &) = default;

  /// Visit every multi-index in row-major order.
  void for_each_index(
      const std::function<void(std::span<const std::size_t>)> &f) const {
    if (data_.empty())
      return;
    std::vector<std::size_t> idx(rank(), 0);
    for (std::size_t flat = 0; flat < data_.size(); ++flat) {
      f(idx);
      for (std::size_t d = rank(); d-- > 0;) {
        if (++idx[d] < shape_[d])
          break;
        idx[d] = 0;
      }
    }
  }

private:
  static std::size_t count(const std::vector<std::size_t> &shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::size_t offset(std::span<const std::size_t> idx) const {
    assert(idx.size() == shape_.size());
    std::size_t off = 0;
    for (std::size_t d = 0; d < idx.size(); ++d) {
      assert(idx[d] < shape_[d]);
      off = off * shape_[d] + idx[d];
    }
    return off;
  }
  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    return offset(std::span<const std::size_t>(idx.begin(), idx.size()));
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline double sup_distance(const DenseTensor &a, const DenseTensor &b) {
  if (!a.same_shape(b))
    throw InputError("sup_distance: shape mismatch");
  return (a - b).sup_norm();
}

inline double sup_norm(const Eigen::MatrixXd &m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline Eigen::MatrixXd commutator(const Eigen::MatrixXd &a,
                                  const Eigen::MatrixXd &b) {
  return a * b - b * a;
}

inline Eigen::MatrixXd anticommutator(const Eigen::MatrixXd &a,
                                      const Eigen::MatrixXd &b) {
  return a * b + b * a;
}

/// R(a,b,c,d) = (C(e_c,e_d))^a_b for a map (c,d) -> matrix.
template <typename F>
DenseTensor assemble_two_form(std::size_t dim, std::size_t fiber, F &&value) {
  DenseTensor r({fiber, fiber, dim, dim});
  for (std::size_t c = 0; c < dim; ++c)
    for (std::size_t d = 0; d < dim; ++d) {
      const Eigen::MatrixXd m = value(c, d);
      for (std::size_t a = 0; a < fiber; ++a)
        for (std::size_t b = 0; b < fiber; ++b)
          r(a, b, c, d) = m(a, b);
    }
  return r;
}

/// (Gamma_i)^k_j = Gamma^k_{ij}: the connection matrix along e_i.
inline Eigen::MatrixXd connection_matrix(const DenseTensor &gamma,
                                         std::size_t i) {
  const std::size_t n = gamma.shape()[0];
  Eigen::MatrixXd m(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      m(k, j) = gamma(k, i, j);
  return m;
}

} // namespace rmap
