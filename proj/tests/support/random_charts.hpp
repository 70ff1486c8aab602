#pragma once

// Seeded generators of charts and well-conditioned points for the tests.

#include <random>
#include <vector>

#include "rmap/hessian_chart.hpp"
#include "rmap/polynomial.hpp"

namespace rmap::sampling {

inline Rational small_rational(std::mt19937_64 &rng, int max_num = 3,
                               int max_den = 4) {
  std::uniform_int_distribution<int> num(-max_num, max_num);
  std::uniform_int_distribution<int> den(1, max_den);
  return Rational(num(rng), den(rng));
}

/// Cubic h from random symmetric S and a random symmetric b with a dominant
/// diagonal of random sign, so g(0) = b is nondegenerate of any signature.
inline Polynomial random_cubic(std::mt19937_64 &rng, std::size_t n) {
  std::vector<Rational> S(n * n * n), b(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      for (std::size_t k = j; k < n; ++k) {
        const Rational v = small_rational(rng);
        const std::size_t idx[3] = {i, j, k};
        for (std::size_t a = 0; a < 3; ++a)
          for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t d = 0; d < 3; ++d)
              if (a != c && c != d && a != d)
                S[(idx[a] * n + idx[c]) * n + idx[d]] = v;
      }
  std::bernoulli_distribution sign(0.5);
  std::uniform_int_distribution<int> diag(2 * int(n), 3 * int(n));
  for (std::size_t i = 0; i < n; ++i) {
    b[i * n + i] = Rational(sign(rng) ? diag(rng) : -diag(rng));
    for (std::size_t j = i + 1; j < n; ++j)
      b[i * n + j] = b[j * n + i] = small_rational(rng, 1, 2);
  }
  return canonical_cubic(n, S, b);
}

/// A random cubic plus a few random degree-4 terms, always including x1^4.
inline Polynomial random_quartic(std::mt19937_64 &rng, std::size_t n) {
  Polynomial h = random_cubic(rng, n);
  std::uniform_int_distribution<std::size_t> coord(0, n - 1);
  Exponents e(n, 0);
  e[0] = 4;
  h.add_term(e, Rational(1, 2));
  for (int t = 0; t < 3; ++t) {
    Exponents f(n, 0);
    for (int d = 0; d < 4; ++d)
      ++f[coord(rng)];
    h.add_term(f, small_rational(rng, 2, 6));
  }
  return h;
}

/// Points of [-r, r]^n where g is nondegenerate with condition <= cap.
inline std::vector<std::vector<double>>
well_conditioned_points(const HessianChart &chart, std::mt19937_64 &rng,
                        std::size_t count, double r = 0.4,
                        double cap = 1e3) {
  std::uniform_real_distribution<double> coord(-r, r);
  std::vector<std::vector<double>> out;
  for (int attempts = 0; out.size() < count && attempts < 10000; ++attempts) {
    std::vector<double> p(chart.dimension());
    for (double &v : p)
      v = coord(rng);
    const MetricDiagnostics d = chart.diagnose(p);
    if (d.nondegenerate && d.condition <= cap)
      out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<double> random_vector(std::mt19937_64 &rng, std::size_t n,
                                         double r = 1.0) {
  std::uniform_real_distribution<double> coord(-r, r);
  std::vector<double> v(n);
  for (double &x : v)
    x = coord(rng);
  return v;
}

} // namespace rmap::sampling
