#pragma once

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <string>

#include "rmap/errors.hpp"
#include "rmap/polynomial.hpp"

namespace rmap {

using json = nlohmann::json;

namespace detail {

inline std::string where(const std::string &path) {
  return path.empty() ? std::string("<root>") : path;
}

/// Integers arrive as JSON integers, or as decimal strings when they do not
/// fit in 64 bits. Floats are rejected.
inline Integer parse_integer(const json &j, const std::string &path) {
  if (j.is_number_integer())
    return j.is_number_unsigned() ? Integer(j.get<std::uint64_t>())
                                  : Integer(j.get<std::int64_t>());
  if (j.is_string()) {
    const auto &s = j.get_ref<const std::string &>();
    const std::size_t start = (!s.empty() && s[0] == '-') ? 1 : 0;
    if (s.size() == start ||
        s.find_first_not_of("0123456789", start) != std::string::npos)
      throw InputError(where(path) + ": expected an integer string, got \"" +
                       s + "\"");
    return Integer(s);
  }
  throw InputError(where(path) + ": expected an integer (floats are not "
                                 "accepted for coefficients)");
}

inline json emit_integer(const Integer &v) {
  if (v >= std::numeric_limits<std::int64_t>::min() &&
      v <= std::numeric_limits<std::int64_t>::max())
    return json(v.convert_to<std::int64_t>());
  return json(v.str());
}

} // namespace detail

/// {"dimension": n, "terms": [{"exponents": [...], "num": p, "den": q}]}
inline Polynomial polynomial_from_json(const json &j,
                                       const std::string &path = "") {
  using detail::where;
  if (!j.is_object())
    throw InputError(where(path) + ": polynomial must be an object");
  if (!j.contains("dimension") || !j["dimension"].is_number_integer())
    throw InputError(where(path) + "/dimension: missing or not an integer");
  const auto dim = j["dimension"].get<std::int64_t>();
  if (dim < 1 || dim > static_cast<std::int64_t>(kMaxDimension))
    throw InputError(where(path) + "/dimension: must be in [1, " +
                     std::to_string(kMaxDimension) + "]");
  if (!j.contains("terms") || !j["terms"].is_array())
    throw InputError(where(path) + "/terms: missing or not an array");

  std::vector<Monomial> terms;
  const auto &arr = j["terms"];
  for (std::size_t t = 0; t < arr.size(); ++t) {
    const std::string tp = path + "/terms/" + std::to_string(t);
    const auto &term = arr[t];
    if (!term.is_object() || !term.contains("exponents") ||
        !term["exponents"].is_array())
      throw InputError(tp + ": term needs an \"exponents\" array");
    const auto &ex = term["exponents"];
    if (ex.size() != static_cast<std::size_t>(dim))
      throw InputError(tp + "/exponents: length " + std::to_string(ex.size()) +
                       " does not match dimension " + std::to_string(dim));
    Exponents e(dim);
    for (std::size_t k = 0; k < ex.size(); ++k) {
      if (!ex[k].is_number_integer() || ex[k].get<std::int64_t>() < 0 ||
          ex[k].get<std::int64_t>() > static_cast<std::int64_t>(kMaxDegree))
        throw InputError(tp + "/exponents/" + std::to_string(k) +
                         ": must be an integer in [0, " +
                         std::to_string(kMaxDegree) + "]");
      e[k] = ex[k].get<unsigned>();
    }
    if (total_degree(e) > kMaxDegree)
      throw InputError(tp + ": total degree exceeds the cap of " +
                       std::to_string(kMaxDegree));
    if (!term.contains("num"))
      throw InputError(tp + "/num: missing");
    const Integer num = detail::parse_integer(term["num"], tp + "/num");
    const Integer den = term.contains("den")
                            ? detail::parse_integer(term["den"], tp + "/den")
                            : Integer(1);
    if (den == 0)
      throw InputError(tp + "/den: zero denominator");
    for (const auto &prev : terms)
      if (prev.exponents == e)
        throw InputError(tp + ": duplicate exponent vector");
    terms.push_back({std::move(e), Rational(num, den)});
  }
  return Polynomial::from_terms(static_cast<std::size_t>(dim), terms);
}

inline json polynomial_to_json(const Polynomial &h) {
  json terms = json::array();
  for (const auto &t : h.terms())
    terms.push_back({{"exponents", t.exponents},
                     {"num", detail::emit_integer(numerator(t.coefficient))},
                     {"den", detail::emit_integer(denominator(t.coefficient))}});
  return {{"dimension", h.dimension()}, {"terms", std::move(terms)}};
}

} // namespace rmap
