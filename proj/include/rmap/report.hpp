#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rmap {

inline constexpr const char *kToolVersion = "0.1.0";
inline constexpr const char *kReportSchema = "rmap-report/1";

/// Shortest round-trip decimal form of a double. Reports never carry binary
/// floats, only these strings.
inline std::string decimal(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline nlohmann::json decimal_matrix(const Eigen::MatrixXd &m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(decimal(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

enum class Status { pass, fail, skipped };

inline const char *status_name(Status s) {
  switch (s) {
  case Status::pass:
    return "pass";
  case Status::fail:
    return "fail";
  case Status::skipped:
    return "skipped";
  }
  return "?";
}

struct Record {
  std::string check;
  long point = -1; // -1 for chart-wide checks
  Status status = Status::pass;
  std::optional<double> residual;
  std::optional<double> tolerance;
  std::optional<double> closed_form; // sup-norm digest
  std::optional<double> oracle;      // sup-norm digest
  std::string detail;
};

class Report {
public:
  explicit Report(std::string command) : command_(std::move(command)) {}

  void add(Record r) { records_.push_back(std::move(r)); }

  /// Adds a closed-vs-oracle comparison; pass iff residual <= tolerance.
  void compare(const std::string &check, long point, double residual,
               double tolerance, std::optional<double> closed = std::nullopt,
               std::optional<double> oracle = std::nullopt,
               std::string detail = {}) {
    Record r;
    r.check = check;
    r.point = point;
    r.residual = residual;
    r.tolerance = tolerance;
    r.closed_form = closed;
    r.oracle = oracle;
    r.status = residual <= tolerance ? Status::pass : Status::fail;
    r.detail = std::move(detail);
    add(std::move(r));
  }

  void fail(const std::string &check, long point, std::string detail) {
    Record r;
    r.check = check;
    r.point = point;
    r.status = Status::fail;
    r.detail = std::move(detail);
    add(std::move(r));
  }

  void skip(const std::string &check, long point, std::string detail) {
    Record r;
    r.check = check;
    r.point = point;
    r.status = Status::skipped;
    r.detail = std::move(detail);
    add(std::move(r));
  }

  nlohmann::json &context() { return context_; }
  nlohmann::json &point_info() { return points_; }

  const std::vector<Record> &records() const { return records_; }

  std::size_t count(Status s) const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(),
                      [s](const Record &r) { return r.status == s; }));
  }

  /// 0 when every non-skipped check passed, 1 otherwise.
  int exit_code() const { return count(Status::fail) == 0 ? 0 : 1; }

  /// Orders records by (check name, point index).
  void finalize() {
    std::stable_sort(records_.begin(), records_.end(),
                     [](const Record &a, const Record &b) {
                       if (a.check != b.check)
                         return a.check < b.check;
                       return a.point < b.point;
                     });
  }

  nlohmann::json to_json() const {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto &r : records_) {
      nlohmann::json j{{"check", r.check},
                       {"point", std::to_string(r.point)},
                       {"status", status_name(r.status)}};
      auto put = [&](const char *key, const std::optional<double> &v) {
        j[key] = v ? nlohmann::json(decimal(*v)) : nlohmann::json(nullptr);
      };
      put("residual", r.residual);
      put("tolerance", r.tolerance);
      put("closed_form", r.closed_form);
      put("oracle", r.oracle);
      if (!r.detail.empty())
        j["detail"] = r.detail;
      recs.push_back(std::move(j));
    }
    nlohmann::json out{
        {"schema", kReportSchema},
        {"tool_version", kToolVersion},
        {"command", command_},
        {"context", context_},
        {"points", points_.is_null() ? nlohmann::json::array() : points_},
        {"records", std::move(recs)},
        {"summary",
         {{"total", std::to_string(records_.size())},
          {"passed", std::to_string(count(Status::pass))},
          {"failed", std::to_string(count(Status::fail))},
          {"skipped", std::to_string(count(Status::skipped))}}}};
    return out;
  }

  void write_csv(std::ostream &os) const {
    os << "check,point,status,residual,tolerance\n";
    for (const auto &r : records_)
      os << r.check << ',' << r.point << ',' << status_name(r.status) << ','
         << (r.residual ? decimal(*r.residual) : "") << ','
         << (r.tolerance ? decimal(*r.tolerance) : "") << '\n';
  }

private:
  std::string command_;
  nlohmann::json context_ = nlohmann::json::object();
  nlohmann::json points_ = nlohmann::json::array();
  std::vector<Record> records_;
};

} // namespace rmap
