// rmap_cli: analyze Hessian charts, build the special Kähler structure on TM
// and cross-check every closed form against the finite-difference oracle.
//
// Exit codes: 0 all non-skipped checks passed, 1 some check failed,
// 2 invalid input.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "rmap/commands.hpp"

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitInvalid = 2;

struct Options {
  std::string input;
  std::string output;
  std::string points;
  std::string csv;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_abs, tol_rel, fd_step, perturb;
  std::optional<std::string> scheme;
};

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw rmap::InputError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

rmap::RunSpec load(const Options &o) {
  rmap::RunSpec spec = rmap::load_run_spec(read_file(o.input), o.input);
  if (!o.points.empty())
    rmap::replace_points(spec, read_file(o.points), o.points);
  if (o.seed)
    spec.seed = *o.seed;
  if (o.tol_abs)
    spec.oracle.tol_abs = *o.tol_abs;
  if (o.tol_rel)
    spec.oracle.tol_rel = *o.tol_rel;
  if (o.fd_step)
    spec.oracle.base_step = *o.fd_step;
  if (o.scheme)
    spec.oracle.scheme = rmap::fd::parse_scheme(*o.scheme);
  if (o.perturb)
    spec.perturb = *o.perturb;
  if (!o.output.empty())
    spec.output = o.output;
  spec.oracle.validate();
  return spec;
}

void emit(const nlohmann::json &doc, const std::string &path) {
  const std::string text = doc.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw rmap::InputError(path + ": cannot write");
  out << text;
}

void emit_csv(const rmap::Report &r, const std::string &path) {
  if (path.empty())
    return;
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw rmap::InputError(path + ": cannot write");
  r.write_csv(out);
}

int run(const std::string &command, const Options &o) {
  const rmap::RunSpec spec = load(o);
  if (command != "run") {
    rmap::Report r = rmap::run_command(command, spec);
    emit(r.to_json(), spec.output);
    emit_csv(r, o.csv);
    return r.exit_code();
  }
  if (spec.commands.empty())
    throw rmap::InputError(o.input + "/commands: nothing to run");
  nlohmann::json reports = nlohmann::json::array();
  int code = 0;
  std::ostringstream csv;
  for (const std::string &name : spec.commands) {
    rmap::Report r = rmap::run_command(name, spec);
    reports.push_back(r.to_json());
    r.write_csv(csv);
    code = std::max(code, r.exit_code());
  }
  emit({{"schema", rmap::kReportSchema},
        {"tool_version", rmap::kToolVersion},
        {"reports", std::move(reports)}},
       spec.output);
  if (!o.csv.empty()) {
    std::ofstream out(o.csv, std::ios::binary);
    out << csv.str();
  }
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Hessian charts, the r-map to TM, and their FD cross-checks"};
  app.set_version_flag("--version", std::string(rmap::kToolVersion));
  app.require_subcommand(1);

  Options o;
  std::string chosen;
  auto add = [&](const std::string &name, const std::string &help) {
    CLI::App *sub = app.add_subcommand(name, help);
    sub->add_option("--input", o.input, "run spec JSON")->required();
    sub->add_option("--output", o.output, "report path (default stdout)");
    sub->add_option("--points", o.points, "JSON file replacing the points");
    sub->add_option("--csv", o.csv, "also write a CSV summary here");
    sub->add_option("--seed", o.seed, "seed for point sampling");
    sub->add_option("--tol-abs", o.tol_abs, "absolute oracle tolerance");
    sub->add_option("--tol-rel", o.tol_rel, "relative oracle tolerance");
    sub->add_option("--fd-step", o.fd_step, "base finite-difference step");
    sub->add_option("--scheme", o.scheme,
                    "central_2nd or richardson_4th");
    sub->add_option("--perturb", o.perturb,
                    "add perturb * sum(u) * I to g^N before reconstruction");
    sub->callback([&chosen, name] { chosen = name; });
  };
  add("analyze", "metric, signature, S^ and base curvature per point");
  add("rmap", "special Kähler structure on TM and its axioms per point");
  add("verify", "every identity at every point");
  add("roundtrip", "recover the base metric from g^N");
  add("run", "run the commands listed in the spec");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    return run(chosen, o);
  } catch (const rmap::InputError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailed;
  }
}
