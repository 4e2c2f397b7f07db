#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "kropina/specio.hpp"

namespace fs = std::filesystem;
using namespace kropina;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitStructural = 3;

int exit_code_for(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return kExitOk;
    case SolveStatus::NoAdmissibleSeed:
    case SolveStatus::Collapsed: return kExitStructural;
    case SolveStatus::ConeCollapse:
    case SolveStatus::MaxIterations: return kExitNotConverged;
  }
  return kExitNotConverged;
}

std::string structural_reason(SolveStatus status) {
  switch (status) {
    case SolveStatus::NoAdmissibleSeed:
      return "the seed's homotopy class contains no admissible curve (navigable region empty)";
    case SolveStatus::Collapsed:
      return "length infimum not attained: paths collapse toward a point";
    default: return "";
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cli: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Output {
  std::string dir = ".";
  std::string stem;
  bool echo_json = false;

  std::string path(const std::string& ext) const { return dir + "/" + stem + ext; }
  void finish(const JsonWriter& report) const {
    write_text_file(path(".json"), report.str() + "\n");
    if (echo_json) std::cout << report.str() << "\n";
  }
};

void write_eps_trace(JsonWriter& w, const std::vector<EpsStage>& trace) {
  w.begin_array("eps_trace");
  for (const auto& st : trace) {
    w.begin_object();
    w.field("eps", st.eps).field("length", st.length).field("iters", st.iters);
    w.end_object();
  }
  w.end_array();
}

void write_connect_report(JsonWriter& w, const std::string& command, const ManifoldModel& model,
                          const ConnectResult& res) {
  w.begin_object();
  w.field("command", command);
  w.field("manifold", model.name);
  w.field("status", to_string(res.status));
  if (!res.detail.empty()) w.field("detail", res.detail);
  const std::string reason = structural_reason(res.status);
  if (!reason.empty()) w.field("reason", reason);
  w.field("length", res.length);
  w.field("endpoint_error", res.endpoint_error);
  w.field("first_variation_residual", res.first_variation_residual);
  w.field("homotopy_check_ok", res.homotopy_check_ok);
  if (res.status == SolveStatus::Converged) {
    w.key("residuals");
    w.begin_object();
    w.field("omega_drift", res.solution.residuals.omega_drift);
    w.field("speed_drift", res.solution.residuals.speed_drift);
    w.field("c_eps_drift", res.solution.residuals.c_eps_drift);
    w.end_object();
    w.field("integrator_steps", res.solution.stats.steps);
    w.field("integrator_rejected", res.solution.stats.rejected);
  }
  if (!res.eps_trace.empty()) write_eps_trace(w, res.eps_trace);
  w.end_object();
}

int run_connect(const ManifoldModel& model, const ConnectSpec& spec, const Output& out) {
  ConnectProblem prob;
  prob.x0 = spec.x0;
  prob.x1 = spec.x1;
  prob.discretization = spec.discretization;
  prob.grad_tol = spec.grad_tol;
  prob.length_tol = spec.length_tol;
  prob.eps_schedule = spec.eps_schedule;
  if (spec.seed_mode == "inline") {
    DiscretePath seed;
    seed.points = spec.seed_points;
    seed.params = Vec::LinSpaced(seed.points.size(), 0.0, 1.0);
    prob.seed = seed;
  } else {
    prob.seed = straight_seed(model, spec.x0, spec.x1, 16);
  }

  // a populated schedule selects the approximation route
  ConnectResult res = spec.eps_schedule.empty() ? minimize_length(model, prob)
                                                : epsilon_homotopy(model, prob);

  JsonWriter report;
  write_connect_report(report, "connect", model, res);
  out.finish(report);
  if (res.status == SolveStatus::Converged) write_trajectory_csv(out.path(".csv"), res.solution);
  return exit_code_for(res.status);
}

int run_closed(const ManifoldModel& model, const LoopSpec& spec, const Output& out) {
  LoopProblem prob;
  prob.discretization = spec.discretization;
  prob.grad_tol = spec.grad_tol;
  prob.collapse_diameter = spec.collapse_diameter;
  prob.use_epsilon_homotopy = spec.use_epsilon_homotopy;
  prob.eps_schedule = spec.eps_schedule;
  prob.seed_loop.points = spec.seed_loop;
  prob.seed_loop.params = Vec::LinSpaced(spec.seed_loop.size(), 0.0, 1.0);
  prob.seed_loop.closed = true;

  ConnectResult res = closed_geodesic_in_class(model, prob);
  JsonWriter report;
  write_connect_report(report, "closed", model, res);
  out.finish(report);
  if (res.status == SolveStatus::Converged)
    write_trajectory_csv(out.path(".csv"), res.solution, /*closed=*/true);
  return exit_code_for(res.status);
}

int run_reach(const ManifoldModel& model, const ReachSpec& spec, const Output& out) {
  GridSpec grid;
  grid.lo = spec.box_lo;
  grid.hi = spec.box_hi;
  grid.h = spec.h;
  ReachableSet rs = propagate(model, spec.source, grid, spec.cone_samples);
  write_grid_csv(out.path(".csv"), rs);

  JsonWriter report;
  report.begin_object();
  report.field("command", "reach");
  report.field("manifold", model.name);
  report.field("cells", static_cast<long>(rs.reached.size()));
  report.field("reached", rs.reached_count());
  report.field("reached_fraction", rs.reached_fraction());
  int code = kExitOk;
  try {
    TangencyReport tang = boundary_tangency_test(model, rs);
    report.field("status", "Complete");
    report.key("boundary");
    report.begin_object();
    report.field("count", tang.boundary_count);
    report.field("max_angle_deg", tang.max_angle_deg);
    report.field("mean_angle_deg", tang.mean_angle_deg);
    report.end_object();
  } catch (const BoundaryEmpty&) {
    report.field("status", "BoundaryEmpty");
    report.field("reason", rs.all_reached()
                               ? "every grid cell is reachable (non-integrable cone distribution)"
                               : "reached set is empty");
    code = kExitStructural;
  }
  report.end_object();
  out.finish(report);
  return code;
}

int run_katok(const ManifoldModel& model, std::optional<double> eps_flag, const Output& out) {
  std::vector<double> grid =
      eps_flag ? std::vector<double>{*eps_flag} : std::vector<double>{0.9, 0.75, 0.5, 0.1, 0.01};
  std::vector<KatokRow> rows;
  for (double eps : grid) {
    KatokRow row;
    row.eps = eps;
    auto closed_pair = katok_lengths(eps);
    row.closed_short = closed_pair.first;
    row.closed_long = closed_pair.second;
    KatokNumeric num = katok_numeric_short(model, eps);
    row.numeric = num.length;
    row.error = std::abs(num.length - row.closed_short);
    rows.push_back(row);
  }
  write_katok_csv(out.path(".csv"), rows);

  JsonWriter report;
  report.begin_object();
  report.field("command", "katok");
  report.field("manifold", model.name);
  report.field("status", "Complete");
  report.begin_array("rows");
  for (const auto& r : rows) {
    report.begin_object();
    report.field("eps", r.eps);
    report.field("closed_form_short", r.closed_short);
    report.field("closed_form_long", r.closed_long);
    report.field("numeric", r.numeric);
    report.field("error", r.error);
    report.end_object();
  }
  report.end_array();
  report.end_object();
  out.finish(report);
  return kExitOk;
}

int run_orbits(const ManifoldModel& model, const Output& out) {
  JsonWriter report;
  report.begin_object();
  report.field("command", "orbits");
  report.field("manifold", model.name);
  int code = kExitOk;
  try {
    auto candidates = killing_orbit_candidates(model);
    report.field("status", "Complete");
    report.field("count", static_cast<long>(candidates.size()));
    report.begin_array("candidates");
    for (const auto& c : candidates) {
      report.begin_object();
      report.field("base_point", c.base_point);
      report.field("period", c.period);
      report.field("omega_Y", c.f_value);
      report.field("kropina_length", c.kropina_length);
      report.field("orbit_closure", c.orbit_closure);
      report.field("criticality_residual", c.criticality_residual);
      report.field("first_variation_residual", c.first_variation_res);
      report.end_object();
    }
    report.end_array();
  } catch (const HypothesisViolated& e) {
    report.field("status", "HypothesisViolated");
    report.field("reason", e.what());
    code = kExitStructural;
  }
  report.end_object();
  out.finish(report);
  return code;
}

int run_scan(const ManifoldModel& model, const ScanSpec& spec, const Output& out) {
  ScanReport scan = nonintegrability_scan(model, spec.box_lo, spec.box_hi, spec.samples, spec.seed);
  std::string csv;
  for (int i = 1; i <= model.dim; ++i)
    csv += (i > 1 ? "," : "") + std::string("x") + std::to_string(i);
  csv += ",density\n";
  for (std::size_t k = 0; k < scan.points.size(); ++k) {
    for (int i = 0; i < model.dim; ++i) csv += (i ? "," : "") + format_double17(scan.points[k][i]);
    csv += "," + format_double17(scan.values[k]) + "\n";
  }
  write_text_file(out.path(".csv"), csv);

  JsonWriter report;
  report.begin_object();
  report.field("command", "scan");
  report.field("manifold", model.name);
  report.field("status", "Complete");
  report.field("samples", static_cast<long>(scan.values.size()));
  report.field("nonzero_fraction", scan.nonzero_fraction);
  report.field("rank_proxy", scan.rank_proxy);
  report.end_object();
  out.finish(report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kropina-nav: geodesics, closed geodesics and reachable sets of Kropina metrics"};
  app.require_subcommand(1);

  std::string manifold_path, problem_path, out_dir = ".";
  double eps_value = -1.0;
  double tol_value = -1.0;
  long seed_flag = 12345;
  bool echo_json = false;

  auto add_common = [&](CLI::App* cmd, bool manifold_required) {
    auto* m = cmd->add_option("--manifold", manifold_path, "manifold spec JSON");
    if (manifold_required) m->required();
    cmd->add_option("--problem", problem_path, "problem spec JSON");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--eps", eps_value, "epsilon override");
    cmd->add_option("--tol", tol_value, "tolerance override");
    cmd->add_option("--seed", seed_flag, "seed for randomized sampling");
    cmd->add_flag("--json", echo_json, "echo the report JSON to stdout");
  };

  add_common(app.add_subcommand("connect", "two-point geodesic"), true);
  add_common(app.add_subcommand("closed", "closed geodesic in a loop class"), true);
  add_common(app.add_subcommand("reach", "reachable set propagation"), true);
  add_common(app.add_subcommand("katok", "invariant-circle length table"), false);
  add_common(app.add_subcommand("orbits", "killing-orbit closed geodesic candidates"), true);
  add_common(app.add_subcommand("scan", "non-integrability density scan"), true);

  CLI11_PARSE(app, argc, argv);

  const std::optional<double> eps_flag =
      eps_value > 0.0 ? std::optional<double>(eps_value) : std::nullopt;
  const std::optional<double> tol_flag =
      tol_value > 0.0 ? std::optional<double>(tol_value) : std::nullopt;

  try {
    fs::create_directories(out_dir);
    const std::string command = app.get_subcommands().front()->get_name();

    ManifoldModel model;
    std::string manifold_text;
    if (!manifold_path.empty()) {
      manifold_text = read_file(manifold_path);
      model = parse_manifold_spec(manifold_text, "'" + manifold_path + "'");
    } else if (command == "katok") {
      model = round_sphere_hopf(2);  // the default invariant-circle geometry
      manifold_text = "builtin:s3";
    } else {
      std::cerr << "cli: --manifold is required for '" << command << "'\n";
      return kExitUsage;
    }

    std::string problem_text;
    if (!problem_path.empty()) problem_text = read_file(problem_path);

    std::string canonical = command + "|" + manifold_text + "|" + problem_text;
    if (eps_flag) canonical += "|eps=" + format_double17(*eps_flag);
    if (tol_flag) canonical += "|tol=" + format_double17(*tol_flag);
    canonical += "|seed=" + std::to_string(seed_flag);

    Output out;
    out.dir = out_dir;
    out.stem = command + "_" + model.name + "_" + config_hash(canonical);
    out.echo_json = echo_json;

    if (command == "connect") {
      if (problem_text.empty()) {
        std::cerr << "cli: connect requires --problem\n";
        return kExitUsage;
      }
      ConnectSpec spec = parse_connect_spec(problem_text, "'" + problem_path + "'");
      if (tol_flag) spec.grad_tol = *tol_flag;
      return run_connect(model, spec, out);
    }
    if (command == "closed") {
      if (problem_text.empty()) {
        std::cerr << "cli: closed requires --problem\n";
        return kExitUsage;
      }
      LoopSpec spec = parse_loop_spec(problem_text, "'" + problem_path + "'");
      if (tol_flag) spec.grad_tol = *tol_flag;
      return run_closed(model, spec, out);
    }
    if (command == "reach") {
      if (problem_text.empty()) {
        std::cerr << "cli: reach requires --problem\n";
        return kExitUsage;
      }
      ReachSpec spec = parse_reach_spec(problem_text, "'" + problem_path + "'");
      return run_reach(model, spec, out);
    }
    if (command == "katok") return run_katok(model, eps_flag, out);
    if (command == "orbits") return run_orbits(model, out);
    if (command == "scan") {
      ScanSpec spec;
      if (!problem_text.empty()) {
        spec = parse_scan_spec(problem_text, "'" + problem_path + "'");
      } else {
        spec.box_lo = Vec::Constant(model.dim, -1.0);
        spec.box_hi = Vec::Constant(model.dim, 1.0);
      }
      spec.seed = static_cast<std::uint64_t>(seed_flag);
      return run_scan(model, spec, out);
    }
    std::cerr << "cli: unknown command\n";
    return kExitUsage;
  } catch (const SpecError& e) {
    std::cerr << "kropina-nav: " << e.what() << "\n";
    return kExitUsage;
  } catch (const KropinaError& e) {
    std::cerr << "kropina-nav: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const std::exception& e) {
    std::cerr << "kropina-nav: " << e.what() << "\n";
    return kExitUsage;
  }
}
