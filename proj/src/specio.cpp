#include "kropina/specio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "kropina/expr.hpp"

namespace kropina {

namespace {

using nlohmann::json;

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecError("specio: JSON parse error in " + origin + ": " + e.what());
  }
}

void strict_keys(const json& obj, const std::set<std::string>& allowed,
                 const std::string& origin) {
  if (!obj.is_object()) throw SpecError("specio: expected a JSON object in " + origin);
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw SpecError("specio: unknown key '" + it.key() + "' in " + origin);
}

Vec get_vec(const json& j, const std::string& key, const std::string& origin) {
  if (!j.contains(key)) throw SpecError("specio: missing key '" + key + "' in " + origin);
  const json& arr = j.at(key);
  if (!arr.is_array()) throw SpecError("specio: '" + key + "' must be an array in " + origin);
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

ManifoldModel build_expression_model(const json& j, const std::string& origin) {
  const int dim = j.at("dim").get<int>();
  const json& ex = j.at("expressions");
  strict_keys(ex, {"metric", "one_form", "killing"}, origin + ".expressions");

  const json& met = ex.at("metric");
  if (!met.is_array() || static_cast<int>(met.size()) != dim)
    throw SpecError("specio: expressions.metric must be a " + std::to_string(dim) + "x" +
                    std::to_string(dim) + " array of strings in " + origin);
  std::vector<std::vector<Expression>> metric(dim, std::vector<Expression>(dim));
  for (int i = 0; i < dim; ++i) {
    if (!met[i].is_array() || static_cast<int>(met[i].size()) != dim)
      throw SpecError("specio: expressions.metric row " + std::to_string(i) +
                      " has wrong length in " + origin);
    for (int k = 0; k < dim; ++k)
      metric[i][k] = Expression::parse(met[i][k].get<std::string>(), dim);
  }
  const json& omj = ex.at("one_form");
  if (!omj.is_array() || static_cast<int>(omj.size()) != dim)
    throw SpecError("specio: expressions.one_form must have " + std::to_string(dim) +
                    " entries in " + origin);
  std::vector<Expression> one_form(dim);
  for (int i = 0; i < dim; ++i) one_form[i] = Expression::parse(omj[i].get<std::string>(), dim);

  std::vector<Expression> killing;
  if (ex.contains("killing")) {
    const json& kj = ex.at("killing");
    if (!kj.is_array() || static_cast<int>(kj.size()) != dim)
      throw SpecError("specio: expressions.killing must have " + std::to_string(dim) +
                      " entries in " + origin);
    killing.resize(dim);
    for (int i = 0; i < dim; ++i) killing[i] = Expression::parse(kj[i].get<std::string>(), dim);
  }

  if (!j.contains("domain"))
    throw SpecError("specio: expression models require 'domain' in " + origin);
  strict_keys(j.at("domain"), {"lo", "hi"}, origin + ".domain");
  Vec lo = get_vec(j.at("domain"), "lo", origin + ".domain");
  Vec hi = get_vec(j.at("domain"), "hi", origin + ".domain");
  if (lo.size() != dim || hi.size() != dim)
    throw SpecError("specio: domain bounds must have length dim in " + origin);

  ManifoldModel m;
  m.dim = dim;
  m.name = j.value("name", "custom");
  m.chart.lo = lo;
  m.chart.hi = hi;
  m.chart.periodic.assign(dim, false);
  if (j.contains("periodic")) {
    const json& p = j.at("periodic");
    if (!p.is_array() || static_cast<int>(p.size()) != dim)
      throw SpecError("specio: periodic must have length dim in " + origin);
    for (int i = 0; i < dim; ++i) m.chart.periodic[i] = p[i].get<bool>();
  }
  m.chart.guard = j.value("guard", 0.0);

  m.metric_at = [metric, dim](const Vec& x) {
    Mat g(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int k = 0; k < dim; ++k) g(i, k) = metric[i][k].eval(x);
    return Mat(0.5 * (g + g.transpose()));
  };
  m.one_form_at = [one_form, dim](const Vec& x) {
    Vec om(dim);
    for (int i = 0; i < dim; ++i) om[i] = one_form[i].eval(x);
    return om;
  };
  if (!killing.empty()) {
    m.killing_field = [killing, dim](const Vec& x) {
      Vec y(dim);
      for (int i = 0; i < dim; ++i) y[i] = killing[i].eval(x);
      return y;
    };
  }
  attach_fd_jets(m);  // user-supplied models get 4th-order FD jets
  return m;
}

}  // namespace

ManifoldModel parse_manifold_spec(const std::string& text, const std::string& origin) {
  json j = parse_json(text, origin);
  strict_keys(j,
              {"name", "dim", "periodic", "builtin", "covector", "sign", "m", "guard",
               "half_width", "expressions", "domain", "tol_omega"},
              origin);
  if (!j.contains("dim")) throw SpecError("specio: missing 'dim' in " + origin);
  const int dim = j.at("dim").get<int>();
  if (dim < 2) throw SpecError("specio: dim must be >= 2 in " + origin);

  const bool has_builtin = j.contains("builtin");
  const bool has_expr = j.contains("expressions");
  if (has_builtin == has_expr)
    throw SpecError("specio: exactly one of 'builtin' or 'expressions' required in " + origin);

  ManifoldModel m;
  if (has_expr) {
    m = build_expression_model(j, origin);
  } else {
    const std::string which = j.at("builtin").get<std::string>();
    if (which == "flat_constant_form") {
      Vec cov = get_vec(j, "covector", origin);
      if (cov.size() != dim) throw SpecError("specio: covector length != dim in " + origin);
      m = flat_constant_form(dim, cov, j.value("half_width", 100.0));
    } else if (which == "flat_torus") {
      Vec cov = get_vec(j, "covector", origin);
      if (cov.size() != dim) throw SpecError("specio: covector length != dim in " + origin);
      m = flat_torus(dim, cov);
    } else if (which == "heisenberg_contact") {
      if (dim != 3) throw SpecError("specio: heisenberg_contact requires dim 3 in " + origin);
      m = heisenberg_contact(j.value("sign", 1), j.value("half_width", 100.0));
    } else if (which == "round_sphere_hopf") {
      const int m_param = j.contains("m") ? j.at("m").get<int>() : (dim + 1) / 2;
      if (2 * m_param - 1 != dim)
        throw SpecError("specio: round_sphere_hopf needs dim = 2m-1 in " + origin);
      m = round_sphere_hopf(m_param, j.value("guard", 1e-3));
    } else {
      throw SpecError("specio: unknown builtin '" + which + "' in " + origin);
    }
    if (j.contains("name")) m.name = j.at("name").get<std::string>();
    if (j.contains("periodic")) {
      const json& p = j.at("periodic");
      if (!p.is_array() || static_cast<int>(p.size()) != dim)
        throw SpecError("specio: periodic must have length dim in " + origin);
      for (int i = 0; i < dim; ++i)
        if (m.chart.periodic[i] != p[i].get<bool>())
          throw SpecError("specio: periodic flags conflict with builtin '" + which + "' in " +
                          origin);
    }
  }
  if (j.contains("tol_omega")) m.tol_omega = j.at("tol_omega").get<double>();
  return m;
}

ManifoldModel load_manifold_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("specio: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifold_spec(ss.str(), "'" + path + "'");
}

namespace {

void parse_tolerances(const json& j, const std::string& origin, double& grad_tol,
                      double* length_tol) {
  if (!j.contains("tolerances")) return;
  const json& t = j.at("tolerances");
  strict_keys(t, {"grad", "length"}, origin + ".tolerances");
  if (t.contains("grad")) grad_tol = t.at("grad").get<double>();
  if (t.contains("length") && length_tol) *length_tol = t.at("length").get<double>();
}

std::vector<double> parse_schedule(const json& j, const std::string& origin) {
  std::vector<double> out;
  if (!j.contains("epsilon_schedule")) return out;
  for (const auto& e : j.at("epsilon_schedule")) out.push_back(e.get<double>());
  for (std::size_t i = 0; i + 1 < out.size(); ++i)
    if (out[i + 1] >= out[i])
      throw SpecError("specio: epsilon_schedule must be strictly decreasing in " + origin);
  return out;
}

}  // namespace

ConnectSpec parse_connect_spec(const std::string& text, const std::string& origin) {
  json j = parse_json(text, origin);
  strict_keys(j, {"manifold", "x0", "x1", "seed", "N", "tolerances", "epsilon_schedule"}, origin);
  ConnectSpec spec;
  spec.x0 = get_vec(j, "x0", origin);
  spec.x1 = get_vec(j, "x1", origin);
  spec.manifold_ref = j.value("manifold", "");
  spec.discretization = j.value("N", 64);
  parse_tolerances(j, origin, spec.grad_tol, &spec.length_tol);
  spec.eps_schedule = parse_schedule(j, origin);

  spec.seed_mode = "straight";
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (s.is_string()) {
      spec.seed_mode = s.get<std::string>();
      if (spec.seed_mode != "straight" && spec.seed_mode != "detour")
        throw SpecError("specio: seed must be 'straight', 'detour', or a polyline in " + origin);
    } else if (s.is_array()) {
      spec.seed_mode = "inline";
      for (const auto& p : s) {
        Vec v(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) v[i] = p[i].get<double>();
        spec.seed_points.push_back(v);
      }
      if (spec.seed_points.size() < 2)
        throw SpecError("specio: inline seed needs at least two points in " + origin);
    } else {
      throw SpecError("specio: seed must be a string or polyline in " + origin);
    }
  }
  return spec;
}

ConnectSpec load_connect_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("specio: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_connect_spec(ss.str(), "'" + path + "'");
}

LoopSpec parse_loop_spec(const std::string& text, const std::string& origin) {
  json j = parse_json(text, origin);
  strict_keys(j,
              {"manifold", "seed_loop", "N", "tolerances", "collapse_diameter",
               "use_epsilon_homotopy", "epsilon_schedule"},
              origin);
  LoopSpec spec;
  spec.manifold_ref = j.value("manifold", "");
  spec.discretization = j.value("N", 96);
  spec.collapse_diameter = j.value("collapse_diameter", 1e-3);
  spec.use_epsilon_homotopy = j.value("use_epsilon_homotopy", false);
  parse_tolerances(j, origin, spec.grad_tol, nullptr);
  spec.eps_schedule = parse_schedule(j, origin);
  if (!j.contains("seed_loop"))
    throw SpecError("specio: missing 'seed_loop' in " + origin);
  for (const auto& p : j.at("seed_loop")) {
    Vec v(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) v[i] = p[i].get<double>();
    spec.seed_loop.push_back(v);
  }
  if (spec.seed_loop.size() < 4)
    throw SpecError("specio: seed_loop needs at least 4 nodes in " + origin);
  return spec;
}

LoopSpec load_loop_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("specio: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_loop_spec(ss.str(), "'" + path + "'");
}

ReachSpec parse_reach_spec(const std::string& text, const std::string& origin) {
  json j = parse_json(text, origin);
  strict_keys(j, {"manifold", "source", "box", "h", "cone_samples"}, origin);
  ReachSpec spec;
  spec.manifold_ref = j.value("manifold", "");
  spec.source = get_vec(j, "source", origin);
  if (!j.contains("box")) throw SpecError("specio: missing 'box' in " + origin);
  strict_keys(j.at("box"), {"lo", "hi"}, origin + ".box");
  spec.box_lo = get_vec(j.at("box"), "lo", origin + ".box");
  spec.box_hi = get_vec(j.at("box"), "hi", origin + ".box");
  spec.h = j.value("h", 0.05);
  spec.cone_samples = j.value("cone_samples", 124);
  return spec;
}

ReachSpec load_reach_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("specio: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_reach_spec(ss.str(), "'" + path + "'");
}

ScanSpec parse_scan_spec(const std::string& text, const std::string& origin) {
  json j = parse_json(text, origin);
  strict_keys(j, {"manifold", "box", "samples", "seed"}, origin);
  ScanSpec spec;
  spec.manifold_ref = j.value("manifold", "");
  if (!j.contains("box")) throw SpecError("specio: missing 'box' in " + origin);
  strict_keys(j.at("box"), {"lo", "hi"}, origin + ".box");
  spec.box_lo = get_vec(j.at("box"), "lo", origin + ".box");
  spec.box_hi = get_vec(j.at("box"), "hi", origin + ".box");
  spec.samples = j.value("samples", 200);
  spec.seed = j.value("seed", static_cast<std::uint64_t>(12345));
  return spec;
}

ScanSpec load_scan_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("specio: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scan_spec(ss.str(), "'" + path + "'");
}

namespace {

void emit_points(JsonWriter& w, const std::string& key, const std::vector<Vec>& pts) {
  w.begin_array(key);
  for (const Vec& p : pts) w.value(p);
  w.end_array();
}

void emit_schedule(JsonWriter& w, const std::vector<double>& schedule) {
  if (schedule.empty()) return;
  w.begin_array("epsilon_schedule");
  for (double e : schedule) w.value(e);
  w.end_array();
}

}  // namespace

std::string to_json(const ConnectSpec& spec) {
  JsonWriter w;
  w.begin_object();
  if (!spec.manifold_ref.empty()) w.field("manifold", spec.manifold_ref);
  w.field("x0", spec.x0);
  w.field("x1", spec.x1);
  if (spec.seed_mode == "inline")
    emit_points(w, "seed", spec.seed_points);
  else
    w.field("seed", spec.seed_mode);
  w.field("N", spec.discretization);
  w.key("tolerances");
  w.begin_object();
  w.field("grad", spec.grad_tol);
  w.field("length", spec.length_tol);
  w.end_object();
  emit_schedule(w, spec.eps_schedule);
  w.end_object();
  return w.str();
}

std::string to_json(const LoopSpec& spec) {
  JsonWriter w;
  w.begin_object();
  if (!spec.manifold_ref.empty()) w.field("manifold", spec.manifold_ref);
  emit_points(w, "seed_loop", spec.seed_loop);
  w.field("N", spec.discretization);
  w.key("tolerances");
  w.begin_object();
  w.field("grad", spec.grad_tol);
  w.end_object();
  w.field("collapse_diameter", spec.collapse_diameter);
  w.field("use_epsilon_homotopy", spec.use_epsilon_homotopy);
  emit_schedule(w, spec.eps_schedule);
  w.end_object();
  return w.str();
}

std::string to_json(const ReachSpec& spec) {
  JsonWriter w;
  w.begin_object();
  if (!spec.manifold_ref.empty()) w.field("manifold", spec.manifold_ref);
  w.field("source", spec.source);
  w.key("box");
  w.begin_object();
  w.field("lo", spec.box_lo);
  w.field("hi", spec.box_hi);
  w.end_object();
  w.field("h", spec.h);
  w.field("cone_samples", spec.cone_samples);
  w.end_object();
  return w.str();
}

std::string to_json(const ScanSpec& spec) {
  JsonWriter w;
  w.begin_object();
  if (!spec.manifold_ref.empty()) w.field("manifold", spec.manifold_ref);
  w.key("box");
  w.begin_object();
  w.field("lo", spec.box_lo);
  w.field("hi", spec.box_hi);
  w.end_object();
  w.field("samples", spec.samples);
  w.field("seed", static_cast<long>(spec.seed));
  w.end_object();
  return w.str();
}

// --- deterministic output --------------------------------------------------

std::string format_double17(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void JsonWriter::comma_if_needed() {
  if (!first_in_scope_.empty()) {
    if (!first_in_scope_.back() && !pending_key_) out_ += ",";
    first_in_scope_.back() = false;
  }
  pending_key_ = false;
}

JsonWriter& JsonWriter::begin_object() {
  comma_if_needed();
  out_ += "{";
  first_in_scope_.push_back(true);
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  out_ += "}";
  first_in_scope_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::begin_array(const std::string& k) {
  if (!k.empty()) key(k);
  comma_if_needed();
  out_ += "[";
  first_in_scope_.push_back(true);
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  out_ += "]";
  first_in_scope_.pop_back();
  return *this;
}

JsonWriter& JsonWriter::key(const std::string& k) {
  if (!first_in_scope_.empty() && !first_in_scope_.back()) out_ += ",";
  if (!first_in_scope_.empty()) first_in_scope_.back() = false;
  out_ += "\"" + k + "\":";
  pending_key_ = true;
  return *this;
}

JsonWriter& JsonWriter::value(double v) {
  comma_if_needed();
  out_ += format_double17(v);
  return *this;
}

JsonWriter& JsonWriter::value(const std::string& v) {
  comma_if_needed();
  out_ += "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out_ += '\\';
    if (c == '\n') {
      out_ += "\\n";
      continue;
    }
    out_ += c;
  }
  out_ += "\"";
  return *this;
}

JsonWriter& JsonWriter::value(long v) {
  comma_if_needed();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  comma_if_needed();
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::value(const Vec& v) {
  comma_if_needed();
  out_ += "[";
  for (int i = 0; i < v.size(); ++i) {
    if (i) out_ += ",";
    out_ += format_double17(v[i]);
  }
  out_ += "]";
  return *this;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw KropinaError("specio: cannot write '" + path + "'");
  out << content;
  if (!out) throw KropinaError("specio: write failed for '" + path + "'");
}

void write_trajectory_csv(const std::string& path, const GeodesicSolution& solution,
                          bool closed) {
  const int n = static_cast<int>(solution.path.points.front().size());
  std::string text = "s";
  for (int i = 1; i <= n; ++i) text += ",x" + std::to_string(i);
  for (int i = 1; i <= n; ++i) text += ",v" + std::to_string(i);
  text += ",t,omega_dot,speed\n";
  auto row = [&](std::size_t k) {
    std::string line = format_double17(solution.path.params[k]);
    for (int i = 0; i < n; ++i) line += "," + format_double17(solution.path.points[k][i]);
    for (int i = 0; i < n; ++i) line += "," + format_double17(solution.path.velocities[k][i]);
    line += "," + format_double17(solution.lift_t[k]);
    line += "," + format_double17(solution.omega_trace[k]);
    line += "," + format_double17(solution.speed_trace[k]);
    return line + "\n";
  };
  for (std::size_t k = 0; k < solution.path.points.size(); ++k) text += row(k);
  if (closed) text += row(0);  // closure row
  write_text_file(path, text);
}

void write_grid_csv(const std::string& path, const ReachableSet& rs) {
  const int n = static_cast<int>(rs.dims.size());
  std::string text;
  for (int i = 1; i <= n; ++i) text += (i > 1 ? "," : "") + std::string("c") + std::to_string(i);
  text += ",reached,cost\n";
  for (long idx = 0; idx < static_cast<long>(rs.reached.size()); ++idx) {
    const Vec c = rs.cell_center(idx);
    for (int i = 0; i < n; ++i) text += (i ? "," : "") + format_double17(c[i]);
    text += ",";
    text += (rs.reached[idx] ? "1" : "0");
    text += "," + format_double17(rs.reached[idx] ? rs.cost[idx] : -1.0);
    text += "\n";
  }
  write_text_file(path, text);
}

void write_katok_csv(const std::string& path, const std::vector<KatokRow>& rows) {
  std::string text = "eps,closed_form_short,closed_form_long,numeric,error\n";
  for (const auto& r : rows) {
    text += format_double17(r.eps) + "," + format_double17(r.closed_short) + "," +
            format_double17(r.closed_long) + "," + format_double17(r.numeric) + "," +
            format_double17(r.error) + "\n";
  }
  write_text_file(path, text);
}

std::string config_hash(const std::string& canonical) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(h & 0xffffffffu));
  return buf;
}

}  // namespace kropina
