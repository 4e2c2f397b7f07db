#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "kropina/closed.hpp"
#include "kropina/connect.hpp"
#include "kropina/reachable.hpp"

namespace kropina {

// --- spec file loading (strict: unknown keys are rejected) ---------------

ManifoldModel load_manifold_spec(const std::string& path);
ManifoldModel parse_manifold_spec(const std::string& json_text, const std::string& origin);

struct ConnectSpec {
  Vec x0, x1;
  std::string seed_mode;  // "straight" | "detour" | "inline"
  std::vector<Vec> seed_points;
  int discretization = 64;
  double grad_tol = 1e-8;
  double length_tol = 1e-10;
  std::vector<double> eps_schedule;
  std::string manifold_ref;  // optional path
};
ConnectSpec load_connect_spec(const std::string& path);
ConnectSpec parse_connect_spec(const std::string& json_text, const std::string& origin);

struct LoopSpec {
  std::vector<Vec> seed_loop;
  int discretization = 96;
  double grad_tol = 1e-8;
  double collapse_diameter = 1e-3;
  bool use_epsilon_homotopy = false;
  std::vector<double> eps_schedule;
  std::string manifold_ref;
};
LoopSpec load_loop_spec(const std::string& path);
LoopSpec parse_loop_spec(const std::string& json_text, const std::string& origin);

struct ReachSpec {
  Vec source;
  Vec box_lo, box_hi;
  double h = 0.05;
  int cone_samples = 124;
  std::string manifold_ref;
};
ReachSpec load_reach_spec(const std::string& path);
ReachSpec parse_reach_spec(const std::string& json_text, const std::string& origin);

struct ScanSpec {
  Vec box_lo, box_hi;
  int samples = 200;
  std::uint64_t seed = 12345;
  std::string manifold_ref;
};
ScanSpec load_scan_spec(const std::string& path);
ScanSpec parse_scan_spec(const std::string& json_text, const std::string& origin);

// Canonical emission of problem specs; re-parsing yields an equal config.
std::string to_json(const ConnectSpec& spec);
std::string to_json(const LoopSpec& spec);
std::string to_json(const ReachSpec& spec);
std::string to_json(const ScanSpec& spec);

// --- deterministic output ------------------------------------------------

// Ordered JSON emitter with floating-point values fixed to 17 significant
// digits, so identical runs produce byte-identical reports.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array(const std::string& key = "");
  JsonWriter& end_array();
  JsonWriter& key(const std::string& k);
  JsonWriter& value(double v);
  JsonWriter& value(const std::string& v);
  JsonWriter& value(const char* v) { return value(std::string(v)); }
  JsonWriter& value(long v);
  JsonWriter& value(int v) { return value(static_cast<long>(v)); }
  JsonWriter& value(bool v);
  JsonWriter& value(const Vec& v);
  JsonWriter& field(const std::string& k, double v) { return key(k), value(v); }
  JsonWriter& field(const std::string& k, const std::string& v) { return key(k), value(v); }
  JsonWriter& field(const std::string& k, const char* v) { return key(k), value(v); }
  JsonWriter& field(const std::string& k, long v) { return key(k), value(v); }
  JsonWriter& field(const std::string& k, int v) { return key(k), value(v); }
  JsonWriter& field(const std::string& k, bool v) { return key(k), value(v); }
  JsonWriter& field(const std::string& k, const Vec& v) { return key(k), value(v); }

  std::string str() const { return out_; }

 private:
  void comma_if_needed();
  std::string out_;
  std::vector<bool> first_in_scope_;
  bool pending_key_ = false;
};

std::string format_double17(double v);

// Trajectory CSV with columns s, x1..xn, v1..vn, t, omega_dot, speed. For
// closed paths the first row is repeated as the last row.
void write_trajectory_csv(const std::string& path, const GeodesicSolution& solution,
                          bool closed = false);

// Grid CSV rows (cell center, reached flag, cost) sorted lexicographically by
// cell index.
void write_grid_csv(const std::string& path, const ReachableSet& rs);

struct KatokRow {
  double eps = 0.0;
  double closed_short = 0.0;
  double closed_long = 0.0;
  double numeric = 0.0;
  double error = 0.0;
};
void write_katok_csv(const std::string& path, const std::vector<KatokRow>& rows);

void write_text_file(const std::string& path, const std::string& content);

// FNV-1a of the canonical config string; used for deterministic file naming
// {command}_{manifold}_{hash}.csv.
std::string config_hash(const std::string& canonical);

}  // namespace kropina
