#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kropina {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Admissibility gate for the cone A = { v : -omega(v) > 0 }.
inline constexpr double kTolAdmissible = 1e-12;

struct KropinaError : std::runtime_error {
  explicit KropinaError(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : KropinaError {
  explicit DomainError(const std::string& what) : KropinaError(what) {}
};

// Trajectory or evaluation entered the guard band around a chart singularity.
struct ChartGuard : KropinaError {
  explicit ChartGuard(const std::string& what) : KropinaError(what) {}
};

struct InadmissibleVector : KropinaError {
  explicit InadmissibleVector(const std::string& what) : KropinaError(what) {}
};

struct InadmissiblePath : KropinaError {
  explicit InadmissiblePath(const std::string& what) : KropinaError(what) {}
};

// Integrated velocity approached the cone boundary.
struct ConeExit : KropinaError {
  explicit ConeExit(const std::string& what) : KropinaError(what) {}
};

struct StepUnderflow : KropinaError {
  explicit StepUnderflow(const std::string& what) : KropinaError(what) {}
};

struct NotCriticalWind : KropinaError {
  explicit NotCriticalWind(const std::string& what) : KropinaError(what) {}
};

struct HypothesisViolated : KropinaError {
  explicit HypothesisViolated(const std::string& what) : KropinaError(what) {}
};

struct BoundaryEmpty : KropinaError {
  explicit BoundaryEmpty(const std::string& what) : KropinaError(what) {}
};

struct SourceOutsideBox : KropinaError {
  explicit SourceOutsideBox(const std::string& what) : KropinaError(what) {}
};

struct SpecError : KropinaError {
  explicit SpecError(const std::string& what) : KropinaError(what) {}
};

// Worker cap shared by the data-parallel loops; reads KROPINA_NAV_THREADS once.
int worker_count();

}  // namespace kropina
