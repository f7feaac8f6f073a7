#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace kfsi {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using VectorX = Eigen::VectorXd;
using MatrixX = Eigen::MatrixXd;

/// Point lies outside the tubular neighbourhood of the shell surface.
class OutOfTubeError : public std::runtime_error {
 public:
  explicit OutOfTubeError(const std::string& what) : std::runtime_error(what) {}
};

/// Displacement violates an admissibility bound (e.g. ||eta||_inf >= kappa).
class AdmissibilityError : public std::runtime_error {
 public:
  explicit AdmissibilityError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration value or insufficient quadrature/parameter choice.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Linear solver failed (singular system, residual above tolerance, ...).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// ||eta||_inf crossed the alpha cap during time stepping.
class HorizonExceeded : public std::runtime_error {
 public:
  explicit HorizonExceeded(const std::string& what) : std::runtime_error(what) {}
};

/// Problem too large for a dense path (null-space extraction).
class SizeError : public std::runtime_error {
 public:
  explicit SizeError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed on-disk artifact (checkpoint container).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kfsi
