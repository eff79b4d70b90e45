#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tmm {

using Index = std::int64_t;

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Configuration / input contract violations (bad keys, out-of-range values).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical degeneracy that the caller asked us to treat as fatal
// (rank-deficient cross block after restarts, non-PD site Gram, ...).
struct DegeneracyError : std::runtime_error {
  explicit DegeneracyError(const std::string& what) : std::runtime_error(what) {}
};

// Binary/columnar artifact I/O failures.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tmm
