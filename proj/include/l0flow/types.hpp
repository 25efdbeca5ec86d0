#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace l0flow {

// Ambient coordinate capacity. Sphere of dimension d needs d + 1 slots, the
// torus needs d. Fixed capacity keeps the inner solver loops allocation-free.
inline constexpr int kMaxAmbient = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxAmbient, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                          kMaxAmbient, kMaxAmbient>;

/// Invalid input: a precondition of the call does not hold.
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical solve did not reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace l0flow
