#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mlsvgd {

/// Failure during a sampler run: non-finite scores, failed forward solves.
class RunError : public std::runtime_error {
 public:
  explicit RunError(const std::string& what, long particle_index = -1)
      : std::runtime_error(what), particle_index_(particle_index) {}

  /// Offending particle, or -1 when the failure is not tied to one.
  long particle_index() const { return particle_index_; }

 private:
  long particle_index_;
};

/// Invalid experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string describe_vector(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace mlsvgd
