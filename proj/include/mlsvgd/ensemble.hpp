#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mlsvgd {

/// Seedable generator used by every stochastic operation in the library.
using Rng = std::mt19937_64;
inline constexpr const char* kRngName = "mt19937_64";

/// N x d particle ensemble, one particle per row.
template <typename Scalar = double>
struct ParticleEnsemble {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix particles;
  int level_index = 0;   // level of the last target applied, 0 before any step
  long iteration = 0;    // total steps taken across all levels

  Eigen::Index count() const { return particles.rows(); }
  Eigen::Index dim() const { return particles.cols(); }

  bool operator==(const ParticleEnsemble&) const = default;
};

/// Throws std::invalid_argument unless the ensemble is nonempty and finite.
template <typename Scalar>
void validate(const ParticleEnsemble<Scalar>& ensemble) {
  if (ensemble.count() < 1 || ensemble.dim() < 1) {
    throw std::invalid_argument("ParticleEnsemble: need at least one particle and one dimension");
  }
  if (!ensemble.particles.allFinite()) {
    throw std::invalid_argument("ParticleEnsemble: non-finite particle coordinates");
  }
}

/// N i.i.d. draws from N(mean, diag(diag_cov)).
template <typename Scalar = double>
ParticleEnsemble<Scalar> init_ensemble(Eigen::Index count,
                                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& mean,
                                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& diag_cov,
                                       std::uint64_t seed) {
  if (count < 1 || mean.size() < 1) {
    throw std::invalid_argument("init_ensemble: count and dimension must be positive");
  }
  if (mean.size() != diag_cov.size()) {
    throw std::invalid_argument("init_ensemble: mean and covariance dimension mismatch");
  }
  if (!((diag_cov.array() > Scalar(0)).all())) {
    throw std::invalid_argument("init_ensemble: variances must be positive");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> stddev = diag_cov.array().sqrt();

  ParticleEnsemble<Scalar> ensemble;
  ensemble.particles.resize(count, mean.size());
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index k = 0; k < mean.size(); ++k) {
      ensemble.particles(i, k) = mean(k) + stddev(k) * Scalar(normal(rng));
    }
  }
  return ensemble;
}

struct EnsembleMetadata {
  Eigen::Index count = 0;
  Eigen::Index dim = 0;
  int level_index = 0;
  long iteration = 0;
  std::uint64_t seed = 0;
};

/// CSV with header "theta_1,...,theta_d", one particle per row, full precision.
void write_ensemble_csv(const std::string& path, const ParticleEnsemble<double>& ensemble);
ParticleEnsemble<double> read_ensemble_csv(const std::string& path);

/// JSON sidecar {count, dim, level_index, iteration, seed}.
void write_ensemble_metadata(const std::string& path, const ParticleEnsemble<double>& ensemble,
                             std::uint64_t seed);
EnsembleMetadata read_ensemble_metadata(const std::string& path);

/// Loads CSV plus sidecar, restoring level and iteration counters.
ParticleEnsemble<double> load_ensemble(const std::string& csv_path, const std::string& meta_path);

}  // namespace mlsvgd
