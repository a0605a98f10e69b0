#pragma once

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlsvgd/forward_model.hpp"
#include "mlsvgd/target.hpp"

namespace mlsvgd {

/// Central-difference step for the likelihood gradient.
inline constexpr double kDefaultFdStep = 1.0 / 64.0;

struct GaussianPrior {
  Eigen::VectorXd mean;
  Eigen::VectorXd diag_cov;

  GaussianPrior(Eigen::VectorXd mean, Eigen::VectorXd diag_cov);
  Eigen::Index dim() const { return mean.size(); }
  double log_density(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  bool in_support(const Eigen::VectorXd&) const { return true; }
};

/// i.i.d. log-normal components: log(theta_k) ~ N(mu, sigma^2).
struct LogNormalPrior {
  double mu;
  double sigma;
  Eigen::Index components;

  LogNormalPrior(double mu, double sigma, Eigen::Index components);
  Eigen::Index dim() const { return components; }
  /// -infinity off the positive orthant.
  double log_density(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  bool in_support(const Eigen::VectorXd& theta) const { return (theta.array() > 0.0).all(); }
};

using Prior = std::variant<GaussianPrior, LogNormalPrior>;

double prior_log_density(const Prior& prior, const Eigen::VectorXd& theta);
Eigen::VectorXd prior_gradient(const Prior& prior, const Eigen::VectorXd& theta);
bool prior_in_support(const Prior& prior, const Eigen::VectorXd& theta);
Eigen::Index prior_dim(const Prior& prior);

/// Additive zero-mean Gaussian noise with diagonal covariance.
struct GaussianLikelihood {
  Eigen::VectorXd data;
  Eigen::VectorXd noise_var;

  GaussianLikelihood(Eigen::VectorXd data, Eigen::VectorXd noise_var);
  /// -1/2 (y - G)^T Gamma^{-1} (y - G)
  double log_likelihood(const Eigen::VectorXd& prediction) const;
};

/// Unnormalized posterior of one level:
///   log pi_l(theta) = -1/2 |y - G_l(theta)|^2_{Gamma^{-1}} + log pi_0(theta).
///
/// The score differentiates the likelihood term by central differences with
/// step `fd_step` (2 d forward solves) and adds the analytic prior gradient.
class PosteriorLevel : public TargetLevel {
 public:
  PosteriorLevel(int level, Prior prior, std::shared_ptr<const GaussianLikelihood> likelihood,
                 std::shared_ptr<const ForwardModel> model, double fd_step = kDefaultFdStep,
                 double cost_weight = 1.0);

  const Prior& prior() const { return prior_; }
  const GaussianLikelihood& likelihood() const { return *likelihood_; }
  const ForwardModel& model() const { return *model_; }
  double fd_step() const { return fd_step_; }

  /// Likelihood term alone; one uncounted forward solve.
  double log_likelihood(const Eigen::VectorXd& theta) const;

  /// Forward solves performed through the counted entry points.
  long forward_solves() const { return density_evaluations() + 2 * dim() * score_evaluations(); }

 protected:
  double do_log_density(const Eigen::Ref<const Eigen::VectorXd>& theta) const override;
  Eigen::VectorXd do_score(const Eigen::Ref<const Eigen::VectorXd>& theta) const override;

 private:
  Prior prior_;
  std::shared_ptr<const GaussianLikelihood> likelihood_;
  std::shared_ptr<const ForwardModel> model_;
  double fd_step_;
};

double log_posterior_unnormalized(const PosteriorLevel& level, const Eigen::VectorXd& theta);
Eigen::VectorXd posterior_score(const PosteriorLevel& level, const Eigen::VectorXd& theta);

// ---------------------------------------------------------------------------
// Problem specifications consumed by make_hierarchy.

struct DiffusionReactionProblem {
  int levels = 3;
  Eigen::Vector2d theta_true{-0.7853981633974483, 3.0};
  Eigen::Vector2d prior_mean{1.5707963267948966, 1.5};
  Eigen::Vector2d prior_var{50.0, 0.5};
  double noise_fraction = 0.005;  // noise std relative to max |G_data(theta_true)|
  int data_level_offset = 1;      // data generated on level levels + offset
  std::uint64_t noise_seed = 20231;
  double fd_step = kDefaultFdStep;
};

struct BeamProblem {
  int levels = 6;
  Eigen::Index dim = 9;
  double prior_mu = 1.0;
  double prior_sigma = 0.05;
  double noise_fraction = 1e-2;   // see the README on step-size stability
  Eigen::Index data_nodes = 1001;
  std::uint64_t truth_seed = 7;
  std::uint64_t noise_seed = 20232;
  double fd_step = kDefaultFdStep;
};

/// Analytic hierarchy N(mean + shift_l, cov) converging to N(mean, cov) with
/// KL(pi_l || pi) = kl_scale * base^(-alpha l) and cost c_l = cost_scale * base^(gamma l).
struct GaussianHierarchyProblem {
  int levels = 4;
  Eigen::Index dim = 2;
  double base = 2.0;
  double alpha = 2.0;
  double gamma = 2.0;
  double kl_scale = 1.0;
  double cost_scale = 1.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd variances = Eigen::VectorXd::Ones(2);
};

using ProblemSpec = std::variant<DiffusionReactionProblem, BeamProblem, GaussianHierarchyProblem>;

/// A hierarchy plus the provenance of its synthetic data.
struct BuiltProblem {
  Hierarchy hierarchy;
  Prior prior;
  std::shared_ptr<const GaussianLikelihood> likelihood;  // null for analytic hierarchies
  Eigen::VectorXd theta_true;
  nlohmann::json metadata;  // data vector, noise variances, noise convention
};

/// One target per level 1..L sharing data, noise and prior, with per-level G_l.
BuiltProblem make_hierarchy(const ProblemSpec& spec);

/// Forward model of the given level for a problem spec (levels beyond L allowed).
std::shared_ptr<const ForwardModel> make_forward_model(const ProblemSpec& spec, int level);

/// The analytic target of a Gaussian hierarchy level (level 0 = the limit).
std::shared_ptr<GaussianTarget> gaussian_hierarchy_level(const GaussianHierarchyProblem& spec, int level);

}  // namespace mlsvgd
