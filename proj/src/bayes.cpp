#include "mlsvgd/bayes.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "mlsvgd/beam.hpp"
#include "mlsvgd/diffusion_reaction.hpp"
#include "mlsvgd/ensemble.hpp"
#include "mlsvgd/errors.hpp"
#include "mlsvgd/io.hpp"

namespace mlsvgd {

GaussianPrior::GaussianPrior(Eigen::VectorXd m, Eigen::VectorXd v) : mean(std::move(m)), diag_cov(std::move(v)) {
  if (mean.size() != diag_cov.size() || mean.size() < 1) {
    throw std::invalid_argument("GaussianPrior: mean and variance sizes differ");
  }
  if (!(diag_cov.array() > 0.0).all()) throw std::invalid_argument("GaussianPrior: variances must be positive");
}

double GaussianPrior::log_density(const Eigen::VectorXd& theta) const {
  const double log_det = diag_cov.array().log().sum();
  return -0.5 * ((theta - mean).array().square() / diag_cov.array()).sum() -
         0.5 * (static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) + log_det);
}

Eigen::VectorXd GaussianPrior::gradient(const Eigen::VectorXd& theta) const {
  return -((theta - mean).array() / diag_cov.array()).matrix();
}

LogNormalPrior::LogNormalPrior(double m, double s, Eigen::Index n) : mu(m), sigma(s), components(n) {
  if (!(sigma > 0.0)) throw std::invalid_argument("LogNormalPrior: sigma must be positive");
  if (components < 1) throw std::invalid_argument("LogNormalPrior: need at least one component");
}

double LogNormalPrior::log_density(const Eigen::VectorXd& theta) const {
  if (!in_support(theta)) return -std::numeric_limits<double>::infinity();
  const Eigen::ArrayXd logs = theta.array().log();
  return (-logs - (logs - mu).square() / (2.0 * sigma * sigma)).sum() -
         static_cast<double>(components) * std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
}

Eigen::VectorXd LogNormalPrior::gradient(const Eigen::VectorXd& theta) const {
  const Eigen::ArrayXd t = theta.array();
  return (-1.0 / t - (t.log() - mu) / (sigma * sigma * t)).matrix();
}

double prior_log_density(const Prior& prior, const Eigen::VectorXd& theta) {
  return std::visit([&](const auto& p) { return p.log_density(theta); }, prior);
}

Eigen::VectorXd prior_gradient(const Prior& prior, const Eigen::VectorXd& theta) {
  return std::visit([&](const auto& p) { return p.gradient(theta); }, prior);
}

bool prior_in_support(const Prior& prior, const Eigen::VectorXd& theta) {
  return std::visit([&](const auto& p) { return p.in_support(theta); }, prior);
}

Eigen::Index prior_dim(const Prior& prior) {
  return std::visit([](const auto& p) { return p.dim(); }, prior);
}

GaussianLikelihood::GaussianLikelihood(Eigen::VectorXd y, Eigen::VectorXd var)
    : data(std::move(y)), noise_var(std::move(var)) {
  if (data.size() != noise_var.size()) throw std::invalid_argument("GaussianLikelihood: size mismatch");
  if (!(noise_var.array() > 0.0).all()) throw std::invalid_argument("GaussianLikelihood: variances must be positive");
}

double GaussianLikelihood::log_likelihood(const Eigen::VectorXd& prediction) const {
  if (prediction.size() != data.size()) {
    throw std::invalid_argument("GaussianLikelihood: prediction has the wrong dimension");
  }
  return -0.5 * ((data - prediction).array().square() / noise_var.array()).sum();
}

PosteriorLevel::PosteriorLevel(int level, Prior prior, std::shared_ptr<const GaussianLikelihood> likelihood,
                               std::shared_ptr<const ForwardModel> model, double fd_step, double cost_weight)
    : TargetLevel(level, prior_dim(prior), cost_weight),
      prior_(std::move(prior)),
      likelihood_(std::move(likelihood)),
      model_(std::move(model)),
      fd_step_(fd_step) {
  if (!likelihood_ || !model_) throw std::invalid_argument("PosteriorLevel: likelihood and model are required");
  if (model_->input_dim() != dim()) throw std::invalid_argument("PosteriorLevel: model and prior dimensions differ");
  if (model_->output_dim() != likelihood_->data.size()) {
    throw std::invalid_argument("PosteriorLevel: model output and data dimensions differ");
  }
  if (!(fd_step > 0.0)) throw std::invalid_argument("PosteriorLevel: finite-difference step must be positive");
}

double PosteriorLevel::log_likelihood(const Eigen::VectorXd& theta) const {
  return likelihood_->log_likelihood(model_->observe(theta));
}

double PosteriorLevel::do_log_density(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const Eigen::VectorXd t = theta;
  if (!prior_in_support(prior_, t)) return -std::numeric_limits<double>::infinity();
  return log_likelihood(t) + prior_log_density(prior_, t);
}

Eigen::VectorXd PosteriorLevel::do_score(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  Eigen::VectorXd t = theta;
  if (!prior_in_support(prior_, t)) {
    throw RunError("posterior score requested outside the prior support at " + describe_vector(t));
  }
  Eigen::VectorXd grad = prior_gradient(prior_, t);
  for (Eigen::Index k = 0; k < t.size(); ++k) {
    Eigen::VectorXd plus = t;
    Eigen::VectorXd minus = t;
    plus(k) += fd_step_;
    minus(k) -= fd_step_;
    grad(k) += (log_likelihood(plus) - log_likelihood(minus)) / (2.0 * fd_step_);
  }
  return grad;
}

double log_posterior_unnormalized(const PosteriorLevel& level, const Eigen::VectorXd& theta) {
  return level.log_density(theta);
}

Eigen::VectorXd posterior_score(const PosteriorLevel& level, const Eigen::VectorXd& theta) {
  return level.score(theta);
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd add_relative_noise(const Eigen::VectorXd& clean, double fraction, std::uint64_t seed,
                                   double& noise_std) {
  noise_std = fraction * clean.cwiseAbs().maxCoeff();
  if (!(noise_std > 0.0)) throw ConfigError("noise level must be positive (all-zero observations?)");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd noisy = clean;
  for (Eigen::Index k = 0; k < noisy.size(); ++k) noisy(k) += noise_std * normal(rng);
  return noisy;
}

}  // namespace

std::shared_ptr<GaussianTarget> gaussian_hierarchy_level(const GaussianHierarchyProblem& spec, int level) {
  if (spec.mean.size() != spec.dim || spec.variances.size() != spec.dim) {
    throw ConfigError("gaussian-hierarchy: mean/variances must have dim entries");
  }
  // Shift along the first coordinate scaled by its std: KL = shift^2 / 2.
  const double shift =
      level == 0 ? 0.0 : std::sqrt(2.0 * spec.kl_scale * std::pow(spec.base, -spec.alpha * level));
  Eigen::VectorXd mean = spec.mean;
  mean(0) += shift * std::sqrt(spec.variances(0));
  const double cost = spec.cost_scale * std::pow(spec.base, spec.gamma * std::max(level, 0));
  return std::make_shared<GaussianTarget>(level, mean, spec.variances.asDiagonal().toDenseMatrix(), cost);
}

std::shared_ptr<const ForwardModel> make_forward_model(const ProblemSpec& spec, int level) {
  if (const auto* dr = std::get_if<DiffusionReactionProblem>(&spec)) {
    (void)dr;
    return std::make_shared<DiffusionReactionModel>(level);
  }
  if (const auto* beam = std::get_if<BeamProblem>(&spec)) {
    return std::make_shared<BeamModel>(level, beam->dim);
  }
  throw ConfigError("make_forward_model: analytic hierarchies have no forward model");
}

BuiltProblem make_hierarchy(const ProblemSpec& spec) {
  BuiltProblem out{.hierarchy = {}, .prior = GaussianPrior(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)),
                   .likelihood = nullptr, .theta_true = {}, .metadata = {}};

  if (const auto* dr = std::get_if<DiffusionReactionProblem>(&spec)) {
    if (dr->levels < 1 || dr->levels + dr->data_level_offset > 7) throw ConfigError("diffusion-reaction: bad levels");
    const int data_level = dr->levels + dr->data_level_offset;
    const Eigen::VectorXd clean = DiffusionReactionModel(data_level).observe(dr->theta_true);
    double noise_std = 0.0;
    const Eigen::VectorXd y = add_relative_noise(clean, dr->noise_fraction, dr->noise_seed, noise_std);
    out.likelihood = std::make_shared<GaussianLikelihood>(y, Eigen::VectorXd::Constant(y.size(), noise_std * noise_std));
    out.prior = GaussianPrior(dr->prior_mean, dr->prior_var);
    out.theta_true = dr->theta_true;
    for (int l = 1; l <= dr->levels; ++l) {
      out.hierarchy.push_back(
          std::make_shared<PosteriorLevel>(l, out.prior, out.likelihood, make_forward_model(spec, l), dr->fd_step));
    }
    out.metadata = {{"problem", "diffusion-reaction"},
                    {"data_level", data_level},
                    {"data_mesh_width", 1.0 / (1 << (data_level + 2))},
                    {"noise_convention", "std = noise_fraction * max_i |G_data(theta_true)_i|, iid"},
                    {"noise_fraction", dr->noise_fraction},
                    {"noise_std", noise_std},
                    {"noise_seed", dr->noise_seed}};
  } else if (const auto* beam = std::get_if<BeamProblem>(&spec)) {
    if (beam->levels < 1 || beam->dim < 1) throw ConfigError("beam: bad levels or dimension");
    Rng rng(beam->truth_seed);
    std::normal_distribution<double> normal(beam->prior_mu, beam->prior_sigma);
    Eigen::VectorXd truth(beam->dim);
    for (Eigen::Index k = 0; k < beam->dim; ++k) truth(k) = std::exp(normal(rng));

    const BeamGrid fine = BeamGrid::with_nodes(beam->data_nodes);
    const StiffnessField field(truth);
    Eigen::VectorXd stiffness(fine.nodes());
    for (Eigen::Index k = 0; k < fine.nodes(); ++k) stiffness(k) = field.piecewise_constant(fine.x(k));
    const Eigen::VectorXd clean = observe_beam(solve_beam(fine, stiffness), fine);
    double noise_std = 0.0;
    const Eigen::VectorXd y = add_relative_noise(clean, beam->noise_fraction, beam->noise_seed, noise_std);
    out.likelihood = std::make_shared<GaussianLikelihood>(y, Eigen::VectorXd::Constant(y.size(), noise_std * noise_std));
    out.prior = LogNormalPrior(beam->prior_mu, beam->prior_sigma, beam->dim);
    out.theta_true = truth;
    for (int l = 1; l <= beam->levels; ++l) {
      out.hierarchy.push_back(
          std::make_shared<PosteriorLevel>(l, out.prior, out.likelihood, make_forward_model(spec, l), beam->fd_step));
    }
    out.metadata = {{"problem", "beam"},
                    {"data_nodes", beam->data_nodes},
                    {"truth_stiffness", "piecewise constant, plateaus drawn from the prior"},
                    {"load", "f = 1"},
                    {"noise_convention", "std = noise_fraction * max_j |y_j|, iid"},
                    {"noise_fraction", beam->noise_fraction},
                    {"noise_std", noise_std},
                    {"truth_seed", beam->truth_seed},
                    {"noise_seed", beam->noise_seed}};
  } else {
    const auto& gh = std::get<GaussianHierarchyProblem>(spec);
    if (gh.levels < 1) throw ConfigError("gaussian-hierarchy: need at least one level");
    for (int l = 1; l <= gh.levels; ++l) out.hierarchy.push_back(gaussian_hierarchy_level(gh, l));
    out.prior = GaussianPrior(gh.mean, gh.variances);
    out.theta_true = gh.mean;
    out.metadata = {{"problem", "gaussian-hierarchy"}, {"base", gh.base}, {"alpha", gh.alpha}, {"gamma", gh.gamma}};
    return out;
  }
  out.metadata["data"] = io::vector_json(out.likelihood->data);
  out.metadata["noise_var"] = io::vector_json(out.likelihood->noise_var);
  out.metadata["theta_true"] = io::vector_json(out.theta_true);
  return out;
}

}  // namespace mlsvgd
