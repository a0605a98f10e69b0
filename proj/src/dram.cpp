#include "mlsvgd/dram.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mlsvgd/errors.hpp"
#include "mlsvgd/io.hpp"

namespace mlsvgd {

void DramConfig::validate() const {
  if (initial_state.size() < 1 || !initial_state.allFinite()) {
    throw std::invalid_argument("DramConfig: initial state must be a finite nonempty vector");
  }
  if (!(initial_proposal_var > 0.0)) throw std::invalid_argument("DramConfig: proposal variance must be positive");
  if (burn_in < 0 || samples < 1) throw std::invalid_argument("DramConfig: counts must be positive");
  if (stride < 1) throw std::invalid_argument("DramConfig: stride must be at least 1");
  if (adapt_start < 1 || adapt_interval < 1) throw std::invalid_argument("DramConfig: adaptation schedule must be positive");
  if (!(adapt_jitter >= 0.0)) throw std::invalid_argument("DramConfig: jitter must be nonnegative");
  if (!(dr_scale > 0.0)) throw std::invalid_argument("DramConfig: delayed-rejection scale must be positive");
  if (stall_limit < 1) throw std::invalid_argument("DramConfig: stall limit must be positive");
}

double DramConfig::adapt_scale() const { return 2.4 * 2.4 / static_cast<double>(initial_state.size()); }

Eigen::VectorXd RngDraws::standard_normal(Eigen::Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(dim);
  for (Eigen::Index k = 0; k < dim; ++k) z(k) = normal(rng_);
  return z;
}

double RngDraws::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

double Chain::acceptance_stage1() const {
  return iterations > 0 ? static_cast<double>(accepted_stage1) / static_cast<double>(iterations) : 0.0;
}
double Chain::acceptance_stage2() const {
  return stage2_attempts > 0 ? static_cast<double>(accepted_stage2) / static_cast<double>(stage2_attempts) : 0.0;
}
double Chain::acceptance_total() const {
  return iterations > 0 ? static_cast<double>(accepted_stage1 + accepted_stage2) / static_cast<double>(iterations) : 0.0;
}

double metropolis_log_alpha(double log_current, double log_proposal) {
  if (log_proposal == -std::numeric_limits<double>::infinity()) return log_proposal;
  return std::min(0.0, log_proposal - log_current);
}

double delayed_rejection_log_alpha(double log_x, double log_y1, double log_y2, double quad_y1_from_y2,
                                   double quad_y1_from_x) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (log_y2 == kNegInf) return kNegInf;
  // 1 - alpha1(y2, y1) vanishes when y1 is at least as probable as y2.
  const double a_rev = metropolis_log_alpha(log_y2, log_y1);
  if (a_rev >= 0.0) return kNegInf;
  const double a_fwd = metropolis_log_alpha(log_x, log_y1);
  const double numer = log_y2 - 0.5 * quad_y1_from_y2 + std::log1p(-std::exp(a_rev));
  const double denom = log_x - 0.5 * quad_y1_from_x + std::log1p(-std::exp(a_fwd));
  return std::min(0.0, numer - denom);
}

namespace {

struct Evaluator {
  const LogTargetFn& f;
  long failures = 0;
  double operator()(const Eigen::VectorXd& x) {
    try {
      const double v = f(x);
      if (std::isnan(v)) throw RunError("log density is NaN");
      return v;
    } catch (const RunError&) {
      ++failures;
      return -std::numeric_limits<double>::infinity();
    }
  }
};

/// Running mean and scatter of the chain history (Welford).
struct RunningMoments {
  long n = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd scatter;
  void add(const Eigen::VectorXd& x) {
    if (n == 0) {
      mean = Eigen::VectorXd::Zero(x.size());
      scatter = Eigen::MatrixXd::Zero(x.size(), x.size());
    }
    ++n;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(n);
    scatter += delta * (x - mean).transpose();
  }
  Eigen::MatrixXd covariance() const {
    Eigen::MatrixXd c = scatter / static_cast<double>(n - 1);
    return 0.5 * (c + c.transpose());
  }
};

}  // namespace

Chain dram_sample(const LogTargetFn& log_target, const DramConfig& config, DramDraws& draws) {
  config.validate();
  const Eigen::Index d = config.initial_state.size();
  Evaluator eval{log_target};

  Eigen::VectorXd x = config.initial_state;
  double log_x = eval(x);
  if (log_x == -std::numeric_limits<double>::infinity()) {
    throw RunError("dram_sample: initial state has zero density: " + describe_vector(x));
  }

  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d) * config.initial_proposal_var;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  Eigen::MatrixXd chol = llt.matrixL();

  Chain chain;
  chain.covariance_history.push_back(cov);
  const long retained = config.samples / config.stride;
  chain.samples.resize(retained, d);
  chain.retained_iterations.reserve(static_cast<std::size_t>(retained));

  RunningMoments moments;
  moments.add(x);
  long rejection_run = 0;
  const long total = config.burn_in + config.samples;

  for (long t = 1; t <= total; ++t) {
    const Eigen::VectorXd z1 = draws.standard_normal(d);
    const Eigen::VectorXd y1 = x + chol * z1;
    const double log_y1 = eval(y1);
    const double a1 = metropolis_log_alpha(log_x, log_y1);
    const double u1 = draws.uniform();
    bool accepted = std::log(u1) < a1;
    if (config.record_log) chain.log.push_back({t, 1, x, y1, a1, u1, accepted});

    if (accepted) {
      x = y1;
      log_x = log_y1;
      ++chain.accepted_stage1;
    } else if (config.delayed_rejection) {
      const Eigen::VectorXd z2 = draws.standard_normal(d);
      const Eigen::VectorXd y2 = x + config.dr_scale * (chol * z2);
      const double log_y2 = eval(y2);
      const double quad_from_y2 = llt.matrixL().solve(y1 - y2).squaredNorm();
      const double quad_from_x = z1.squaredNorm();
      const double a2 = delayed_rejection_log_alpha(log_x, log_y1, log_y2, quad_from_y2, quad_from_x);
      const double u2 = draws.uniform();
      ++chain.stage2_attempts;
      accepted = std::log(u2) < a2;
      if (config.record_log) chain.log.push_back({t, 2, x, y2, a2, u2, accepted});
      if (accepted) {
        x = y2;
        log_x = log_y2;
        ++chain.accepted_stage2;
      }
    }

    rejection_run = accepted ? 0 : rejection_run + 1;
    if (rejection_run >= config.stall_limit) chain.stall_warning = true;

    moments.add(x);
    if (config.adapt && t > config.adapt_start && t % config.adapt_interval == 0) {
      Eigen::MatrixXd candidate = config.adapt_scale() * moments.covariance();
      candidate.diagonal().array() += config.adapt_scale() * config.adapt_jitter;
      Eigen::LLT<Eigen::MatrixXd> next(candidate);
      if (next.info() == Eigen::Success) {
        cov = candidate;
        llt = next;
        chol = llt.matrixL();
        chain.covariance_history.push_back(cov);
      }
    }

    const long index = t - 1;  // state after iteration t
    const long offset = index - config.burn_in;
    if (offset >= 0 && offset % config.stride == 0 && offset / config.stride < retained) {
      chain.samples.row(offset / config.stride) = x.transpose();
      chain.retained_iterations.push_back(index);
    }
  }
  chain.iterations = total;
  chain.failed_evaluations = eval.failures;
  chain.proposal_covariance = cov;
  return chain;
}

Chain dram_sample(const LogTargetFn& log_target, const DramConfig& config) {
  RngDraws draws(config.seed);
  return dram_sample(log_target, config, draws);
}

Chain dram_sample(const TargetLevel& target, const DramConfig& config) {
  if (config.initial_state.size() != target.dim()) throw std::invalid_argument("dram_sample: dimension mismatch");
  return dram_sample([&](const Eigen::VectorXd& x) { return target.log_density(x); }, config);
}

Eigen::VectorXd reference_mean(const Chain& chain) {
  if (chain.samples.rows() < 1) throw std::invalid_argument("reference_mean: empty chain");
  return chain.samples.colwise().mean().transpose();
}

Eigen::MatrixXd sample_covariance(const Chain& chain) {
  if (chain.samples.rows() < 2) throw std::invalid_argument("sample_covariance: need two samples");
  const Eigen::MatrixXd centered = chain.samples.rowwise() - chain.samples.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(chain.samples.rows() - 1);
}

double mean_error_metric(const Eigen::VectorXd& reference, const std::vector<Eigen::VectorXd>& replicate_means,
                         std::size_t expected_count) {
  if (replicate_means.size() != expected_count) {
    throw std::invalid_argument("mean_error_metric: expected " + std::to_string(expected_count) + " replicates, got " +
                                std::to_string(replicate_means.size()));
  }
  double sum = 0;
  for (const auto& m : replicate_means) {
    if (m.size() != reference.size()) throw std::invalid_argument("mean_error_metric: dimension mismatch");
    sum += (reference - m).norm();
  }
  return sum / static_cast<double>(expected_count);
}

nlohmann::json to_json(const DramConfig& config) {
  return {{"initial_state", io::vector_json(config.initial_state)},
          {"initial_proposal_var", config.initial_proposal_var},
          {"burn_in", config.burn_in},
          {"samples", config.samples},
          {"stride", config.stride},
          {"adapt", config.adapt},
          {"adapt_start", config.adapt_start},
          {"adapt_interval", config.adapt_interval},
          {"adapt_scale", config.adapt_scale()},
          {"adapt_jitter", config.adapt_jitter},
          {"delayed_rejection", config.delayed_rejection},
          {"dr_scale", config.dr_scale},
          {"dr_stages", config.delayed_rejection ? 1 : 0},
          {"stall_limit", config.stall_limit},
          {"seed", config.seed},
          {"rng", kRngName}};
}

nlohmann::json chain_summary_json(const Chain& chain, const DramConfig& config) {
  nlohmann::json j = {{"config", to_json(config)},
                      {"retained", chain.samples.rows()},
                      {"iterations", chain.iterations},
                      {"acceptance_stage1", chain.acceptance_stage1()},
                      {"acceptance_stage2", chain.acceptance_stage2()},
                      {"acceptance_total", chain.acceptance_total()},
                      {"failed_evaluations", chain.failed_evaluations},
                      {"stall_warning", chain.stall_warning},
                      {"proposal_covariance", io::matrix_json(chain.proposal_covariance)},
                      {"adaptations", chain.covariance_history.size() - 1}};
  if (chain.samples.rows() > 0) j["mean"] = io::vector_json(reference_mean(chain));
  if (chain.samples.rows() > 1) j["covariance"] = io::matrix_json(sample_covariance(chain));
  return j;
}

std::string chain_samples_csv(const Chain& chain) {
  std::vector<std::string> header;
  for (Eigen::Index k = 0; k < chain.samples.cols(); ++k) header.push_back("theta_" + std::to_string(k + 1));
  return io::matrix_to_csv(chain.samples, header);
}

}  // namespace mlsvgd
