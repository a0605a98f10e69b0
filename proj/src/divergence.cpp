#include "mlsvgd/divergence.hpp"

#include <exception>
#include <sstream>

#include "mlsvgd/io.hpp"

namespace mlsvgd {

namespace {

Rng chunk_rng(std::uint64_t seed, long chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(static_cast<std::uint64_t>(chunk) >> 32)};
  return Rng(seq);
}

McEstimate from_moments(double sum, double sum_sq, long n) {
  McEstimate out;
  out.samples = n;
  out.estimate = sum / static_cast<double>(n);
  if (n > 1) {
    const double var = std::max(0.0, (sum_sq - sum * out.estimate) / static_cast<double>(n - 1));
    out.std_error = std::sqrt(var / static_cast<double>(n));
  }
  return out;
}

}  // namespace

McEstimate mc_expectation(const std::function<double(const Eigen::VectorXd&)>& f, const SamplerFn& sampler,
                          long n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw std::invalid_argument("mc_expectation: need at least two samples");
  const long chunks = (n_samples + kMcChunk - 1) / kMcChunk;
  std::vector<double> sums(static_cast<std::size_t>(chunks), 0.0);
  std::vector<double> sums_sq(static_cast<std::size_t>(chunks), 0.0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chunks));

#pragma omp parallel for schedule(dynamic)
  for (long c = 0; c < chunks; ++c) {
    try {
      Rng rng = chunk_rng(seed, c);
      const long end = std::min(n_samples, (c + 1) * kMcChunk);
      for (long i = c * kMcChunk; i < end; ++i) {
        const double v = f(sampler(rng));
        sums[static_cast<std::size_t>(c)] += v;
        sums_sq[static_cast<std::size_t>(c)] += v * v;
      }
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  double sum = 0, sum_sq = 0;
  for (long c = 0; c < chunks; ++c) {
    sum += sums[static_cast<std::size_t>(c)];
    sum_sq += sums_sq[static_cast<std::size_t>(c)];
  }
  return from_moments(sum, sum_sq, n_samples);
}

McEstimate kl_mc_estimate(const LogDensityFn& log_p, const LogDensityFn& log_q, const SamplerFn& sample_p,
                          long n_samples, std::uint64_t seed) {
  return mc_expectation([&](const Eigen::VectorXd& x) { return log_p(x) - log_q(x); }, sample_p, n_samples, seed);
}

McEstimate kl_unnormalized_estimate(const Eigen::VectorXd& log_p_at_samples, const Eigen::VectorXd& log_q_at_samples) {
  const Eigen::Index n = log_p_at_samples.size();
  if (n < 2 || log_q_at_samples.size() != n) {
    throw std::invalid_argument("kl_unnormalized_estimate: need matching sample vectors of length >= 2");
  }
  const Eigen::ArrayXd d = (log_p_at_samples - log_q_at_samples).array();
  if (!d.allFinite()) throw std::invalid_argument("kl_unnormalized_estimate: non-finite log-density values");

  const double shift = (-d).maxCoeff();
  const Eigen::ArrayXd w = (-d - shift).exp();
  const double mean_d = d.mean();
  const double mean_w = w.mean();

  McEstimate out;
  out.samples = n;
  out.estimate = mean_d + shift + std::log(mean_w);
  // Delta method on (mean D, mean W) with gradient (1, 1 / mean W).
  const Eigen::ArrayXd influence = (d - mean_d) + (w - mean_w) / mean_w;
  out.std_error = std::sqrt(influence.square().sum() / static_cast<double>(n - 1) / static_cast<double>(n));
  return out;
}

namespace {

/// E_rho[log N(x; m, S)] for x ~ rho Gaussian.
double expected_log_pdf(const GaussianDist<double>& rho, const GaussianDist<double>& target) {
  const Eigen::MatrixXd a = target.llt().matrixL().solve(rho.llt().matrixL().toDenseMatrix());
  const Eigen::VectorXd z = target.llt().matrixL().solve(rho.mean() - target.mean());
  return -0.5 * (static_cast<double>(rho.dim()) * std::log(2.0 * std::numbers::pi) + target.log_det() +
                 a.squaredNorm() + z.squaredNorm());
}

}  // namespace

double triangle_remainder_closed_form(const GaussianDist<double>& r0, const GaussianDist<double>& r1,
                                      const GaussianDist<double>& r2) {
  detail::require_same_dim(r0, r1);
  detail::require_same_dim(r0, r2);
  return (expected_log_pdf(r0, r1) - expected_log_pdf(r0, r2)) - (expected_log_pdf(r1, r1) - expected_log_pdf(r1, r2));
}

TriangleRemainder kl_triangle_remainder(const GaussianDist<double>& r0, const GaussianDist<double>& r1,
                                        const GaussianDist<double>& r2, long n_samples, std::uint64_t seed) {
  detail::require_same_dim(r0, r1);
  detail::require_same_dim(r0, r2);
  TriangleRemainder out;
  out.lhs_minus_rhs = kl_gaussian(r0, r2) - kl_gaussian(r0, r1) - kl_gaussian(r1, r2);

  const auto log_ratio = [&](const Eigen::VectorXd& x) { return r1.log_pdf(x) - r2.log_pdf(x); };
  const McEstimate under0 = mc_expectation(log_ratio, [&](Rng& rng) { return r0.sample(rng); }, n_samples, seed);
  const McEstimate under1 =
      mc_expectation(log_ratio, [&](Rng& rng) { return r1.sample(rng); }, n_samples, seed ^ 0x9e3779b97f4a7c15ULL);
  out.remainder_estimate = under0.estimate - under1.estimate;
  out.std_error = std::hypot(under0.std_error, under1.std_error);
  return out;
}

GaussianDist<double> moment_match(const Eigen::MatrixXd& particles, double jitter) {
  const Eigen::Index n = particles.rows();
  if (n < 2) throw std::invalid_argument("moment_match: need at least two particles");
  const Eigen::VectorXd mean = particles.colwise().mean().transpose();
  const Eigen::MatrixXd centered = particles.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += jitter;
  return GaussianDist<double>(mean, cov);
}

std::string divergence_table_csv(const std::vector<DivergenceRow>& rows) {
  std::ostringstream out;
  out << "label,kl,hellinger\n";
  for (const auto& r : rows) {
    out << r.label << ',' << io::format_double(r.kl) << ',' << io::format_double(r.hellinger) << '\n';
  }
  return out.str();
}

}  // namespace mlsvgd
