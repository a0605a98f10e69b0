#include "mlsvgd/svgd.hpp"

#include <exception>
#include <sstream>
#include <vector>

#include "mlsvgd/io.hpp"

namespace mlsvgd {

void SvgdConfig::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("SvgdConfig: step size must be positive");
  if (!(tolerance > 0.0)) throw std::invalid_argument("SvgdConfig: tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("SvgdConfig: max_iterations must be at least 1");
}

Eigen::MatrixXd evaluate_scores(const TargetLevel& target, const Eigen::MatrixXd& particles) {
  const Eigen::Index n = particles.rows();
  Eigen::MatrixXd scores(n, particles.cols());
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      const Eigen::VectorXd theta = particles.row(i).transpose();
      scores.row(i) = target.score(theta).transpose();
    } catch (...) {
      failures[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    if (const auto& failure = failures[static_cast<std::size_t>(i)]) {
      try {
        std::rethrow_exception(failure);
      } catch (const RunError& e) {
        throw RunError(std::string(e.what()) + " (particle " + std::to_string(i) + ")", static_cast<long>(i));
      } catch (const std::exception& e) {
        throw RunError(std::string("score evaluation failed for particle ") + std::to_string(i) + ": " + e.what(),
                       static_cast<long>(i));
      }
    }
    if (!scores.row(i).allFinite()) {
      throw RunError("non-finite score for particle " + std::to_string(i) + " at theta = " +
                         describe_vector(particles.row(i).transpose()),
                     static_cast<long>(i));
    }
  }
  return scores;
}

SingleLevelResult run_single_level(ParticleEnsemble<double> ensemble, const TargetLevel& target,
                                   const RbfKernel<double>& kernel, const SvgdConfig& config,
                                   const SegmentContext& context) {
  config.validate();
  validate(ensemble);
  if (ensemble.dim() != target.dim()) {
    throw std::invalid_argument("run_single_level: ensemble and target dimensions differ");
  }

  SingleLevelResult result;
  ensemble.level_index = target.level();
  const double cost_per_step = target.cost_weight() * static_cast<double>(ensemble.count());

  for (long k = 1; k <= config.max_iterations; ++k) {
    const Eigen::MatrixXd scores = evaluate_scores(target, ensemble.particles);
    auto step = svgd_step_with_norm(ensemble, kernel, scores, config.step_size);
    ensemble = std::move(step.ensemble);

    IterationRecord record;
    record.iteration = ensemble.iteration;
    record.level = target.level();
    record.grad_norm = step.grad_norm;
    // Product rather than running sum so segment costs add up exactly.
    record.cum_cost = context.base_cost + cost_per_step * static_cast<double>(k);
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - context.clock_start).count();
    result.trace.push_back(record);
    result.iterations = k;
    if (context.observer) context.observer(record, ensemble);

    if (step.grad_norm <= config.tolerance) {
      result.tolerance_reached = true;
      break;
    }
  }
  result.ensemble = std::move(ensemble);
  return result;
}

std::string trace_to_csv(const IterationTrace& trace) {
  std::string out = "iteration,level,grad_norm,cum_cost,wall_seconds\n";
  for (const auto& r : trace) {
    out += std::to_string(r.iteration) + ',' + std::to_string(r.level) + ',' + io::format_double(r.grad_norm) + ',' +
           io::format_double(r.cum_cost) + ',' + io::format_double(r.wall_seconds) + '\n';
  }
  return out;
}

IterationTrace trace_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  io::next_data_line(in, line);
  if (line.rfind("iteration,level,grad_norm,cum_cost,wall_seconds", 0) != 0) {
    throw std::runtime_error("trace_from_csv: unexpected header");
  }
  IterationTrace trace;
  while (io::next_data_line(in, line)) {
    const auto f = io::split_csv_line(line);
    if (f.size() != 5) throw std::runtime_error("trace_from_csv: malformed row");
    trace.push_back({std::stol(f[0]), std::stoi(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
  }
  return trace;
}

}  // namespace mlsvgd
