#include "mlsvgd/ensemble.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mlsvgd/io.hpp"

namespace mlsvgd {
namespace io {

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) {
    throw std::runtime_error("format_double: conversion failed");
  }
  return std::string(buffer, end);
}

nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("matrix_from_json: expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::VectorXd row = vector_from_json(j[static_cast<std::size_t>(i)]);
    if (row.size() != cols) throw std::invalid_argument("matrix_from_json: ragged rows");
    m.row(i) = row.transpose();
  }
  return m;
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    return true;
  }
  return false;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::filesystem::create_directories(target.parent_path());
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open " + tmp + " for writing");
    }
    out << contents;
    if (!out) {
      throw std::runtime_error("write failed for " + tmp);
    }
  }
  std::filesystem::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(field);
  }
  return fields;
}

std::string matrix_to_csv(const Eigen::MatrixXd& values, const std::vector<std::string>& header) {
  std::string out;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k) out += ',';
    out += header[k];
  }
  out += '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      if (k) out += ',';
      out += format_double(values(i, k));
    }
    out += '\n';
  }
  return out;
}

}  // namespace io

void write_ensemble_csv(const std::string& path, const ParticleEnsemble<double>& ensemble) {
  std::vector<std::string> header;
  for (Eigen::Index k = 0; k < ensemble.dim(); ++k) {
    header.push_back("theta_" + std::to_string(k + 1));
  }
  io::write_file_atomic(path, io::matrix_to_csv(ensemble.particles, header));
}

ParticleEnsemble<double> read_ensemble_csv(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!io::next_data_line(in, line)) {
    throw std::runtime_error(path + ": empty ensemble file");
  }
  const auto header = io::split_csv_line(line);
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] != "theta_" + std::to_string(k + 1)) {
      throw std::runtime_error(path + ": unexpected header field '" + header[k] + "'");
    }
  }
  const auto dim = static_cast<Eigen::Index>(header.size());
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (io::next_data_line(in, line)) {
    const auto fields = io::split_csv_line(line);
    if (static_cast<Eigen::Index>(fields.size()) != dim) {
      throw std::runtime_error(path + ": row " + std::to_string(rows + 1) + " has wrong width");
    }
    for (const auto& f : fields) values.push_back(std::stod(f));
    ++rows;
  }
  ParticleEnsemble<double> ensemble;
  ensemble.particles = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, dim);
  validate(ensemble);
  return ensemble;
}

void write_ensemble_metadata(const std::string& path, const ParticleEnsemble<double>& ensemble,
                             std::uint64_t seed) {
  nlohmann::json meta = {{"count", ensemble.count()},
                         {"dim", ensemble.dim()},
                         {"level_index", ensemble.level_index},
                         {"iteration", ensemble.iteration},
                         {"seed", seed}};
  io::write_file_atomic(path, meta.dump(2) + "\n");
}

EnsembleMetadata read_ensemble_metadata(const std::string& path) {
  const auto meta = nlohmann::json::parse(io::read_file(path));
  EnsembleMetadata out;
  out.count = meta.at("count").get<Eigen::Index>();
  out.dim = meta.at("dim").get<Eigen::Index>();
  out.level_index = meta.at("level_index").get<int>();
  out.iteration = meta.at("iteration").get<long>();
  out.seed = meta.at("seed").get<std::uint64_t>();
  return out;
}

ParticleEnsemble<double> load_ensemble(const std::string& csv_path, const std::string& meta_path) {
  auto ensemble = read_ensemble_csv(csv_path);
  const auto meta = read_ensemble_metadata(meta_path);
  if (meta.count != ensemble.count() || meta.dim != ensemble.dim()) {
    throw std::runtime_error("load_ensemble: sidecar shape does not match " + csv_path);
  }
  ensemble.level_index = meta.level_index;
  ensemble.iteration = meta.iteration;
  return ensemble;
}

}  // namespace mlsvgd
