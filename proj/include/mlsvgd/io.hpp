#pragma once

#include <istream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace mlsvgd::io {

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// Writes to `<path>.tmp` and renames over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

/// Splits a CSV line on commas (no quoting support; the library never emits quotes).
std::vector<std::string> split_csv_line(const std::string& line);

/// Next line that is neither blank nor a '#' comment; false at end of input.
bool next_data_line(std::istream& in, std::string& line);

/// Dense matrix as CSV with the given header row.
std::string matrix_to_csv(const Eigen::MatrixXd& values, const std::vector<std::string>& header);

nlohmann::json vector_json(const Eigen::VectorXd& v);
/// Row-major nested arrays.
nlohmann::json matrix_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace mlsvgd::io
