#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace pgnn {

/// Shortest decimal text that parses back to the same double.
std::string format_exact(double v);
/// Fixed 9-significant-digit text.
std::string format_sig9(double v);
double parse_double(const std::string& text);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Splits on a single-character delimiter, keeping empty fields.
std::vector<std::string> split(const std::string& s, char delim);

/// Matrix as CSV with an optional header row; values use format_sig9.
std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header = {});

}  // namespace pgnn
