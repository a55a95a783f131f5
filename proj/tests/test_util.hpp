#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <string>

namespace testutil {

inline const nlohmann::json& golden() {
  static const nlohmann::json g = [] {
    std::ifstream in(PGNN_GOLDEN);
    return nlohmann::json::parse(in);
  }();
  return g;
}

inline std::string case_path(const std::string& name) {
  return std::string(PGNN_SOURCE_DIR) + "/data/" + name + ".case";
}

// Same closed form as the oracle script: a * sin(b + 0.7 i + 1.3 j).
inline Eigen::MatrixXd fill(Eigen::Index rows, Eigen::Index cols, double a, double b) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = a * std::sin(b + 0.7 * static_cast<double>(i) + 1.3 * static_cast<double>(j));
    }
  }
  return m;
}

inline Eigen::MatrixXd matrix(const nlohmann::json& j) {
  if (!j.front().is_array()) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.front().size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    for (std::size_t k = 0; k < j[i].size(); ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
  }
  return m;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testutil
