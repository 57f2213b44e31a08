#pragma once

#include "bcidal/dal.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace testutil {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n) {
  const Eigen::MatrixXd a = random_matrix(rng, n, 2 * n);
  Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(2 * n);
  s.diagonal().array() += 0.05;
  return s;
}

/// n trials of one rows×cols block, balanced labels, a weak planted signal.
inline bcidal::dal::DalProblem random_problem(std::mt19937_64& rng, int n, Eigen::Index rows, Eigen::Index cols,
                                              bool symmetric) {
  bcidal::dal::DalProblem p;
  p.layout = bcidal::dal::BlockLayout({{rows, cols}});
  p.design.resize(n, rows * cols);
  p.labels.resize(n);
  const Eigen::MatrixXd signal = random_matrix(rng, rows, cols, 0.5);
  for (int i = 0; i < n; ++i) {
    const double y = (i % 2 == 0) ? 1.0 : -1.0;
    Eigen::MatrixXd x = random_matrix(rng, rows, cols);
    if (symmetric) x = 0.5 * (x + x.transpose()).eval();
    x += y * signal;
    p.design.row(i) = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size()).transpose();
    p.labels(i) = y;
  }
  return p;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bcidal_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
