#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "sphereot/regularity.hpp"

namespace sphereot::fixtures {

// Points t_k on [0, 1] with images f(t_k) such that |f(a) - f(b)| = |a - b|^alpha
// exactly. The snowflake distance is of negative type for alpha <= 1, so the
// Gram matrix relative to t_0 is positive semidefinite and factors exactly.
inline std::vector<HolderSample> snowflake(double alpha, int count) {
  std::vector<double> t(count);
  for (int k = 0; k < count; ++k) t[k] = static_cast<double>(k) / (count - 1);
  Matrix g(count, count);
  for (int a = 0; a < count; ++a)
    for (int b = 0; b < count; ++b)
      g(a, b) = 0.5 * (std::pow(t[a], 2 * alpha) + std::pow(t[b], 2 * alpha) - std::pow(std::abs(t[a] - t[b]), 2 * alpha));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  const Matrix f = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  std::vector<HolderSample> out;
  for (int k = 0; k < count; ++k) {
    Vector x(1);
    x(0) = t[k];
    out.push_back({x, f.row(k).transpose()});
  }
  return out;
}

}  // namespace sphereot::fixtures
