#pragma once

#include <functional>

#include "clrep/common/matrix.hpp"
#include "clrep/common/rng.hpp"

namespace clrep::testutil {

inline MatD random_matrix(RngStream& rng, Eigen::Index rows, Eigen::Index cols) {
  MatD m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

inline MatD random_unit_rows(RngStream& rng, Eigen::Index rows, Eigen::Index cols) {
  MatD m = random_matrix(rng, rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) m.row(i) /= m.row(i).norm();
  return m;
}

inline MatD random_orthogonal(RngStream& rng, Eigen::Index n) {
  const MatD g = random_matrix(rng, n, n);
  Eigen::HouseholderQR<MatD> qr(g);
  MatD q = qr.householderQ();
  // fix signs so Q is a deterministic function of g
  const MatD r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  return q;
}

// Central-difference check of an analytic gradient. f must be a pure function
// of the matrix entries.
inline double max_grad_error(const std::function<double(const MatD&)>& f, const MatD& x,
                             const MatD& analytic, double eps = 1e-5) {
  double worst = 0.0;
  MatD probe = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      probe(i, j) = x(i, j) + eps;
      const double up = f(probe);
      probe(i, j) = x(i, j) - eps;
      const double down = f(probe);
      probe(i, j) = x(i, j);
      const double fd = (up - down) / (2.0 * eps);
      const double err = std::abs(fd - analytic(i, j)) / std::max({1.0, std::abs(fd), std::abs(analytic(i, j))});
      worst = std::max(worst, err);
    }
  return worst;
}

}  // namespace clrep::testutil
