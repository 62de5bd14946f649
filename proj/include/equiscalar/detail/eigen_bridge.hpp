#pragma once

#include <Eigen/Dense>

#include "equiscalar/core_types.hpp"

namespace equiscalar::detail {

inline Eigen::MatrixXd to_eigen(const Mat& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  return out;
}

inline Mat from_eigen(const Eigen::MatrixXd& m) {
  std::vector<double> e(static_cast<std::size_t>(m.rows() * m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) e[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  return Mat(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), std::move(e));
}

inline Eigen::VectorXd to_eigen(const Vec& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data().data(), static_cast<Eigen::Index>(v.dim()));
}

inline Vec from_eigen_vec(const Eigen::VectorXd& v) {
  return Vec(std::vector<double>(v.data(), v.data() + v.size()));
}

/// Columns of the tuple as a d x n Eigen matrix.
inline Eigen::MatrixXd columns_to_eigen(const VectorTuple& x) {
  Eigen::MatrixXd out(x.dim(), x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    for (std::size_t i = 0; i < x.dim(); ++i) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[j][i];
  return out;
}

}  // namespace equiscalar::detail
