#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace npp {

// Row-major so each observation is contiguous in memory.
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Immutable sample container: n observations in R^dim, one per row.
/// n = 0 is allowed; operations state their own minimum size.
class Dataset {
 public:
  Dataset() : points_(0, 1) {}

  explicit Dataset(RowMatrixXd points) : points_(std::move(points)) {
    if (points_.cols() < 1) throw std::invalid_argument("Dataset: dimension must be >= 1");
  }

  explicit Dataset(const Eigen::MatrixXd& points) : points_(points) {
    if (points_.cols() < 1) throw std::invalid_argument("Dataset: dimension must be >= 1");
  }

  static Dataset scalars(const std::vector<double>& xs) {
    RowMatrixXd m(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
    return Dataset(std::move(m));
  }

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }
  bool empty() const { return points_.rows() == 0; }

  const RowMatrixXd& points() const { return points_; }

  double scalar(std::size_t i) const {
    if (dim() != 1) throw std::invalid_argument("Dataset::scalar: requires 1-dimensional data");
    return points_(static_cast<Eigen::Index>(i), 0);
  }

  std::vector<double> to_scalars() const {
    if (dim() != 1) throw std::invalid_argument("Dataset::to_scalars: requires 1-dimensional data");
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = points_(static_cast<Eigen::Index>(i), 0);
    return out;
  }

  /// Pointer to the i-th observation (dim contiguous doubles).
  const double* row(std::size_t i) const {
    return points_.data() + static_cast<std::size_t>(points_.cols()) * i;
  }

 private:
  RowMatrixXd points_;
};

}  // namespace npp
