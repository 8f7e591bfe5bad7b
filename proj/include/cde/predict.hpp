#pragma once

#include <Eigen/Dense>

#include "cde/qmodel.hpp"
#include "cde/transform.hpp"

namespace cde {

enum class GridMode { quantile, cutpoint };

// Training response range plus the 10% evaluation extension (5% per side).
struct ResponseRange {
  double lo = 0.0;
  double hi = 1.0;

  double extended_lo() const { return lo - 0.05 * (hi - lo); }
  double extended_hi() const { return hi + 0.05 * (hi - lo); }
};

ResponseRange response_range(const Eigen::Ref<const Eigen::VectorXd>& y);

// Discrete conditional density on a response grid. probabilities sum to 1,
// cdf is their running sum, y_grid is strictly increasing.
struct DensityEstimate {
  Eigen::VectorXd z_grid;
  Eigen::VectorXd y_grid;
  Eigen::VectorXd probabilities;
  Eigen::VectorXd cdf;
};

// Max-shifted softmax over grid q values.
Eigen::VectorXd softmax_probabilities(
    const Eigen::Ref<const Eigen::VectorXd>& q);

// quantile mode: L equally spaced levels from 0.005 to 0.995 mapped back to
// the response scale through the transform. cutpoint mode: L evenly spaced
// response values across the extended training range, mapped to (0,1).
// probabilities = softmax of the model's q over the grid.
DensityEstimate predict_grid(const QModel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& x, int L,
                             GridMode mode, const GaussianTransform& t,
                             const ResponseRange& range);

// Continuous density values at y_grid: probability mass over the z cell
// width times |dG/dy|.
Eigen::VectorXd density_on_y(const DensityEstimate& de,
                             const GaussianTransform& t,
                             const Eigen::Ref<const Eigen::VectorXd>& x);

// 0 below the grid, 1 above, linear interpolation of the cdf in between.
double cdf_at(const DensityEstimate& de, double y);

}  // namespace cde
