#pragma once

#include <Eigen/Dense>
#include <functional>

namespace cde {

// Standard normal density, CDF and quantile. The quantile is a rational
// approximation refined by one Halley step, accurate to near machine
// precision on (0,1).
double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

// log(sum_i exp(v_i)) with max shift.
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

inline double elu(double u, double alpha) {
  return u > 0.0 ? u : alpha * std::expm1(u);
}

inline double elu_grad(double u, double alpha) {
  return u > 0.0 ? 1.0 : alpha * std::exp(u);
}

// Composite trapezoid rule on [a,b] with the given number of points.
double trapezoid(const std::function<double(double)>& f, double a, double b,
                 int points);

// Recursive adaptive Simpson quadrature.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol);

}  // namespace cde
