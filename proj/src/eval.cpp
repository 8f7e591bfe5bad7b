#include "cde/eval.hpp"

#include <cmath>
#include <stdexcept>

#include "cde/numeric.hpp"

namespace cde {

namespace {
void check_bounds(double l, double u, int grid_points) {
  if (!(l < u)) throw std::invalid_argument("crps: need l < u");
  if (grid_points < 1) throw std::invalid_argument("crps: need grid points");
}
}  // namespace

double crps(const CdfFunction& cdf, double y_obs, double l, double u,
            int grid_points) {
  check_bounds(l, u, grid_points);
  const double step = (u - l) / grid_points;
  double acc = 0.0;
  for (int g = 0; g < grid_points; ++g) {
    const double y = l + g * step;
    const double gap = cdf(y) - (y >= y_obs ? 1.0 : 0.0);
    acc += gap * gap;
  }
  return acc / grid_points;
}

double crps_divergence(const CdfFunction& estimate, const CdfFunction& truth,
                       double l, double u, int grid_points) {
  check_bounds(l, u, grid_points);
  const double step = (u - l) / grid_points;
  double acc = 0.0;
  for (int g = 0; g < grid_points; ++g) {
    const double y = l + g * step;
    const double gap = estimate(y) - truth(y);
    acc += gap * gap;
  }
  return acc / grid_points;
}

double skewnormal_cdf(double y, double location, double scale, double alpha) {
  if (!(scale > 0.0)) throw std::invalid_argument("skewnormal_cdf: scale <= 0");
  const double t = (y - location) / scale;
  const double cutoff = 12.0;
  if (t <= -cutoff) return 0.0;
  if (t >= cutoff) return 1.0;
  auto integrand = [alpha](double s) {
    return 2.0 * normal_pdf(s) * normal_cdf(alpha * s);
  };
  return adaptive_simpson(integrand, -cutoff, t, 1e-9);
}

double true_cdf(const TrueConditional& tc, Eigen::Index row, double y) {
  if (row < 0 || row >= tc.params.rows()) {
    throw std::out_of_range("true_cdf: row out of range");
  }
  switch (tc.model_id) {
    case 1: {
      const double mean = tc.params(row, 0);
      const double sd = tc.params(row, 1);
      return normal_cdf((y - mean) / sd);
    }
    case 2:
    case 3: {
      const double m1 = tc.params(row, 0), s1 = tc.params(row, 1);
      const double m2 = tc.params(row, 2), s2 = tc.params(row, 3);
      return 0.5 * normal_cdf((y - m1) / s1) + 0.5 * normal_cdf((y - m2) / s2);
    }
    case 4: {
      const double loc = tc.params(row, 0);
      const double scale = tc.params(row, 1);
      const double alpha = tc.params(row, 2);
      return skewnormal_cdf(y, loc, scale, alpha);
    }
    default:
      throw std::invalid_argument("true_cdf: unknown model id " +
                                  std::to_string(tc.model_id));
  }
}

void to_json(nlohmann::json& j, const ScoreReport& r) {
  j = nlohmann::json{
      {"label", r.label},
      {"per_observation",
       std::vector<double>(r.per_observation.data(),
                           r.per_observation.data() + r.per_observation.size())},
      {"mean", r.mean},
      {"se", r.se},
      {"grid_points", r.grid_points},
      {"lower", r.lower},
      {"upper", r.upper}};
}

void to_json(nlohmann::json& j, const TrueConditional& tc) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(tc.params.rows()));
  for (Eigen::Index i = 0; i < tc.params.rows(); ++i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    row.resize(static_cast<std::size_t>(tc.params.cols()));
    for (Eigen::Index c = 0; c < tc.params.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = tc.params(i, c);
    }
  }
  j = nlohmann::json{{"model_id", tc.model_id}, {"params", rows}};
}

void from_json(const nlohmann::json& j, TrueConditional& tc) {
  tc.model_id = j.at("model_id").get<int>();
  const auto rows = j.at("params").get<std::vector<std::vector<double>>>();
  if (rows.empty()) {
    tc.params.resize(0, 0);
    return;
  }
  tc.params.resize(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      tc.params(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          rows[i][c];
    }
  }
}

}  // namespace cde
