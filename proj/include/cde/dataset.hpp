#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cde {

// Tabular data: an n x p feature matrix, a response vector and optional
// group labels (e.g. storm identifiers). Groups are empty when absent.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd response;
  std::vector<std::string> groups;
  std::vector<std::string> column_names;
  std::string response_name = "y";

  Eigen::Index n_rows() const { return features.rows(); }
  Eigen::Index n_features() const { return features.cols(); }
  bool has_groups() const { return !groups.empty(); }
};

struct NormalizationParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

// Reads a delimited text file with a header row. Rows with a missing
// response are dropped; a missing feature cell is an error. Every
// non-response, non-group column becomes a feature.
Dataset load_table(const std::string& path, const std::string& response_column,
                   const std::string& group_column = "", char delim = ',',
                   int* rows_dropped = nullptr);

// Writes a dataset in the same format load_table reads, with exact
// round-tripping of double values.
void save_table(const Dataset& data, const std::string& path,
                char delim = ',');

// Column means and sample standard deviations (divisor n-1). A constant
// column is an error.
NormalizationParams fit_normalization(const Dataset& data);

// (x - mean) / sd per feature column; response and groups untouched.
Dataset apply_normalization(const Dataset& data,
                            const NormalizationParams& params);

// group-aware k-fold partition; rows are partitioned directly when no
// groups are present. Deterministic given seed.
std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_by_group(
    const Dataset& data, int k, std::uint64_t seed);

// Row subset helper used by the fold/split machinery.
Dataset subset_rows(const Dataset& data, const std::vector<int>& rows);

}  // namespace cde
