#include "cde/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "cde/csv.hpp"
#include "cde/rng.hpp"

namespace cde {

Dataset load_table(const std::string& path, const std::string& response_column,
                   const std::string& group_column, char delim,
                   int* rows_dropped) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty file: " + path);
  }
  const auto header = csv::split(line, delim);

  int response_idx = -1;
  int group_idx = -1;
  std::vector<int> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == response_column) {
      response_idx = static_cast<int>(j);
    } else if (!group_column.empty() && header[j] == group_column) {
      group_idx = static_cast<int>(j);
    } else {
      feature_cols.push_back(static_cast<int>(j));
      feature_names.push_back(header[j]);
    }
  }
  if (response_idx < 0) {
    throw std::runtime_error("response column '" + response_column +
                             "' not found in " + path);
  }
  if (!group_column.empty() && group_idx < 0) {
    throw std::runtime_error("group column '" + group_column +
                             "' not found in " + path);
  }
  if (feature_cols.empty()) {
    throw std::runtime_error("no feature columns in " + path);
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> responses;
  std::vector<std::string> groups;
  int dropped = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto cells = csv::split(line, delim);
    if (cells.size() != header.size()) {
      throw std::runtime_error("row " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " cells, header has " +
                               std::to_string(header.size()));
    }
    if (csv::is_missing(cells[response_idx])) {
      ++dropped;
      continue;
    }
    std::vector<double> feat(feature_cols.size());
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      const auto& cell = cells[feature_cols[j]];
      if (csv::is_missing(cell)) {
        throw std::runtime_error("missing value in feature column '" +
                                 feature_names[j] + "', row " +
                                 std::to_string(line_no));
      }
      feat[j] = csv::parse_double(cell, "column '" + feature_names[j] +
                                            "', row " + std::to_string(line_no));
    }
    responses.push_back(csv::parse_double(
        cells[response_idx], "response column, row " + std::to_string(line_no)));
    rows.push_back(std::move(feat));
    if (group_idx >= 0) groups.push_back(cells[group_idx]);
  }
  if (rows_dropped) *rows_dropped = dropped;
  if (rows.empty()) {
    throw std::runtime_error("no usable rows in " + path +
                             " (all responses missing or file empty)");
  }

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(feature_cols.size()));
  data.response.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      data.features(static_cast<Eigen::Index>(i),
                    static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    data.response(static_cast<Eigen::Index>(i)) = responses[i];
  }
  data.groups = std::move(groups);
  data.column_names = std::move(feature_names);
  data.response_name = response_column;
  return data;
}

void save_table(const Dataset& data, const std::string& path, char delim) {
  std::vector<std::string> header = data.column_names;
  header.push_back(data.response_name);
  if (data.has_groups()) header.push_back("group");

  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(data.n_rows()));
  for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
    std::vector<std::string> row;
    row.reserve(header.size());
    for (Eigen::Index j = 0; j < data.n_features(); ++j) {
      row.push_back(csv::format_double(data.features(i, j)));
    }
    row.push_back(csv::format_double(data.response(i)));
    if (data.has_groups()) row.push_back(data.groups[static_cast<std::size_t>(i)]);
    rows.push_back(std::move(row));
  }
  csv::write_table(path, delim, header, rows);
}

NormalizationParams fit_normalization(const Dataset& data) {
  const Eigen::Index n = data.n_rows();
  const Eigen::Index p = data.n_features();
  if (n < 2) throw std::invalid_argument("fit_normalization: need >= 2 rows");
  NormalizationParams params;
  params.mean = data.features.colwise().mean();
  params.stddev.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var =
        (data.features.col(j).array() - params.mean(j)).square().sum() /
        static_cast<double>(n - 1);
    if (var <= 0.0) {
      const std::string name = j < static_cast<Eigen::Index>(
                                       data.column_names.size())
                                   ? data.column_names[static_cast<std::size_t>(j)]
                                   : "column " + std::to_string(j);
      throw std::invalid_argument("fit_normalization: zero variance in '" +
                                  name + "'");
    }
    params.stddev(j) = std::sqrt(var);
  }
  return params;
}

Dataset apply_normalization(const Dataset& data,
                            const NormalizationParams& params) {
  if (params.mean.size() != data.n_features() ||
      params.stddev.size() != data.n_features()) {
    throw std::invalid_argument(
        "apply_normalization: params length does not match feature count");
  }
  Dataset out = data;
  out.features = (data.features.rowwise() - params.mean.transpose()).array()
                     .rowwise() /
                 params.stddev.transpose().array();
  return out;
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_by_group(
    const Dataset& data, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_by_group: k must be >= 2");
  const int n = static_cast<int>(data.n_rows());

  // unit = group of rows partitioned together; singleton rows when no groups
  std::vector<std::vector<int>> units;
  if (data.has_groups()) {
    std::unordered_map<std::string, int> index;
    for (int i = 0; i < n; ++i) {
      auto [it, inserted] = index.try_emplace(
          data.groups[static_cast<std::size_t>(i)], static_cast<int>(units.size()));
      if (inserted) units.emplace_back();
      units[static_cast<std::size_t>(it->second)].push_back(i);
    }
    if (static_cast<int>(units.size()) < k) {
      throw std::invalid_argument("kfold_by_group: fewer groups (" +
                                  std::to_string(units.size()) +
                                  ") than folds (" + std::to_string(k) + ")");
    }
  } else {
    if (n < k) throw std::invalid_argument("kfold_by_group: fewer rows than folds");
    units.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) units[static_cast<std::size_t>(i)] = {i};
  }

  std::vector<int> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<int>> fold_rows(static_cast<std::size_t>(k));
  for (std::size_t u = 0; u < order.size(); ++u) {
    auto& rows = fold_rows[u % static_cast<std::size_t>(k)];
    const auto& unit = units[static_cast<std::size_t>(order[u])];
    rows.insert(rows.end(), unit.begin(), unit.end());
  }

  std::vector<std::pair<std::vector<int>, std::vector<int>>> folds;
  folds.reserve(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    std::vector<int> test = fold_rows[static_cast<std::size_t>(f)];
    std::sort(test.begin(), test.end());
    std::vector<int> train;
    train.reserve(static_cast<std::size_t>(n) - test.size());
    for (int g = 0; g < k; ++g) {
      if (g == f) continue;
      const auto& rows = fold_rows[static_cast<std::size_t>(g)];
      train.insert(train.end(), rows.begin(), rows.end());
    }
    std::sort(train.begin(), train.end());
    folds.emplace_back(std::move(train), std::move(test));
  }
  return folds;
}

Dataset subset_rows(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.n_features());
  out.response.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(rows[i]);
    out.response(static_cast<Eigen::Index>(i)) = data.response(rows[i]);
  }
  if (data.has_groups()) {
    out.groups.reserve(rows.size());
    for (int r : rows) out.groups.push_back(data.groups[static_cast<std::size_t>(r)]);
  }
  out.column_names = data.column_names;
  out.response_name = data.response_name;
  return out;
}

}  // namespace cde
