#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cvqkd/channel.hpp"

namespace cvqkd {

struct DatasetRow {
  std::array<double, FeatureVector::kSize> features{};
  double key_rate = 0;
  double distance_km = 0;
  double amplitude = 0;
  double excess_noise = 0;
  std::string protocol;
  std::string digest;
};

/// Delimited-text dataset: a '#'-prefixed metadata block, one header row of
/// column names, then one row per retained sample. Doubles are written in
/// shortest round-trip form, so write → read → write is bit-identical.
struct Dataset {
  std::vector<std::string> metadata;  // lines, stored without the "# " prefix
  std::vector<DatasetRow> rows;

  void write(const std::filesystem::path& path) const;
  static Dataset read(const std::filesystem::path& path);

  Eigen::MatrixXd feature_matrix() const;  // rows × 29
  Eigen::VectorXd labels() const;
  int size() const { return int(rows.size()); }
};

/// Shortest round-trip decimal form of a double (std::to_chars).
std::string format_double(double value);

}  // namespace cvqkd
