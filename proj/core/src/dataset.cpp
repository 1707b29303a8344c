#include "cvqkd/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cvqkd/errors.hpp"

namespace cvqkd {
namespace {

double parse_double(std::string_view token, const std::string& context) {
  double value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw Error("dataset: bad number '" + std::string(token) + "' in " + context);
  return value;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf, ptr);
}

void Dataset::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset: " + path.string());
  for (const std::string& line : metadata) out << "# " << line << '\n';
  for (int i = 0; i < FeatureVector::kSize; ++i) out << feature_name(i) << '\t';
  out << "key_rate\tL_km\talpha\txi\tprotocol\tdigest\n";
  for (const DatasetRow& row : rows) {
    for (double f : row.features) out << format_double(f) << '\t';
    out << format_double(row.key_rate) << '\t' << format_double(row.distance_km) << '\t'
        << format_double(row.amplitude) << '\t' << format_double(row.excess_noise) << '\t'
        << row.protocol << '\t' << row.digest << '\n';
  }
}

Dataset Dataset::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read dataset: " + path.string());
  Dataset data;
  std::string line;
  bool header_seen = false;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.starts_with("# ")) {
      if (header_seen) throw Error("dataset: metadata after header in " + path.string());
      data.metadata.push_back(line.substr(2));
      continue;
    }
    if (!header_seen) {  // column header row
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != FeatureVector::kSize + 6)
      throw Error("dataset: wrong column count at line " + std::to_string(line_no) + " of " +
                  path.string());
    DatasetRow row;
    const std::string context = path.string() + ":" + std::to_string(line_no);
    for (int i = 0; i < FeatureVector::kSize; ++i)
      row.features[size_t(i)] = parse_double(fields[size_t(i)], context);
    int k = FeatureVector::kSize;
    row.key_rate = parse_double(fields[size_t(k++)], context);
    row.distance_km = parse_double(fields[size_t(k++)], context);
    row.amplitude = parse_double(fields[size_t(k++)], context);
    row.excess_noise = parse_double(fields[size_t(k++)], context);
    row.protocol = std::string(fields[size_t(k++)]);
    row.digest = std::string(fields[size_t(k++)]);
    data.rows.push_back(std::move(row));
  }
  if (!header_seen) throw Error("dataset: missing header in " + path.string());
  return data;
}

Eigen::MatrixXd Dataset::feature_matrix() const {
  Eigen::MatrixXd m(rows.size(), FeatureVector::kSize);
  for (size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < FeatureVector::kSize; ++j) m(Eigen::Index(i), j) = rows[i].features[size_t(j)];
  return m;
}

Eigen::VectorXd Dataset::labels() const {
  Eigen::VectorXd y(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) y(Eigen::Index(i)) = rows[i].key_rate;
  return y;
}

}  // namespace cvqkd
