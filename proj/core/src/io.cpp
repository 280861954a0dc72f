#include "fedsurv/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unordered_map>

#include "fedsurv/errors.hpp"

namespace fedsurv {

std::string format_double(double value) {
  std::array<char, 64> buffer;
  const auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc()) {
    throw NumericError("failed to format a double");
  }
  return std::string(buffer.data(), end);
}

std::string format_fixed(double value, int precision) {
  std::array<char, 64> buffer;
  const auto [end, ec] =
      std::to_chars(buffer.data(), buffer.data() + buffer.size(), value, std::chars_format::fixed, precision);
  if (ec != std::errc()) {
    throw NumericError("failed to format a double");
  }
  return std::string(buffer.data(), end);
}

void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw DataError("cannot open " + temp.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw DataError("failed writing " + temp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    throw DataError("failed to move " + temp.string() + " into place: " + ec.message());
  }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(std::string_view field, const std::string& what, std::size_t line_number) {
  double value = 0.0;
  const auto [parsed_end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || parsed_end != field.data() + field.size()) {
    throw DataError("line " + std::to_string(line_number) + ": cannot parse " + what + " '" + std::string(field) +
                    "'");
  }
  return value;
}

}  // namespace

LoadedData load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(path.string() + " is empty");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  const std::vector<std::string_view> header = split_fields(line);
  if (header.size() < 4 || header[0] != "time" || header[1] != "event" || header[2] != "center") {
    throw DataError(path.string() + ": header must be time,event,center,x0,...");
  }
  const int p = static_cast<int>(header.size()) - 3;
  for (int j = 0; j < p; ++j) {
    if (header[static_cast<std::size_t>(j + 3)] != "x" + std::to_string(j)) {
      throw DataError(path.string() + ": covariate columns must be named x0..x" + std::to_string(p - 1));
    }
  }

  std::vector<double> times;
  std::vector<std::uint8_t> events;
  std::vector<int> center_of;
  std::vector<std::string> labels;
  std::unordered_map<std::string, int> center_id;
  std::vector<double> covariates;  // row-major staging, one row per individual
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string_view> fields = split_fields(line);
    if (static_cast<int>(fields.size()) != p + 3) {
      throw DataError("line " + std::to_string(line_number) + ": expected " + std::to_string(p + 3) +
                      " fields, got " + std::to_string(fields.size()));
    }
    const double t = parse_double(fields[0], "time", line_number);
    if (!std::isfinite(t) || t < 0.0) {
      throw DataError("line " + std::to_string(line_number) + ": time must be finite and non-negative");
    }
    if (fields[1] != "0" && fields[1] != "1") {
      throw DataError("line " + std::to_string(line_number) + ": event must be 0 or 1, got '" +
                      std::string(fields[1]) + "'");
    }
    if (fields[2].empty()) {
      throw DataError("line " + std::to_string(line_number) + ": center label is empty");
    }
    times.push_back(t);
    events.push_back(fields[1] == "1" ? 1 : 0);
    const auto [it, inserted] = center_id.emplace(std::string(fields[2]), static_cast<int>(labels.size()));
    if (inserted) {
      labels.emplace_back(fields[2]);
    }
    center_of.push_back(it->second);
    for (int j = 0; j < p; ++j) {
      covariates.push_back(parse_double(fields[static_cast<std::size_t>(j + 3)], "x" + std::to_string(j), line_number));
    }
  }
  if (times.empty()) {
    throw DataError(path.string() + " contains a header but no rows");
  }

  const int n = static_cast<int>(times.size());
  Eigen::MatrixXd x(p, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      x(j, i) = covariates[static_cast<std::size_t>(i) * static_cast<std::size_t>(p) + static_cast<std::size_t>(j)];
    }
  }
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) {
    t[i] = times[static_cast<std::size_t>(i)];
  }
  return LoadedData{Dataset(std::move(x), std::move(t), std::move(events)),
                    FederatedPartition(std::move(center_of), static_cast<int>(labels.size())), std::move(labels)};
}

std::string dataset_csv(const Dataset& data, const FederatedPartition& partition,
                        const std::vector<std::string>& center_labels) {
  if (partition.size() != data.size()) {
    throw DataError("partition covers " + std::to_string(partition.size()) + " individuals, data holds " +
                    std::to_string(data.size()));
  }
  if (static_cast<int>(center_labels.size()) != partition.num_centers()) {
    throw DataError("need one label per center");
  }
  for (const std::string& label : center_labels) {
    if (label.empty() || label.find_first_of(",\n\r") != std::string::npos) {
      throw DataError("center label '" + label + "' is empty or contains a separator");
    }
  }
  std::ostringstream out;
  out << "time,event,center";
  for (int j = 0; j < data.num_covariates(); ++j) {
    out << ",x" << j;
  }
  out << '\n';
  for (int i = 0; i < data.size(); ++i) {
    out << format_double(data.time(i)) << ',' << (data.event(i) ? '1' : '0') << ','
        << center_labels[static_cast<std::size_t>(partition.center_of(i))];
    for (int j = 0; j < data.num_covariates(); ++j) {
      out << ',' << format_double(data.covariate_matrix()(j, i));
    }
    out << '\n';
  }
  return std::move(out).str();
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, const FederatedPartition& partition,
                       const std::vector<std::string>& center_labels) {
  atomic_write_file(path, dataset_csv(data, partition, center_labels));
}

std::string cv_results_csv(const std::vector<CvRow>& rows) {
  std::ostringstream out;
  out << "repeat,fold_or_center,scheme,c_index,train_seconds,comm_values_down,comm_values_up\n";
  for (const CvRow& row : rows) {
    out << row.repeat << ',' << row.fold_or_center << ',' << row.scheme << ','
        << (std::isnan(row.c_index) ? "nan" : format_double(row.c_index)) << ','
        << format_fixed(row.train_seconds, 3) << ',' << row.comm_values_down << ',' << row.comm_values_up << '\n';
  }
  return std::move(out).str();
}

void write_cv_results_csv(const std::filesystem::path& path, const std::vector<CvRow>& rows) {
  atomic_write_file(path, cv_results_csv(rows));
}

}  // namespace fedsurv
