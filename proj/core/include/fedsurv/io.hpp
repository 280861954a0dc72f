#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fedsurv/evaluation.hpp"
#include "fedsurv/types.hpp"

namespace fedsurv {

// Shortest decimal string that parses back to exactly the same double
// (std::to_chars), so write -> load -> write is byte-identical.
std::string format_double(double value);

// Fixed-point formatting (for human-facing columns like seconds).
std::string format_fixed(double value, int precision);

// Writes to a temp file in the target directory and renames it into place,
// so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

struct LoadedData {
  Dataset data;
  FederatedPartition partition;
  // Center label per center id; ids are assigned by first appearance, so a
  // load/save round trip preserves the file byte for byte.
  std::vector<std::string> center_labels;
};

// Dataset CSV: header `time,event,center,x0,...,x{P-1}`, one row per
// individual. `event` is 0 or 1, `center` is a free-form label without
// commas. Malformed input raises DataError naming the offending line.
LoadedData load_dataset_csv(const std::filesystem::path& path);
std::string dataset_csv(const Dataset& data, const FederatedPartition& partition,
                        const std::vector<std::string>& center_labels);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data, const FederatedPartition& partition,
                       const std::vector<std::string>& center_labels);

// Result table: repeat,fold_or_center,scheme,c_index,train_seconds,
// comm_values_down,comm_values_up. A failed fold carries c_index = nan.
std::string cv_results_csv(const std::vector<CvRow>& rows);
void write_cv_results_csv(const std::filesystem::path& path, const std::vector<CvRow>& rows);

}  // namespace fedsurv
