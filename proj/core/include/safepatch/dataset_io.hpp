#pragma once

#include <string>
#include <vector>

#include "safepatch/dataset.hpp"

namespace safepatch {

// Line format, one record per line, fields separated by '|':
//   <prompt tokens, space-separated ints>|<condition tokens>|<0 or 1>|<hex image>
// The image block is 256 little-endian float32 values (row-major 1x16x16)
// in lowercase base-16, 2048 hex digits.
std::string record_to_line(const DatasetPair& rec);
DatasetPair record_from_line(const std::string& line);

void write_dataset(const std::string& path, const std::vector<DatasetPair>& records);
std::vector<DatasetPair> read_dataset(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace safepatch
