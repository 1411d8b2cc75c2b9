#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cohsim {

/// Shortest decimal that round-trips to the same double; NaN prints empty.
std::string format_number(double value);

/// Strict parse of a full field; empty parses as NaN.
double parse_number(std::string_view field);

std::vector<std::string_view> split_csv_line(std::string_view line);

/// Writes the whole buffer; throws std::runtime_error naming the path.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace cohsim
