#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cofa {

/// Shortest decimal text that parses back to exactly `x`; "NA" for NaN.
std::string format_number(double x);

/// Splits one CSV record. Handles double-quoted fields with "" escapes.
/// Throws DataError on an unterminated quote.
std::vector<std::string> split_csv_record(std::string_view line);

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_field(std::string_view field);

std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t value);

}  // namespace cofa
