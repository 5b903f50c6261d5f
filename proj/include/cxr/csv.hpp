#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cxr::csv {

/// Splits one RFC 4180 record. Quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_line(const std::string& line);

/// Quotes a field if it contains a comma, quote or newline.
std::string escape(const std::string& field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Next non-empty line not starting with '#', with any trailing '\r' removed.
std::optional<std::string> next_data_line(std::istream& in, std::size_t& line_number);

}  // namespace cxr::csv
