#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aoii::csv {

/// Format a double with 17 significant digits, enough for an exact
/// round trip through text.
std::string format_double(double x);

/// Parse a double, requiring the whole token to be consumed.
double parse_double(const std::string& token);

/// Parse a signed integer, requiring the whole token to be consumed.
std::int64_t parse_int(const std::string& token);

/// Split a line on the separator. Empty fields are kept.
std::vector<std::string> split(const std::string& line, char sep);

/// Strip leading and trailing ASCII whitespace.
std::string trim(const std::string& text);

/// FNV-1a hash of a byte string, used to fingerprint configurations in
/// output provenance comments.
std::uint64_t fnv1a(const std::string& text);

/// Read a whole text file; throws std::runtime_error when it cannot be
/// opened or read.
std::string read_file(const std::string& path);

/// Write a whole text file; throws std::runtime_error on failure.
void write_file(const std::string& path, const std::string& content);

} // namespace aoii::csv
