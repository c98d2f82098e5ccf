#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace twoscale {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Splits one CSV record. Double-quoted fields may contain commas; "" escapes
// a quote inside a quoted field.
std::vector<std::string> split_csv_line(std::string_view line);

// Reads a whole file. The first non-empty line becomes the header; blank
// lines are skipped. Throws Error(IoError) if the file cannot be opened.
CsvTable read_csv(const std::filesystem::path& path, bool has_header = true);

std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, std::span<const std::string> fields);

// Shortest round-trip decimal form (17 significant digits at most).
std::string format_double(double value);

// Returns nullopt if the text is not a complete number. "nan"/"inf" parse
// successfully so callers can report them as non-finite samples.
std::optional<double> try_parse_double(std::string_view text);

// Like try_parse_double but throws Error(ParseError) mentioning `context`.
double parse_double(std::string_view text, std::string_view context);
long long parse_integer(std::string_view text, std::string_view context);

std::string trim(std::string_view text);

}  // namespace twoscale
