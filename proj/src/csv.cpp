#include "twoscale/csv.hpp"

#include "twoscale/error.hpp"

#include <array>
#include <cmath>
#include <charconv>
#include <fstream>
#include <ostream>

namespace twoscale {

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r' && c != '\n') {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

CsvTable read_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  bool header_done = !has_header;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (!header_done) {
      table.header = std::move(fields);
      header_done = true;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  return table;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << '\n';
}

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), ptr);
}

std::optional<double> try_parse_double(std::string_view text) {
  const std::string cleaned = trim(text);
  if (cleaned.empty()) return std::nullopt;
  std::string_view view = cleaned;
  if (view.front() == '+') view.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(view.data(), view.data() + view.size(), value);
  if (ec == std::errc::result_out_of_range) {
    // from_chars leaves the value untouched on overflow; report it as infinite.
    return view.front() == '-' ? -HUGE_VAL : HUGE_VAL;
  }
  if (ec != std::errc{} || ptr != view.data() + view.size()) return std::nullopt;
  return value;
}

double parse_double(std::string_view text, std::string_view context) {
  auto value = try_parse_double(text);
  if (!value) {
    throw Error(ErrorCode::ParseError,
                std::string(context) + ": not a number: '" + std::string(text) + "'");
  }
  return *value;
}

long long parse_integer(std::string_view text, std::string_view context) {
  const std::string cleaned = trim(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), value);
  if (cleaned.empty() || ec != std::errc{} || ptr != cleaned.data() + cleaned.size()) {
    throw Error(ErrorCode::ParseError,
                std::string(context) + ": not an integer: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace twoscale
