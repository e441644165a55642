#include "uba/csv.h"

#include "uba/status.h"

namespace uba {

std::vector<std::string> SplitCsvLine(std::string_view line, char delimiter) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string field;
  std::size_t i = 0;
  while (true) {
    field.clear();
    if (i < line.size() && line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            ++i;
            closed = true;
            break;
          }
        } else {
          field.push_back(line[i++]);
        }
      }
      if (!closed) {
        throw ParseError(ParseError::Kind::kMalformedLine,
                         "unterminated quoted field");
      }
      if (i < line.size() && line[i] != delimiter) {
        throw ParseError(ParseError::Kind::kMalformedLine,
                         "unexpected character after quoted field");
      }
    } else {
      const std::size_t end = line.find(delimiter, i);
      const std::size_t stop = end == std::string_view::npos ? line.size() : end;
      field.assign(line.substr(i, stop - i));
      i = stop;
    }
    fields.push_back(field);
    if (i >= line.size()) break;
    ++i;  // delimiter
  }
  return fields;
}

std::string QuoteCsvField(std::string_view field, char delimiter) {
  if (field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) ==
      std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string JoinCsvLine(std::span<const std::string> fields, char delimiter) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.push_back(delimiter);
    out += QuoteCsvField(fields[i], delimiter);
  }
  return out;
}

}  // namespace uba
