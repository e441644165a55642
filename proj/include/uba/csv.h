#ifndef UBA_CSV_H_
#define UBA_CSV_H_

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uba {

// Splits one delimited line. Fields may be double-quoted; a doubled quote
// inside a quoted field is a literal quote. Throws ParseError(kMalformedLine)
// on an unterminated quote or stray characters after a closing quote.
std::vector<std::string> SplitCsvLine(std::string_view line, char delimiter = ',');

// Quotes the field when it contains the delimiter, a quote, or a line break.
std::string QuoteCsvField(std::string_view field, char delimiter = ',');

std::string JoinCsvLine(std::span<const std::string> fields,
                        char delimiter = ',');

}  // namespace uba

#endif  // UBA_CSV_H_
