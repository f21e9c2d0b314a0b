#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hdinf::csv {

using Row = std::vector<std::string>;

/// RFC-4180 reader: quoted fields may contain commas, doubled quotes and line
/// breaks. Accepts LF or CRLF record separators and a UTF-8 BOM.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it needs it.
std::string escape(std::string_view field);

/// "%.17g": round-trips every finite double.
std::string format_double(double v);

}  // namespace hdinf::csv
