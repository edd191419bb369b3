#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace asyco::csv {

/// RFC-4180 field quoting: fields containing comma, quote, CR or LF are
/// wrapped in quotes with embedded quotes doubled.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Reads one record (which may span lines inside quotes). Returns false at EOF.
bool read_row(std::istream& in, std::vector<std::string>& fields);

/// Shortest text that parses back to the same double.
std::string exact(double v);
/// Fixed significant-digit formatting for reports; NaN becomes an empty field.
std::string fmt(double v, int digits = 10);

}  // namespace asyco::csv
