#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace bcv::csv {

using Row = std::vector<std::string>;

/// RFC-4180 reader: quoted fields, doubled quotes, embedded separators and
/// newlines, LF or CRLF line ends. A leading UTF-8 BOM is skipped. Blank
/// lines are ignored. Throws bcv::Error on an unterminated quote.
std::vector<Row> parse(std::string_view text);

std::vector<Row> read_file(const std::filesystem::path& path);

/// Quotes a field only when it contains a separator, quote or line break.
std::string escape(std::string_view field);

void write_row(std::ostream& os, const Row& row);

}  // namespace bcv::csv
