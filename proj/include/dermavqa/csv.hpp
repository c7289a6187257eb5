#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dvqa::csv {

using Row = std::vector<std::string>;

// RFC-4180 style: fields containing separator, quote or newline are quoted,
// quotes doubled. Parser accepts both quoted and bare fields.
std::string escape_field(const std::string& field);
std::string format_row(const Row& row);
std::vector<Row> parse(const std::string& text);
std::vector<Row> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<Row>& rows);

}  // namespace dvqa::csv
