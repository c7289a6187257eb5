#include "dermavqa/csv.hpp"

#include "dermavqa/common.hpp"

namespace dvqa::csv {

std::string escape_field(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_row(const Row& row) {
    std::string out;
    for (size_t i = 0; i < row.size(); ++i) {
        if (i > 0) out.push_back(',');
        out += escape_field(row[i]);
    }
    out.push_back('\n');
    return out;
}

std::vector<Row> parse(const std::string& text) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool any_field = false;
    size_t i = 0;
    auto end_field = [&]() {
        row.push_back(field);
        field.clear();
        any_field = true;
    };
    auto end_row = [&]() {
        end_field();
        rows.push_back(row);
        row.clear();
        any_field = false;
    };
    while (i < text.size()) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c == '\r') {
            // swallow; \r\n handled by the \n branch
        } else {
            field.push_back(c);
        }
        ++i;
    }
    if (in_quotes) throw FormatError("csv: unterminated quoted field");
    if (!field.empty() || any_field) end_row();
    return rows;
}

std::vector<Row> read_file(const std::filesystem::path& path) {
    return parse(read_text_file(path));
}

void write_file(const std::filesystem::path& path, const std::vector<Row>& rows) {
    std::string out;
    for (const auto& row : rows) out += format_row(row);
    write_text_file(path, out);
}

}  // namespace dvqa::csv
