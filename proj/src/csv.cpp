#include <unordered_set>

#include "almatch/dataio.hpp"

namespace almatch {

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

namespace {

class CsvReader {
public:
    explicit CsvReader(std::string_view text) : text_(text) {
        if (text_.starts_with("\xEF\xBB\xBF")) pos_ = 3;
    }

    bool done() const { return pos_ >= text_.size(); }
    std::size_t line() const { return line_; }

    // Reads one record; returns false for a blank line.
    bool next(std::vector<CsvField>& fields) {
        fields.clear();
        if (at_line_end()) {
            consume_line_end();
            return false;
        }
        while (true) {
            fields.push_back(read_field());
            if (done()) return true;
            if (text_[pos_] == ',') {
                ++pos_;
                continue;
            }
            if (at_line_end()) {
                consume_line_end();
                return true;
            }
            throw CsvError(line_, "unexpected character after field");
        }
    }

private:
    bool at_line_end() const {
        return pos_ < text_.size() &&
               (text_[pos_] == '\n' || (text_[pos_] == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n'));
    }

    void consume_line_end() {
        if (text_[pos_] == '\r') ++pos_;
        ++pos_;
        ++line_;
    }

    CsvField read_field() {
        if (pos_ < text_.size() && text_[pos_] == '"') return read_quoted();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ',' && !at_line_end()) ++pos_;
        if (pos_ == start) return std::nullopt;
        return std::string(text_.substr(start, pos_ - start));
    }

    CsvField read_quoted() {
        const std::size_t open_line = line_;
        ++pos_;
        std::string out;
        while (true) {
            if (pos_ >= text_.size()) throw CsvError(open_line, "unterminated quoted field");
            const char c = text_[pos_++];
            if (c == '"') {
                if (pos_ < text_.size() && text_[pos_] == '"') {
                    out.push_back('"');
                    ++pos_;
                    continue;
                }
                if (pos_ < text_.size() && text_[pos_] != ',' && !at_line_end()) {
                    throw CsvError(line_, "characters after closing quote");
                }
                return out;
            }
            if (c == '\n') ++line_;
            out.push_back(c);
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

bool needs_quotes(std::string_view s) {
    return s.empty() || s.find_first_of(",\"\r\n") != std::string_view::npos;
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
    CsvReader reader(text);
    CsvTable table;
    std::vector<CsvField> fields;
    bool have_header = false;
    while (!reader.done()) {
        const std::size_t line = reader.line();
        if (!reader.next(fields)) continue;
        if (!have_header) {
            std::unordered_set<std::string> seen;
            for (const auto& f : fields) {
                if (!f || f->empty()) throw CsvError(line, "empty column name in header");
                if (!seen.insert(*f).second) throw CsvError(line, "duplicate column '" + *f + "' in header");
                table.header.push_back(*f);
            }
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw CsvError(line, "expected " + std::to_string(table.header.size()) + " fields, found " +
                                     std::to_string(fields.size()));
        }
        table.rows.push_back({line, std::move(fields)});
        fields = {};
    }
    if (!have_header) throw CsvError(1, "missing header row");
    return table;
}

std::string csv_escape(std::string_view field) {
    if (!needs_quotes(field)) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string csv_escape_field(const CsvField& field) { return field ? csv_escape(*field) : std::string(); }

}  // namespace almatch
