#pragma once

// Minimal RFC 4180 writer: fields containing a comma, quote or line break are
// quoted and quotes doubled; rows end with '\n'.

#include <string>
#include <vector>

namespace actsteer::cli {

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) { row(header); }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) text_ += ',';
            text_ += quote(fields[i]);
        }
        text_ += '\n';
    }

    const std::string& text() const noexcept { return text_; }

    static std::string quote(const std::string& field) {
        if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
        std::string out = "\"";
        for (char c : field) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + '"';
    }

private:
    std::string text_;
};

}  // namespace actsteer::cli
