#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddbh/config.hpp"
#include "ddbh/errors.hpp"

namespace ddbh {

/// Shortest round-trip text for a double ("nan"/"inf" spelled out).
inline std::string format_number(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

/**
 * CSV with the versioned header line "# schema=1" followed by the column
 * names. Cells are either numbers or bare strings (no quoting: callers must
 * not pass commas or newlines).
 */
class CsvWriter {
public:
    CsvWriter(std::ostream& out, const std::vector<std::string>& columns) : out_(out), ncol_(columns.size()) {
        out_ << "# schema=" << kSchemaVersion << "\n";
        write_row(columns);
    }

    class Row {
    public:
        explicit Row(CsvWriter& w) : w_(w) {}
        Row& operator<<(double v) { return add(format_number(v)); }
        Row& operator<<(int v) { return add(std::to_string(v)); }
        Row& operator<<(long v) { return add(std::to_string(v)); }
        Row& operator<<(long long v) { return add(std::to_string(v)); }
        Row& operator<<(std::uint64_t v) { return add(std::to_string(v)); }
        Row& operator<<(unsigned v) { return add(std::to_string(v)); }
        Row& operator<<(bool v) { return add(v ? "1" : "0"); }
        Row& operator<<(const std::string& v) { return add(v); }
        Row& operator<<(const char* v) { return add(v); }
        ~Row() noexcept(false) {
            if (cells_.size() != w_.ncol_)
                throw PreconditionError("CSV row has " + std::to_string(cells_.size()) + " cells, expected " +
                                        std::to_string(w_.ncol_));
            w_.write_row(cells_);
        }

    private:
        Row& add(std::string s) {
            cells_.push_back(std::move(s));
            return *this;
        }
        CsvWriter& w_;
        std::vector<std::string> cells_;
    };

    Row row() { return Row(*this); }

private:
    void write_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }
    std::ostream& out_;
    std::size_t ncol_;
};

/// Parsed schema=1 CSV: header names and numeric columns (non-numeric cells read as NaN).
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::vector<double> column(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) {
                std::vector<double> out;
                out.reserve(rows.size());
                for (const auto& r : rows) out.push_back(r[c]);
                return out;
            }
        throw ConfigError("CSV has no column '" + name + "'");
    }
};

inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool header = false;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            const auto comma = s.find(',', start);
            out.push_back(s.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# schema=", 0) == 0 && line != "# schema=" + std::to_string(kSchemaVersion))
                throw ConfigError("unsupported CSV " + line.substr(2));
            continue;
        }
        auto cells = split(line);
        if (!header) {
            t.columns = cells;
            header = true;
            continue;
        }
        if (cells.size() != t.columns.size()) throw ConfigError("CSV row width differs from the header");
        std::vector<double> r;
        r.reserve(cells.size());
        for (const auto& c : cells) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            r.push_back(end != c.c_str() && *end == '\0' ? v : std::nan(""));
        }
        t.rows.push_back(std::move(r));
    }
    if (!header) throw ConfigError("CSV has no header row");
    return t;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    f << j.dump(2) << "\n";
}

} // namespace ddbh
