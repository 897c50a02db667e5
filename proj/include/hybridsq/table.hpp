#ifndef HYBRIDSQ_TABLE_HPP
#define HYBRIDSQ_TABLE_HPP

#include <cmath>
#include <locale>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "hybridsq/errors.hpp"

namespace hybridsq {

using Cell = std::variant<double, long, bool, std::string>;

/// 12 significant digits, %g style; identical input gives identical text.
inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (v == 0.0)
        v = 0.0;  // drop the sign of -0
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(12);
    os << v;
    return os.str();
}

struct Table
{
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    explicit Table(std::vector<std::string> h) : header(std::move(h)) {}

    void add_row(std::vector<Cell> row)
    {
        if (row.size() != header.size())
            throw StateError("table row has " + std::to_string(row.size()) + " cells, header has " +
                             std::to_string(header.size()));
        rows.push_back(std::move(row));
    }

    std::size_t column(const std::string &name) const
    {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name)
                return k;
        throw StateError("no column '" + name + "'");
    }
};

inline std::string cell_text(const Cell &c)
{
    if (const auto *d = std::get_if<double>(&c))
        return format_number(*d);
    if (const auto *l = std::get_if<long>(&c))
        return std::to_string(*l);
    if (const auto *b = std::get_if<bool>(&c))
        return *b ? "1" : "0";
    return std::get<std::string>(c);
}

inline std::string csv_escape(const std::string &s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"')
            out += '"';
        out += ch;
    }
    return out + "\"";
}

inline void write_csv(std::ostream &os, const Table &t)
{
    for (std::size_t k = 0; k < t.header.size(); ++k)
        os << (k ? "," : "") << csv_escape(t.header[k]);
    os << '\n';
    for (const auto &row : t.rows) {
        for (std::size_t k = 0; k < row.size(); ++k)
            os << (k ? "," : "") << csv_escape(cell_text(row[k]));
        os << '\n';
    }
}

/// The value a CSV reader would get back from cell_text.
inline nlohmann::ordered_json cell_json(const Cell &c)
{
    if (const auto *d = std::get_if<double>(&c)) {
        if (!std::isfinite(*d))
            return format_number(*d);
        return std::stod(format_number(*d));
    }
    if (const auto *l = std::get_if<long>(&c))
        return *l;
    if (const auto *b = std::get_if<bool>(&c))
        return *b;
    return std::get<std::string>(c);
}

/// One JSON object per CSV row, keys in header order.
inline nlohmann::ordered_json to_json(const Table &t)
{
    auto arr = nlohmann::ordered_json::array();
    for (const auto &row : t.rows) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (std::size_t k = 0; k < row.size(); ++k)
            obj[t.header[k]] = cell_json(row[k]);
        arr.push_back(std::move(obj));
    }
    return arr;
}

inline void write_json(std::ostream &os, const Table &t) { os << to_json(t).dump(2) << '\n'; }

} // namespace hybridsq

#endif
