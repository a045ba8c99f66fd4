// SPDX-License-Identifier: Apache-2.0
#include "xtal/core/element.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xtal/core/errors.hpp"

extern const char* const xtal_element_table_tsv;

namespace xtal {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

double to_double(std::string_view s, int line_no)
{
    try {
        std::size_t used = 0;
        std::string tmp(s);
        double v = std::stod(tmp, &used);
        if (used != tmp.size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw Error("element table line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
    }
}

int to_int(std::string_view s, int line_no)
{
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error("element table line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
    return v;
}

} // namespace

Element::Element(int z)
{
    if (z < 1 || z > max_atomic_number)
        throw UnknownElementError("Z=" + std::to_string(z));
    z_ = static_cast<std::uint8_t>(z);
}

Element Element::from_symbol(std::string_view symbol)
{
    auto e = parse(symbol);
    if (!e)
        throw UnknownElementError(std::string(symbol));
    return *e;
}

std::optional<Element> Element::parse(std::string_view symbol) noexcept
{
    if (auto z = ElementTable::builtin().find_symbol(symbol))
        return Element(*z);
    return std::nullopt;
}

std::optional<Element> Element::from_label(std::string_view label) noexcept
{
    std::string letters;
    for (char ch : label) {
        if (!std::isalpha(static_cast<unsigned char>(ch)) || letters.size() == 2)
            break;
        letters.push_back(letters.empty() ? static_cast<char>(std::toupper(static_cast<unsigned char>(ch)))
                                          : static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    while (!letters.empty()) {
        if (auto e = parse(letters))
            return e;
        letters.pop_back();
    }
    return std::nullopt;
}

std::string_view Element::symbol() const noexcept
{
    return ElementTable::builtin()[*this].symbol;
}

const ElementTable& ElementTable::builtin()
{
    static const ElementTable table = parse_tsv(xtal_element_table_tsv);
    return table;
}

ElementTable ElementTable::parse_tsv(std::string_view text)
{
    ElementTable table;
    std::array<bool, max_atomic_number> seen{};
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        auto line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty() || line.front() == '#' || line.starts_with("z\t"))
            continue;
        auto cols = split(line, '\t');
        if (cols.size() != 5)
            throw Error("element table line " + std::to_string(line_no) + ": expected 5 columns");
        int z = to_int(cols[0], line_no);
        if (z < 1 || z > max_atomic_number)
            throw Error("element table line " + std::to_string(line_no) + ": Z out of range");
        auto& row = table.rows_[z - 1];
        row.symbol = std::string(cols[1]);
        if (cols[2] != "-")
            row.electronegativity = to_double(cols[2], line_no);
        row.covalent_radius = to_double(cols[3], line_no);
        if (cols[4] != "-") {
            for (auto tok : split(cols[4], ','))
                row.oxidation_states.push_back(to_int(tok, line_no));
            std::sort(row.oxidation_states.begin(), row.oxidation_states.end());
        }
        seen[z - 1] = true;
    }
    for (int z = 1; z <= max_atomic_number; ++z)
        if (!seen[z - 1])
            throw Error("element table is missing Z=" + std::to_string(z));
    return table;
}

std::optional<int> ElementTable::find_symbol(std::string_view symbol) const noexcept
{
    for (int z = 1; z <= max_atomic_number; ++z)
        if (rows_[z - 1].symbol == symbol)
            return z;
    return std::nullopt;
}

ElementTable ElementTable::with_overrides(std::string_view json_text) const
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("element override: ") + e.what());
    }
    if (!doc.is_object())
        throw Error("element override: expected a JSON object");

    ElementTable out = *this;
    auto lookup = [&](const std::string& sym) -> ElementProperties& {
        auto z = find_symbol(sym);
        if (!z)
            throw UnknownElementError(sym);
        return out.rows_[*z - 1];
    };
    for (const auto& [key, value] : doc.items()) {
        if (key == "electronegativity") {
            for (const auto& [sym, en] : value.items()) {
                if (en.is_null())
                    lookup(sym).electronegativity.reset();
                else
                    lookup(sym).electronegativity = en.get<double>();
            }
        } else if (key == "oxidation_states") {
            for (const auto& [sym, states] : value.items()) {
                auto v = states.get<std::vector<int>>();
                std::sort(v.begin(), v.end());
                lookup(sym).oxidation_states = std::move(v);
            }
        } else if (key == "covalent_radius") {
            for (const auto& [sym, r] : value.items())
                lookup(sym).covalent_radius = r.get<double>();
        } else {
            throw Error("element override: unknown section '" + key + "'");
        }
    }
    return out;
}

ElementTable ElementTable::load_with_overrides(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open element override file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return builtin().with_overrides(buf.str());
}

} // namespace xtal
