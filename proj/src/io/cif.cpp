// SPDX-License-Identifier: Apache-2.0
#include "xtal/io/cif.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace xtal {

const char* to_string(CifErrorKind kind)
{
    switch (kind) {
    case CifErrorKind::Syntax: return "syntax error";
    case CifErrorKind::MissingCellParameter: return "missing cell parameter";
    case CifErrorKind::EmptyAtomLoop: return "empty atom loop";
    case CifErrorKind::UnknownElement: return "unknown element";
    case CifErrorKind::MalformedNumber: return "malformed number";
    }
    return "cif error";
}

namespace {

struct Token {
    std::string text;
    int line = 0;
    bool quoted = false;
};

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool is_keyword(const Token& t, std::string_view prefix)
{
    if (t.quoted || t.text.size() < prefix.size())
        return false;
    return lower(t.text.substr(0, prefix.size())) == prefix;
}

bool is_tag(const Token& t) { return !t.quoted && !t.text.empty() && t.text[0] == '_'; }

bool is_reserved(const Token& t)
{
    return is_tag(t) || is_keyword(t, "data_") || is_keyword(t, "loop_") || is_keyword(t, "save_") ||
           is_keyword(t, "global_") || is_keyword(t, "stop_");
}

std::vector<Token> tokenize(std::string_view text)
{
    std::vector<Token> out;
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }

    for (std::size_t li = 0; li < lines.size(); ++li) {
        std::string_view line = lines[li];
        int line_no = static_cast<int>(li) + 1;
        if (!line.empty() && line[0] == ';') {
            // Semicolon text field runs until a line that starts with ';'.
            std::string field(line.substr(1));
            std::size_t lj = li + 1;
            for (; lj < lines.size(); ++lj) {
                if (!lines[lj].empty() && lines[lj][0] == ';')
                    break;
                field += "\n";
                field += lines[lj];
            }
            if (lj == lines.size())
                throw CifError(CifErrorKind::Syntax, "unterminated text field", line_no);
            out.push_back({field, line_no, true});
            li = lj;
            continue;
        }
        std::size_t i = 0;
        while (i < line.size()) {
            char c = line[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
            } else if (c == '#') {
                break;
            } else if (c == '\'' || c == '"') {
                // A quote closes only when followed by whitespace or end of line.
                std::size_t j = i + 1;
                while (j < line.size() &&
                       !(line[j] == c && (j + 1 == line.size() || std::isspace(static_cast<unsigned char>(line[j + 1])))))
                    ++j;
                if (j >= line.size())
                    throw CifError(CifErrorKind::Syntax, "unterminated quoted string", line_no);
                out.push_back({std::string(line.substr(i + 1, j - i - 1)), line_no, true});
                i = j + 1;
            } else {
                std::size_t j = i;
                while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
                    ++j;
                out.push_back({std::string(line.substr(i, j - i)), line_no, false});
                i = j;
            }
        }
    }
    return out;
}

struct Loop {
    std::vector<std::string> tags;
    std::vector<Token> values;
    int line = 0;

    int column(std::string_view tag) const
    {
        for (std::size_t k = 0; k < tags.size(); ++k)
            if (tags[k] == tag)
                return static_cast<int>(k);
        return -1;
    }
};

struct Block {
    int line = 0;
    int last_line = 0;
    std::map<std::string, Token> items;
    std::vector<Loop> loops;
};

Block parse_block(const std::vector<Token>& tokens)
{
    Block block;
    bool seen_data = false;
    std::size_t i = 0;
    while (i < tokens.size()) {
        const Token& t = tokens[i];
        block.last_line = t.line;
        if (is_keyword(t, "data_")) {
            if (seen_data)
                throw CifError(CifErrorKind::Syntax, "more than one data block", t.line);
            seen_data = true;
            block.line = t.line;
            ++i;
        } else if (!seen_data) {
            throw CifError(CifErrorKind::Syntax, "content before data block header", t.line);
        } else if (is_keyword(t, "loop_")) {
            Loop loop;
            loop.line = t.line;
            ++i;
            while (i < tokens.size() && is_tag(tokens[i]))
                loop.tags.push_back(lower(tokens[i++].text));
            if (loop.tags.empty())
                throw CifError(CifErrorKind::Syntax, "loop_ without tags", t.line);
            while (i < tokens.size() && !is_reserved(tokens[i]))
                loop.values.push_back(tokens[i++]);
            if (loop.values.size() % loop.tags.size() != 0)
                throw CifError(CifErrorKind::Syntax,
                               "loop value count " + std::to_string(loop.values.size()) +
                                   " is not a multiple of its " + std::to_string(loop.tags.size()) + " columns",
                               loop.line);
            if (!loop.values.empty())
                block.last_line = loop.values.back().line;
            block.loops.push_back(std::move(loop));
        } else if (is_tag(t)) {
            if (i + 1 >= tokens.size() || is_reserved(tokens[i + 1]))
                throw CifError(CifErrorKind::Syntax, "tag " + t.text + " has no value", t.line);
            block.items[lower(t.text)] = tokens[i + 1];
            block.last_line = tokens[i + 1].line;
            i += 2;
        } else if (is_keyword(t, "save_") || is_keyword(t, "global_") || is_keyword(t, "stop_")) {
            throw CifError(CifErrorKind::Syntax, "unsupported construct " + t.text, t.line);
        } else {
            throw CifError(CifErrorKind::Syntax, "value '" + t.text + "' without a tag", t.line);
        }
    }
    if (!seen_data)
        throw CifError(CifErrorKind::Syntax, "no data block", 0);
    return block;
}

double parse_number(const Token& tok, bool lenient)
{
    std::string s = tok.text;
    if (lenient) {
        auto open = s.find('(');
        if (open != std::string::npos && s.back() == ')') {
            bool digits = open + 1 < s.size() - 1;
            for (std::size_t k = open + 1; k + 1 < s.size(); ++k)
                digits = digits && std::isdigit(static_cast<unsigned char>(s[k]));
            if (digits)
                s.erase(open);
        }
    }
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && s[0] == '+')
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
        throw CifError(CifErrorKind::MalformedNumber, "cannot read '" + tok.text + "' as a number", tok.line);
    return v;
}

std::string fixed6(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s = buf;
    if (s == "-0.000000")
        s = "0.000000";
    return s;
}

std::string frac6(double v)
{
    std::string s = fixed6(v);
    // Coordinates just below 1 would print as 1.000000; keep them in [0,1).
    return s == "1.000000" ? "0.000000" : s;
}

} // namespace

CrystalStructure parse_cif(std::string_view text, const CifOptions& options)
{
    Block block = parse_block(tokenize(text));

    static const char* cell_tags[6] = {"_cell_length_a", "_cell_length_b", "_cell_length_c",
                                       "_cell_angle_alpha", "_cell_angle_beta", "_cell_angle_gamma"};
    double cell[6];
    for (int k = 0; k < 6; ++k) {
        auto it = block.items.find(cell_tags[k]);
        if (it == block.items.end() || (!it->second.quoted && (it->second.text == "?" || it->second.text == ".")))
            throw CifError(CifErrorKind::MissingCellParameter, std::string(cell_tags[k]) + " is not given",
                           it == block.items.end() ? block.line : it->second.line);
        cell[k] = parse_number(it->second, options.lenient);
    }

    const Loop* atoms = nullptr;
    for (const auto& loop : block.loops)
        if (loop.column("_atom_site_fract_x") >= 0) {
            atoms = &loop;
            break;
        }
    if (!atoms)
        throw CifError(CifErrorKind::EmptyAtomLoop, "no loop with _atom_site_fract_x", block.last_line);
    int cx = atoms->column("_atom_site_fract_x");
    int cy = atoms->column("_atom_site_fract_y");
    int cz = atoms->column("_atom_site_fract_z");
    int cs = atoms->column("_atom_site_type_symbol");
    if (cs < 0)
        cs = atoms->column("_atom_site_label");
    if (cy < 0 || cz < 0 || cs < 0)
        throw CifError(CifErrorKind::Syntax, "atom loop needs fract_x/y/z and type_symbol or label", atoms->line);
    std::size_t width = atoms->tags.size();
    std::size_t rows = atoms->values.size() / width;
    if (rows == 0)
        throw CifError(CifErrorKind::EmptyAtomLoop, "atom loop has no rows", atoms->line);

    std::vector<Element> species;
    std::vector<Vec3> frac;
    for (std::size_t r = 0; r < rows; ++r) {
        const Token& sym = atoms->values[r * width + cs];
        auto e = Element::from_label(sym.text);
        if (!e)
            throw CifError(CifErrorKind::UnknownElement, "cannot identify an element in '" + sym.text + "'", sym.line);
        species.push_back(*e);
        frac.emplace_back(parse_number(atoms->values[r * width + cx], options.lenient),
                          parse_number(atoms->values[r * width + cy], options.lenient),
                          parse_number(atoms->values[r * width + cz], options.lenient));
    }
    Lattice lattice = Lattice::from_parameters(cell[0], cell[1], cell[2], cell[3], cell[4], cell[5]);
    return CrystalStructure(lattice, std::move(species), std::move(frac));
}

std::string write_cif(const CrystalStructure& s)
{
    auto comp = s.composition();
    auto len = s.lattice().lengths();
    auto ang = s.lattice().angles();
    std::string formula = reduced_formula(comp);

    std::string sum;
    for (Element e : formula_order(comp)) {
        if (!sum.empty())
            sum += ' ';
        sum += e.symbol();
        sum += std::to_string(comp.count(e));
    }

    std::ostringstream out;
    out << "data_" << formula << "\n";
    out << "_symmetry_space_group_name_H-M   'P 1'\n";
    out << "_symmetry_Int_Tables_number   1\n";
    out << "_cell_length_a   " << fixed6(len[0]) << "\n";
    out << "_cell_length_b   " << fixed6(len[1]) << "\n";
    out << "_cell_length_c   " << fixed6(len[2]) << "\n";
    out << "_cell_angle_alpha   " << fixed6(ang[0]) << "\n";
    out << "_cell_angle_beta   " << fixed6(ang[1]) << "\n";
    out << "_cell_angle_gamma   " << fixed6(ang[2]) << "\n";
    out << "_cell_volume   " << fixed6(s.volume()) << "\n";
    out << "_chemical_formula_structural   " << formula << "\n";
    out << "_chemical_formula_sum   '" << sum << "'\n";
    out << "_cell_formula_units_Z   " << comp.gcd() << "\n";
    out << "loop_\n";
    out << " _symmetry_equiv_pos_site_id\n";
    out << " _symmetry_equiv_pos_as_xyz\n";
    out << "  1  'x, y, z'\n";
    out << "loop_\n";
    out << " _atom_site_type_symbol\n";
    out << " _atom_site_label\n";
    out << " _atom_site_fract_x\n";
    out << " _atom_site_fract_y\n";
    out << " _atom_site_fract_z\n";
    out << " _atom_site_occupancy\n";
    std::map<Element, int> seen;
    for (std::size_t i = 0; i < s.size(); ++i) {
        Element e = s.species()[i];
        const Vec3& f = s.frac_coords()[i];
        out << "  " << e.symbol() << "  " << e.symbol() << seen[e]++ << "  " << frac6(f[0]) << "  " << frac6(f[1])
            << "  " << frac6(f[2]) << "  1\n";
    }
    return out.str();
}

CrystalStructure read_cif_file(const std::string& path, const CifOptions& options)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_cif(buf.str(), options);
}

void write_cif_file(const std::string& path, const CrystalStructure& s)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path);
    out << write_cif(s);
    if (!out)
        throw IoError("error writing " + path);
}

} // namespace xtal
