// SPDX-License-Identifier: Apache-2.0
#include "xtal/core/composition.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numeric>

#include "xtal/core/errors.hpp"

namespace xtal {

Composition::Composition(std::map<Element, int> counts) : counts_(std::move(counts))
{
    if (counts_.empty())
        throw Error("composition must contain at least one element");
    for (const auto& [e, n] : counts_)
        if (n < 1)
            throw Error("composition count for " + std::string(e.symbol()) + " must be positive");
}

namespace {

class FormulaParser {
public:
    explicit FormulaParser(std::string_view text) : text_(text) {}

    std::map<Element, int> parse()
    {
        auto counts = group();
        if (pos_ != text_.size())
            fail("unexpected character");
        return counts;
    }

private:
    std::map<Element, int> group()
    {
        std::map<Element, int> counts;
        while (pos_ < text_.size() && text_[pos_] != ')') {
            char ch = text_[pos_];
            if (ch == '(') {
                ++pos_;
                auto inner = group();
                if (pos_ >= text_.size() || text_[pos_] != ')')
                    fail("unbalanced parenthesis");
                ++pos_;
                int mult = number();
                for (const auto& [e, n] : inner)
                    counts[e] += n * mult;
            } else if (std::isupper(static_cast<unsigned char>(ch))) {
                std::string sym(1, ch);
                ++pos_;
                while (pos_ < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_])))
                    sym.push_back(text_[pos_++]);
                auto e = Element::parse(sym);
                if (!e)
                    throw UnknownElementError(sym);
                counts[*e] += number();
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                ++pos_;
            } else {
                fail("unexpected character");
            }
        }
        return counts;
    }

    int number()
    {
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
            return 1;
        long v = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            v = v * 10 + (text_[pos_++] - '0');
            if (v > 1'000'000)
                fail("count too large");
        }
        if (v == 0)
            fail("zero count");
        return static_cast<int>(v);
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw FormulaError("formula '" + std::string(text_) + "': " + what + " at position " + std::to_string(pos_));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace

Composition Composition::from_formula(std::string_view formula)
{
    auto counts = FormulaParser(formula).parse();
    if (counts.empty())
        throw FormulaError("formula '" + std::string(formula) + "' is empty");
    return Composition(std::move(counts));
}

int Composition::count(Element e) const
{
    auto it = counts_.find(e);
    return it == counts_.end() ? 0 : it->second;
}

int Composition::num_atoms() const
{
    int n = 0;
    for (const auto& [e, c] : counts_)
        n += c;
    return n;
}

std::vector<Element> Composition::elements() const
{
    std::vector<Element> out;
    for (const auto& [e, c] : counts_)
        out.push_back(e);
    return out;
}

int Composition::gcd() const
{
    int g = 0;
    for (const auto& [e, c] : counts_)
        g = std::gcd(g, c);
    return g;
}

Composition Composition::reduced() const
{
    int g = gcd();
    std::map<Element, int> out;
    for (const auto& [e, c] : counts_)
        out[e] = c / g;
    return Composition(std::move(out));
}

double Composition::fraction(Element e) const
{
    return static_cast<double>(count(e)) / num_atoms();
}

std::vector<Element> formula_order(const Composition& c)
{
    const auto& table = ElementTable::builtin();
    auto elements = c.elements();
    std::sort(elements.begin(), elements.end(), [&](Element a, Element b) {
        double ea = table[a].electronegativity.value_or(std::numeric_limits<double>::infinity());
        double eb = table[b].electronegativity.value_or(std::numeric_limits<double>::infinity());
        if (ea != eb)
            return ea < eb;
        return a.symbol() < b.symbol();
    });
    return elements;
}

std::string reduced_formula(const Composition& c)
{
    auto r = c.reduced();
    std::string out;
    for (Element e : formula_order(r)) {
        out += e.symbol();
        if (int n = r.count(e); n != 1)
            out += std::to_string(n);
    }
    return out;
}

std::string anonymous_formula(const Composition& c)
{
    auto r = c.reduced();
    auto order = formula_order(r);
    std::stable_sort(order.begin(), order.end(), [&](Element a, Element b) { return r.count(a) > r.count(b); });
    std::string out;
    char label = 'A';
    for (Element e : order) {
        out += label++;
        if (int n = r.count(e); n != 1)
            out += std::to_string(n);
    }
    return out;
}

} // namespace xtal
