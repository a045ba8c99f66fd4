// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "xtal/core/element.hpp"

namespace xtal {

/// Element -> positive integer count. Always holds at least one element.
class Composition {
public:
    /// Throws xtal::Error on an empty map or a non-positive count.
    explicit Composition(std::map<Element, int> counts);

    /// Parses formulas like "Ba2Fe2F9", "NaCl", "Ca(OH)2".
    static Composition from_formula(std::string_view formula);

    const std::map<Element, int>& counts() const noexcept { return counts_; }
    int count(Element e) const;
    int num_atoms() const;
    std::size_t num_elements() const noexcept { return counts_.size(); }
    std::vector<Element> elements() const;

    /// Greatest common divisor of all counts.
    int gcd() const;
    Composition reduced() const;
    /// Atomic fraction of e (0 when absent).
    double fraction(Element e) const;

    bool operator==(const Composition&) const = default;

private:
    std::map<Element, int> counts_;
};

/// Counts divided by their gcd, elements ordered by Pauling electronegativity
/// (elements without a value last), ties alphabetical. Unit counts are omitted.
std::string reduced_formula(const Composition& c);

/// Reduced counts in descending order labelled A, B, C...; equal counts keep the
/// reduced-formula order. Ba2Fe2F9 -> "A9B2C2".
std::string anonymous_formula(const Composition& c);

/// Elements of c in reduced-formula order.
std::vector<Element> formula_order(const Composition& c);

} // namespace xtal
