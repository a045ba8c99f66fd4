// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xtal {

inline constexpr int max_atomic_number = 103;

/// A chemical element, identified by atomic number 1..103.
class Element {
public:
    /// Throws UnknownElementError when z is outside 1..103.
    explicit Element(int z);

    /// Exact symbol lookup ("Fe"). Throws UnknownElementError.
    static Element from_symbol(std::string_view symbol);
    static std::optional<Element> parse(std::string_view symbol) noexcept;

    /// Lenient CIF-style decoding: "Fe3+", "Na1", "CL2" -> the element prefix.
    static std::optional<Element> from_label(std::string_view label) noexcept;

    int z() const noexcept { return z_; }
    std::string_view symbol() const noexcept;

    auto operator<=>(const Element&) const = default;

private:
    std::uint8_t z_ = 1;
};

struct ElementProperties {
    std::string symbol;
    std::optional<double> electronegativity;  // Pauling
    double covalent_radius = 0.0;              // Angstrom
    std::vector<int> oxidation_states;         // common states, ascending
};

/// Per-element data used by validity, retrieval and the pair potential.
///
/// The built-in table is parsed once from data/elements.tsv (embedded at build
/// time). Electronegativities and oxidation states can be overridden with a
/// JSON document:
///
///     {"electronegativity": {"Fe": 1.9}, "oxidation_states": {"Fe": [2, 3]}}
class ElementTable {
public:
    static const ElementTable& builtin();

    static ElementTable parse_tsv(std::string_view text);

    /// Applies a JSON override document (see class comment).
    ElementTable with_overrides(std::string_view json_text) const;
    static ElementTable load_with_overrides(const std::string& path);

    const ElementProperties& operator[](Element e) const { return rows_[e.z() - 1]; }
    std::optional<int> find_symbol(std::string_view symbol) const noexcept;

private:
    std::array<ElementProperties, max_atomic_number> rows_;
};

} // namespace xtal
