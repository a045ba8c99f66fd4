// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include "xtal/core/errors.hpp"
#include "xtal/core/structure.hpp"

namespace xtal {

enum class CifErrorKind {
    Syntax,
    MissingCellParameter,
    EmptyAtomLoop,
    UnknownElement,
    MalformedNumber,
};

const char* to_string(CifErrorKind kind);

class CifError : public ParseError {
public:
    CifError(CifErrorKind kind, const std::string& what, int line)
        : ParseError(std::string(to_string(kind)) + ": " + what, line), kind_(kind) {}
    CifErrorKind kind() const noexcept { return kind_; }

private:
    CifErrorKind kind_;
};

struct CifOptions {
    /// Strip standard-uncertainty suffixes such as "3.35(2)" instead of rejecting them.
    bool lenient = false;
};

/// Reads a single-block P1 CIF. Symmetry operations are not expanded.
CrystalStructure parse_cif(std::string_view text, const CifOptions& options = {});

/// P1 CIF with 6-decimal cell parameters and fractional coordinates.
std::string write_cif(const CrystalStructure& s);

CrystalStructure read_cif_file(const std::string& path, const CifOptions& options = {});
void write_cif_file(const std::string& path, const CrystalStructure& s);

} // namespace xtal
