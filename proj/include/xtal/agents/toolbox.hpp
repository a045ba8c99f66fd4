// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xtal/agents/value.hpp"
#include "xtal/energy/calculator.hpp"
#include "xtal/energy/hull.hpp"
#include "xtal/energy/relax.hpp"
#include "xtal/matcher/matcher.hpp"
#include "xtal/retrieval/retrieval.hpp"

namespace xtal {

/// Declared argument types. `structure` also accepts an object with a
/// "structure" field (records, relaxation results); `structures` is a list of
/// such items. `integer` values are accepted where a `number` is declared.
enum class ParamType { Any, Bool, Integer, Number, String, Structure, Structures, List, Object };

std::string to_string(ParamType t);

/// True when v is acceptable for t; on failure `why` says what was found.
bool value_matches(const Value& v, ParamType t, std::string* why = nullptr);

/// Structure view of a `structure`-typed argument.
const CrystalStructure& structure_arg(const Value& v);
std::vector<CrystalStructure> structures_arg(const Value& v);

struct ToolParam {
    std::string name;
    ParamType type = ParamType::Any;
    std::optional<Value> default_value;  // absent means required
    std::string description;
};

struct ToolSignature {
    std::string name;
    std::string description;
    std::vector<ToolParam> params;
    std::string returns;

    const ToolParam* find(const std::string& param) const;
    /// "relax(structures: structures, max_steps?: integer = 100) -> list: description"
    std::string render() const;
};

/// Everything tools may touch. Immutable while a session runs.
struct ToolEnvironment {
    std::shared_ptr<const StructureIndex> index = std::make_shared<StructureIndex>();
    CalculatorPtr calculator;
    std::vector<HullEntry> hull;
    RelaxOptions relax;
    MatchTolerances match;
    int max_relax_steps = 100;  // hard cap on the relax tool's max_steps
};

using ToolArgs = std::map<std::string, Value>;
using ToolFunction = std::function<Value(const ToolArgs&, const ToolEnvironment&)>;

class Toolbox {
public:
    /// Throws xtal::Error on a duplicate name.
    void add(ToolSignature signature, ToolFunction fn);

    bool contains(const std::string& name) const { return tools_.count(name) > 0; }
    const ToolSignature& signature(const std::string& name) const;
    std::vector<const ToolSignature*> signatures() const;
    bool empty() const noexcept { return tools_.empty(); }

    /// Fills defaults, checks types, then calls the tool.
    Value invoke(const std::string& name, ToolArgs args, const ToolEnvironment& env) const;

    /// One line per tool, sorted by name.
    std::string catalog() const;

private:
    struct Entry {
        ToolSignature signature;
        ToolFunction fn;
    };
    std::map<std::string, Entry> tools_;
};

/// The built-in physics tools: retrieval, substitution, relaxation, energies,
/// validity, hull stability, matching, symmetry and a toy property estimate.
Toolbox default_toolbox();

/// Toy band-gap proxy (eV): 1.5 * (max - min Pauling EN over the composition).
/// Stands in for a real property calculator; not a physical model.
double toy_bandgap(const CrystalStructure& s);

} // namespace xtal
