// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "xtal/core/structure.hpp"

namespace xtal {

/// Dynamically typed value passed between tools in a plan.
///
/// JSON form: scalars, arrays and objects map directly; a structure is
/// {"$structure": {...}} so it survives the event log. Object keys starting
/// with '$' are reserved.
class Value {
public:
    using List = std::vector<Value>;
    using Object = std::map<std::string, Value>;
    enum class Kind { Null, Bool, Integer, Number, String, Structure, List, Object };

    Value() = default;
    Value(std::nullptr_t) {}
    Value(bool b) : data_(b) {}
    Value(int i) : data_(static_cast<std::int64_t>(i)) {}
    Value(std::int64_t i) : data_(i) {}
    Value(std::size_t i) : data_(static_cast<std::int64_t>(i)) {}
    Value(double d) : data_(d) {}
    Value(const char* s) : data_(std::string(s)) {}
    Value(std::string s) : data_(std::move(s)) {}
    Value(CrystalStructure s) : data_(std::move(s)) {}
    Value(List l) : data_(std::move(l)) {}
    Value(Object o) : data_(std::move(o)) {}

    Kind kind() const noexcept { return static_cast<Kind>(data_.index()); }
    bool is_null() const noexcept { return kind() == Kind::Null; }

    /// Accessors throw xtal::Error naming the expected and actual kinds.
    bool as_bool() const;
    std::int64_t as_integer() const;
    /// Integers widen to numbers.
    double as_number() const;
    const std::string& as_string() const;
    const CrystalStructure& as_structure() const;
    const List& as_list() const;
    const Object& as_object() const;

    /// Object member lookup; throws when absent or not an object.
    const Value& at(const std::string& key) const;
    bool contains(const std::string& key) const;

    nlohmann::json to_json() const;
    static Value from_json(const nlohmann::json& j);

    /// Short human-readable rendering, used for step summaries.
    std::string describe(int depth = 0) const;

    bool operator==(const Value& other) const { return to_json() == other.to_json(); }

private:
    std::variant<std::monostate, bool, std::int64_t, double, std::string, CrystalStructure, List, Object> data_;
};

std::string to_string(Value::Kind kind);

} // namespace xtal
