// SPDX-License-Identifier: Apache-2.0
#include "xtal/agents/value.hpp"

#include <cstdio>

#include "xtal/core/errors.hpp"
#include "xtal/io/database.hpp"

namespace xtal {

namespace {

[[noreturn]] void kind_error(Value::Kind want, Value::Kind got)
{
    throw Error("expected " + to_string(want) + ", got " + to_string(got));
}

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

} // namespace

std::string to_string(Value::Kind kind)
{
    switch (kind) {
    case Value::Kind::Null: return "null";
    case Value::Kind::Bool: return "bool";
    case Value::Kind::Integer: return "integer";
    case Value::Kind::Number: return "number";
    case Value::Kind::String: return "string";
    case Value::Kind::Structure: return "structure";
    case Value::Kind::List: return "list";
    case Value::Kind::Object: return "object";
    }
    return "null";
}

bool Value::as_bool() const
{
    if (auto p = std::get_if<bool>(&data_))
        return *p;
    kind_error(Kind::Bool, kind());
}

std::int64_t Value::as_integer() const
{
    if (auto p = std::get_if<std::int64_t>(&data_))
        return *p;
    kind_error(Kind::Integer, kind());
}

double Value::as_number() const
{
    if (auto p = std::get_if<double>(&data_))
        return *p;
    if (auto p = std::get_if<std::int64_t>(&data_))
        return static_cast<double>(*p);
    kind_error(Kind::Number, kind());
}

const std::string& Value::as_string() const
{
    if (auto p = std::get_if<std::string>(&data_))
        return *p;
    kind_error(Kind::String, kind());
}

const CrystalStructure& Value::as_structure() const
{
    if (auto p = std::get_if<CrystalStructure>(&data_))
        return *p;
    kind_error(Kind::Structure, kind());
}

const Value::List& Value::as_list() const
{
    if (auto p = std::get_if<List>(&data_))
        return *p;
    kind_error(Kind::List, kind());
}

const Value::Object& Value::as_object() const
{
    if (auto p = std::get_if<Object>(&data_))
        return *p;
    kind_error(Kind::Object, kind());
}

const Value& Value::at(const std::string& key) const
{
    const auto& o = as_object();
    auto it = o.find(key);
    if (it == o.end())
        throw Error("no field '" + key + "'");
    return it->second;
}

bool Value::contains(const std::string& key) const
{
    auto p = std::get_if<Object>(&data_);
    return p && p->count(key) > 0;
}

nlohmann::json Value::to_json() const
{
    using nlohmann::json;
    switch (kind()) {
    case Kind::Null: return nullptr;
    case Kind::Bool: return std::get<bool>(data_);
    case Kind::Integer: return std::get<std::int64_t>(data_);
    case Kind::Number: return std::get<double>(data_);
    case Kind::String: return std::get<std::string>(data_);
    case Kind::Structure: return json{{"$structure", structure_to_json(std::get<CrystalStructure>(data_))}};
    case Kind::List: {
        json out = json::array();
        for (const auto& v : std::get<List>(data_))
            out.push_back(v.to_json());
        return out;
    }
    case Kind::Object: {
        json out = json::object();
        for (const auto& [k, v] : std::get<Object>(data_))
            out[k] = v.to_json();
        return out;
    }
    }
    return nullptr;
}

Value Value::from_json(const nlohmann::json& j)
{
    switch (j.type()) {
    case nlohmann::json::value_t::null: return Value();
    case nlohmann::json::value_t::boolean: return Value(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
    case nlohmann::json::value_t::number_unsigned: return Value(j.get<std::int64_t>());
    case nlohmann::json::value_t::number_float: return Value(j.get<double>());
    case nlohmann::json::value_t::string: return Value(j.get<std::string>());
    case nlohmann::json::value_t::array: {
        List out;
        for (const auto& x : j)
            out.push_back(from_json(x));
        return Value(std::move(out));
    }
    case nlohmann::json::value_t::object: {
        if (j.size() == 1 && j.contains("$structure"))
            return Value(structure_from_json(j.at("$structure")));
        Object out;
        for (const auto& [k, v] : j.items()) {
            if (!k.empty() && k[0] == '$')
                throw Error("object key '" + k + "' is reserved");
            out.emplace(k, from_json(v));
        }
        return Value(std::move(out));
    }
    default: throw Error("unsupported JSON value");
    }
}

std::string Value::describe(int depth) const
{
    switch (kind()) {
    case Kind::Null: return "null";
    case Kind::Bool: return as_bool() ? "true" : "false";
    case Kind::Integer: return std::to_string(as_integer());
    case Kind::Number: return fmt(as_number());
    case Kind::String: return "\"" + as_string() + "\"";
    case Kind::Structure: {
        const auto& s = as_structure();
        auto l = s.lattice().lengths();
        auto a = s.lattice().angles();
        return "structure " + reduced_formula(s.composition()) + " (" + std::to_string(s.size()) +
               " sites, a=" + fmt(l[0]) + " b=" + fmt(l[1]) + " c=" + fmt(l[2]) + " alpha=" + fmt(a[0]) +
               " beta=" + fmt(a[1]) + " gamma=" + fmt(a[2]) + ", V=" + fmt(s.volume()) + ")";
    }
    case Kind::List: {
        const auto& l = as_list();
        if (depth > 2)
            return "[" + std::to_string(l.size()) + " items]";
        std::string out = "[";
        const std::size_t shown = std::min<std::size_t>(l.size(), 5);
        for (std::size_t i = 0; i < shown; ++i)
            out += (i ? ", " : "") + l[i].describe(depth + 1);
        if (l.size() > shown)
            out += ", ... (" + std::to_string(l.size()) + " items)";
        return out + "]";
    }
    case Kind::Object: {
        const auto& o = as_object();
        if (depth > 2)
            return "{" + std::to_string(o.size()) + " fields}";
        std::string out = "{";
        bool first = true;
        for (const auto& [k, v] : o) {
            out += (first ? "" : ", ") + k + ": " + v.describe(depth + 1);
            first = false;
        }
        return out + "}";
    }
    }
    return "null";
}

} // namespace xtal
