// SPDX-License-Identifier: Apache-2.0
#include "xtal/io/database.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "xtal/core/errors.hpp"

namespace xtal {

using nlohmann::json;

namespace {

[[noreturn]] void schema(const std::string& what) { throw ParseError("schema violation: " + what, 0); }

Vec3 read_vec3(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3)
        schema(std::string(what) + " must be an array of 3 numbers");
    Vec3 v;
    for (int k = 0; k < 3; ++k) {
        if (!j[k].is_number())
            schema(std::string(what) + " must be an array of 3 numbers");
        v[k] = j[k].get<double>();
    }
    return v;
}

} // namespace

json structure_to_json(const CrystalStructure& s)
{
    json lattice = json::array();
    for (int i = 0; i < 3; ++i)
        lattice.push_back({s.lattice().matrix()(i, 0), s.lattice().matrix()(i, 1), s.lattice().matrix()(i, 2)});
    json species = json::array();
    json frac = json::array();
    for (std::size_t i = 0; i < s.size(); ++i) {
        species.push_back(std::string(s.species()[i].symbol()));
        const Vec3& f = s.frac_coords()[i];
        frac.push_back({f[0], f[1], f[2]});
    }
    return json{{"lattice", lattice}, {"species", species}, {"frac_coords", frac}};
}

CrystalStructure structure_from_json(const json& j)
{
    if (!j.is_object())
        schema("structure must be an object");
    for (const char* key : {"lattice", "species", "frac_coords"})
        if (!j.contains(key))
            schema(std::string("missing field '") + key + "'");
    const json& lat = j["lattice"];
    if (!lat.is_array() || lat.size() != 3)
        schema("lattice must be a 3x3 array");
    Mat3 rows;
    for (int i = 0; i < 3; ++i)
        rows.row(i) = read_vec3(lat[i], "lattice row").transpose();

    const json& sp = j["species"];
    const json& fc = j["frac_coords"];
    if (!sp.is_array() || !fc.is_array())
        schema("species and frac_coords must be arrays");
    if (sp.size() != fc.size())
        schema("species has " + std::to_string(sp.size()) + " entries but frac_coords has " +
               std::to_string(fc.size()));
    std::vector<Element> species;
    std::vector<Vec3> frac;
    for (std::size_t i = 0; i < sp.size(); ++i) {
        if (!sp[i].is_string())
            schema("species entries must be element symbols");
        species.push_back(Element::from_symbol(sp[i].get<std::string>()));
        frac.push_back(read_vec3(fc[i], "frac_coords entry"));
    }
    return CrystalStructure(Lattice(rows), std::move(species), std::move(frac));
}

json record_to_json(const StructureRecord& r)
{
    json j = structure_to_json(r.structure);
    json out{{"schema_version", database_schema_version}, {"id", r.id}};
    out.update(j);
    out["tags"] = json(r.tags);
    return out;
}

StructureRecord record_from_json(const json& j)
{
    if (!j.is_object())
        schema("record must be an object");
    if (j.contains("schema_version")) {
        if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != database_schema_version)
            schema("unsupported schema_version " + j["schema_version"].dump());
    }
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
        schema("record needs a non-empty string id");
    std::map<std::string, std::string> tags;
    if (j.contains("tags")) {
        if (!j["tags"].is_object())
            schema("tags must be an object");
        for (const auto& [k, v] : j["tags"].items()) {
            if (!v.is_string())
                schema("tag '" + k + "' must be a string");
            tags[k] = v.get<std::string>();
        }
    }
    return StructureRecord{j["id"].get<std::string>(), structure_from_json(j), std::move(tags)};
}

std::vector<StructureRecord> parse_database(const std::string& text)
{
    std::vector<StructureRecord> out;
    std::set<std::string> ids;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            json j = json::parse(line);
            auto rec = record_from_json(j);
            if (!ids.insert(rec.id).second)
                throw ParseError("duplicate id '" + rec.id + "'", line_no);
            out.push_back(std::move(rec));
        } catch (const ParseError& e) {
            if (e.line() > 0)
                throw;
            throw ParseError(e.what(), line_no);
        } catch (const json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return out;
}

std::vector<StructureRecord> load_database(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open database " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_database(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line());
    }
}

std::string serialize_database(const std::vector<StructureRecord>& records)
{
    std::string out;
    for (const auto& r : records) {
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

void save_database(const std::string& path, const std::vector<StructureRecord>& records)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write database " + path);
    out << serialize_database(records);
    if (!out)
        throw IoError("error writing database " + path);
}

} // namespace xtal
