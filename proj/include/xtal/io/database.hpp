// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "xtal/core/structure.hpp"

namespace xtal {

inline constexpr int database_schema_version = 1;

struct StructureRecord {
    std::string id;
    CrystalStructure structure;
    std::map<std::string, std::string> tags;
};

nlohmann::json structure_to_json(const CrystalStructure& s);
/// Throws ParseError (line 0) on schema violations.
CrystalStructure structure_from_json(const nlohmann::json& j);

nlohmann::json record_to_json(const StructureRecord& r);
StructureRecord record_from_json(const nlohmann::json& j);

/// JSON-lines, one record per line; blank lines are skipped. Either every record
/// loads or a ParseError carrying the offending line is thrown. Duplicate ids
/// are rejected.
std::vector<StructureRecord> load_database(const std::string& path);
std::vector<StructureRecord> parse_database(const std::string& text);

std::string serialize_database(const std::vector<StructureRecord>& records);
void save_database(const std::string& path, const std::vector<StructureRecord>& records);

} // namespace xtal
