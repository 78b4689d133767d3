#pragma once

#include <string>

#include "json.hpp"

namespace onode {

// Deterministic JSON serialization: keys in nlohmann's (sorted) object order,
// floating-point numbers with 17 significant digits so doubles round-trip
// bitwise.  indent < 0 emits compact output.
std::string dump_json_17(const nlohmann::json& value, int indent = 1);

// Parse wrapper that converts nlohmann exceptions into ParseError.
nlohmann::json parse_json(const std::string& text, const std::string& where);

// Whole-file helpers (IoError on failure).
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

} // namespace onode
