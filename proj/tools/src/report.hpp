#pragma once

// Reports are JSON documents with sorted keys and every floating-point
// value written with 17 significant digits, so identical runs give
// byte-identical files.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace isocalc {

using Report = nlohmann::json;

std::string serialize(const Report& report);
void write_report(const std::filesystem::path& path, const Report& report);

}  // namespace isocalc
