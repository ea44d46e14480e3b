#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stocc/core.hpp"

namespace stocc {

/// Long-format encounter CSV (site_id, primary, secondary, y; empty y means
/// unsurveyed) plus a JSON sidecar {I, T, J, coordinate_columns}. Sites are
/// numbered 1..I; primary and secondary occasions are one-based.
void write_encounter(const std::filesystem::path& csv_path,
                     const std::filesystem::path& sidecar_path, const EncounterArray& data,
                     const std::vector<std::string>& coordinate_columns = {"lat", "lon"});

/// Rows absent from the CSV are treated as unsurveyed. Throws DataError on
/// malformed content.
EncounterArray read_encounter(const std::filesystem::path& csv_path,
                              const std::filesystem::path& sidecar_path);

}  // namespace stocc
