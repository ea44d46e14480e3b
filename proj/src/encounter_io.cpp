#include "stocc/encounter_io.hpp"

#include <fstream>
#include <json.hpp>

#include "stocc/csv.hpp"
#include "stocc/error.hpp"

namespace stocc {

void write_encounter(const std::filesystem::path& csv_path,
                     const std::filesystem::path& sidecar_path, const EncounterArray& data,
                     const std::vector<std::string>& coordinate_columns) {
  {
    csv::Writer w(csv_path);
    w.row({"site_id", "primary", "secondary", "y"});
    for (int i = 0; i < data.sites(); ++i) {
      for (int t = 0; t < data.primaries(); ++t) {
        for (int j = 0; j < data.secondaries(); ++j) {
          const std::string y = data.surveyed(i, t, j) ? std::to_string(data.y(i, t, j)) : "";
          w.row({std::to_string(i + 1), std::to_string(t + 1), std::to_string(j + 1), y});
        }
      }
    }
  }
  nlohmann::json side = {{"I", data.sites()},
                         {"T", data.primaries()},
                         {"J", data.secondaries()},
                         {"coordinate_columns", coordinate_columns}};
  std::ofstream out(sidecar_path, std::ios::binary);
  if (!out) throw DataError("cannot write " + sidecar_path.string());
  out << side.dump(2) << '\n';
}

EncounterArray read_encounter(const std::filesystem::path& csv_path,
                              const std::filesystem::path& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw DataError("cannot open " + sidecar_path.string());
  nlohmann::json side;
  try {
    in >> side;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(sidecar_path.string() + ": " + e.what());
  }
  int I = 0, T = 0, J = 0;
  try {
    I = side.at("I").get<int>();
    T = side.at("T").get<int>();
    J = side.at("J").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(sidecar_path.string() + ": " + e.what());
  }
  if (I <= 0 || T <= 0 || J <= 0) throw DataError("encounter dimensions must be positive");

  EncounterArray data(I, T, J);
  const csv::Table table = csv::read(csv_path);
  const auto c_site = table.column("site_id");
  const auto c_t = table.column("primary");
  const auto c_j = table.column("secondary");
  const auto c_y = table.column("y");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto i = csv::parse_int(row[c_site], "site_id") - 1;
    const auto t = csv::parse_int(row[c_t], "primary") - 1;
    const auto j = csv::parse_int(row[c_j], "secondary") - 1;
    if (i < 0 || i >= I || t < 0 || t >= T || j < 0 || j >= J) {
      throw DataError("encounter row at line " + std::to_string(table.line_numbers[r]) +
                      " is outside the declared dimensions");
    }
    if (row[c_y].empty()) continue;
    const auto y = csv::parse_int(row[c_y], "y");
    if (y != 0 && y != 1) {
      throw DataError("encounter value must be 0, 1 or empty at line " +
                      std::to_string(table.line_numbers[r]));
    }
    data.set(static_cast<int>(i), static_cast<int>(t), static_cast<int>(j), static_cast<int>(y));
  }
  return data;
}

}  // namespace stocc
