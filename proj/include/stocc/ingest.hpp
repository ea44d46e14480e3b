#pragma once

// Conversion of raw occurrence records into encounter arrays. Any record in
// a (cell, year, month) marks it surveyed; a focal-species record marks a
// detection.

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "stocc/core.hpp"
#include "stocc/csv.hpp"
#include "stocc/dataset_io.hpp"

namespace stocc {

struct Rejection {
  std::size_t line = 0;  // 1-based source line
  std::string reason;
};

struct Record {
  std::string species;
  std::optional<long long> cell_id;  // otherwise located by (x, y)
  double x = 0.0;
  double y = 0.0;
  int year = 0;
  int month = 0;
  std::string observer;
  std::size_t line = 0;
};

struct RecordTable {
  std::vector<Record> rows;
  std::vector<Rejection> rejected;  // rows that failed to parse

  /// Columns species, year, month, observer_id and either cell_id or x, y.
  static RecordTable read(const std::filesystem::path& path);
  static RecordTable from_table(const csv::Table& table);
};

struct Cell {
  long long id = 0;
  double x = 0.0;  // centre
  double y = 0.0;
};

/// Square cells of side `size` given by their centres.
class CellGrid {
 public:
  CellGrid(std::vector<Cell> cells, double size);
  /// Columns cell_id, x, y.
  static CellGrid read(const std::filesystem::path& path, double size);

  const std::vector<Cell>& cells() const { return cells_; }
  double size() const { return size_; }
  /// Site index of the containing cell; on shared edges the smaller id wins.
  std::optional<int> locate(double x, double y) const;
  std::optional<int> index_of(long long id) const;
  /// Sites with the cell centre as (lat = y, lon = x).
  SiteCoords coords() const;

 private:
  std::vector<Cell> cells_;
  double size_;
  std::unordered_map<long long, int> by_id_;
  std::unordered_map<long long, std::vector<int>> buckets_;
  long long bucket_key(long long bx, long long by) const;
};

struct StudyWindow {
  int first_year = 0;
  int last_year = 0;
  int first_month = 1;
  int last_month = 12;

  int T() const { return last_year - first_year + 1; }
  int J() const { return last_month - first_month + 1; }
  void validate() const;
};

struct IngestResult {
  EncounterArray data;
  /// Unique observer ids per cell (I*T*J, cell order).
  std::vector<double> observers;
  std::size_t accepted = 0;
  std::vector<Rejection> rejected;
};

IngestResult ingest_records(const RecordTable& records, const CellGrid& grid,
                            const std::string& focal_species, const StudyWindow& window);

/// Dataset with occupancy columns (Intercept), lat and any cell covariates,
/// and detection columns (Intercept), month, month2, observers. Non-intercept
/// columns are standardised; the constants are kept in info.standardization.
Dataset build_ingested_dataset(const IngestResult& result, const CellGrid& grid,
                               const StudyWindow& window,
                               const std::optional<csv::Table>& cell_covariates,
                               const std::string& focal_species);

}  // namespace stocc
