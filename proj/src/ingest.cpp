#include "stocc/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "stocc/error.hpp"

namespace stocc {

namespace {

bool parse_int_field(const std::string& s, int& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

struct Standardizer {
  double mean = 0.0;
  double sd = 1.0;
};

Standardizer fit_standardizer(const std::vector<double>& v) {
  Standardizer s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  if (!(s.sd > 0.0)) s.sd = 1.0;
  return s;
}

}  // namespace

RecordTable RecordTable::from_table(const csv::Table& table) {
  RecordTable out;
  const std::size_t cs = table.column("species"), cyear = table.column("year"),
                    cmonth = table.column("month"), cobs = table.column("observer_id");
  const auto ccell = table.find_column("cell_id");
  const auto cx = table.find_column("x");
  const auto cy = table.find_column("y");
  if (!ccell && !(cx && cy)) throw DataError("records need a cell_id column or x and y columns");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    Record rec;
    rec.line = table.line_numbers[r];
    rec.species = row[cs];
    rec.observer = row[cobs];
    if (!parse_int_field(row[cyear], rec.year)) {
      out.rejected.push_back({rec.line, "malformed year '" + row[cyear] + "'"});
      continue;
    }
    if (!parse_int_field(row[cmonth], rec.month) || rec.month < 1 || rec.month > 12) {
      out.rejected.push_back({rec.line, "malformed month '" + row[cmonth] + "'"});
      continue;
    }
    if (ccell && !row[*ccell].empty()) {
      long long id = 0;
      const std::string& f = row[*ccell];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), id);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        out.rejected.push_back({rec.line, "malformed cell id '" + f + "'"});
        continue;
      }
      rec.cell_id = id;
    } else if (cx && cy) {
      try {
        rec.x = csv::parse_double(row[*cx], "x");
        rec.y = csv::parse_double(row[*cy], "y");
      } catch (const DataError& e) {
        out.rejected.push_back({rec.line, e.what()});
        continue;
      }
    } else {
      out.rejected.push_back({rec.line, "no cell id or coordinates"});
      continue;
    }
    if (rec.species.empty()) {
      out.rejected.push_back({rec.line, "empty species"});
      continue;
    }
    out.rows.push_back(std::move(rec));
  }
  return out;
}

RecordTable RecordTable::read(const std::filesystem::path& path) {
  return from_table(csv::read(path));
}

CellGrid::CellGrid(std::vector<Cell> cells, double size) : cells_(std::move(cells)), size_(size) {
  require(size_ > 0.0, "cell size must be positive");
  require(!cells_.empty(), "cell list is empty");
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    const Cell& c = cells_[k];
    require(std::isfinite(c.x) && std::isfinite(c.y), "cell centres must be finite");
    if (!by_id_.emplace(c.id, static_cast<int>(k)).second) {
      throw DataError("duplicate cell id " + std::to_string(c.id));
    }
    const auto bx = static_cast<long long>(std::floor(c.x / size_));
    const auto by = static_cast<long long>(std::floor(c.y / size_));
    buckets_[bucket_key(bx, by)].push_back(static_cast<int>(k));
  }
}

long long CellGrid::bucket_key(long long bx, long long by) const {
  return bx * 2654435761LL + by;
}

CellGrid CellGrid::read(const std::filesystem::path& path, double size) {
  const csv::Table table = csv::read(path);
  const std::size_t cid = table.column("cell_id"), cx = table.column("x"), cy = table.column("y");
  std::vector<Cell> cells;
  for (const auto& row : table.rows) {
    cells.push_back({csv::parse_int(row[cid], "cell_id"), csv::parse_double(row[cx], "x"),
                     csv::parse_double(row[cy], "y")});
  }
  return CellGrid(std::move(cells), size);
}

std::optional<int> CellGrid::locate(double x, double y) const {
  const double half = 0.5 * size_;
  const auto bx = static_cast<long long>(std::floor(x / size_));
  const auto by = static_cast<long long>(std::floor(y / size_));
  std::optional<int> best;
  for (long long dx = -1; dx <= 1; ++dx) {
    for (long long dy = -1; dy <= 1; ++dy) {
      auto it = buckets_.find(bucket_key(bx + dx, by + dy));
      if (it == buckets_.end()) continue;
      for (int k : it->second) {
        const Cell& c = cells_[k];
        if (std::abs(x - c.x) <= half && std::abs(y - c.y) <= half) {
          if (!best || c.id < cells_[*best].id) best = k;
        }
      }
    }
  }
  return best;
}

std::optional<int> CellGrid::index_of(long long id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

SiteCoords CellGrid::coords() const {
  std::vector<Point> pts;
  for (const Cell& c : cells_) pts.push_back({c.y, c.x});
  return SiteCoords(std::move(pts));
}

void StudyWindow::validate() const {
  require(last_year >= first_year, "study window has no years");
  require(first_month >= 1 && last_month <= 12 && last_month >= first_month,
          "study window months must satisfy 1 <= first <= last <= 12");
}

IngestResult ingest_records(const RecordTable& records, const CellGrid& grid,
                            const std::string& focal_species, const StudyWindow& window) {
  window.validate();
  require(!focal_species.empty(), "focal species must be named");
  const int I = static_cast<int>(grid.cells().size()), T = window.T(), J = window.J();
  IngestResult out;
  out.data = EncounterArray(I, T, J);
  out.rejected = records.rejected;
  std::vector<std::set<std::string>> observers(out.data.cells());
  for (const Record& rec : records.rows) {
    std::optional<int> site;
    if (rec.cell_id) {
      site = grid.index_of(*rec.cell_id);
      if (!site) {
        out.rejected.push_back({rec.line, "unknown cell id " + std::to_string(*rec.cell_id)});
        continue;
      }
    } else {
      site = grid.locate(rec.x, rec.y);
      if (!site) {
        out.rejected.push_back({rec.line, "point outside every cell"});
        continue;
      }
    }
    if (rec.year < window.first_year || rec.year > window.last_year ||
        rec.month < window.first_month || rec.month > window.last_month) {
      out.rejected.push_back({rec.line, "outside the study window"});
      continue;
    }
    const int t = rec.year - window.first_year;
    const int j = rec.month - window.first_month;
    const bool focal = rec.species == focal_species;
    const bool had = out.data.surveyed(*site, t, j) && out.data.y(*site, t, j) == 1;
    out.data.set(*site, t, j, (focal || had) ? 1 : 0);
    if (!rec.observer.empty()) observers[out.data.index(*site, t, j)].insert(rec.observer);
    ++out.accepted;
  }
  out.observers.resize(observers.size());
  for (std::size_t c = 0; c < observers.size(); ++c) {
    out.observers[c] = static_cast<double>(observers[c].size());
  }
  std::sort(out.rejected.begin(), out.rejected.end(),
            [](const Rejection& a, const Rejection& b) { return a.line < b.line; });
  return out;
}

Dataset build_ingested_dataset(const IngestResult& result, const CellGrid& grid,
                               const StudyWindow& window,
                               const std::optional<csv::Table>& cell_covariates,
                               const std::string& focal_species) {
  const EncounterArray& data = result.data;
  const int I = data.sites(), T = data.primaries(), J = data.secondaries();
  Dataset ds;
  ds.coords = grid.coords();
  ds.data = data;
  Json standardization = Json::object();

  // Site-level occupancy columns: latitude and the supplied cell covariates.
  std::vector<std::string> occ_names{kInterceptName, "lat"};
  std::vector<std::vector<double>> site_cols;
  std::vector<double> lat(I);
  for (int i = 0; i < I; ++i) lat[i] = ds.coords[i].lat;
  site_cols.push_back(lat);
  std::vector<std::string> sources{"lat"};
  if (cell_covariates) {
    const csv::Table& tab = *cell_covariates;
    const std::size_t cid = tab.column("cell_id");
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < tab.header.size(); ++c) {
      if (c != cid) cols.push_back(c);
    }
    std::vector<std::vector<double>> values(cols.size(), std::vector<double>(I, NAN));
    for (std::size_t r = 0; r < tab.rows.size(); ++r) {
      const auto id = csv::parse_int(tab.rows[r][cid], "cell_id");
      const auto site = grid.index_of(id);
      if (!site) continue;
      for (std::size_t k = 0; k < cols.size(); ++k) {
        values[k][*site] = csv::parse_double(tab.rows[r][cols[k]], tab.header[cols[k]]);
      }
    }
    for (std::size_t k = 0; k < cols.size(); ++k) {
      for (int i = 0; i < I; ++i) {
        if (std::isnan(values[k][i])) {
          throw DataError("cell covariate '" + tab.header[cols[k]] + "' missing for cell " +
                          std::to_string(grid.cells()[i].id));
        }
      }
      occ_names.push_back(tab.header[cols[k]]);
      sources.push_back(tab.header[cols[k]]);
      site_cols.push_back(std::move(values[k]));
    }
  }
  ds.cov.occ = DesignMatrix(static_cast<std::size_t>(I) * T, occ_names);
  for (std::size_t r = 0; r < ds.cov.occ.rows(); ++r) ds.cov.occ(r, 0) = 1.0;
  for (std::size_t k = 0; k < site_cols.size(); ++k) {
    const Standardizer s = fit_standardizer(site_cols[k]);
    standardization[occ_names[k + 1]] = {{"source", sources[k]}, {"mean", s.mean}, {"sd", s.sd}};
    for (int i = 0; i < I; ++i) {
      for (int t = 0; t < T; ++t) {
        ds.cov.occ(static_cast<std::size_t>(i) * T + t, k + 1) = (site_cols[k][i] - s.mean) / s.sd;
      }
    }
  }

  // Detection columns, standardised over surveyed cells.
  std::vector<double> month, observers;
  for (int i = 0; i < I; ++i) {
    for (int t = 0; t < T; ++t) {
      for (int j = 0; j < J; ++j) {
        if (!data.surveyed(i, t, j)) continue;
        month.push_back(window.first_month + j);
        observers.push_back(result.observers[data.index(i, t, j)]);
      }
    }
  }
  const Standardizer sm = fit_standardizer(month);
  const Standardizer so = fit_standardizer(observers);
  ds.cov.det = DesignMatrix(data.cells(), {kInterceptName, "month", "month2", "observers"});
  for (std::size_t c = 0; c < data.cells(); ++c) {
    const int j = static_cast<int>(c % J);
    const double m = (window.first_month + j - sm.mean) / sm.sd;
    ds.cov.det(c, 0) = 1.0;
    ds.cov.det(c, 1) = m;
    ds.cov.det(c, 2) = m * m;
    ds.cov.det(c, 3) = (result.observers[c] - so.mean) / so.sd;
  }
  standardization["month"] = {{"source", "month"}, {"mean", sm.mean}, {"sd", sm.sd}};
  standardization["observers"] = {{"source", "observers"}, {"mean", so.mean}, {"sd", so.sd}};

  Json cell_ids = Json::array();
  for (const Cell& c : grid.cells()) cell_ids.push_back(c.id);
  ds.info = {{"source", "ingested"},
             {"focal_species", focal_species},
             {"window",
              {{"first_year", window.first_year},
               {"last_year", window.last_year},
               {"first_month", window.first_month},
               {"last_month", window.last_month}}},
             {"cell_size", grid.size()},
             {"cell_ids", cell_ids},
             {"records_accepted", result.accepted},
             {"records_rejected", result.rejected.size()},
             {"standardization", standardization}};
  return ds;
}

}  // namespace stocc
