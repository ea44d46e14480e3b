#include "stocc/dataset_io.hpp"

#include <cmath>

#include "stocc/csv.hpp"
#include "stocc/encounter_io.hpp"
#include "stocc/error.hpp"

namespace fs = std::filesystem;

namespace stocc {

namespace {

constexpr int kFormatVersion = 1;

// Columns after the `keys` leading key columns become design columns.
DesignMatrix read_design(const fs::path& path, const std::vector<std::string>& keys,
                         const std::vector<int>& extents) {
  const csv::Table table = csv::read(path);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (table.header.size() <= k || table.header[k] != keys[k]) {
      throw DataError(path.string() + ": expected column '" + keys[k] + "' at position " +
                      std::to_string(k + 1));
    }
  }
  std::vector<std::string> names(table.header.begin() + keys.size(), table.header.end());
  std::size_t rows = 1;
  for (int e : extents) rows *= static_cast<std::size_t>(e);
  DesignMatrix m(rows, names);
  std::vector<std::uint8_t> seen(rows, 0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::size_t idx = 0;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const long long v = csv::parse_int(row[k], keys[k]);
      if (v < 1 || v > extents[k]) {
        throw DataError(path.string() + ":" + std::to_string(table.line_numbers[r]) + ": " +
                        keys[k] + " out of range");
      }
      idx = idx * extents[k] + static_cast<std::size_t>(v - 1);
    }
    if (seen[idx]) {
      throw DataError(path.string() + ":" + std::to_string(table.line_numbers[r]) +
                      ": duplicate key");
    }
    seen[idx] = 1;
    for (std::size_t c = 0; c < names.size(); ++c) {
      m(idx, c) = csv::parse_double(row[keys.size() + c], names[c]);
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (!seen[r]) throw DataError(path.string() + ": missing covariate rows");
  }
  return m;
}

}  // namespace

Dataset from_simulation(const SimulatedDataset& sim) {
  Dataset ds;
  ds.coords = sim.coords;
  ds.cov = sim.cov;
  ds.data = sim.data;
  ds.truth = sim.truth;
  ds.info = {{"source", "simulated"},
             {"scenario", to_json(sim.spec)},
             {"seed", sim.seed},
             {"site_layout", "regular lattice in the unit square (convention, not stated by the model)"}};
  if (sim.spec.occ == OccCovariate::latitude && sim.coords.size() >= 2) {
    // L is the standardised first coordinate; keep the constants for prediction.
    double m = 0.0, ss = 0.0;
    for (const auto& p : sim.coords.points()) m += p.lat;
    m /= static_cast<double>(sim.coords.size());
    for (const auto& p : sim.coords.points()) ss += (p.lat - m) * (p.lat - m);
    const double s = std::sqrt(ss / static_cast<double>(sim.coords.size() - 1));
    ds.info["standardization"] = {{"L", {{"source", "lat"}, {"mean", m}, {"sd", s}}}};
  }
  return ds;
}

void write_coords(const fs::path& path, const SiteCoords& coords) {
  csv::Writer w(path);
  w.row({"site_id", "lat", "lon"});
  for (std::size_t i = 0; i < coords.size(); ++i) {
    w.row({std::to_string(i + 1), csv::format(coords[i].lat), csv::format(coords[i].lon)});
  }
}

SiteCoords read_coords(const fs::path& path) {
  const csv::Table table = csv::read(path);
  const std::size_t cid = table.column("site_id"), cx = table.column("lat"), cy = table.column("lon");
  std::vector<Point> pts(table.rows.size());
  std::vector<std::uint8_t> seen(table.rows.size(), 0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const long long id = csv::parse_int(row[cid], "site_id");
    if (id < 1 || id > static_cast<long long>(pts.size()) || seen[id - 1]) {
      throw DataError(path.string() + ":" + std::to_string(table.line_numbers[r]) +
                      ": site ids must be a permutation of 1..I");
    }
    seen[id - 1] = 1;
    pts[id - 1] = {csv::parse_double(row[cx], "lat"), csv::parse_double(row[cy], "lon")};
  }
  try {
    return SiteCoords(std::move(pts));
  } catch (const UsageError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_occ_covariates(const fs::path& path, const DesignMatrix& occ, int T) {
  csv::Writer w(path);
  std::vector<std::string> header{"site_id", "primary"};
  header.insert(header.end(), occ.names().begin(), occ.names().end());
  w.row(header);
  for (std::size_t r = 0; r < occ.rows(); ++r) {
    std::vector<std::string> f{std::to_string(r / T + 1), std::to_string(r % T + 1)};
    for (std::size_t c = 0; c < occ.cols(); ++c) f.push_back(csv::format(occ(r, c)));
    w.row(f);
  }
}

DesignMatrix read_occ_covariates(const fs::path& path, int I, int T) {
  return read_design(path, {"site_id", "primary"}, {I, T});
}

void write_det_covariates(const fs::path& path, const DesignMatrix& det, int T, int J) {
  csv::Writer w(path);
  std::vector<std::string> header{"site_id", "primary", "secondary"};
  header.insert(header.end(), det.names().begin(), det.names().end());
  w.row(header);
  const auto TJ = static_cast<std::size_t>(T) * J;
  for (std::size_t r = 0; r < det.rows(); ++r) {
    std::vector<std::string> f{std::to_string(r / TJ + 1), std::to_string((r / J) % T + 1),
                               std::to_string(r % J + 1)};
    for (std::size_t c = 0; c < det.cols(); ++c) f.push_back(csv::format(det(r, c)));
    w.row(f);
  }
}

DesignMatrix read_det_covariates(const fs::path& path, int I, int T, int J) {
  return read_design(path, {"site_id", "primary", "secondary"}, {I, T, J});
}

Json truth_to_json(const Truth& t) {
  return {{"params", to_json(t.params)}, {"omega", t.omega}, {"eta", t.eta},
          {"z", t.z},                    {"psi", t.psi},     {"p", t.p}};
}

Truth truth_from_json(const Json& j) {
  Truth t;
  try {
    t.params = params_from_json(j.at("params"));
    t.omega = j.at("omega").get<std::vector<double>>();
    t.eta = j.at("eta").get<std::vector<double>>();
    t.z = j.at("z").get<std::vector<std::uint8_t>>();
    t.psi = j.at("psi").get<std::vector<double>>();
    t.p = j.at("p").get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed truth record: ") + e.what());
  }
  return t;
}

void write_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  const int I = ds.data.sites(), T = ds.data.primaries(), J = ds.data.secondaries();
  write_encounter(dir / "encounter.csv", dir / "encounter.json", ds.data);
  write_coords(dir / "coords.csv", ds.coords);
  write_occ_covariates(dir / "occ_covariates.csv", ds.cov.occ, T);
  write_det_covariates(dir / "det_covariates.csv", ds.cov.det, T, J);
  Json files = {{"encounter", "encounter.csv"},
                {"encounter_sidecar", "encounter.json"},
                {"coords", "coords.csv"},
                {"occ_covariates", "occ_covariates.csv"},
                {"det_covariates", "det_covariates.csv"}};
  if (ds.truth) {
    write_json_file(dir / "truth.json", truth_to_json(*ds.truth));
    files["truth"] = "truth.json";
  } else if (fs::exists(dir / "truth.json")) {
    fs::remove(dir / "truth.json");
  }
  Json manifest = {{"format_version", kFormatVersion},
                   {"I", I},
                   {"T", T},
                   {"J", J},
                   {"occ_columns", ds.cov.occ.names()},
                   {"det_columns", ds.cov.det.names()},
                   {"files", files},
                   {"info", ds.info}};
  write_json_file(dir / "manifest.json", manifest);
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw DataError("dataset manifest not found: " + mpath.string());
  const Json manifest = read_json_file(mpath);
  Dataset ds;
  int I = 0, T = 0, J = 0;
  Json files;
  try {
    I = manifest.at("I").get<int>();
    T = manifest.at("T").get<int>();
    J = manifest.at("J").get<int>();
    files = manifest.at("files");
    if (manifest.contains("info")) ds.info = manifest["info"];
  } catch (const Json::exception& e) {
    throw DataError("malformed dataset manifest: " + std::string(e.what()));
  }
  auto file = [&](const char* key) {
    if (!files.contains(key)) throw DataError(std::string("manifest lists no '") + key + "' file");
    return dir / files[key].get<std::string>();
  };
  ds.data = read_encounter(file("encounter"), file("encounter_sidecar"));
  if (ds.data.sites() != I || ds.data.primaries() != T || ds.data.secondaries() != J) {
    throw DataError("encounter dimensions disagree with the manifest");
  }
  ds.coords = read_coords(file("coords"));
  if (ds.coords.size() != static_cast<std::size_t>(I)) {
    throw DataError("coords.csv must list exactly I sites");
  }
  ds.cov.occ = read_occ_covariates(file("occ_covariates"), I, T);
  ds.cov.det = read_det_covariates(file("det_covariates"), I, T, J);
  if (files.contains("truth")) ds.truth = truth_from_json(read_json_file(file("truth")));
  return ds;
}

}  // namespace stocc
