#pragma once

// Dataset directories: manifest.json, encounter.csv + encounter.json,
// coords.csv, occ_covariates.csv, det_covariates.csv and, for simulated
// data, truth.json.

#include <filesystem>
#include <optional>

#include "stocc/core.hpp"
#include "stocc/json_io.hpp"
#include "stocc/simulator.hpp"
#include "stocc/spatial.hpp"

namespace stocc {

struct Dataset {
  SiteCoords coords;
  Covariates cov;
  EncounterArray data;
  std::optional<Truth> truth;
  /// Free-form provenance: scenario spec and seed for simulated data,
  /// standardisation constants for ingested data.
  Json info = Json::object();
};

Dataset from_simulation(const SimulatedDataset& sim);

/// Creates `dir` if needed and overwrites the dataset files.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);

/// Throws DataError when the manifest or any listed file is missing or
/// inconsistent.
Dataset read_dataset(const std::filesystem::path& dir);

Json truth_to_json(const Truth& t);
Truth truth_from_json(const Json& j);

/// coords.csv with columns site_id, lat, lon.
void write_coords(const std::filesystem::path& path, const SiteCoords& coords);
SiteCoords read_coords(const std::filesystem::path& path);

/// Covariate CSVs keyed by (site_id[, primary[, secondary]]), one-based.
void write_occ_covariates(const std::filesystem::path& path, const DesignMatrix& occ, int T);
DesignMatrix read_occ_covariates(const std::filesystem::path& path, int I, int T);
void write_det_covariates(const std::filesystem::path& path, const DesignMatrix& det, int T, int J);
DesignMatrix read_det_covariates(const std::filesystem::path& path, int I, int T, int J);

}  // namespace stocc
