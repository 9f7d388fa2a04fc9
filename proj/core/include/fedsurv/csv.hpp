#pragma once

#include "fedsurv/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fedsurv {

/// Quote-aware CSV split of a full document into rows of fields.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

struct IngestReport {
  SurvivalDataset data;
  int dropped_rows = 0;
  std::vector<std::string> warnings;
};

/// Reads a dataset CSV: header `time,event,<variables...>`, then an
/// optional sidecar kinds line `#kinds,<kind>,...` aligned with the
/// variable columns (continuous assumed otherwise). Rows with missing
/// (empty) cells are dropped with a counted warning; malformed values
/// (nonnumeric time, event outside {0,1}) are errors naming the row.
IngestReport ingest_csv(const std::string& path, int site_id = 0,
                        const std::vector<std::string>& categorical_overrides = {});

/// Inverse of ingest_csv, full precision, including the kinds line.
std::string dataset_to_csv(const SurvivalDataset& data);

}  // namespace fedsurv
