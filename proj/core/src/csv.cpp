#include "fedsurv/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedsurv {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  size_t i = 0;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(row);
    row.clear();
  };
  while (i < text.size()) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c != '\r') {
      field += c;
    }
    ++i;
  }
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

namespace {

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

IngestReport ingest_csv(const std::string& path, int site_id,
                        const std::vector<std::string>& categorical_overrides) {
  const auto rows = parse_csv(read_file(path));
  if (rows.empty()) throw std::runtime_error(path + ": empty file");
  const auto& header = rows[0];
  if (header.size() < 2 || header[0] != "time" || header[1] != "event")
    throw std::runtime_error(path + ": header must start with time,event");
  const size_t p = header.size() - 2;
  std::vector<std::string> names(header.begin() + 2, header.end());

  std::vector<VariableKind> kinds(p, VariableKind::continuous);
  size_t first_data_row = 1;
  if (rows.size() > 1 && !rows[1].empty() && rows[1][0] == "#kinds") {
    if (rows[1].size() != header.size())
      throw std::runtime_error(path + ": kinds line does not match the header");
    for (size_t k = 0; k < p; ++k) kinds[k] = variable_kind_from_string(rows[1][k + 2]);
    first_data_row = 2;
  }
  for (const auto& name : categorical_overrides) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
      throw std::runtime_error(path + ": unknown categorical override " + name);
    kinds[static_cast<size_t>(it - names.begin())] = VariableKind::categorical;
  }

  std::vector<SurvivalRecord> records;
  int dropped = 0;
  std::vector<std::string> warnings;
  for (size_t r = first_data_row; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;  // trailing blank line
    const std::string where = path + ": row " + std::to_string(r + 1);
    if (row.size() != header.size())
      throw std::runtime_error(where + ": expected " + std::to_string(header.size()) +
                               " fields, got " + std::to_string(row.size()));
    const bool missing = std::any_of(row.begin(), row.end(),
                                     [](const std::string& f) { return f.empty(); });
    if (missing) {
      ++dropped;
      continue;
    }
    const auto time = parse_number(row[0]);
    if (!time) throw std::runtime_error(where + ": nonnumeric time '" + row[0] + "'");
    if (*time < 0) throw std::runtime_error(where + ": negative time");
    const auto event = parse_number(row[1]);
    if (!event || (*event != 0.0 && *event != 1.0))
      throw std::runtime_error(where + ": event must be 0 or 1, got '" + row[1] + "'");
    SurvivalRecord rec;
    rec.time = *time;
    rec.event = static_cast<int>(*event);
    rec.site_id = site_id;
    rec.covariates = Eigen::VectorXd(static_cast<Eigen::Index>(p));
    for (size_t k = 0; k < p; ++k) {
      const auto v = parse_number(row[k + 2]);
      if (!v) throw std::runtime_error(where + ": nonnumeric value '" + row[k + 2] + "' for " +
                                       names[k]);
      rec.covariates(static_cast<Eigen::Index>(k)) = *v;
    }
    records.push_back(std::move(rec));
  }
  if (dropped > 0)
    warnings.push_back(path + ": dropped " + std::to_string(dropped) +
                       " row(s) with missing values");
  if (records.empty()) throw std::runtime_error(path + ": no usable rows");
  return {SurvivalDataset(std::move(records), std::move(names), std::move(kinds)), dropped,
          std::move(warnings)};
}

std::string dataset_to_csv(const SurvivalDataset& data) {
  std::string out = "time,event";
  for (const auto& name : data.variable_names()) out += "," + name;
  out += "\n#kinds,,";
  for (int k = 0; k < data.p(); ++k) {
    out += to_string(data.variable_kinds()[static_cast<size_t>(k)]);
    if (k + 1 < data.p()) out += ",";
  }
  out += "\n";
  char buf[40];
  for (const auto& r : data.records()) {
    std::snprintf(buf, sizeof buf, "%.17g", r.time);
    out += buf;
    out += "," + std::to_string(r.event);
    for (Eigen::Index k = 0; k < r.covariates.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", r.covariates(k));
      out += ",";
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace fedsurv
