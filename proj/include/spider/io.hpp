// Artifact writers: CSV with shortest round-trip numbers, JSON, and a
// manifest listing every file written in a run.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "spider/simulator.hpp"

namespace spider {

/// Shortest decimal string that parses back to the same double.
std::string format_number(double v);

using CsvCell = std::variant<double, long long, std::string>;

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void row(const std::vector<CsvCell>& cells);
  std::size_t rows() const { return rows_; }
  const std::string& text() const { return text_; }

 private:
  std::size_t width_;
  std::size_t rows_ = 0;
  std::string text_;
};

/// One row per (path, recorded time): path_id, t, x, branch, l.
CsvTable paths_table(const PathEnsemble& ens);
/// Signed variant: path_id, t, y, l.
CsvTable signed_paths_table(const Eigen::VectorXd& times, const Eigen::MatrixXd& y, const Eigen::MatrixXd& l,
                            const std::vector<char>& valid);

/// Pretty JSON text, two-space indent, trailing newline.
std::string json_text(const nlohmann::json& j);

nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Estimate& e);

std::uint64_t fnv1a64(const std::string& bytes);

struct ArtifactRecord {
  std::string path;  // relative to the output directory
  std::string kind;
  std::size_t bytes = 0;
  std::string fnv1a64;
};

/// Writes files into one directory and remembers them for the manifest.
class ArtifactSet {
 public:
  explicit ArtifactSet(std::filesystem::path dir);
  const std::filesystem::path& dir() const { return dir_; }
  void write(const std::string& name, const std::string& kind, const std::string& content);
  void write(const std::string& name, const CsvTable& table) { write(name, "csv", table.text()); }
  void write(const std::string& name, const nlohmann::json& j) { write(name, "json", json_text(j)); }
  const std::vector<ArtifactRecord>& records() const { return records_; }
  nlohmann::json listing() const;

 private:
  std::filesystem::path dir_;
  std::vector<ArtifactRecord> records_;
};

}  // namespace spider
