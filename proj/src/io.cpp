#include "spider/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace spider {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : width_(header.size()) {
  if (header.empty()) throw PreconditionError("csv: empty header");
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k) text_ += ',';
    text_ += header[k];
  }
  text_ += '\n';
}

void CsvTable::row(const std::vector<CsvCell>& cells) {
  if (cells.size() != width_) throw PreconditionError("csv: row width does not match header");
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) text_ += ',';
    if (const auto* d = std::get_if<double>(&cells[k]))
      text_ += format_number(*d);
    else if (const auto* n = std::get_if<long long>(&cells[k]))
      text_ += std::to_string(*n);
    else
      text_ += std::get<std::string>(cells[k]);
  }
  text_ += '\n';
  ++rows_;
}

CsvTable paths_table(const PathEnsemble& ens) {
  CsvTable t({"path_id", "t", "x", "branch", "l"});
  for (Eigen::Index r = 0; r < ens.x.rows(); ++r) {
    if (!ens.valid[static_cast<std::size_t>(r)]) continue;
    for (Eigen::Index n = 0; n < ens.times.size(); ++n)
      t.row({static_cast<long long>(r), ens.times(n), ens.x(r, n), static_cast<long long>(ens.branch(r, n)), ens.l(r, n)});
  }
  return t;
}

CsvTable signed_paths_table(const Eigen::VectorXd& times, const Eigen::MatrixXd& y, const Eigen::MatrixXd& l,
                            const std::vector<char>& valid) {
  CsvTable t({"path_id", "t", "y", "l"});
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    if (!valid[static_cast<std::size_t>(r)]) continue;
    for (Eigen::Index n = 0; n < times.size(); ++n) t.row({static_cast<long long>(r), times(n), y(r, n), l(r, n)});
  }
  return t;
}

std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

nlohmann::json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json to_json(const Estimate& e) { return {{"mean", e.mean}, {"se", e.se}}; }

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

ArtifactSet::ArtifactSet(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw PreconditionError("cannot create output directory '" + dir_.string() + "': " + ec.message());
}

void ArtifactSet::write(const std::string& name, const std::string& kind, const std::string& content) {
  const auto path = dir_ / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  out.close();
  if (!out) throw NumericalError("failed to write '" + path.string() + "'");
  std::ostringstream hex;
  hex << std::hex;
  hex.width(16);
  hex.fill('0');
  hex << fnv1a64(content);
  records_.push_back({name, kind, content.size(), hex.str()});
}

nlohmann::json ArtifactSet::listing() const {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : records_) a.push_back({{"path", r.path}, {"kind", r.kind}, {"bytes", r.bytes}, {"fnv1a64", r.fnv1a64}});
  return a;
}

}  // namespace spider
