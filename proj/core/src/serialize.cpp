#include "capmat/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "capmat/error.hpp"

namespace capmat {

using nlohmann::json;

std::string formatNumber(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Table::Table(std::string name, std::vector<std::string> columns) : name_(std::move(name)), columns_(std::move(columns)) {}

void Table::addRow(std::vector<std::string> cells) {
  require(cells.size() == columns_.size(), ErrorKind::LengthMismatch,
          "row of width " + std::to_string(cells.size()) + " in table " + name_ + " with " +
              std::to_string(columns_.size()) + " columns");
  rows_.push_back(std::move(cells));
}

namespace {
std::string csvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace

std::string Table::csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) out += ',';
      out += csvField(cells[k]);
    }
    out += '\n';
  };
  line(columns_);
  for (const auto& r : rows_) line(r);
  return out;
}

std::string cell(double v) { return formatNumber(v); }
std::string cell(long long v) { return std::to_string(v); }
std::string cell(std::size_t v) { return std::to_string(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(bool v) { return v ? "true" : "false"; }
std::string cell(const std::string& v) { return v; }

std::string rateFitJson(const RateFit& f) {
  json j = {{"classification", toString(f.classification)},
            {"marginMet", f.marginMet},
            {"exponent", f.exponent},
            {"algebraicR2", f.algebraicR2},
            {"rate", f.rate},
            {"exponentialR2", f.exponentialR2},
            {"pointsUsed", f.pointsUsed},
            {"pointsExcluded", f.pointsExcluded}};
  return j.dump();
}

std::string realSpaceJson(const RealSpaceCoefficients& c) {
  json pts = json::array();
  json mats = json::array();
  for (std::size_t p = 0; p < c.points.size(); ++p) {
    pts.push_back({c.points[p][0], c.points[p][1], c.points[p][2]});
    json m = json::array();
    for (Eigen::Index i = 0; i < c.matrices[p].rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < c.matrices[p].cols(); ++j) row.push_back(c.matrices[p](i, j));
      m.push_back(row);
    }
    mats.push_back(m);
  }
  json out = {{"latticePoints", pts},
              {"matrices", mats},
              {"quadrature", {{"kind", toString(c.quadratureKind)}, {"M", c.quadraturePoints}}},
              {"imaginaryResidue", c.imaginaryResidue},
              {"convergenceDelta", c.convergenceDelta},
              {"extrapolated", c.extrapolated}};
  out["decayEstimate"] = c.decay ? json::parse(rateFitJson(*c.decay)) : json(nullptr);
  return out.dump(2);
}

std::string quasiGridJson(const std::vector<Vec3>& alphas, const std::vector<Eigen::MatrixXcd>& matrices,
                          const LatticeSumScheme& scheme, const std::string& backend) {
  require(alphas.size() == matrices.size(), ErrorKind::LengthMismatch, "alpha grid and samples differ in length");
  json grid = json::array();
  json mats = json::array();
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    grid.push_back({alphas[k].x(), alphas[k].y(), alphas[k].z()});
    json m = json::array();
    for (Eigen::Index i = 0; i < matrices[k].rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < matrices[k].cols(); ++j)
        row.push_back({matrices[k](i, j).real(), matrices[k](i, j).imag()});
      m.push_back(row);
    }
    mats.push_back(m);
  }
  json out = {{"alphaGrid", grid},
              {"matrices", mats},
              {"scheme", scheme.name()},
              {"backend", backend},
              {"tolerances", {{"latticeSum", scheme.tolerance}}}};
  return out.dump(2);
}

void writeFile(const std::string& path, const std::string& contents) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::InvalidArgument, "cannot write '" + path + "'");
  out << contents;
  require(static_cast<bool>(out), ErrorKind::InvalidArgument, "failed writing '" + path + "'");
}

}  // namespace capmat
