#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "capmat/floquet.hpp"
#include "capmat/geometry.hpp"
#include "capmat/latticegreen.hpp"
#include "capmat/ratefit.hpp"

namespace capmat {

/// Round-trip text for the double ("%.17g"); nan and inf spelled out.
std::string formatNumber(double v);

/// One CSV table. Cells are stored as text so output is byte-stable.
class Table {
 public:
  Table(std::string name, std::vector<std::string> columns);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

  /// Throws LengthMismatch if the row width differs from the column count.
  void addRow(std::vector<std::string> cells);
  std::string csv() const;

 private:
  std::string name_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Cell text helpers for Table rows.
std::string cell(double v);
std::string cell(long long v);
std::string cell(std::size_t v);
std::string cell(int v);
std::string cell(bool v);
std::string cell(const std::string& v);

std::string realSpaceJson(const RealSpaceCoefficients& coeffs);
std::string quasiGridJson(const std::vector<Vec3>& alphas, const std::vector<Eigen::MatrixXcd>& matrices,
                          const LatticeSumScheme& scheme, const std::string& backend);
std::string rateFitJson(const RateFit& fit);

/// Writes bytes to a file, creating parent directories. Throws InvalidArgument on failure.
void writeFile(const std::string& path, const std::string& contents);

}  // namespace capmat
