#pragma once

#include <vector>

#include "capmat/geometry.hpp"

namespace capmat {

/// Per-resonator contrast delta_i, wave speed v_i and volume |D_i|.
struct MaterialParams {
  std::vector<double> contrast;
  std::vector<double> speed;
  std::vector<double> volume;

  static MaterialParams uniform(const UnitCell& cell, double contrast, double speed);

  std::size_t size() const noexcept { return contrast.size(); }
  void validate(std::size_t n) const;
  /// delta_i v_i^2 / |D_i|
  std::vector<double> scaleFactors() const;
};

}  // namespace capmat
