#include "capmat/materials.hpp"

#include <cmath>

#include "capmat/error.hpp"

namespace capmat {

MaterialParams MaterialParams::uniform(const UnitCell& cell, double contrast, double speed) {
  MaterialParams m;
  for (const auto& s : cell.spheres) {
    m.contrast.push_back(contrast);
    m.speed.push_back(speed);
    m.volume.push_back(s.volume());
  }
  return m;
}

void MaterialParams::validate(std::size_t n) const {
  require(contrast.size() == n && speed.size() == n && volume.size() == n, ErrorKind::LengthMismatch,
          "material parameters must be given for each of the " + std::to_string(n) + " resonators");
  for (std::size_t i = 0; i < n; ++i) {
    require(contrast[i] > 0.0 && std::isfinite(contrast[i]), ErrorKind::InvalidArgument,
            "contrast must be positive");
    require(speed[i] > 0.0 && std::isfinite(speed[i]), ErrorKind::InvalidArgument,
            "wave speed must be positive");
    require(volume[i] > 0.0 && std::isfinite(volume[i]), ErrorKind::InvalidArgument,
            "resonator volume must be positive");
  }
}

std::vector<double> MaterialParams::scaleFactors() const {
  std::vector<double> s(contrast.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = contrast[i] * speed[i] * speed[i] / volume[i];
  return s;
}

}  // namespace capmat
