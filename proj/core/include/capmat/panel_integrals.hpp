#pragma once

#include "capmat/geometry.hpp"

namespace capmat {

/// Integral of 1/|p - y| over the flat triangle (a, b, c), evaluated in closed form.
/// Valid for any p, including points on the triangle.
double trianglePotential(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p);

}  // namespace capmat
