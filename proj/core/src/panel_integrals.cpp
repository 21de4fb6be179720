#include "capmat/panel_integrals.hpp"

#include <array>
#include <cmath>

namespace capmat {

double trianglePotential(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p) {
  Vec3 n = (b - a).cross(c - a);
  const double twiceArea = n.norm();
  if (twiceArea == 0.0) return 0.0;
  n /= twiceArea;
  const double h = (p - a).dot(n);
  const double absH = std::abs(h);
  const Vec3 rho = p - h * n;
  const double size = std::sqrt(twiceArea);
  const double tiny = 1e-14 * size;

  const std::array<const Vec3*, 3> v{&a, &b, &c};
  double sum = 0.0;
  for (int e = 0; e < 3; ++e) {
    const Vec3& s = *v[e];
    const Vec3& t = *v[(e + 1) % 3];
    const Vec3 edge = t - s;
    const double len = edge.norm();
    const Vec3 lhat = edge / len;
    const Vec3 u = lhat.cross(n);
    const double p0 = (s - rho).dot(u);
    if (std::abs(p0) < tiny) continue;
    const double lp = (t - rho).dot(lhat);
    const double lm = (s - rho).dot(lhat);
    const double rp = (p - t).norm();
    const double rm = (p - s).norm();
    const double r0sq = p0 * p0 + h * h;
    double logTerm;
    if (lp > 0.0 && lm >= 0.0) {
      logTerm = std::log((rp + lp) / (rm + lm));
    } else if (lp <= 0.0 && lm < 0.0) {
      logTerm = std::log((rm - lm) / (rp - lp));
    } else {
      // projection falls inside the edge; both forms are stable
      logTerm = std::log((rp + lp) * (rm - lm) / r0sq);
    }
    double angle = 0.0;
    if (absH > 0.0)
      angle = std::atan(p0 * lp / (r0sq + absH * rp)) - std::atan(p0 * lm / (r0sq + absH * rm));
    sum += p0 * logTerm - absH * angle;
  }
  return sum;
}

}  // namespace capmat
