#include "capmat/harmonics.hpp"

#include <cmath>
#include <numbers>

#include "capmat/error.hpp"

namespace capmat {

namespace {

// Normalized associated Legendre values Pbar_l^m(cos theta) scaled so that
// Y_l0 = Pbar_l^0 and Y_l,+-m = sqrt(2) Pbar_l^m trig(m phi).
void normalizedLegendre(int degree, double ct, double st, std::vector<double>& p) {
  const int n = harmonicCount(degree);
  p.assign(static_cast<std::size_t>(n), 0.0);
  auto at = [&](int l, int m) -> double& { return p[static_cast<std::size_t>(harmonicIndex(l, m))]; };
  at(0, 0) = std::sqrt(1.0 / (4.0 * std::numbers::pi));
  for (int m = 1; m <= degree; ++m)
    at(m, m) = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * st * at(m - 1, m - 1);
  for (int m = 0; m < degree; ++m) at(m + 1, m) = std::sqrt(2.0 * m + 3.0) * ct * at(m, m);
  for (int m = 0; m <= degree; ++m) {
    for (int l = m + 2; l <= degree; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l * l - m * m)));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - m * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      at(l, m) = a * (ct * at(l - 1, m) - b * at(l - 2, m));
    }
  }
}

}  // namespace

void realSphericalHarmonics(int degree, const Vec3& dir, std::span<double> out) {
  require(degree >= 0, ErrorKind::InvalidArgument, "negative harmonic degree");
  require(static_cast<int>(out.size()) >= harmonicCount(degree), ErrorKind::LengthMismatch,
          "harmonic output buffer too small");
  const double r = dir.norm();
  require(r > 0.0, ErrorKind::InvalidArgument, "spherical harmonics of the zero vector");
  const double ct = dir.z() / r;
  const double rho = std::hypot(dir.x(), dir.y());
  const double st = rho / r;
  const double cp = rho > 0.0 ? dir.x() / rho : 1.0;
  const double sp = rho > 0.0 ? dir.y() / rho : 0.0;

  thread_local std::vector<double> p;
  normalizedLegendre(degree, ct, st, p);
  const double s2 = std::numbers::sqrt2;
  double cm = 1.0;
  double sm = 0.0;
  for (int m = 0; m <= degree; ++m) {
    for (int l = m; l <= degree; ++l) {
      const double v = p[static_cast<std::size_t>(harmonicIndex(l, m))];
      if (m == 0) {
        out[static_cast<std::size_t>(harmonicIndex(l, 0))] = v;
      } else {
        out[static_cast<std::size_t>(harmonicIndex(l, m))] = s2 * v * cm;
        out[static_cast<std::size_t>(harmonicIndex(l, -m))] = s2 * v * sm;
      }
    }
    const double c = cm * cp - sm * sp;
    sm = sm * cp + cm * sp;
    cm = c;
  }
}

void regularSolidHarmonics(int degree, const Vec3& x, std::span<double> out) {
  const double r = x.norm();
  if (r == 0.0) {
    for (int k = 0; k < harmonicCount(degree); ++k) out[static_cast<std::size_t>(k)] = 0.0;
    out[0] = std::sqrt(1.0 / (4.0 * std::numbers::pi));
    return;
  }
  realSphericalHarmonics(degree, x, out);
  double rl = 1.0;
  for (int l = 0; l <= degree; ++l) {
    for (int m = -l; m <= l; ++m) out[static_cast<std::size_t>(harmonicIndex(l, m))] *= rl;
    rl *= r;
  }
}

void irregularSolidHarmonics(int degree, const Vec3& x, std::span<double> out) {
  const double r = x.norm();
  require(r > 0.0, ErrorKind::InvalidArgument, "irregular solid harmonic at the origin");
  realSphericalHarmonics(degree, x, out);
  double rl = 1.0 / r;
  for (int l = 0; l <= degree; ++l) {
    for (int m = -l; m <= l; ++m) out[static_cast<std::size_t>(harmonicIndex(l, m))] *= rl;
    rl /= r;
  }
}

QuadratureRule1D gaussLegendre(int n) {
  require(n >= 1, ErrorKind::InvalidArgument, "Gauss-Legendre rule needs at least one node");
  QuadratureRule1D rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

SphereRule sphereRule(int nTheta) {
  require(nTheta >= 1, ErrorKind::InvalidArgument, "sphere rule needs at least one latitude");
  const QuadratureRule1D gl = gaussLegendre(nTheta);
  const int nPhi = 2 * nTheta;
  SphereRule rule;
  rule.exactDegree = 2 * nTheta - 1;
  rule.directions.reserve(static_cast<std::size_t>(nTheta * nPhi));
  rule.weights.reserve(static_cast<std::size_t>(nTheta * nPhi));
  for (int i = 0; i < nTheta; ++i) {
    const double ct = gl.nodes[static_cast<std::size_t>(i)];
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    for (int j = 0; j < nPhi; ++j) {
      const double phi = 2.0 * std::numbers::pi * (j + 0.5) / nPhi;
      rule.directions.emplace_back(st * std::cos(phi), st * std::sin(phi), ct);
      rule.weights.push_back(gl.weights[static_cast<std::size_t>(i)] * 2.0 * std::numbers::pi / nPhi);
    }
  }
  return rule;
}

SphereRule sphereRuleForDegree(int degree) { return sphereRule(degree / 2 + 1); }

}  // namespace capmat
