#include "ksbt/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "ksbt/errors.hpp"

namespace ksbt {

namespace {
constexpr double kPi = std::numbers::pi;
}

Rule1D gauss_legendre(int n, double a, double b) {
  if (n < 1) throw InvalidInput("gauss_legendre: n must be positive");
  Rule1D r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = mid - half * x;
    r.nodes[n - 1 - i] = mid + half * x;
    r.weights[i] = r.weights[n - 1 - i] = half * w;
  }
  return r;
}

Rule1D gauss_hermite(int n, double beta) {
  if (n < 1) throw InvalidInput("gauss_hermite: n must be positive");
  if (!(beta > 0.0)) throw InvalidInput("gauss_hermite: beta must be positive");
  // Newton iteration on orthonormal Hermite polynomials, weight exp(-x^2).
  const double pim4 = std::pow(kPi, -0.25);
  Rule1D r;
  r.nodes.resize(n);
  r.weights.resize(n);
  double z = 0.0;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * r.nodes[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * r.nodes[1];
    else
      z = 2.0 * z - r.nodes[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 200; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    r.nodes[i] = z;
    r.nodes[n - 1 - i] = -z;
    r.weights[i] = r.weights[n - 1 - i] = 2.0 / (pp * pp);
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  const double s = 1.0 / std::sqrt(beta);
  for (int i = 0; i < n; ++i) {
    r.nodes[i] *= s;
    r.weights[i] *= s;
  }
  return r;
}

SphereRule sphere_rule(int dim, int n_ang, bool half) {
  if (n_ang < 2 || n_ang % 2 != 0) throw InvalidInput("sphere_rule: n_ang must be even");
  SphereRule r;
  if (dim == 2) {
    const int count = half ? n_ang / 2 : n_ang;
    const double w = 2.0 * kPi / n_ang * (half ? 2.0 : 1.0);
    for (int k = 0; k < count; ++k) {
      const double th = 2.0 * kPi * (k + 0.5) / n_ang;
      r.a.push_back({std::cos(th), std::sin(th), 0.0});
      r.weights.push_back(w);
    }
  } else if (dim == 3) {
    const Rule1D zr = gauss_legendre(n_ang / 2);
    // Antipode of (z, phi) is (-z, phi + pi); keep z > 0 when halving.
    for (std::size_t i = 0; i < zr.nodes.size(); ++i) {
      const double z = zr.nodes[i];
      if (half && z < 0.0) continue;
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      for (int k = 0; k < n_ang; ++k) {
        const double ph = 2.0 * kPi * (k + 0.5) / n_ang;
        r.a.push_back({s * std::cos(ph), s * std::sin(ph), z});
        r.weights.push_back(zr.weights[i] * 2.0 * kPi / n_ang * (half ? 2.0 : 1.0));
      }
    }
  } else {
    throw InvalidInput("sphere_rule: dimension must be 2 or 3");
  }
  return r;
}

SphereRule double_sphere_rule(int dim, int n_chi, int n_ang, bool half) {
  if (n_chi < 1) throw InvalidInput("double_sphere_rule: n_chi must be positive");
  const SphereRule s1 = sphere_rule(dim, n_ang, half);
  const SphereRule s2 = sphere_rule(dim, n_ang, false);
  // In s = sin^2(chi) the latitude measure cos^{d-1} sin^{d-1} dchi becomes
  // (s (1 - s))^{(d-2)/2} ds / 2: Gauss-Legendre for d = 2, Gauss-Chebyshev
  // of the second kind for d = 3. Both integrate the area exactly.
  Rule1D cr;
  if (dim == 2) {
    cr = gauss_legendre(n_chi, 0.0, 1.0);
    for (double& w : cr.weights) w *= 0.5;
  } else {
    for (int i = 1; i <= n_chi; ++i) {
      const double th = i * kPi / (n_chi + 1);
      cr.nodes.push_back(0.5 * (1.0 + std::cos(th)));
      cr.weights.push_back(kPi / (8.0 * (n_chi + 1)) * std::sin(th) * std::sin(th));
    }
  }
  SphereRule r;
  r.weights.reserve(cr.nodes.size() * s1.size() * s2.size());
  for (std::size_t c = 0; c < cr.nodes.size(); ++c) {
    const double si = std::sqrt(cr.nodes[c]), co = std::sqrt(1.0 - cr.nodes[c]);
    const double jac = cr.weights[c];
    for (std::size_t i = 0; i < s1.size(); ++i) {
      for (std::size_t j = 0; j < s2.size(); ++j) {
        r.a.push_back(co * s1.a[i]);
        r.b.push_back(si * s2.a[j]);
        r.weights.push_back(jac * s1.weights[i] * s2.weights[j]);
      }
    }
  }
  return r;
}

double sphere_area(int n) { return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n); }

double ball_volume(int n) { return std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n + 1.0); }

}  // namespace ksbt
