#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "ksbt/errors.hpp"
#include "ksbt/quadrature.hpp"

using namespace ksbt;
constexpr double pi = std::numbers::pi;

TEST_CASE("Gauss-Legendre integrates polynomials of degree 2n-1 exactly") {
  for (int n : {1, 2, 5, 12}) {
    const Rule1D r = gauss_legendre(n, -0.5, 2.0);
    for (int p = 0; p <= 2 * n - 1; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], p);
      const double exact = (std::pow(2.0, p + 1) - std::pow(-0.5, p + 1)) / (p + 1);
      CHECK(s == doctest::Approx(exact).epsilon(1e-12));
    }
  }
}

TEST_CASE("Gauss-Hermite moments for the weight exp(-beta x^2)") {
  for (double beta : {0.5, 1.0, 3.0}) {
    const Rule1D r = gauss_hermite(8, beta);
    double m0 = 0, m2 = 0, m4 = 0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
      const double x = r.nodes[i], w = r.weights[i];
      m0 += w;
      m2 += w * x * x;
      m4 += w * x * x * x * x;
    }
    CHECK(m0 == doctest::Approx(std::sqrt(pi / beta)).epsilon(1e-13));
    CHECK(m2 == doctest::Approx(std::sqrt(pi) / (2 * std::pow(beta, 1.5))).epsilon(1e-13));
    CHECK(m4 == doctest::Approx(3 * std::sqrt(pi) / (4 * std::pow(beta, 2.5))).epsilon(1e-13));
  }
}

TEST_CASE("sphere areas and ball volumes") {
  CHECK(sphere_area(2) == doctest::Approx(2 * pi));
  CHECK(sphere_area(3) == doctest::Approx(4 * pi));
  CHECK(sphere_area(4) == doctest::Approx(2 * pi * pi));
  CHECK(sphere_area(6) == doctest::Approx(pi * pi * pi));
  CHECK(ball_volume(2) == doctest::Approx(pi));
  CHECK(ball_volume(3) == doctest::Approx(4 * pi / 3));
}

TEST_CASE("sphere rules: unit points, weights sum to the area, half rules to half") {
  for (int d : {2, 3}) {
    for (bool half : {false, true}) {
      const SphereRule s = sphere_rule(d, 12, half);
      const double sum = std::accumulate(s.weights.begin(), s.weights.end(), 0.0);
      CHECK(sum == doctest::Approx(sphere_area(d)));
      for (const auto& p : s.a) CHECK(norm(p) == doctest::Approx(1.0).epsilon(1e-14));
      const SphereRule t = double_sphere_rule(d, 4, 12, half);
      const double st = std::accumulate(t.weights.begin(), t.weights.end(), 0.0);
      CHECK(st == doctest::Approx(sphere_area(2 * d)).epsilon(1e-10));
      for (std::size_t i = 0; i < t.size(); ++i) CHECK(norm2(t.a[i]) + norm2(t.b[i]) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("sphere rule integrates z^2 on S^{d-1}") {
  // |S^{d-1}| / d
  for (int d : {2, 3}) {
    const SphereRule s = sphere_rule(d, 16);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += s.weights[i] * s.a[i][0] * s.a[i][0];
    CHECK(acc == doctest::Approx(sphere_area(d) / d).epsilon(1e-12));
  }
}
