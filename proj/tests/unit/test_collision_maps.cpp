#include <doctest.h>

#include <cmath>

#include "ksbt/collision_maps.hpp"
#include "ksbt/errors.hpp"

using namespace ksbt;

TEST_CASE("binary frames conserve momentum and energy and are involutive") {
  for (int d : {2, 3}) {
    Rng rng = make_stream(11, d);
    for (int i = 0; i < 2000; ++i) {
      const Vec3 v = sample_velocity(d, rng, 3.0), v1 = sample_velocity(d, rng, 3.0);
      const auto f = make_binary_frame(v, v1, sample_direction(d, rng));
      const auto r = residuals(f);
      CHECK(r.momentum <= 1e-14);
      CHECK(r.energy <= 1e-14);
      CHECK(r.relative_speed <= 1e-13);
      CHECK(r.specular <= 1e-14);
      CHECK(r.involution <= 1e-14);
    }
  }
}

TEST_CASE("ternary frames conserve momentum, energy and |u~|") {
  for (int d : {2, 3}) {
    Rng rng = make_stream(12, d);
    for (int i = 0; i < 2000; ++i) {
      const Vec3 v = sample_velocity(d, rng), v1 = sample_velocity(d, rng), v2 = sample_velocity(d, rng);
      const auto [o1, o2] = sample_direction_pair(d, rng);
      const auto r = residuals(make_ternary_frame(v, v1, v2, o1, o2));
      CHECK(r.momentum <= 1e-13);
      CHECK(r.energy <= 1e-13);
      CHECK(r.relative_speed <= 1e-13);
      CHECK(r.specular <= 1e-13);
      CHECK(r.involution <= 1e-13);
    }
  }
}

TEST_CASE("explicit binary collision") {
  // Head-on along e1 swaps the velocities.
  const auto [vp, v1p] = binary_map({1, 0, 0}, {-1, 0, 0}, {1, 0, 0});
  CHECK(vp[0] == doctest::Approx(-1.0));
  CHECK(v1p[0] == doctest::Approx(1.0));
  // Grazing direction leaves them unchanged.
  const auto [a, b] = binary_map({1, 0, 0}, {-1, 0, 0}, {0, 1, 0});
  CHECK(a[0] == 1.0);
  CHECK(b[0] == -1.0);
}

TEST_CASE("maps reject non-unit directions") {
  CHECK_THROWS_AS(binary_map({0, 0, 0}, {1, 0, 0}, {1, 1, 0}), InvalidInput);
  CHECK_THROWS_AS(ternary_map({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 0, 0}, {1, 0, 0}), InvalidInput);
}

TEST_CASE("ellipsoid point lies on the ellipsoid") {
  Rng rng = make_stream(3, 0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 v = sample_velocity(3, rng), v1 = sample_velocity(3, rng), v2 = sample_velocity(3, rng);
    const auto [n1, n2] = ellipsoid_point(v, v1, v2);
    CHECK(ellipsoid_form(n1, n2) == doctest::Approx(1.0).epsilon(1e-14));
  }
  const auto [z1, z2] = ellipsoid_point({1, 1, 0}, {1, 1, 0}, {1, 1, 0});
  CHECK(norm(z1) == 0.0);
  CHECK(norm(z2) == 0.0);
}

TEST_CASE("streams are reproducible and distinct") {
  Rng a = make_stream(5, 1), b = make_stream(5, 1), c = make_stream(5, 2);
  const auto x = a(), y = b(), z = c();
  CHECK(x == y);
  CHECK(x != z);
}

TEST_CASE("explicit frames by direct substitution") {
  const double s = std::sqrt(0.5);
  const auto [vp, v1p] = binary_map({0, 0, 0}, {2, 0, 0}, {s, s, 0});
  CHECK(vp[0] == doctest::Approx(1.0));
  CHECK(vp[1] == doctest::Approx(1.0));
  CHECK(v1p[0] == doctest::Approx(1.0));
  CHECK(v1p[1] == doctest::Approx(-1.0));
  CHECK(norm2(vp) + norm2(v1p) == doctest::Approx(4.0));

  const auto t = ternary_map({0, 0, 0}, {1, 0, 0}, {0, 0, 0}, {s, 0, 0}, {0, s, 0});
  CHECK(t.vs[0] == doctest::Approx(0.5));
  CHECK(t.vs[1] == doctest::Approx(0.5));
  CHECK(t.v1s[0] == doctest::Approx(0.5));
  CHECK(t.v1s[1] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(t.v2s[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(t.v2s[1] == doctest::Approx(-0.5));
  const Vec3 p = t.vs + t.v1s + t.v2s;
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(norm2(t.vs) + norm2(t.v1s) + norm2(t.v2s) == doctest::Approx(1.0));
  CHECK(u_tilde_mag({0, 0, 0}, {1, 0, 0}, {0, 0, 0}) == doctest::Approx(std::sqrt(2.0)));
}
