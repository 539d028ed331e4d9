#include "ksbt/collision_maps.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ksbt/errors.hpp"

namespace ksbt {

std::pair<Vec3, Vec3> binary_map(const Vec3& v, const Vec3& v1, const Vec3& omega) {
  if (std::abs(norm(omega) - 1.0) > 1e-12) throw InvalidInput("binary_map: impact direction is not a unit vector");
  const double c = dot(omega, v1 - v);
  return {v + c * omega, v1 - c * omega};
}

TernaryPost ternary_map(const Vec3& v, const Vec3& v1, const Vec3& v2, const Vec3& omega1, const Vec3& omega2) {
  if (std::abs(norm2(omega1) + norm2(omega2) - 1.0) > 1e-12)
    throw InvalidInput("ternary_map: |w1|^2 + |w2|^2 must equal 1");
  const double c = (dot(omega1, v1 - v) + dot(omega2, v2 - v)) / (1.0 + dot(omega1, omega2));
  return {v + c * (omega1 + omega2), v1 - c * omega1, v2 - c * omega2};
}

double u_tilde_mag(const Vec3& v, const Vec3& v1, const Vec3& v2) {
  return std::sqrt(norm2(v - v1) + norm2(v - v2) + norm2(v1 - v2));
}

std::pair<Vec3, Vec3> ellipsoid_point(const Vec3& v, const Vec3& v1, const Vec3& v2) {
  const double m = u_tilde_mag(v, v1, v2);
  if (m == 0.0) return {Vec3{}, Vec3{}};
  return {(1.0 / m) * (v1 - v), (1.0 / m) * (v2 - v)};
}

double ellipsoid_form(const Vec3& n1, const Vec3& n2) { return norm2(n1) + norm2(n2) + norm2(n1 - n2); }

Vec3 sample_direction(int dim, Rng& rng) {
  std::normal_distribution<double> g;
  for (;;) {
    Vec3 w{};
    for (int a = 0; a < dim; ++a) w[a] = g(rng);
    const double n = norm(w);
    if (n > 1e-300) return (1.0 / n) * w;
  }
}

std::pair<Vec3, Vec3> sample_direction_pair(int dim, Rng& rng) {
  std::normal_distribution<double> g;
  for (;;) {
    Vec3 a{}, b{};
    for (int k = 0; k < dim; ++k) a[k] = g(rng);
    for (int k = 0; k < dim; ++k) b[k] = g(rng);
    const double n = std::sqrt(norm2(a) + norm2(b));
    if (n > 1e-300) return {(1.0 / n) * a, (1.0 / n) * b};
  }
}

BinaryFrame make_binary_frame(const Vec3& v, const Vec3& v1, const Vec3& omega) {
  BinaryFrame f;
  f.v = v;
  f.v1 = v1;
  f.omega = omega;
  f.u = v1 - v;
  std::tie(f.vp, f.v1p) = binary_map(v, v1, omega);
  return f;
}

TernaryFrame make_ternary_frame(const Vec3& v, const Vec3& v1, const Vec3& v2, const Vec3& omega1,
                                const Vec3& omega2) {
  TernaryFrame f;
  f.v = v;
  f.v1 = v1;
  f.v2 = v2;
  f.omega1 = omega1;
  f.omega2 = omega2;
  const TernaryPost p = ternary_map(v, v1, v2, omega1, omega2);
  f.vs = p.vs;
  f.v1s = p.v1s;
  f.v2s = p.v2s;
  f.u_tilde_mag = u_tilde_mag(v, v1, v2);
  return f;
}

namespace {

double max_abs_diff(const Vec3& a, const Vec3& b) {
  return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])});
}

}  // namespace

FrameResiduals residuals(const BinaryFrame& f) {
  const double e_pre = norm2(f.v) + norm2(f.v1);
  const double scale = std::max(e_pre, 1e-300);
  const double speed = std::sqrt(scale);
  FrameResiduals r;
  r.momentum = max_abs_diff(f.vp + f.v1p, f.v + f.v1) / speed;
  r.energy = std::abs(norm2(f.vp) + norm2(f.v1p) - e_pre) / scale;
  const Vec3 up = f.v1p - f.vp;
  r.relative_speed = std::abs(norm(up) - norm(f.u)) / speed;
  r.specular = std::abs(dot(f.omega, up) + dot(f.omega, f.u)) / speed;
  const auto [a, b] = binary_map(f.vp, f.v1p, f.omega);
  r.involution = std::max(max_abs_diff(a, f.v), max_abs_diff(b, f.v1)) / speed;
  return r;
}

FrameResiduals residuals(const TernaryFrame& f) {
  const double e_pre = norm2(f.v) + norm2(f.v1) + norm2(f.v2);
  const double scale = std::max(e_pre, 1e-300);
  const double speed = std::sqrt(scale);
  FrameResiduals r;
  r.momentum = max_abs_diff(f.vs + f.v1s + f.v2s, f.v + f.v1 + f.v2) / speed;
  r.energy = std::abs(norm2(f.vs) + norm2(f.v1s) + norm2(f.v2s) - e_pre) / scale;
  r.relative_speed = std::abs(u_tilde_mag(f.vs, f.v1s, f.v2s) - f.u_tilde_mag) / speed;
  // w.u~ with u~ = (v1 - v, v2 - v), unnormalised.
  const double pre = dot(f.omega1, f.v1 - f.v) + dot(f.omega2, f.v2 - f.v);
  const double post = dot(f.omega1, f.v1s - f.vs) + dot(f.omega2, f.v2s - f.vs);
  r.specular = std::abs(pre + post) / speed;
  const TernaryPost back = ternary_map(f.vs, f.v1s, f.v2s, f.omega1, f.omega2);
  r.involution = std::max({max_abs_diff(back.vs, f.v), max_abs_diff(back.v1s, f.v1), max_abs_diff(back.v2s, f.v2)}) / speed;
  return r;
}

Vec3 sample_velocity(int dim, Rng& rng, double scale) {
  std::normal_distribution<double> g;
  Vec3 v{};
  for (int a = 0; a < dim; ++a) v[a] = scale * g(rng);
  return v;
}

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser on (seed, stream) to decorrelate neighbouring streams.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return Rng(z);
}

}  // namespace ksbt
