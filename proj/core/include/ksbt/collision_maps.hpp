#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "ksbt/vec.hpp"

namespace ksbt {

using Rng = std::mt19937_64;

struct BinaryFrame {
  Vec3 v{}, v1{};
  Vec3 omega{};
  Vec3 vp{}, v1p{};
  Vec3 u{};  // v1 - v
};

struct TernaryFrame {
  Vec3 v{}, v1{}, v2{};
  Vec3 omega1{}, omega2{};
  Vec3 vs{}, v1s{}, v2s{};
  double u_tilde_mag = 0.0;
};

// v' = v + (w.u) w, v1' = v1 - (w.u) w with u = v1 - v; |w| = 1 required.
std::pair<Vec3, Vec3> binary_map(const Vec3& v, const Vec3& v1, const Vec3& omega);

struct TernaryPost {
  Vec3 vs, v1s, v2s;
};

// Requires |w1|^2 + |w2|^2 = 1.
TernaryPost ternary_map(const Vec3& v, const Vec3& v1, const Vec3& v2, const Vec3& omega1, const Vec3& omega2);

// sqrt(|v-v1|^2 + |v-v2|^2 + |v1-v2|^2)
double u_tilde_mag(const Vec3& v, const Vec3& v1, const Vec3& v2);

// Normalised pair (v1 - v, v2 - v) / |u~|, a point of the ellipsoid
// |n1|^2 + |n2|^2 + |n1 - n2|^2 = 1. Zero when |u~| = 0.
std::pair<Vec3, Vec3> ellipsoid_point(const Vec3& v, const Vec3& v1, const Vec3& v2);
double ellipsoid_form(const Vec3& n1, const Vec3& n2);

// Uniform direction on S^{d-1} via a normalised Gaussian vector.
Vec3 sample_direction(int dim, Rng& rng);
// Uniform point of S^{2d-1} returned in (w1, w2) blocks.
std::pair<Vec3, Vec3> sample_direction_pair(int dim, Rng& rng);

BinaryFrame make_binary_frame(const Vec3& v, const Vec3& v1, const Vec3& omega);
TernaryFrame make_ternary_frame(const Vec3& v, const Vec3& v1, const Vec3& v2, const Vec3& omega1,
                                const Vec3& omega2);

// Conservation defects relative to the frame's energy scale.
struct FrameResiduals {
  double momentum = 0.0;
  double energy = 0.0;
  double relative_speed = 0.0;  // | |u'| - |u| | or | |u~*| - |u~| |
  double specular = 0.0;        // |w.u' + w.u| or |w.u~* + w.u~|
  double involution = 0.0;
};

FrameResiduals residuals(const BinaryFrame& f);
FrameResiduals residuals(const TernaryFrame& f);

// Random pre-collisional velocities with standard normal components.
Vec3 sample_velocity(int dim, Rng& rng, double scale = 1.0);

// Stream for an independent worker or output node.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

}  // namespace ksbt
