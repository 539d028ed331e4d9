#pragma once

#include <vector>

#include "ksbt/vec.hpp"

namespace ksbt {

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [a, b].
Rule1D gauss_legendre(int n, double a = -1.0, double b = 1.0);

// n-point Gauss-Hermite rule for the weight exp(-beta x^2).
Rule1D gauss_hermite(int n, double beta = 1.0);

// Point set on a sphere with positive weights summing to its area.
struct SphereRule {
  std::vector<Vec3> a;  // first block (the whole point for S^{d-1})
  std::vector<Vec3> b;  // second block, only used for S^{2d-1}
  std::vector<double> weights;
  std::size_t size() const { return weights.size(); }
};

// Rule on S^{d-1}, d in {2,3}. d=2: n_ang equispaced angles (half-step
// offset); d=3: n_ang/2 Gauss-Legendre latitudes times n_ang longitudes.
// With `half`, only one point of every antipodal pair is kept and carries
// the weight of both.
SphereRule sphere_rule(int dim, int n_ang, bool half = false);

// Rule on S^{2d-1} in block form (w1, w2) = (cos(chi) s1, sin(chi) s2),
// chi on [0, pi/2] by a rule exact for the latitude measure, s1, s2 from
// sphere_rule(dim, n_ang).
SphereRule double_sphere_rule(int dim, int n_chi, int n_ang, bool half = false);

double sphere_area(int n);  // |S^{n-1}|, the area of the unit sphere in R^n
double ball_volume(int n);  // |B_1^n|

}  // namespace ksbt
