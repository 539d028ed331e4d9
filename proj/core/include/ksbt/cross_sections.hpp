#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ksbt/vec.hpp"

namespace ksbt {

// Angular factor b(z) (binary) or b(z, w) (ternary), z = cos of the impact
// angle, w = w1.w2. Always even in z.
class AngularDensity {
 public:
  enum class Kind { zero, hard_sphere, derived_ternary, constant, tabulated };

  AngularDensity() = default;
  static AngularDensity zero();
  static AngularDensity hard_sphere();      // |z| / 2
  static AngularDensity derived_ternary();  // |z| / (2 sqrt(1 + w))
  static AngularDensity constant(double c);
  // Piecewise-linear table in z (w-independent); symmetrised in z.
  static AngularDensity tabulated(std::vector<double> z, std::vector<double> value);
  static AngularDensity load_csv(const std::string& path);

  Kind kind() const { return kind_; }
  bool is_zero() const { return kind_ == Kind::zero || (kind_ == Kind::constant && c_ == 0.0); }
  std::string describe() const;

  // z in [-1,1], w in [-1/2,1/2] (a 1e-12 overshoot is clamped).
  double operator()(double z, double w = 0.0) const;

 private:
  double table(double z) const;

  Kind kind_ = Kind::zero;
  double c_ = 0.0;
  std::vector<double> z_, val_;
};

struct KernelConfig {
  int dim = 2;
  double gamma2 = 1.0;
  double gamma3 = 1.0;
  AngularDensity b2 = AngularDensity::hard_sphere();
  AngularDensity b3 = AngularDensity::derived_ternary();

  // Throws InvalidInput listing every violated range.
  void validate() const;
  std::vector<std::string> violations() const;
};

double b2_eval(const KernelConfig& k, double z);
double b3_eval(const KernelConfig& k, double z, double w);

// |u|^g2 b2(u^.w); empty optional marks a skipped sample (u = 0, g2 <= 0).
std::optional<double> B2_eval(const KernelConfig& k, const Vec3& u, const Vec3& omega);
// |u~|^g3 b3(u-.w, w1.w2); empty optional for u~ = 0 with g3 <= 0.
std::optional<double> B3_eval(const KernelConfig& k, const Vec3& v, const Vec3& v1, const Vec3& v2,
                              const Vec3& omega1, const Vec3& omega2);

enum class CollisionKind { binary, ternary };

struct AngularNormOptions {
  int n_chi = 32;      // latitude nodes on S^{2d-1}
  int n_ang = 96;      // directions per circle
  int n_search = 1024; // low-discrepancy points on the ellipsoid
  int n_refine = 96;   // local refinement steps around the best point
};

// Binary: integral of b2 over S^{d-1}. Ternary: sup over the ellipsoid of
// the S^{2d-1} integral of b3(nu.w, w1.w2).
double angular_norm(const KernelConfig& k, CollisionKind kind, const AngularNormOptions& opt = {});

// Inner ternary integral at a fixed ellipsoid point (n1, n2).
double ternary_angular_integral(const KernelConfig& k, const Vec3& n1, const Vec3& n2,
                                const AngularNormOptions& opt = {});

}  // namespace ksbt
