#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ksbt/cross_sections.hpp"
#include "ksbt/operators.hpp"
#include "ksbt/phase_space.hpp"
#include "ksbt/vec.hpp"

namespace ksbt {

// derived: tracked through the convolution and time-average proofs.
// normalized: C_d = 1, for checking formulas only.
enum class CdMode { derived, normalized };

double dimensional_constant(int dim, CdMode mode = CdMode::derived);

// p(v) = 1 + |v|^{g2+} + |v|^{g3+}
struct PGamma {
  double g2p = 0.0, g3p = 0.0;
  PGamma(double gamma2, double gamma3);
  double operator()(const Vec3& v) const;
};

struct ConvolutionConstants {
  double K2 = 0.0;  // binary, exponent q2
  double K3 = 0.0;  // ternary, exponent q3
};

// Requires q2 in (-d, 1], q3 in (-2d, 1].
ConvolutionConstants convolution_constants(int dim, double beta, double q2, double q3, double Cd);
double convolution_constant(int dim, double beta, double q, CollisionKind kind, double Cd);

// Left side of the weighted convolution estimate: the integral of
// |u|^q exp(-beta |v1|^2) over v1 (binary) or |u~|^q exp(-beta(|v1|^2+|v2|^2))
// over (v1, v2) (ternary), reduced to one or two radial variables.
double convolution_lhs(int dim, double beta, double q, CollisionKind kind, const Vec3& v);

struct ConvolutionReport {
  CollisionKind kind = CollisionKind::binary;
  double beta = 1.0, q = 0.0, K = 0.0;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double max_ratio = 0.0;
  Vec3 worst_v{};
  bool passed() const { return violations == 0; }
};

ConvolutionReport verify_convolution(int dim, double beta, double q, CollisionKind kind, std::span<const Vec3> vs,
                                     double Cd, int workers = 1);

struct TimeLemmaResult {
  double integral = 0.0;      // int_0^inf exp(-alpha |x0 - tau u0|^2) dtau
  double stated_bound = 0.0;  // sqrt(pi)/2 alpha^{-1/2} |u0|^{-1}
  double sharp_bound = 0.0;   // sqrt(pi) alpha^{-1/2} |u0|^{-1}, the sup over x0
};

// x0 and u0 of equal length n >= 1; u0 != 0.
TimeLemmaResult time_lemma_bound(std::span<const double> x0, std::span<const double> u0, double alpha);
// Closed form of the same integral.
double traveling_maxwellian_integral(std::span<const double> x0, std::span<const double> u0, double alpha);

enum class OperatorBound { binary_loss, binary_gain, ternary_loss, ternary_gain, total_loss, total_gain };
const char* to_string(OperatorBound b);

struct TimeAverageScenario {
  KernelConfig kernel;
  QuadratureSpec quad;
  double alpha = 1.0, beta = 1.0;
  double T_max = 4.0;
  int n_points = 200;
  int n_panels = 8;          // composite Gauss-Legendre panels on [0, T_max]
  int n_per_panel = 8;
  double x_radius = 2.0;     // sampled points are uniform in these balls
  double v_radius = 2.0;
  std::uint64_t seed = 7;
  CdMode cd_mode = CdMode::derived;
};

struct TimeAverageEntry {
  OperatorBound which = OperatorBound::binary_loss;
  double max_ratio = 0.0;
  Vec3 worst_x{}, worst_v{};
  std::size_t violations = 0;
};

struct TimeAverageReport {
  double K_beta = 0.0;
  std::size_t samples = 0;
  std::array<TimeAverageEntry, 6> entries{};
  bool passed() const;
};

// Time integrals of the transported operators at sampled (x, v), compared
// with K_beta alpha^{-1/2} M(x, v) times the product of input norms.
TimeAverageReport verify_time_average(const DensityFn& f, const DensityFn& g, const DensityFn& h, double norm_f,
                                      double norm_g, double norm_h, const TimeAverageScenario& sc);
TimeAverageReport verify_time_average(const PhaseDensity& f, const PhaseDensity& g, const PhaseDensity& h,
                                      const TimeAverageScenario& sc);

struct WellposednessConstants {
  int dim = 2;
  double alpha = 1.0, beta = 1.0;
  double gamma2 = 1.0, gamma3 = 1.0;
  double C_d = 0.0;
  double norm_b2 = 0.0, norm_b3 = 0.0;
  double K2 = 0.0, K3 = 0.0;  // convolution constants at q = gamma
  double K_beta = 0.0;
  double lambda = 0.0;
  double A = 0.0;             // K_beta alpha^{-1/2} (1 + alpha^{1/4} / (2 sqrt(6 K_beta)))
  double threshold = 0.0;     // 1 / (48 A)

  double discriminant(double f0_norm) const { return 1.0 - 48.0 * A * f0_norm; }
  // Smaller root of f0 + 12 A C^2 = C; throws SmallnessViolation when it is not real.
  double c_out(double f0_norm) const;
  // Contraction factor 12 K_beta alpha^{-1/2} (C + C^2).
  double rho(double C) const;
};

// K_beta from given angular norms.
double k_beta(int dim, double beta, double gamma2, double gamma3, double norm_b2, double norm_b3, double Cd);

WellposednessConstants wellposedness_constants(const KernelConfig& kernel, double alpha, double beta,
                                               CdMode mode = CdMode::derived, const AngularNormOptions& opt = {});

struct SmallnessCheck {
  bool accepted = false;
  double f0_norm = 0.0;
  double threshold = 0.0;
  double discriminant = 0.0;
  double c_out = 0.0;  // NaN when rejected
  std::string message;
};

SmallnessCheck smallness_check(const WellposednessConstants& c, double f0_norm);

}  // namespace ksbt
