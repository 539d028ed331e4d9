#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ksbt/cross_sections.hpp"
#include "ksbt/phase_space.hpp"
#include "ksbt/vec.hpp"

namespace ksbt {

enum class Backend { deterministic, monte_carlo };

struct QuadratureSpec {
  Backend backend = Backend::deterministic;
  int n_ang = 8;          // directions per circle
  int n_vel = 6;          // binary partner nodes per velocity axis
  int n_vel_ternary = 2;  // ternary partner nodes per velocity axis
  int n_chi = 2;          // latitude nodes on S^{2d-1}
  int n_mc = 256;         // Monte Carlo samples per outgoing velocity
  std::uint64_t seed = 1;
  int workers = 1;

  std::vector<std::string> violations(int dim) const;
  void validate(int dim) const;
};

// Quadrature of the collision integrals for one outgoing velocity v.
// Partner velocities carry the Gaussian weight of the envelope, so a
// Maxwellian input is integrated exactly up to interpolation.
struct CollisionRule {
  struct Loss2 {
    int j;
    double w;
  };
  struct Loss3 {
    int j, k;
    double w;
  };
  struct Gain2 {
    Vec3 vp, v1p;
    double w;
  };
  struct Gain3 {
    Vec3 vs, v1s, v2s;
    double w;
  };

  Vec3 v{};
  std::vector<Vec3> nodes;  // partner velocities referenced by the loss entries
  std::vector<Loss2> loss2;
  std::vector<Loss3> loss3;
  std::vector<Gain2> gain2;
  std::vector<Gain3> gain3;
};

class RuleBuilder {
 public:
  RuleBuilder(KernelConfig kernel, QuadratureSpec spec, double beta);

  // `stream` selects the random substream (Monte Carlo backend only).
  CollisionRule build(const Vec3& v, std::uint64_t stream = 0) const;

  const KernelConfig& kernel() const { return kernel_; }
  const QuadratureSpec& spec() const { return spec_; }

 private:
  CollisionRule build_deterministic(const Vec3& v) const;
  CollisionRule build_monte_carlo(const Vec3& v, std::uint64_t stream) const;

  KernelConfig kernel_;
  QuadratureSpec spec_;
  double beta_;
  std::vector<Vec3> p2_, p3_;      // partner nodes
  std::vector<double> w2_, w3_;    // partner weights incl. exp(beta |v|^2)
  std::vector<Vec3> dir_;          // half rule on S^{d-1}
  std::vector<double> dir_w_;
  std::vector<Vec3> dir1_, dir2_;  // half rule on S^{2d-1}
  std::vector<double> dir12_w_;
};

struct SweepOptions {
  std::vector<int> slices;  // time slices to evaluate; empty means all
  bool estimate_error = false;
  double tolerance = 0.05;  // relative error estimate above which a result is flagged
};

// Binary and ternary parts on the phase grid, layout [t][v][x].
struct OperatorResult {
  std::vector<double> binary;
  std::vector<double> ternary;
  double error_estimate = 0.0;  // relative; MC standard error or refinement difference
  bool flagged = false;

  std::vector<double> total() const;
};

class CollisionOperators {
 public:
  CollisionOperators(PhaseGrid grid, Maxwellian envelope, KernelConfig kernel, QuadratureSpec spec);

  // R2^#(g) and R3^#(g, h).
  OperatorResult frequency(const PhaseDensity& g, const PhaseDensity& h, const SweepOptions& opt = {}) const;
  // G2^#(f, g) and G3^#(f, g, h).
  OperatorResult gain(const PhaseDensity& f, const PhaseDensity& g, const PhaseDensity& h,
                      const SweepOptions& opt = {}) const;
  // f^# R^#(g, h), componentwise.
  OperatorResult loss(const PhaseDensity& f, const PhaseDensity& g, const PhaseDensity& h,
                      const SweepOptions& opt = {}) const;

  // Same sweeps on raw [t][v][x] arrays of the grid.
  OperatorResult frequency_values(std::span<const double> g, std::span<const double> h,
                                  const SweepOptions& opt = {}) const;
  OperatorResult gain_values(std::span<const double> f, std::span<const double> g, std::span<const double> h,
                             const SweepOptions& opt = {}) const;

  const PhaseGrid& grid() const { return grid_; }
  const KernelConfig& kernel() const { return builder_.kernel(); }
  const QuadratureSpec& spec() const { return builder_.spec(); }
  const std::vector<CollisionRule>& rules() const { return rules_; }

 private:
  enum class Sweep { frequency, gain };
  OperatorResult run(Sweep kind, std::span<const double> f, std::span<const double> g, std::span<const double> h,
                     const SweepOptions& opt) const;
  void check(const PhaseDensity& p) const;

  PhaseGrid grid_;
  Maxwellian envelope_;
  RuleBuilder builder_;
  std::vector<CollisionRule> rules_;  // one per v node
};

// f^#(t, x, v) for arbitrary arguments.
using DensityFn = std::function<double(double, const Vec3&, const Vec3&)>;

DensityFn density_fn(const PhaseDensity& f);
DensityFn maxwellian_fn(const Maxwellian& m, double scale = 1.0);

struct PointValues {
  double f = 0.0;
  double R2 = 0.0, R3 = 0.0;
  double G2 = 0.0, G3 = 0.0;
  double L2() const { return f * R2; }
  double L3() const { return f * R3; }
};

// All transported operators at (t, x, rule.v).
PointValues evaluate_point(const CollisionRule& rule, const DensityFn& f, const DensityFn& g, const DensityFn& h,
                           double t, const Vec3& x);

}  // namespace ksbt
