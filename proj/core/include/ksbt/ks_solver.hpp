#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ksbt/estimates.hpp"
#include "ksbt/operators.hpp"
#include "ksbt/phase_space.hpp"

namespace ksbt {

// Integrating-factor recurrence for dF/dt = h - F R, F(0) = f0, on the
// time grid: F_k = F_{k-1} e^{-dI} + dt/2 (h_{k-1} e^{-dI} + h_k) with
// dI = dt/2 (R_{k-1} + R_k). f0 is one [v][x] slice, R and h full fields.
std::vector<double> integrate_linear(const PhaseGrid& grid, std::span<const double> f0, std::span<const double> R,
                                     std::span<const double> h);

// max over slices of the L1 norm of F(t) + int_0^t F R - f0 - int_0^t h,
// time integrals by the trapezoid rule.
double linear_residual(const PhaseGrid& grid, std::span<const double> f0, std::span<const double> R,
                       std::span<const double> h, std::span<const double> F);

struct LinearProblem {
  std::vector<double> f0;  // initial slice, [v][x]
  PhaseDensity g;          // frequency input, R = R^#(g, g)
  std::vector<double> h;   // source h^# on the grid
};

std::vector<double> solve_linear(const CollisionOperators& ops, const LinearProblem& p);

// Solves both problems and reports whether the first solution stays below
// the second within tol. Requires f0_1 <= f0_2, g_1 >= g_2, h_1 <= h_2.
bool comparison_check(const CollisionOperators& ops, const LinearProblem& p1, const LinearProblem& p2,
                      double tol = 1e-12);

struct TraceEntry {
  int n = 0;
  double gap = 0.0;                 // sup of (u_n - l_n) / M
  double max_mono_violation = 0.0;  // envelope-normalised, before clamping
  double residual_L1 = 0.0;         // linear-equation residuals of l_n and u_n
  double wall_time_s = 0.0;
};

struct KsState {
  int n = 0;
  double c_out = 0.0;
  std::vector<double> l, u;
  std::vector<TraceEntry> trace;
};

struct KsOptions {
  int n_max = 50;
  double eps_gap = 1e-6;
  double tol_mono = 1e-8;
  bool override_smallness = false;
  bool final_residual = true;
  SweepOptions sweep;
  // Called after every accepted iterate.
  std::function<void(const KsState&)> on_iterate;
};

// l_0 = 0, u_0 = C_out M. Above the threshold this throws
// SmallnessViolation unless overridden, in which case C_out is replaced
// by the largest admissible root 1 / (24 A).
KsState ks_init(const PhaseGrid& grid, const Maxwellian& envelope, std::span<const double> f0,
                const WellposednessConstants& c, bool override_smallness = false);

// One Kaniel-Shinbrot step. Throws MonotonicityViolation when the ordering
// l_{n-1} <= l_n <= u_n <= u_{n-1} fails by more than tol_mono; smaller
// defects are clamped and recorded in the trace.
KsState ks_step(const CollisionOperators& ops, const Maxwellian& envelope, std::span<const double> f0,
                const KsState& prev, const KsOptions& opt);

struct BeginningReport {
  bool passed = true;
  std::string violated;  // e.g. "u1 <= u0"
  double worst = 0.0;    // envelope-normalised defect
  int k = 0;
  std::size_t iv = 0, ix = 0;
};

// 0 <= l0 <= l1 <= u1 <= u0 on the whole grid within tol.
BeginningReport check_beginning_condition(const PhaseGrid& grid, const Maxwellian& envelope,
                                          std::span<const double> l0, std::span<const double> u0,
                                          std::span<const double> l1, std::span<const double> u1, double tol);

struct KsResult {
  std::vector<double> f;  // bracket midpoint
  KsState state;
  bool converged = false;
  double final_gap = 0.0;
  double c_out = 0.0;
  double sup_norm = 0.0;     // sup of f / M
  double residual_L1 = 0.0;  // mild-equation residual of f, max over slices
  BeginningReport beginning;
};

// Iterates until the gap is below eps_gap or n_max steps. `start` resumes
// from a saved state (n >= 1); otherwise ks_init is used.
KsResult ks_solve(const CollisionOperators& ops, const Maxwellian& envelope, std::span<const double> f0,
                  const WellposednessConstants& c, const KsOptions& opt, std::optional<KsState> start = {});

// Mild-equation residual of f: max over slices of
// || f(t) + int_0^t L(f,f,f) - f0 - int_0^t G(f,f,f) ||_L1.
double mild_residual(const CollisionOperators& ops, std::span<const double> f0, std::span<const double> f,
                     const SweepOptions& opt = {});

// sup over the grid of |a - b| / M
double envelope_gap(const PhaseGrid& grid, const Maxwellian& envelope, std::span<const double> a,
                    std::span<const double> b);

}  // namespace ksbt
