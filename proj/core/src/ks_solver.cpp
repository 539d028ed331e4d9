#include "ksbt/ks_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "ksbt/errors.hpp"

namespace ksbt {

namespace {

void check_field(const PhaseGrid& grid, std::span<const double> a, const char* what) {
  if (a.size() != grid.size())
    throw InvalidInput(std::string(what) + ": expected " + std::to_string(grid.size()) + " values, got " +
                       std::to_string(a.size()));
}

void check_slice(const PhaseGrid& grid, std::span<const double> a, const char* what) {
  if (a.size() != grid.slice_size())
    throw InvalidInput(std::string(what) + ": expected one slice of " + std::to_string(grid.slice_size()) +
                       " values, got " + std::to_string(a.size()));
}

}  // namespace

std::vector<double> integrate_linear(const PhaseGrid& grid, std::span<const double> f0, std::span<const double> R,
                                     std::span<const double> h) {
  check_slice(grid, f0, "integrate_linear f0");
  check_field(grid, R, "integrate_linear R");
  check_field(grid, h, "integrate_linear h");
  const std::size_t ss = grid.slice_size();
  std::vector<double> F(grid.size());
  std::copy(f0.begin(), f0.end(), F.begin());
  for (int k = 1; k < grid.Nt(); ++k) {
    const double dt = grid.time(k) - grid.time(k - 1);
    const std::size_t cur = static_cast<std::size_t>(k) * ss, prev = cur - ss;
    for (std::size_t i = 0; i < ss; ++i) {
      const double E = std::exp(-0.5 * dt * (R[prev + i] + R[cur + i]));
      F[cur + i] = F[prev + i] * E + 0.5 * dt * (h[prev + i] * E + h[cur + i]);
    }
  }
  return F;
}

double linear_residual(const PhaseGrid& grid, std::span<const double> f0, std::span<const double> R,
                       std::span<const double> h, std::span<const double> F) {
  check_slice(grid, f0, "linear_residual f0");
  check_field(grid, R, "linear_residual R");
  check_field(grid, h, "linear_residual h");
  check_field(grid, F, "linear_residual F");
  const std::size_t ss = grid.slice_size();
  std::vector<double> acc(ss, 0.0), r(ss);
  double worst = 0.0;
  for (int k = 0; k < grid.Nt(); ++k) {
    const std::size_t cur = static_cast<std::size_t>(k) * ss;
    if (k > 0) {
      const double dt = grid.time(k) - grid.time(k - 1);
      const std::size_t prev = cur - ss;
      for (std::size_t i = 0; i < ss; ++i)
        acc[i] += 0.5 * dt *
                  ((F[prev + i] * R[prev + i] - h[prev + i]) + (F[cur + i] * R[cur + i] - h[cur + i]));
    }
    for (std::size_t i = 0; i < ss; ++i) r[i] = F[cur + i] + acc[i] - f0[i];
    worst = std::max(worst, l1_norm_slice(grid, r));
  }
  return worst;
}

std::vector<double> solve_linear(const CollisionOperators& ops, const LinearProblem& p) {
  const PhaseGrid& grid = ops.grid();
  check_slice(grid, p.f0, "solve_linear f0");
  check_field(grid, p.h, "solve_linear h");
  for (double x : p.f0)
    if (!(x >= 0.0)) throw InvalidInput("solve_linear: f0 must be nonnegative");
  for (double x : p.h)
    if (!(x >= 0.0)) throw InvalidInput("solve_linear: h must be nonnegative");
  const std::vector<double> R = ops.frequency(p.g, p.g).total();
  return integrate_linear(grid, p.f0, R, p.h);
}

bool comparison_check(const CollisionOperators& ops, const LinearProblem& p1, const LinearProblem& p2, double tol) {
  const PhaseGrid& grid = ops.grid();
  check_slice(grid, p1.f0, "comparison_check f0");
  check_slice(grid, p2.f0, "comparison_check f0");
  check_field(grid, p1.h, "comparison_check h");
  check_field(grid, p2.h, "comparison_check h");
  for (std::size_t i = 0; i < p1.f0.size(); ++i)
    if (p1.f0[i] > p2.f0[i]) throw InvalidInput("comparison_check: requires f0_1 <= f0_2");
  for (std::size_t i = 0; i < p1.h.size(); ++i)
    if (p1.h[i] > p2.h[i]) throw InvalidInput("comparison_check: requires h_1 <= h_2");
  const auto& g1 = p1.g.values();
  const auto& g2 = p2.g.values();
  for (std::size_t i = 0; i < g1.size(); ++i)
    if (g1[i] < g2[i]) throw InvalidInput("comparison_check: requires g_1 >= g_2");
  const auto a = solve_linear(ops, p1);
  const auto b = solve_linear(ops, p2);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] > b[i] + tol) return false;
  return true;
}

double envelope_gap(const PhaseGrid& grid, const Maxwellian& envelope, std::span<const double> a,
                    std::span<const double> b) {
  check_field(grid, a, "envelope_gap");
  check_field(grid, b, "envelope_gap");
  const std::vector<double> M = grid.envelope_slice(envelope);
  const std::size_t ss = grid.slice_size();
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::abs(a[i] - b[i]) / M[i % ss]);
  return g;
}

KsState ks_init(const PhaseGrid& grid, const Maxwellian& envelope, std::span<const double> f0,
                const WellposednessConstants& c, bool override_smallness) {
  check_slice(grid, f0, "ks_init f0");
  if (grid.Nt() < 2) throw InvalidInput("ks_init: the time grid needs at least two slices");
  const std::vector<double> M = grid.envelope_slice(envelope);
  for (double x : f0)
    if (!(x >= 0.0)) throw InvalidInput("ks_init: f0 must be nonnegative");
  const double norm = m_norm_slice(grid, envelope, f0);
  const SmallnessCheck s = smallness_check(c, norm);
  KsState st;
  if (s.accepted) {
    st.c_out = s.c_out;
  } else if (override_smallness) {
    st.c_out = 1.0 / (24.0 * c.A);
  } else {
    throw SmallnessViolation(s.message);
  }
  st.l.assign(grid.size(), 0.0);
  st.u.resize(grid.size());
  const std::size_t ss = grid.slice_size();
  for (std::size_t i = 0; i < st.u.size(); ++i) st.u[i] = st.c_out * M[i % ss];
  return st;
}

namespace {

struct Advance {
  std::vector<double> l, u;
  double residual = 0.0;
};

Advance advance(const CollisionOperators& ops, std::span<const double> f0, const KsState& prev,
                const SweepOptions& sw) {
  const PhaseGrid& grid = ops.grid();
  Advance a;
  // l_n: damping by R(u_{n-1}), source G(l_{n-1}); u_n the other way round.
  const auto R_u = ops.frequency_values(prev.u, prev.u, sw).total();
  const auto G_l = ops.gain_values(prev.l, prev.l, prev.l, sw).total();
  a.l = integrate_linear(grid, f0, R_u, G_l);
  const auto R_l = ops.frequency_values(prev.l, prev.l, sw).total();
  const auto G_u = ops.gain_values(prev.u, prev.u, prev.u, sw).total();
  a.u = integrate_linear(grid, f0, R_l, G_u);
  a.residual = linear_residual(grid, f0, R_u, G_l, a.l) + linear_residual(grid, f0, R_l, G_u, a.u);
  return a;
}

struct Defect {
  double worst = 0.0;
  std::size_t at = 0;
  int which = -1;
};

// Largest envelope-normalised defect over the chain a_0 <= a_1 <= ... .
Defect chain_defect(const std::vector<std::span<const double>>& chain, std::span<const double> M, std::size_t ss) {
  Defect d;
  for (std::size_t c = 0; c + 1 < chain.size(); ++c) {
    const auto lo = chain[c], hi = chain[c + 1];
    for (std::size_t i = 0; i < lo.size(); ++i) {
      const double v = (lo[i] - hi[i]) / M[i % ss];
      if (v > d.worst) {
        d.worst = v;
        d.at = i;
        d.which = static_cast<int>(c);
      }
    }
  }
  return d;
}

KsState accept(const PhaseGrid& grid, const Maxwellian& envelope, const KsState& prev, Advance a, double wall,
               const KsOptions& opt) {
  const std::vector<double> M = grid.envelope_slice(envelope);
  const std::size_t ss = grid.slice_size();
  const std::vector<double> zero(grid.size(), 0.0);
  const Defect d = chain_defect({zero, prev.l, a.l, a.u, prev.u}, M, ss);
  if (d.worst > opt.tol_mono) {
    static const char* names[] = {"0 <= l_{n-1}", "l_{n-1} <= l_n", "l_n <= u_n", "u_n <= u_{n-1}"};
    const int k = static_cast<int>(d.at / ss);
    std::ostringstream os;
    os << "monotone sandwich broken at n = " << prev.n + 1 << ": " << names[d.which] << " fails by " << d.worst
       << " (envelope-normalised) at slice " << k << ", v node " << (d.at % ss) / grid.x_count() << ", x node "
       << d.at % grid.x_count() << "; refine the grid or reduce the data";
    throw MonotonicityViolation(os.str());
  }
  KsState s;
  s.n = prev.n + 1;
  s.c_out = prev.c_out;
  s.trace = prev.trace;
  s.l = std::move(a.l);
  s.u = std::move(a.u);
  for (std::size_t i = 0; i < s.l.size(); ++i) {
    s.u[i] = std::min(s.u[i], prev.u[i]);
    s.l[i] = std::max(s.l[i], prev.l[i]);
    s.l[i] = std::min(s.l[i], s.u[i]);
  }
  TraceEntry e;
  e.n = s.n;
  e.gap = envelope_gap(grid, envelope, s.u, s.l);
  e.max_mono_violation = d.worst;
  e.residual_L1 = a.residual;
  e.wall_time_s = wall;
  s.trace.push_back(e);
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

KsState ks_step(const CollisionOperators& ops, const Maxwellian& envelope, std::span<const double> f0,
                const KsState& prev, const KsOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  Advance a = advance(ops, f0, prev, opt.sweep);
  return accept(ops.grid(), envelope, prev, std::move(a), seconds_since(t0), opt);
}

BeginningReport check_beginning_condition(const PhaseGrid& grid, const Maxwellian& envelope,
                                          std::span<const double> l0, std::span<const double> u0,
                                          std::span<const double> l1, std::span<const double> u1, double tol) {
  check_field(grid, l0, "check_beginning_condition l0");
  check_field(grid, u0, "check_beginning_condition u0");
  check_field(grid, l1, "check_beginning_condition l1");
  check_field(grid, u1, "check_beginning_condition u1");
  const std::vector<double> M = grid.envelope_slice(envelope);
  const std::vector<double> zero(grid.size(), 0.0);
  const std::size_t ss = grid.slice_size();
  const Defect d = chain_defect({zero, l0, l1, u1, u0}, M, ss);
  BeginningReport r;
  r.worst = d.worst;
  r.passed = d.worst <= tol;
  if (d.which >= 0) {
    static const char* names[] = {"0 <= l0", "l0 <= l1", "l1 <= u1", "u1 <= u0"};
    r.violated = names[d.which];
    r.k = static_cast<int>(d.at / ss);
    r.iv = (d.at % ss) / grid.x_count();
    r.ix = d.at % grid.x_count();
  }
  return r;
}

double mild_residual(const CollisionOperators& ops, std::span<const double> f0, std::span<const double> f,
                     const SweepOptions& opt) {
  const auto R = ops.frequency_values(f, f, opt).total();
  const auto G = ops.gain_values(f, f, f, opt).total();
  return linear_residual(ops.grid(), f0, R, G, f);
}

KsResult ks_solve(const CollisionOperators& ops, const Maxwellian& envelope, std::span<const double> f0,
                  const WellposednessConstants& c, const KsOptions& opt, std::optional<KsState> start) {
  const PhaseGrid& grid = ops.grid();
  if (opt.n_max < 1) throw InvalidInput("ks_solve: n_max must be >= 1");
  KsResult res;
  KsState st;
  if (start) {
    if (start->n < 1 || start->trace.empty() || start->l.size() != grid.size() || start->u.size() != grid.size())
      throw InvalidInput("ks_solve: resume state does not fit the grid");
    st = std::move(*start);
  } else {
    const KsState s0 = ks_init(grid, envelope, f0, c, opt.override_smallness);
    const auto t0 = std::chrono::steady_clock::now();
    Advance a = advance(ops, f0, s0, opt.sweep);
    res.beginning = check_beginning_condition(grid, envelope, s0.l, s0.u, a.l, a.u, opt.tol_mono);
    if (!res.beginning.passed) {
      res.state = s0;
      res.c_out = s0.c_out;
      res.final_gap = envelope_gap(grid, envelope, s0.u, s0.l);
      return res;
    }
    st = accept(grid, envelope, s0, std::move(a), seconds_since(t0), opt);
    if (opt.on_iterate) opt.on_iterate(st);
  }
  while (st.trace.back().gap > opt.eps_gap && st.n < opt.n_max) {
    st = ks_step(ops, envelope, f0, st, opt);
    if (opt.on_iterate) opt.on_iterate(st);
  }
  res.c_out = st.c_out;
  res.final_gap = st.trace.back().gap;
  res.converged = res.final_gap <= opt.eps_gap;
  res.f.resize(grid.size());
  for (std::size_t i = 0; i < res.f.size(); ++i) res.f[i] = 0.5 * (st.l[i] + st.u[i]);
  const std::vector<double> M = grid.envelope_slice(envelope);
  const std::size_t ss = grid.slice_size();
  for (std::size_t i = 0; i < res.f.size(); ++i) res.sup_norm = std::max(res.sup_norm, res.f[i] / M[i % ss]);
  if (opt.final_residual) res.residual_L1 = mild_residual(ops, f0, res.f, opt.sweep);
  res.state = std::move(st);
  return res;
}

}  // namespace ksbt
