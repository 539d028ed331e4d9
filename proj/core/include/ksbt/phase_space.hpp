#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ksbt/vec.hpp"

namespace ksbt {

struct Maxwellian {
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const;
  double operator()(const Vec3& x, const Vec3& v) const;
};

double maxwellian_eval(const Maxwellian& m, const Vec3& x, const Vec3& v);

// Velocity radius R with exp(-beta R^2) = tol.
double truncation_radius(double rate, double tol);

// Location of a coordinate on a uniform axis. Points outside [-R, R]
// are reported invalid; the interpolant is zero there.
struct AxisLocation {
  bool inside = false;
  int i0 = 0;
  double frac = 0.0;
};

// Uniform tensor grid over [0,T] x [-Rx,Rx]^d x [-Rv,Rv]^d.
// Storage order of every field on the grid is [t][v][x], x fastest,
// with axis 0 the slowest inside each of the v and x blocks.
class PhaseGrid {
 public:
  PhaseGrid() = default;
  PhaseGrid(int dim, double Rx, double Rv, int Nx, int Nv, int Nt, double T);

  // Radii from the envelope: exp(-alpha Rx^2) = exp(-beta Rv^2) = tol.
  static PhaseGrid from_envelope(int dim, const Maxwellian& m, int Nx, int Nv, int Nt, double T,
                                 double tol = 1e-8);

  int dim() const { return dim_; }
  double Rx() const { return Rx_; }
  double Rv() const { return Rv_; }
  int Nx() const { return Nx_; }
  int Nv() const { return Nv_; }
  int Nt() const { return Nt_; }
  double T() const { return T_; }
  double hx() const { return 2.0 * Rx_ / (Nx_ - 1); }
  double hv() const { return 2.0 * Rv_ / (Nv_ - 1); }
  double dt() const { return Nt_ > 1 ? T_ / (Nt_ - 1) : 0.0; }

  // With Nt = 1 the single slice sits at t = T.
  double time(int k) const { return Nt_ > 1 ? k * dt() : T_; }

  std::size_t x_count() const { return x_count_; }
  std::size_t v_count() const { return v_count_; }
  std::size_t slice_size() const { return x_count_ * v_count_; }
  std::size_t size() const { return slice_size() * static_cast<std::size_t>(Nt_); }
  std::size_t index(int k, std::size_t iv, std::size_t ix) const {
    return (static_cast<std::size_t>(k) * v_count_ + iv) * x_count_ + ix;
  }

  Vec3 x_node(std::size_t ix) const { return node(ix, Nx_, Rx_, hx()); }
  Vec3 v_node(std::size_t iv) const { return node(iv, Nv_, Rv_, hv()); }

  // Trapezoid weights of the x and v tensor rules.
  double x_weight(std::size_t ix) const { return weight(ix, Nx_, hx()); }
  double v_weight(std::size_t iv) const { return weight(iv, Nv_, hv()); }

  AxisLocation locate_x(double p) const { return locate(p, Nx_, Rx_, hx()); }
  AxisLocation locate_v(double p) const { return locate(p, Nv_, Rv_, hv()); }

  // Same spatial/velocity grid with one slice at time t.
  PhaseGrid single_slice(double t) const;
  // Same spatial/velocity grid with a different time grid.
  PhaseGrid with_time(int Nt, double T) const;

  bool same_phase_grid(const PhaseGrid& o) const;
  bool operator==(const PhaseGrid& o) const { return same_phase_grid(o) && Nt_ == o.Nt_ && T_ == o.T_; }

  // Maxwellian values on one slice, layout [v][x].
  std::vector<double> envelope_slice(const Maxwellian& m) const;

 private:
  Vec3 node(std::size_t flat, int n, double R, double h) const;
  double weight(std::size_t flat, int n, double h) const;
  static AxisLocation locate(double p, int n, double R, double h);

  int dim_ = 2;
  double Rx_ = 1.0, Rv_ = 1.0;
  int Nx_ = 2, Nv_ = 2, Nt_ = 1;
  double T_ = 0.0;
  std::size_t x_count_ = 0, v_count_ = 0;
};

// Sampled nonnegative f^# on a grid, certified against a Maxwellian
// envelope: values <= envelope_bound * M at every node.
class PhaseDensity {
 public:
  PhaseDensity(PhaseGrid grid, Maxwellian envelope, std::vector<double> values, double envelope_bound);

  // Bound taken as the exact max of values / M.
  static PhaseDensity certify(PhaseGrid grid, Maxwellian envelope, std::vector<double> values);
  static PhaseDensity zero(const PhaseGrid& grid, const Maxwellian& envelope);
  static PhaseDensity scaled_envelope(const PhaseGrid& grid, const Maxwellian& envelope, double c);
  static PhaseDensity sample(const PhaseGrid& grid, const Maxwellian& envelope,
                             const std::function<double(double, const Vec3&, const Vec3&)>& fn);

  const PhaseGrid& grid() const { return grid_; }
  const Maxwellian& envelope() const { return envelope_; }
  double envelope_bound() const { return bound_; }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> slice(int k) const {
    return {values_.data() + static_cast<std::size_t>(k) * grid_.slice_size(), grid_.slice_size()};
  }
  double at(int k, std::size_t iv, std::size_t ix) const { return values_[grid_.index(k, iv, ix)]; }

  // Multilinear interpolation in (x, v), linear in t, zero outside the box.
  double evaluate(double t, const Vec3& x, const Vec3& v) const;

 private:
  PhaseGrid grid_;
  Maxwellian envelope_;
  std::vector<double> values_;
  double bound_ = 0.0;
};

// Multilinear interpolation of one slice ([v][x] layout) at (x, v).
double interpolate_slice(const PhaseGrid& grid, std::span<const double> slice, const Vec3& x, const Vec3& v);
// Interpolates slice / m multilinearly and multiplies by m(x, v). Exact for
// multiples of m and keeps the certified bound against m.
double interpolate_weighted(const PhaseGrid& grid, const Maxwellian& m, std::span<const double> slice,
                            const Vec3& x, const Vec3& v);

double m_norm(const PhaseDensity& f, int k);
double sup_m_norm(const PhaseDensity& f);
// max over the slice of |values| / M for a raw slice.
double m_norm_slice(const PhaseGrid& grid, const Maxwellian& m, std::span<const double> slice);

double l1_norm(const PhaseDensity& f, int k);
double l1_norm_slice(const PhaseGrid& grid, std::span<const double> slice);

enum class Direction { forward, inverse };

// g(x, v) = f(t_k, x + t v, v) (forward) or f(t_k, x - t v, v) (inverse),
// for the slice k of f; returns a [v][x] slice. The PhaseDensity overload
// interpolates relative to the envelope of f.
std::vector<double> transport(const PhaseDensity& f, int k, Direction dir);
std::vector<double> transport_slice(const PhaseGrid& grid, std::span<const double> slice, double t,
                                    Direction dir);

}  // namespace ksbt
