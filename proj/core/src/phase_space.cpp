#include "ksbt/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ksbt/errors.hpp"

namespace ksbt {

void Maxwellian::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw InvalidInput("Maxwellian: alpha and beta must be positive and finite");
}

double Maxwellian::operator()(const Vec3& x, const Vec3& v) const {
  return std::exp(-alpha * norm2(x) - beta * norm2(v));
}

double maxwellian_eval(const Maxwellian& m, const Vec3& x, const Vec3& v) { return m(x, v); }

double truncation_radius(double rate, double tol) {
  if (!(rate > 0.0)) throw InvalidInput("truncation_radius: rate must be positive");
  if (!(tol > 0.0 && tol < 1.0)) throw InvalidInput("truncation_radius: tolerance must lie in (0,1)");
  return std::sqrt(-std::log(tol) / rate);
}

PhaseGrid::PhaseGrid(int dim, double Rx, double Rv, int Nx, int Nv, int Nt, double T)
    : dim_(dim), Rx_(Rx), Rv_(Rv), Nx_(Nx), Nv_(Nv), Nt_(Nt), T_(T) {
  if (dim < 2 || dim > 3) throw InvalidInput("PhaseGrid: dimension must be 2 or 3");
  if (!(Rx > 0.0) || !(Rv > 0.0)) throw InvalidInput("PhaseGrid: radii must be positive");
  if (Nx < 2 || Nv < 2) throw InvalidInput("PhaseGrid: Nx and Nv must be at least 2");
  if (Nt < 1) throw InvalidInput("PhaseGrid: Nt must be at least 1");
  if (!(T >= 0.0) || !std::isfinite(T)) throw InvalidInput("PhaseGrid: horizon must be finite and >= 0");
  if (Nt > 1 && !(T > 0.0)) throw InvalidInput("PhaseGrid: horizon must be positive when Nt > 1");
  x_count_ = v_count_ = 1;
  for (int a = 0; a < dim; ++a) {
    x_count_ *= static_cast<std::size_t>(Nx);
    v_count_ *= static_cast<std::size_t>(Nv);
  }
}

PhaseGrid PhaseGrid::from_envelope(int dim, const Maxwellian& m, int Nx, int Nv, int Nt, double T,
                                   double tol) {
  m.validate();
  return PhaseGrid(dim, truncation_radius(m.alpha, tol), truncation_radius(m.beta, tol), Nx, Nv, Nt, T);
}

PhaseGrid PhaseGrid::single_slice(double t) const { return PhaseGrid(dim_, Rx_, Rv_, Nx_, Nv_, 1, t); }

PhaseGrid PhaseGrid::with_time(int Nt, double T) const { return PhaseGrid(dim_, Rx_, Rv_, Nx_, Nv_, Nt, T); }

bool PhaseGrid::same_phase_grid(const PhaseGrid& o) const {
  return dim_ == o.dim_ && Rx_ == o.Rx_ && Rv_ == o.Rv_ && Nx_ == o.Nx_ && Nv_ == o.Nv_;
}

Vec3 PhaseGrid::node(std::size_t flat, int n, double R, double h) const {
  Vec3 p{0.0, 0.0, 0.0};
  for (int a = dim_ - 1; a >= 0; --a) {
    const int i = static_cast<int>(flat % static_cast<std::size_t>(n));
    flat /= static_cast<std::size_t>(n);
    p[a] = (i == n - 1) ? R : -R + i * h;
  }
  return p;
}

double PhaseGrid::weight(std::size_t flat, int n, double h) const {
  double w = 1.0;
  for (int a = 0; a < dim_; ++a) {
    const int i = static_cast<int>(flat % static_cast<std::size_t>(n));
    flat /= static_cast<std::size_t>(n);
    w *= (i == 0 || i == n - 1) ? 0.5 * h : h;
  }
  return w;
}

AxisLocation PhaseGrid::locate(double p, int n, double R, double h) {
  double s = (p + R) / h;
  const double r = std::nearbyint(s);
  if (std::abs(s - r) < 1e-10) s = r;
  AxisLocation loc;
  if (!(s >= 0.0) || s > n - 1) return loc;
  int i0 = static_cast<int>(std::floor(s));
  if (i0 >= n - 1) i0 = n - 2;
  loc.inside = true;
  loc.i0 = i0;
  loc.frac = s - i0;
  return loc;
}

std::vector<double> PhaseGrid::envelope_slice(const Maxwellian& m) const {
  std::vector<double> out(slice_size());
  for (std::size_t iv = 0; iv < v_count_; ++iv) {
    const Vec3 v = v_node(iv);
    for (std::size_t ix = 0; ix < x_count_; ++ix) out[iv * x_count_ + ix] = m(x_node(ix), v);
  }
  return out;
}

PhaseDensity::PhaseDensity(PhaseGrid grid, Maxwellian envelope, std::vector<double> values, double envelope_bound)
    : grid_(std::move(grid)), envelope_(envelope), values_(std::move(values)), bound_(envelope_bound) {
  envelope_.validate();
  if (values_.size() != grid_.size()) throw InvalidInput("PhaseDensity: value count does not match the grid");
  if (!(bound_ >= 0.0) || !std::isfinite(bound_)) throw InvalidInput("PhaseDensity: envelope bound must be finite and >= 0");
  const std::vector<double> env = grid_.envelope_slice(envelope_);
  const std::size_t ss = grid_.slice_size();
  for (std::size_t n = 0; n < values_.size(); ++n) {
    const double f = values_[n];
    const double cap = bound_ * env[n % ss];
    if (!(f >= 0.0) || f > cap * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "PhaseDensity: node " << n << " value " << f << " violates 0 <= f <= " << cap;
      throw InvalidInput(msg.str());
    }
  }
}

PhaseDensity PhaseDensity::certify(PhaseGrid grid, Maxwellian envelope, std::vector<double> values) {
  envelope.validate();
  if (values.size() != grid.size()) throw InvalidInput("PhaseDensity: value count does not match the grid");
  const std::vector<double> env = grid.envelope_slice(envelope);
  const std::size_t ss = grid.slice_size();
  double bound = 0.0;
  for (std::size_t n = 0; n < values.size(); ++n) bound = std::max(bound, values[n] / env[n % ss]);
  return PhaseDensity(std::move(grid), envelope, std::move(values), bound);
}

PhaseDensity PhaseDensity::zero(const PhaseGrid& grid, const Maxwellian& envelope) {
  return PhaseDensity(grid, envelope, std::vector<double>(grid.size(), 0.0), 0.0);
}

PhaseDensity PhaseDensity::scaled_envelope(const PhaseGrid& grid, const Maxwellian& envelope, double c) {
  if (!(c >= 0.0)) throw InvalidInput("PhaseDensity: scale must be >= 0");
  const std::vector<double> env = grid.envelope_slice(envelope);
  std::vector<double> values(grid.size());
  for (std::size_t n = 0; n < values.size(); ++n) values[n] = c * env[n % env.size()];
  return PhaseDensity(grid, envelope, std::move(values), c);
}

PhaseDensity PhaseDensity::sample(const PhaseGrid& grid, const Maxwellian& envelope,
                                  const std::function<double(double, const Vec3&, const Vec3&)>& fn) {
  std::vector<double> values(grid.size());
  for (int k = 0; k < grid.Nt(); ++k) {
    const double t = grid.time(k);
    for (std::size_t iv = 0; iv < grid.v_count(); ++iv) {
      const Vec3 v = grid.v_node(iv);
      for (std::size_t ix = 0; ix < grid.x_count(); ++ix) values[grid.index(k, iv, ix)] = fn(t, grid.x_node(ix), v);
    }
  }
  return certify(grid, envelope, std::move(values));
}

double PhaseDensity::evaluate(double t, const Vec3& x, const Vec3& v) const {
  if (grid_.Nt() == 1) return interpolate_weighted(grid_, envelope_, slice(0), x, v);
  const double s = std::clamp(t / grid_.dt(), 0.0, static_cast<double>(grid_.Nt() - 1));
  int k = static_cast<int>(std::floor(s));
  if (k >= grid_.Nt() - 1) k = grid_.Nt() - 2;
  const double w = s - k;
  const double a = interpolate_weighted(grid_, envelope_, slice(k), x, v);
  if (w == 0.0) return a;
  return (1.0 - w) * a + w * interpolate_weighted(grid_, envelope_, slice(k + 1), x, v);
}

namespace {

// Multilinear interpolation; with an envelope m the quotient slice / m is
// interpolated and multiplied back by m(x, v).
double interpolate_impl(const PhaseGrid& grid, std::span<const double> slice, const Vec3& x, const Vec3& v,
                        const Maxwellian* m) {
  const int d = grid.dim();
  AxisLocation lx[3], lv[3];
  // Per axis and corner bit: interpolation weight times m(query) / m(node).
  double wx[3][2], wv[3][2];
  for (int a = 0; a < d; ++a) {
    lx[a] = grid.locate_x(x[a]);
    lv[a] = grid.locate_v(v[a]);
    if (!lx[a].inside || !lv[a].inside) return 0.0;
    wx[a][0] = 1.0 - lx[a].frac;
    wx[a][1] = lx[a].frac;
    wv[a][0] = 1.0 - lv[a].frac;
    wv[a][1] = lv[a].frac;
    if (m) {
      for (int b = 0; b < 2; ++b) {
        const int ixn = lx[a].i0 + b, ivn = lv[a].i0 + b;
        const double xn = ixn == grid.Nx() - 1 ? grid.Rx() : -grid.Rx() + ixn * grid.hx();
        const double vn = ivn == grid.Nv() - 1 ? grid.Rv() : -grid.Rv() + ivn * grid.hv();
        wx[a][b] *= std::exp(-m->alpha * (x[a] * x[a] - xn * xn));
        wv[a][b] *= std::exp(-m->beta * (v[a] * v[a] - vn * vn));
      }
    }
  }
  const std::size_t Nx = static_cast<std::size_t>(grid.Nx()), Nv = static_cast<std::size_t>(grid.Nv());
  double acc = 0.0;
  for (unsigned cv = 0; cv < (1u << d); ++cv) {
    double w0 = 1.0;
    std::size_t iv = 0;
    for (int a = 0; a < d; ++a) {
      const unsigned bit = (cv >> a) & 1u;
      w0 *= wv[a][bit];
      iv = iv * Nv + static_cast<std::size_t>(lv[a].i0 + static_cast<int>(bit));
    }
    if (w0 == 0.0) continue;
    for (unsigned cx = 0; cx < (1u << d); ++cx) {
      double w = w0;
      std::size_t ix = 0;
      for (int a = 0; a < d; ++a) {
        const unsigned bit = (cx >> a) & 1u;
        w *= wx[a][bit];
        ix = ix * Nx + static_cast<std::size_t>(lx[a].i0 + static_cast<int>(bit));
      }
      if (w != 0.0) acc += w * slice[iv * grid.x_count() + ix];
    }
  }
  return acc;
}

}  // namespace

double interpolate_slice(const PhaseGrid& grid, std::span<const double> slice, const Vec3& x, const Vec3& v) {
  return interpolate_impl(grid, slice, x, v, nullptr);
}

double interpolate_weighted(const PhaseGrid& grid, const Maxwellian& m, std::span<const double> slice,
                            const Vec3& x, const Vec3& v) {
  return interpolate_impl(grid, slice, x, v, &m);
}

double m_norm_slice(const PhaseGrid& grid, const Maxwellian& m, std::span<const double> slice) {
  const std::vector<double> env = grid.envelope_slice(m);
  double r = 0.0;
  for (std::size_t n = 0; n < env.size(); ++n) r = std::max(r, std::abs(slice[n]) / env[n]);
  return r;
}

double m_norm(const PhaseDensity& f, int k) { return m_norm_slice(f.grid(), f.envelope(), f.slice(k)); }

double sup_m_norm(const PhaseDensity& f) {
  double r = 0.0;
  for (int k = 0; k < f.grid().Nt(); ++k) r = std::max(r, m_norm(f, k));
  return r;
}

double l1_norm_slice(const PhaseGrid& grid, std::span<const double> slice) {
  double acc = 0.0;
  for (std::size_t iv = 0; iv < grid.v_count(); ++iv) {
    double row = 0.0;
    for (std::size_t ix = 0; ix < grid.x_count(); ++ix) row += grid.x_weight(ix) * std::abs(slice[iv * grid.x_count() + ix]);
    acc += grid.v_weight(iv) * row;
  }
  return acc;
}

double l1_norm(const PhaseDensity& f, int k) { return l1_norm_slice(f.grid(), f.slice(k)); }

std::vector<double> transport_slice(const PhaseGrid& grid, std::span<const double> slice, double t, Direction dir) {
  const double s = dir == Direction::forward ? t : -t;
  std::vector<double> out(grid.slice_size());
  for (std::size_t iv = 0; iv < grid.v_count(); ++iv) {
    const Vec3 v = grid.v_node(iv);
    for (std::size_t ix = 0; ix < grid.x_count(); ++ix)
      out[iv * grid.x_count() + ix] = interpolate_slice(grid, slice, grid.x_node(ix) + s * v, v);
  }
  return out;
}

std::vector<double> transport(const PhaseDensity& f, int k, Direction dir) {
  const PhaseGrid& grid = f.grid();
  const double t = grid.time(k);
  const double s = dir == Direction::forward ? t : -t;
  std::vector<double> out(grid.slice_size());
  for (std::size_t iv = 0; iv < grid.v_count(); ++iv) {
    const Vec3 v = grid.v_node(iv);
    for (std::size_t ix = 0; ix < grid.x_count(); ++ix)
      out[iv * grid.x_count() + ix] = interpolate_weighted(grid, f.envelope(), f.slice(k), grid.x_node(ix) + s * v, v);
  }
  return out;
}

}  // namespace ksbt
