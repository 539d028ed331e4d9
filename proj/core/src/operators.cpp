#include "ksbt/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ksbt/collision_maps.hpp"
#include "ksbt/errors.hpp"
#include "ksbt/parallel.hpp"
#include "ksbt/quadrature.hpp"

namespace ksbt {

std::vector<std::string> QuadratureSpec::violations(int dim) const {
  std::vector<std::string> out;
  if (n_ang < 8 || n_ang % 2 != 0) out.push_back("quadrature.n_ang must be even and >= 8");
  if (n_vel < 1) out.push_back("quadrature.n_vel must be >= 1");
  if (n_vel_ternary < 1) out.push_back("quadrature.n_vel_ternary must be >= 1");
  if (n_chi < 1) out.push_back("quadrature.n_chi must be >= 1");
  if (n_mc < 2) out.push_back("quadrature.n_mc must be >= 2");
  if (workers < 1) out.push_back("workers must be >= 1");
  if (backend == Backend::deterministic && dim != 2) out.push_back("deterministic quadrature requires dim = 2");
  if (dim < 2 || dim > 3) out.push_back("dim must be 2 or 3");
  return out;
}

void QuadratureSpec::validate(int dim) const {
  const auto v = violations(dim);
  if (v.empty()) return;
  std::string msg = "invalid quadrature:";
  for (const auto& s : v) msg += " " + s + ";";
  throw InvalidInput(msg);
}

namespace {

// Tensor Gauss-Hermite nodes with the compensating factor exp(beta |v|^2).
void partner_rule(int dim, int n, double beta, std::vector<Vec3>& nodes, std::vector<double>& weights) {
  const Rule1D r = gauss_hermite(n, beta);
  std::size_t count = 1;
  for (int a = 0; a < dim; ++a) count *= static_cast<std::size_t>(n);
  for (std::size_t flat = 0; flat < count; ++flat) {
    Vec3 p{};
    double w = 1.0;
    std::size_t rest = flat;
    for (int a = dim - 1; a >= 0; --a) {
      const std::size_t i = rest % static_cast<std::size_t>(n);
      rest /= static_cast<std::size_t>(n);
      p[a] = r.nodes[i];
      w *= r.weights[i];
    }
    nodes.push_back(p);
    weights.push_back(w * std::exp(beta * norm2(p)));
  }
}

}  // namespace

RuleBuilder::RuleBuilder(KernelConfig kernel, QuadratureSpec spec, double beta)
    : kernel_(std::move(kernel)), spec_(spec), beta_(beta) {
  kernel_.validate();
  spec_.validate(kernel_.dim);
  if (!(beta > 0.0)) throw InvalidInput("RuleBuilder: beta must be positive");
  if (spec_.backend == Backend::deterministic) {
    partner_rule(kernel_.dim, spec_.n_vel, beta_, p2_, w2_);
    partner_rule(kernel_.dim, spec_.n_vel_ternary, beta_, p3_, w3_);
    // Post-collisional velocities are even in the impact direction(s), as
    // are b2 and b3 in z, so antipodal points are merged.
    const SphereRule s = sphere_rule(kernel_.dim, spec_.n_ang, true);
    dir_ = s.a;
    dir_w_ = s.weights;
    const SphereRule s2 = double_sphere_rule(kernel_.dim, spec_.n_chi, spec_.n_ang, true);
    dir1_ = s2.a;
    dir2_ = s2.b;
    dir12_w_ = s2.weights;
  }
}

CollisionRule RuleBuilder::build(const Vec3& v, std::uint64_t stream) const {
  return spec_.backend == Backend::deterministic ? build_deterministic(v) : build_monte_carlo(v, stream);
}

CollisionRule RuleBuilder::build_deterministic(const Vec3& v) const {
  CollisionRule r;
  r.v = v;
  const bool bin = !kernel_.b2.is_zero(), ter = !kernel_.b3.is_zero();
  if (bin) {
    const int base = static_cast<int>(r.nodes.size());
    r.nodes.insert(r.nodes.end(), p2_.begin(), p2_.end());
    for (std::size_t j = 0; j < p2_.size(); ++j) {
      const Vec3 u = p2_[j] - v;
      double lw = 0.0;
      for (std::size_t a = 0; a < dir_.size(); ++a) {
        const auto B = B2_eval(kernel_, u, dir_[a]);
        if (!B || *B == 0.0) continue;
        const double w = w2_[j] * dir_w_[a] * *B;
        const auto [vp, v1p] = binary_map(v, p2_[j], dir_[a]);
        r.gain2.push_back({vp, v1p, w});
        lw += w;
      }
      if (lw > 0.0) r.loss2.push_back({base + static_cast<int>(j), lw});
    }
  }
  if (ter) {
    const int base = static_cast<int>(r.nodes.size());
    r.nodes.insert(r.nodes.end(), p3_.begin(), p3_.end());
    for (std::size_t j = 0; j < p3_.size(); ++j) {
      for (std::size_t k = 0; k < p3_.size(); ++k) {
        double lw = 0.0;
        for (std::size_t a = 0; a < dir12_w_.size(); ++a) {
          const auto B = B3_eval(kernel_, v, p3_[j], p3_[k], dir1_[a], dir2_[a]);
          if (!B || *B == 0.0) continue;
          const double w = w3_[j] * w3_[k] * dir12_w_[a] * *B;
          const TernaryPost p = ternary_map(v, p3_[j], p3_[k], dir1_[a], dir2_[a]);
          r.gain3.push_back({p.vs, p.v1s, p.v2s, w});
          lw += w;
        }
        if (lw > 0.0) r.loss3.push_back({base + static_cast<int>(j), base + static_cast<int>(k), lw});
      }
    }
  }
  return r;
}

CollisionRule RuleBuilder::build_monte_carlo(const Vec3& v, std::uint64_t stream) const {
  CollisionRule r;
  r.v = v;
  const int d = kernel_.dim;
  Rng rng = make_stream(spec_.seed, stream);
  // Proposal density (beta/pi)^{d/2} exp(-beta |w|^2) per partner velocity.
  const double sd = std::sqrt(0.5 / beta_);
  const double qnorm = std::pow(beta_ / std::numbers::pi, 0.5 * d);
  const int n = spec_.n_mc;
  if (!kernel_.b2.is_zero()) {
    const double area = sphere_area(d);
    for (int s = 0; s < n; ++s) {
      const Vec3 v1 = sample_velocity(d, rng, sd);
      const Vec3 om = sample_direction(d, rng);
      const auto B = B2_eval(kernel_, v1 - v, om);
      if (!B || *B == 0.0) continue;
      const double w = area * *B / (qnorm * std::exp(-beta_ * norm2(v1)) * n);
      const auto [vp, v1p] = binary_map(v, v1, om);
      r.gain2.push_back({vp, v1p, w});
      r.nodes.push_back(v1);
      r.loss2.push_back({static_cast<int>(r.nodes.size()) - 1, w});
    }
  }
  if (!kernel_.b3.is_zero()) {
    const double area = sphere_area(2 * d);
    for (int s = 0; s < n; ++s) {
      const Vec3 v1 = sample_velocity(d, rng, sd);
      const Vec3 v2 = sample_velocity(d, rng, sd);
      const auto [o1, o2] = sample_direction_pair(d, rng);
      const auto B = B3_eval(kernel_, v, v1, v2, o1, o2);
      if (!B || *B == 0.0) continue;
      const double q = qnorm * qnorm * std::exp(-beta_ * (norm2(v1) + norm2(v2)));
      const double w = area * *B / (q * n);
      const TernaryPost p = ternary_map(v, v1, v2, o1, o2);
      r.gain3.push_back({p.vs, p.v1s, p.v2s, w});
      r.nodes.push_back(v1);
      r.nodes.push_back(v2);
      const int k = static_cast<int>(r.nodes.size()) - 1;
      r.loss3.push_back({k - 1, k, w});
    }
  }
  return r;
}

std::vector<double> OperatorResult::total() const {
  std::vector<double> out(binary.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = binary[i] + ternary[i];
  return out;
}

namespace {

constexpr double kSnap = 1e-10;

template <int D>
struct Box {
  int lo[D], hi[D];
};

// Spatial part of the interpolation for a fixed shift: output node m reads
// the input at m + o + phi along each axis.
template <int D>
struct XStencil {
  int o[D];
  double phi[D];
  Box<D> valid;
};

template <int D>
bool make_xstencil(const Vec3& shift, int n, double h, XStencil<D>& s) {
  for (int a = 0; a < D; ++a) {
    const double sig = shift[a] / h;
    double o = std::floor(sig);
    double phi = sig - o;
    if (phi < kSnap) {
      phi = 0.0;
    } else if (phi > 1.0 - kSnap) {
      phi = 0.0;
      o += 1.0;
    }
    if (std::abs(o) > 4.0 * n) return false;
    s.o[a] = static_cast<int>(o);
    s.phi[a] = phi;
    s.valid.lo[a] = std::max(0, -s.o[a]);
    s.valid.hi[a] = std::min(n - 1, n - 1 - s.o[a] - (phi > 0.0 ? 1 : 0));
    if (s.valid.lo[a] > s.valid.hi[a]) return false;
  }
  return true;
}

template <int D>
bool intersect(Box<D>& b, const Box<D>& c) {
  for (int a = 0; a < D; ++a) {
    b.lo[a] = std::max(b.lo[a], c.lo[a]);
    b.hi[a] = std::min(b.hi[a], c.hi[a]);
    if (b.lo[a] > b.hi[a]) return false;
  }
  return true;
}

template <int D>
struct VStencil {
  int count = 0;
  std::size_t idx[1 << D];
  double w[1 << D];
};

template <int D>
bool make_vstencil(const PhaseGrid& grid, const Vec3& v, VStencil<D>& s) {
  AxisLocation loc[D];
  for (int a = 0; a < D; ++a) {
    loc[a] = grid.locate_v(v[a]);
    if (!loc[a].inside) return false;
  }
  const std::size_t n = static_cast<std::size_t>(grid.Nv());
  s.count = 0;
  for (unsigned c = 0; c < (1u << D); ++c) {
    double w = 1.0;
    std::size_t iv = 0;
    for (int a = 0; a < D; ++a) {
      const unsigned bit = (c >> a) & 1u;
      w *= bit ? loc[a].frac : 1.0 - loc[a].frac;
      iv = iv * n + static_cast<std::size_t>(loc[a].i0 + static_cast<int>(bit));
    }
    if (w == 0.0) continue;
    s.idx[s.count] = iv;
    s.w[s.count] = w;
    ++s.count;
  }
  return true;
}

// Interpolated values of one input slice at velocity vs and spatial shift
// xs, written to out over `box` (unpadded n^D layout). vc is a scratch
// array of (n+1)^D entries whose padding is zero.
template <int D>
void interpolate_factor(const double* slice, std::size_t xcount, int n, const VStencil<D>& vs,
                        const XStencil<D>& xs, const Box<D>& box, double* vc, double* out) {
  const int P = n + 1;
  int ilo[D], ihi[D];
  for (int a = 0; a < D; ++a) {
    ilo[a] = box.lo[a] + xs.o[a];
    ihi[a] = box.hi[a] + xs.o[a] + (xs.phi[a] > 0.0 ? 1 : 0);
  }
  const double* rows[1 << D];
  for (int c = 0; c < vs.count; ++c) rows[c] = slice + vs.idx[c] * xcount;
  const double a0 = 1.0 - xs.phi[0], a1 = xs.phi[0];
  if constexpr (D == 2) {
    for (int i0 = ilo[0]; i0 <= ihi[0]; ++i0) {
      double* dst = vc + i0 * P;
      const int off = i0 * n;
      for (int i1 = ilo[1]; i1 <= ihi[1]; ++i1) {
        double s = 0.0;
        for (int c = 0; c < vs.count; ++c) s += vs.w[c] * rows[c][off + i1];
        dst[i1] = s;
      }
    }
    const double b0 = 1.0 - xs.phi[1], b1 = xs.phi[1];
    for (int m0 = box.lo[0]; m0 <= box.hi[0]; ++m0) {
      const double* r0 = vc + (m0 + xs.o[0]) * P + xs.o[1];
      const double* r1 = r0 + P;
      double* o = out + m0 * n;
      for (int m1 = box.lo[1]; m1 <= box.hi[1]; ++m1)
        o[m1] = a0 * (b0 * r0[m1] + b1 * r0[m1 + 1]) + a1 * (b0 * r1[m1] + b1 * r1[m1 + 1]);
    }
  } else {
    for (int i0 = ilo[0]; i0 <= ihi[0]; ++i0) {
      for (int i1 = ilo[1]; i1 <= ihi[1]; ++i1) {
        double* dst = vc + (i0 * P + i1) * P;
        const int off = (i0 * n + i1) * n;
        for (int i2 = ilo[2]; i2 <= ihi[2]; ++i2) {
          double s = 0.0;
          for (int c = 0; c < vs.count; ++c) s += vs.w[c] * rows[c][off + i2];
          dst[i2] = s;
        }
      }
    }
    const double b0 = 1.0 - xs.phi[1], b1 = xs.phi[1];
    const double c0 = 1.0 - xs.phi[2], c1 = xs.phi[2];
    for (int m0 = box.lo[0]; m0 <= box.hi[0]; ++m0) {
      for (int m1 = box.lo[1]; m1 <= box.hi[1]; ++m1) {
        const double* r00 = vc + ((m0 + xs.o[0]) * P + m1 + xs.o[1]) * P + xs.o[2];
        const double* r01 = r00 + P;
        const double* r10 = r00 + P * P;
        const double* r11 = r10 + P;
        double* o = out + (m0 * n + m1) * n;
        for (int m2 = box.lo[2]; m2 <= box.hi[2]; ++m2) {
          const double s00 = c0 * r00[m2] + c1 * r00[m2 + 1];
          const double s01 = c0 * r01[m2] + c1 * r01[m2 + 1];
          const double s10 = c0 * r10[m2] + c1 * r10[m2 + 1];
          const double s11 = c0 * r11[m2] + c1 * r11[m2 + 1];
          o[m2] = a0 * (b0 * s00 + b1 * s01) + a1 * (b0 * s10 + b1 * s11);
        }
      }
    }
  }
}

// Calls fn(flat) for every node of the box.
template <int D, class Fn>
inline void for_box(const Box<D>& b, int n, Fn&& fn) {
  if constexpr (D == 2) {
    for (int m0 = b.lo[0]; m0 <= b.hi[0]; ++m0) {
      const int base = m0 * n;
      for (int m1 = b.lo[1]; m1 <= b.hi[1]; ++m1) fn(base + m1);
    }
  } else {
    for (int m0 = b.lo[0]; m0 <= b.hi[0]; ++m0)
      for (int m1 = b.lo[1]; m1 <= b.hi[1]; ++m1) {
        const int base = (m0 * n + m1) * n;
        for (int m2 = b.lo[2]; m2 <= b.hi[2]; ++m2) fn(base + m2);
      }
  }
}

double slice_max(std::span<const double> a, std::size_t off, std::size_t len) {
  double m = 0.0;
  for (std::size_t i = 0; i < len; ++i) m = std::max(m, std::abs(a[off + i]));
  return m;
}

struct Accumulators {
  std::vector<double> b, t, b_sq, t_sq;
};

// Inputs arrive divided by the envelope M; every interpolated factor is
// multiplied back by M at its query point, so multiples of M are
// reproduced exactly and Gaussian tails are not inflated by the
// interpolation.
template <int D>
class Sweeper {
 public:
  Sweeper(const PhaseGrid& grid, const Maxwellian& m, const std::vector<CollisionRule>& rules, bool track_variance)
      : grid_(grid), m_(m), rules_(rules), n_(grid.Nx()), xcount_(grid.x_count()), var_(track_variance) {
    xn_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) xn_[i] = i == n_ - 1 ? grid.Rx() : -grid.Rx() + i * grid.hx();
    for (int a = 0; a < D; ++a) ex_[a].assign(static_cast<std::size_t>(n_), 0.0);
    std::size_t p = 1;
    for (int a = 0; a < D; ++a) p *= static_cast<std::size_t>(n_ + 1);
    vc_.assign(p, 0.0);
    fa_.assign(xcount_, 0.0);
    fb_.assign(xcount_, 0.0);
    fc_.assign(xcount_, 0.0);
    acc_.b.assign(xcount_, 0.0);
    acc_.t.assign(xcount_, 0.0);
    if (var_) {
      acc_.b_sq.assign(xcount_, 0.0);
      acc_.t_sq.assign(xcount_, 0.0);
    }
  }

  const Accumulators& acc() const { return acc_; }

  void reset() {
    std::fill(acc_.b.begin(), acc_.b.end(), 0.0);
    std::fill(acc_.t.begin(), acc_.t.end(), 0.0);
    if (var_) {
      std::fill(acc_.b_sq.begin(), acc_.b_sq.end(), 0.0);
      std::fill(acc_.t_sq.begin(), acc_.t_sq.end(), 0.0);
    }
  }

  // R2(g) and R3(g, h) at slice time t for outgoing node iv.
  void frequency(std::size_t iv, double t, const double* g, const double* h, bool do_bin, bool do_ter) {
    reset();
    const CollisionRule& r = rules_[iv];
    const std::size_t nn = r.nodes.size();
    if (nodes_g_.size() < nn * xcount_) {
      nodes_g_.resize(nn * xcount_);
      nodes_h_.resize(nn * xcount_);
    }
    need_g_.assign(nn, 0);
    need_h_.assign(nn, 0);
    if (do_bin)
      for (const auto& e : r.loss2) need_g_[e.j] = 1;
    if (do_ter)
      for (const auto& e : r.loss3) {
        need_g_[e.j] = 1;
        need_h_[e.k] = 1;
      }
    boxes_.resize(nn);
    ok_.assign(nn, 0);
    for (std::size_t j = 0; j < nn; ++j) {
      if (!need_g_[j] && !need_h_[j]) continue;
      XStencil<D> xs;
      VStencil<D> vs;
      if (!make_vstencil<D>(grid_, r.nodes[j], vs)) continue;
      if (!make_xstencil<D>(t * (r.v - r.nodes[j]), n_, grid_.hx(), xs)) continue;
      ok_[j] = 1;
      boxes_[j] = xs.valid;
      const Vec3 shift = t * (r.v - r.nodes[j]);
      axis_factors(&shift, 1, xs.valid);
      const double cj = std::exp(-m_.beta * norm2(r.nodes[j]));
      if (need_g_[j]) {
        interpolate_factor<D>(g, xcount_, n_, vs, xs, xs.valid, vc_.data(), nodes_g_.data() + j * xcount_);
        weight_box(nodes_g_.data() + j * xcount_, cj, xs.valid);
      }
      if (need_h_[j]) {
        if (h == g && need_g_[j]) {
          std::copy_n(nodes_g_.data() + j * xcount_, xcount_, nodes_h_.data() + j * xcount_);
        } else {
          interpolate_factor<D>(h, xcount_, n_, vs, xs, xs.valid, vc_.data(), nodes_h_.data() + j * xcount_);
          weight_box(nodes_h_.data() + j * xcount_, cj, xs.valid);
        }
      }
    }
    if (do_bin) {
      for (const auto& e : r.loss2) {
        if (!ok_[e.j]) continue;
        const double* a = nodes_g_.data() + e.j * xcount_;
        const double w = e.w;
        if (var_)
          for_box<D>(boxes_[e.j], n_, [&](int m) {
            const double c = w * a[m];
            acc_.b[m] += c;
            acc_.b_sq[m] += c * c;
          });
        else
          for_box<D>(boxes_[e.j], n_, [&](int m) { acc_.b[m] += w * a[m]; });
      }
    }
    if (do_ter) {
      for (const auto& e : r.loss3) {
        if (!ok_[e.j] || !ok_[e.k]) continue;
        Box<D> box = boxes_[e.j];
        if (!intersect<D>(box, boxes_[e.k])) continue;
        const double* a = nodes_g_.data() + e.j * xcount_;
        const double* b = nodes_h_.data() + e.k * xcount_;
        const double w = e.w;
        if (var_)
          for_box<D>(box, n_, [&](int m) {
            const double c = w * a[m] * b[m];
            acc_.t[m] += c;
            acc_.t_sq[m] += c * c;
          });
        else
          for_box<D>(box, n_, [&](int m) { acc_.t[m] += w * a[m] * b[m]; });
      }
    }
  }

  // G2(f, g) and G3(f, g, h) at slice time t for outgoing node iv.
  void gain(std::size_t iv, double t, const double* f, const double* g, const double* h, bool do_bin, bool do_ter) {
    reset();
    const CollisionRule& r = rules_[iv];
    const double hx = grid_.hx();
    if (do_bin) {
      for (const auto& s : r.gain2) {
        XStencil<D> x1, x2;
        VStencil<D> v1, v2;
        if (!make_vstencil<D>(grid_, s.vp, v1) || !make_vstencil<D>(grid_, s.v1p, v2)) continue;
        if (!make_xstencil<D>(t * (r.v - s.vp), n_, hx, x1) || !make_xstencil<D>(t * (r.v - s.v1p), n_, hx, x2)) continue;
        Box<D> box = x1.valid;
        if (!intersect<D>(box, x2.valid)) continue;
        interpolate_factor<D>(f, xcount_, n_, v1, x1, box, vc_.data(), fa_.data());
        interpolate_factor<D>(g, xcount_, n_, v2, x2, box, vc_.data(), fb_.data());
        const Vec3 sh[2] = {t * (r.v - s.vp), t * (r.v - s.v1p)};
        axis_factors(sh, 2, box);
        weight_box(fa_.data(), std::exp(-m_.beta * (norm2(s.vp) + norm2(s.v1p))), box);
        const double w = s.w;
        const double* a = fa_.data();
        const double* b = fb_.data();
        if (var_)
          for_box<D>(box, n_, [&](int m) {
            const double c = w * a[m] * b[m];
            acc_.b[m] += c;
            acc_.b_sq[m] += c * c;
          });
        else
          for_box<D>(box, n_, [&](int m) { acc_.b[m] += w * a[m] * b[m]; });
      }
    }
    if (do_ter) {
      for (const auto& s : r.gain3) {
        XStencil<D> x1, x2, x3;
        VStencil<D> v1, v2, v3;
        if (!make_vstencil<D>(grid_, s.vs, v1) || !make_vstencil<D>(grid_, s.v1s, v2) ||
            !make_vstencil<D>(grid_, s.v2s, v3))
          continue;
        if (!make_xstencil<D>(t * (r.v - s.vs), n_, hx, x1) || !make_xstencil<D>(t * (r.v - s.v1s), n_, hx, x2) ||
            !make_xstencil<D>(t * (r.v - s.v2s), n_, hx, x3))
          continue;
        Box<D> box = x1.valid;
        if (!intersect<D>(box, x2.valid) || !intersect<D>(box, x3.valid)) continue;
        interpolate_factor<D>(f, xcount_, n_, v1, x1, box, vc_.data(), fa_.data());
        interpolate_factor<D>(g, xcount_, n_, v2, x2, box, vc_.data(), fb_.data());
        interpolate_factor<D>(h, xcount_, n_, v3, x3, box, vc_.data(), fc_.data());
        const Vec3 sh[3] = {t * (r.v - s.vs), t * (r.v - s.v1s), t * (r.v - s.v2s)};
        axis_factors(sh, 3, box);
        weight_box(fa_.data(), std::exp(-m_.beta * (norm2(s.vs) + norm2(s.v1s) + norm2(s.v2s))), box);
        const double w = s.w;
        const double* a = fa_.data();
        const double* b = fb_.data();
        const double* c = fc_.data();
        if (var_)
          for_box<D>(box, n_, [&](int m) {
            const double q = w * a[m] * b[m] * c[m];
            acc_.t[m] += q;
            acc_.t_sq[m] += q * q;
          });
        else
          for_box<D>(box, n_, [&](int m) { acc_.t[m] += w * a[m] * b[m] * c[m]; });
      }
    }
  }

 private:
  // ex_[a][i] = exp(-alpha sum_k (x_i + shift_k[a])^2) over the box range.
  void axis_factors(const Vec3* shifts, int count, const Box<D>& box) {
    for (int a = 0; a < D; ++a)
      for (int i = box.lo[a]; i <= box.hi[a]; ++i) {
        double e = 0.0;
        for (int k = 0; k < count; ++k) {
          const double y = xn_[i] + shifts[k][a];
          e += y * y;
        }
        ex_[a][i] = std::exp(-m_.alpha * e);
      }
  }

  void weight_box(double* out, double c, const Box<D>& box) const {
    if constexpr (D == 2) {
      for (int m0 = box.lo[0]; m0 <= box.hi[0]; ++m0) {
        const double c0 = c * ex_[0][m0];
        double* o = out + m0 * n_;
        for (int m1 = box.lo[1]; m1 <= box.hi[1]; ++m1) o[m1] *= c0 * ex_[1][m1];
      }
    } else {
      for (int m0 = box.lo[0]; m0 <= box.hi[0]; ++m0)
        for (int m1 = box.lo[1]; m1 <= box.hi[1]; ++m1) {
          const double c01 = c * ex_[0][m0] * ex_[1][m1];
          double* o = out + (m0 * n_ + m1) * n_;
          for (int m2 = box.lo[2]; m2 <= box.hi[2]; ++m2) o[m2] *= c01 * ex_[2][m2];
        }
    }
  }

  const PhaseGrid& grid_;
  Maxwellian m_;
  const std::vector<CollisionRule>& rules_;
  int n_;
  std::size_t xcount_;
  bool var_;
  std::vector<double> vc_, fa_, fb_, fc_, xn_;
  std::vector<double> ex_[D];
  std::vector<double> nodes_g_, nodes_h_;
  std::vector<Box<D>> boxes_;
  std::vector<char> need_g_, need_h_, ok_;
  Accumulators acc_;
};

// Standard error of a sum of n i.i.d. contributions from its first two moments.
double standard_error(double sum, double sum_sq, int n) {
  const double var = (sum_sq - sum * sum / n) * n / (n - 1.0);
  return std::sqrt(std::max(0.0, var));
}

template <int D>
void sweep_impl(const PhaseGrid& grid, const Maxwellian& env, const std::vector<CollisionRule>& rules, bool is_gain,
                std::span<const double> f, std::span<const double> g, std::span<const double> h,
                const std::vector<int>& slices, bool do_bin, bool do_ter, int workers, bool mc_error, int n_mc,
                OperatorResult& res, double& max_err) {
  const std::size_t ss = grid.slice_size(), xc = grid.x_count(), nv = grid.v_count();
  std::vector<double> errs(static_cast<std::size_t>(workers), 0.0);
  for (int k : slices) {
    const std::size_t off = static_cast<std::size_t>(k) * ss;
    const double t = grid.time(k);
    bool bin = do_bin, ter = do_ter;
    if (is_gain) {
      const double mf = slice_max(f, off, ss), mg = slice_max(g, off, ss);
      if (mf == 0.0 || mg == 0.0) bin = ter = false;
      if (ter && slice_max(h, off, ss) == 0.0) ter = false;
    } else {
      if (slice_max(g, off, ss) == 0.0) bin = ter = false;
      if (ter && slice_max(h, off, ss) == 0.0) ter = false;
    }
    if (!bin && !ter) continue;
    const double* fp = is_gain ? f.data() + off : nullptr;
    const double* gp = g.data() + off;
    const double* hp = h.data() + off;
    parallel_for(workers, nv, [&](std::size_t b, std::size_t e, int w) {
      Sweeper<D> sw(grid, env, rules, mc_error);
      for (std::size_t iv = b; iv < e; ++iv) {
        if (is_gain)
          sw.gain(iv, t, fp, gp, hp, bin, ter);
        else
          sw.frequency(iv, t, gp, hp, bin, ter);
        const Accumulators& a = sw.acc();
        std::copy(a.b.begin(), a.b.end(), res.binary.begin() + static_cast<std::ptrdiff_t>(off + iv * xc));
        std::copy(a.t.begin(), a.t.end(), res.ternary.begin() + static_cast<std::ptrdiff_t>(off + iv * xc));
        if (mc_error) {
          for (std::size_t m = 0; m < xc; ++m) {
            errs[w] = std::max(errs[w], standard_error(a.b[m], a.b_sq[m], n_mc));
            errs[w] = std::max(errs[w], standard_error(a.t[m], a.t_sq[m], n_mc));
          }
        }
      }
    });
  }
  for (double e : errs) max_err = std::max(max_err, e);
}

}  // namespace

CollisionOperators::CollisionOperators(PhaseGrid grid, Maxwellian envelope, KernelConfig kernel, QuadratureSpec spec)
    : grid_(std::move(grid)), envelope_(envelope), builder_(std::move(kernel), spec, envelope.beta) {
  envelope_.validate();
  if (builder_.kernel().dim != grid_.dim()) throw InvalidInput("CollisionOperators: kernel and grid dimensions differ");
  rules_.reserve(grid_.v_count());
  for (std::size_t iv = 0; iv < grid_.v_count(); ++iv) rules_.push_back(builder_.build(grid_.v_node(iv), iv));
}

void CollisionOperators::check(const PhaseDensity& p) const {
  if (!(p.grid() == grid_)) throw InvalidInput("CollisionOperators: density lives on a different grid");
}

OperatorResult CollisionOperators::run(Sweep kind, std::span<const double> f, std::span<const double> g,
                                       std::span<const double> h, const SweepOptions& opt) const {
  const std::size_t n = grid_.size();
  if ((kind == Sweep::gain && f.size() != n) || g.size() != n || h.size() != n)
    throw InvalidInput("CollisionOperators: input size does not match the grid");
  std::vector<int> slices = opt.slices;
  if (slices.empty())
    for (int k = 0; k < grid_.Nt(); ++k) slices.push_back(k);
  for (int k : slices)
    if (k < 0 || k >= grid_.Nt()) throw InvalidInput("CollisionOperators: slice index out of range");

  OperatorResult res;
  res.binary.assign(n, 0.0);
  res.ternary.assign(n, 0.0);
  const bool do_bin = !kernel().b2.is_zero(), do_ter = !kernel().b3.is_zero();
  const bool mc = spec().backend == Backend::monte_carlo;
  const bool mc_error = opt.estimate_error && mc;
  double abs_err = 0.0;
  // Quotients by the envelope; aliasing between inputs is kept so the
  // sweeps can reuse interpolated factors.
  const std::vector<double> env = grid_.envelope_slice(envelope_);
  const std::size_t ss = grid_.slice_size();
  auto quotient = [&](std::span<const double> a) {
    std::vector<double> q(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) q[i] = a[i] / env[i % ss];
    return q;
  };
  const std::vector<double> qg = quotient(g);
  const std::vector<double> qf = kind != Sweep::gain ? std::vector<double>{} : f.data() == g.data() ? qg : quotient(f);
  std::vector<double> qh_own;
  if (h.data() != g.data()) qh_own = quotient(h);
  const std::span<const double> sg(qg), sf(qf), sh = h.data() == g.data() ? sg : std::span<const double>(qh_own);
  if (grid_.dim() == 2)
    sweep_impl<2>(grid_, envelope_, rules_, kind == Sweep::gain, sf, sg, sh, slices, do_bin, do_ter, spec().workers,
                  mc_error, spec().n_mc, res, abs_err);
  else
    sweep_impl<3>(grid_, envelope_, rules_, kind == Sweep::gain, sf, sg, sh, slices, do_bin, do_ter, spec().workers,
                  mc_error, spec().n_mc, res, abs_err);

  if (opt.estimate_error) {
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max({scale, res.binary[i], res.ternary[i]});
    if (!mc) {
      // Difference against a refined rule set.
      QuadratureSpec fine = spec();
      fine.n_vel += 2;
      fine.n_vel_ternary += 1;
      fine.n_chi += 1;
      fine.n_ang += 4;
      CollisionOperators other(grid_, envelope_, kernel(), fine);
      SweepOptions o2 = opt;
      o2.estimate_error = false;
      const OperatorResult c = other.run(kind, f, g, h, o2);
      for (std::size_t i = 0; i < n; ++i)
        abs_err = std::max({abs_err, std::abs(c.binary[i] - res.binary[i]), std::abs(c.ternary[i] - res.ternary[i])});
    }
    res.error_estimate = scale > 0.0 ? abs_err / scale : 0.0;
    res.flagged = res.error_estimate > opt.tolerance;
  }
  return res;
}

OperatorResult CollisionOperators::frequency_values(std::span<const double> g, std::span<const double> h,
                                                    const SweepOptions& opt) const {
  return run(Sweep::frequency, {}, g, h, opt);
}

OperatorResult CollisionOperators::gain_values(std::span<const double> f, std::span<const double> g,
                                               std::span<const double> h, const SweepOptions& opt) const {
  return run(Sweep::gain, f, g, h, opt);
}

OperatorResult CollisionOperators::frequency(const PhaseDensity& g, const PhaseDensity& h, const SweepOptions& opt) const {
  check(g);
  check(h);
  return frequency_values(g.values(), h.values(), opt);
}

OperatorResult CollisionOperators::gain(const PhaseDensity& f, const PhaseDensity& g, const PhaseDensity& h,
                                        const SweepOptions& opt) const {
  check(f);
  check(g);
  check(h);
  return gain_values(f.values(), g.values(), h.values(), opt);
}

OperatorResult CollisionOperators::loss(const PhaseDensity& f, const PhaseDensity& g, const PhaseDensity& h,
                                        const SweepOptions& opt) const {
  check(f);
  OperatorResult r = frequency(g, h, opt);
  const auto& fv = f.values();
  for (std::size_t i = 0; i < fv.size(); ++i) {
    r.binary[i] *= fv[i];
    r.ternary[i] *= fv[i];
  }
  return r;
}

DensityFn density_fn(const PhaseDensity& f) {
  return [&f](double t, const Vec3& x, const Vec3& v) { return f.evaluate(t, x, v); };
}

DensityFn maxwellian_fn(const Maxwellian& m, double scale) {
  return [m, scale](double, const Vec3& x, const Vec3& v) { return scale * m(x, v); };
}

PointValues evaluate_point(const CollisionRule& rule, const DensityFn& f, const DensityFn& g, const DensityFn& h,
                           double t, const Vec3& x) {
  PointValues p;
  const Vec3& v = rule.v;
  p.f = f(t, x, v);
  std::vector<double> gv(rule.nodes.size(), -1.0), hv(rule.nodes.size(), -1.0);
  auto at = [&](const DensityFn& fn, std::vector<double>& cache, int j) {
    if (cache[j] < 0.0) cache[j] = fn(t, x + t * (v - rule.nodes[j]), rule.nodes[j]);
    return cache[j];
  };
  for (const auto& e : rule.loss2) p.R2 += e.w * at(g, gv, e.j);
  for (const auto& e : rule.loss3) p.R3 += e.w * at(g, gv, e.j) * at(h, hv, e.k);
  for (const auto& s : rule.gain2) p.G2 += s.w * f(t, x + t * (v - s.vp), s.vp) * g(t, x + t * (v - s.v1p), s.v1p);
  for (const auto& s : rule.gain3)
    p.G3 += s.w * f(t, x + t * (v - s.vs), s.vs) * g(t, x + t * (v - s.v1s), s.v1s) * h(t, x + t * (v - s.v2s), s.v2s);
  return p;
}

}  // namespace ksbt
