#include "ksbt/estimates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ksbt/collision_maps.hpp"
#include "ksbt/errors.hpp"
#include "ksbt/parallel.hpp"
#include "ksbt/quadrature.hpp"

namespace ksbt {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

// Largest of the intermediate constants met in the proofs: the Gaussian
// moment bounds, the near/far splits of the singular convolutions and the
// two traveling-Maxwellian time integrals (n = d and n = 2d, the latter
// with |u|^{-1} <= sqrt(3) |u~|^{-1}). The time integral is bounded by
// sqrt(pi) alpha^{-1/2} |u0|^{-1}, which is sharp over x0.
double dimensional_constant(int dim, CdMode mode) {
  if (dim < 2 || dim > 3) throw InvalidInput("dimensional_constant: dim must be 2 or 3");
  if (mode == CdMode::normalized) return 1.0;
  const double d = dim;
  const double pd2 = std::pow(kPi, d / 2.0);
  const double pd = std::pow(kPi, d);
  const double ball = ball_volume(dim);
  const double s1 = sphere_area(dim);
  const double s2 = sphere_area(2 * dim);
  const double cd = s1 * std::tgamma((d + 1.0) / 2.0) / 2.0;
  const double sq = std::sqrt(kPi);
  return std::max({pd2, ball, cd, std::max(pd2, s1), 2.0 * pd, 4.0 * pd2 * ball, 4.0 * pd2 * cd,
                   std::max(pd, s2), sq * std::max(pd2, s1), std::sqrt(3.0) * sq * std::max(pd, s2)});
}

PGamma::PGamma(double gamma2, double gamma3) : g2p(std::max(0.0, gamma2)), g3p(std::max(0.0, gamma3)) {}

double PGamma::operator()(const Vec3& v) const {
  const double r = norm(v);
  return 1.0 + std::pow(r, g2p) + std::pow(r, g3p);
}

double convolution_constant(int dim, double beta, double q, CollisionKind kind, double Cd) {
  if (dim < 2 || dim > 3) throw InvalidInput("convolution_constant: dim must be 2 or 3");
  if (!(beta > 0.0)) throw InvalidInput("convolution_constant: beta must be positive");
  const double n = kind == CollisionKind::binary ? dim : 2.0 * dim;
  if (!(q > -n && q <= 1.0))
    throw InvalidInput("convolution_constant: exponent " + std::to_string(q) + " outside (" + std::to_string(-n) +
                       ", 1]");
  if (q > 0.0) return Cd * (1.0 + std::pow(beta, -n / 2.0) + std::pow(beta, -(n + 1.0) / 2.0));
  return Cd * (std::pow(beta, -n / 2.0) + 1.0 / (n + q));
}

ConvolutionConstants convolution_constants(int dim, double beta, double q2, double q3, double Cd) {
  return {convolution_constant(dim, beta, q2, CollisionKind::binary, Cd),
          convolution_constant(dim, beta, q3, CollisionKind::ternary, Cd)};
}

namespace {

// exp(-z) I0(z)
double scaled_i0(double z) {
  if (z < 30.0) return std::cyl_bessel_i(0.0, z) * std::exp(-z);
  // Asymptotic series; terms decrease monotonically for z >= 30.
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 12; ++k) {
    const double m = 2.0 * k - 1.0;
    term *= m * m / (8.0 * k * z);
    sum += term;
  }
  return sum / std::sqrt(2.0 * kPi * z);
}

// exp(-c) times the integral of exp(c cos theta) over S^{d-1}.
double scaled_angular(int dim, double c) {
  if (dim == 2) return 2.0 * kPi * scaled_i0(c);
  if (c < 1e-8) return 4.0 * kPi * std::exp(-c) * (1.0 + c * c / 6.0);
  return 2.0 * kPi * -std::expm1(-2.0 * c) / c;
}

// Integral over [0, rmax] of an integrand with an integrable power
// singularity at 0 and a Gaussian bump near `peak` of width `w`.
template <class F>
double radial_integral(F&& fn, double peak, double w, double rmax) {
  static thread_local boost::math::quadrature::tanh_sinh<double> ts(12);
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  std::vector<double> br{0.0};
  for (double b : {std::min(w, 0.5 * rmax), peak - w, peak, peak + w})
    if (b > br.back() + 1e-12 && b < rmax) br.push_back(b);
  br.push_back(rmax);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    const double a = br[i], b = br[i + 1];
    if (i == 0)
      sum += ts.integrate(fn, a, b, 1e-12);
    else
      sum += GK::integrate(fn, a, b, 10, 1e-12);
  }
  return sum;
}

double binary_lhs(int dim, double beta, double q, double s) {
  const double w = 1.0 / std::sqrt(beta);
  const double rmax = s + 9.0 * w;
  auto fn = [&](double r) {
    if (r <= 0.0) return 0.0;
    return std::pow(r, q + dim - 1.0) * std::exp(-beta * (r - s) * (r - s)) * scaled_angular(dim, 2.0 * beta * r * s);
  };
  return radial_integral(fn, s, w, rmax);
}

// (v1 - v, v2 - v) = ((p + m)/sqrt2, (p - m)/sqrt2) with m scaled by sqrt3
// gives |u~| = |(p, m)| and weight |p + sqrt2 v|^2 + |m|^2 / 3; polar
// coordinates in (|p|, |m|) leave a 2-D integral.
double ternary_lhs(int dim, double beta, double q, double s) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double sv = std::sqrt(2.0) * s;
  const double pre = sphere_area(dim) * std::pow(3.0, -dim / 2.0);
  auto inner = [&](double phi) {
    const double c = std::cos(phi), sn = std::sin(phi);
    const double jac = std::pow(c * sn, dim - 1.0);
    if (jac <= 0.0) return 0.0;
    const double a = c * c + sn * sn / 3.0;
    const double w = 1.0 / std::sqrt(beta * a);
    const double peak = sv * c / a;
    double rmax = peak + 9.0 * w;
    if (c > 0.0) rmax = std::min(rmax, (sv + 9.0 / std::sqrt(beta)) / c);
    if (sn > 0.0) rmax = std::min(rmax, 9.0 * std::sqrt(3.0 / beta) / sn);
    auto fn = [&](double rho) {
      if (rho <= 0.0) return 0.0;
      const double rp = rho * c, rm = rho * sn;
      return std::pow(rho, q + 2.0 * dim - 1.0) * std::exp(-beta * (rp - sv) * (rp - sv) - beta * rm * rm / 3.0) *
             scaled_angular(dim, 2.0 * beta * rp * sv);
    };
    return jac * radial_integral(fn, std::min(peak, rmax), std::min(w, rmax), rmax);
  };
  return pre * GK::integrate(inner, 0.0, kPi / 2.0, 6, 1e-10);
}

}  // namespace

double convolution_lhs(int dim, double beta, double q, CollisionKind kind, const Vec3& v) {
  // Range check shares the constant's validation.
  convolution_constant(dim, beta, q, kind, 1.0);
  const double s = norm(v);
  return kind == CollisionKind::binary ? binary_lhs(dim, beta, q, s) : ternary_lhs(dim, beta, q, s);
}

ConvolutionReport verify_convolution(int dim, double beta, double q, CollisionKind kind, std::span<const Vec3> vs,
                                     double Cd, int workers) {
  ConvolutionReport rep;
  rep.kind = kind;
  rep.beta = beta;
  rep.q = q;
  rep.K = convolution_constant(dim, beta, q, kind, Cd);
  rep.samples = vs.size();
  std::vector<double> ratio(vs.size(), 0.0);
  const double qp = std::max(0.0, q);
  parallel_for(workers, vs.size(), [&](std::size_t b, std::size_t e, int) {
    for (std::size_t i = b; i < e; ++i) {
      const double lhs = convolution_lhs(dim, beta, q, kind, vs[i]);
      ratio[i] = lhs / (rep.K * (1.0 + std::pow(norm(vs[i]), qp)));
    }
  });
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (ratio[i] > 1.0) ++rep.violations;
    if (ratio[i] > rep.max_ratio || i == 0) {
      rep.max_ratio = ratio[i];
      rep.worst_v = vs[i];
    }
  }
  return rep;
}

namespace {

struct Ray {
  double speed;  // |u0|
  double tstar;  // time of closest approach
  double perp2;  // squared distance of closest approach
};

Ray make_ray(std::span<const double> x0, std::span<const double> u0, double alpha) {
  if (x0.size() != u0.size() || x0.empty()) throw InvalidInput("time lemma: x0 and u0 must have equal nonzero length");
  if (!(alpha > 0.0)) throw InvalidInput("time lemma: alpha must be positive");
  double uu = 0.0, xu = 0.0;
  for (std::size_t i = 0; i < u0.size(); ++i) {
    uu += u0[i] * u0[i];
    xu += x0[i] * u0[i];
  }
  if (uu == 0.0) throw InvalidInput("time lemma: u0 = 0 leaves the bound undefined");
  Ray r{std::sqrt(uu), xu / uu, 0.0};
  for (std::size_t i = 0; i < u0.size(); ++i) {
    const double d = x0[i] - r.tstar * u0[i];
    r.perp2 += d * d;
  }
  return r;
}

}  // namespace

double traveling_maxwellian_integral(std::span<const double> x0, std::span<const double> u0, double alpha) {
  const Ray r = make_ray(x0, u0, alpha);
  const double s = std::sqrt(alpha) * r.speed;
  return std::exp(-alpha * r.perp2) * std::sqrt(kPi) / (2.0 * s) * std::erfc(-s * r.tstar);
}

TimeLemmaResult time_lemma_bound(std::span<const double> x0, std::span<const double> u0, double alpha) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const Ray r = make_ray(x0, u0, alpha);
  const double s = std::sqrt(alpha) * r.speed;
  // y = s (tau - t*): integral = exp(-alpha perp2) / s * int_{y0}^inf exp(-y^2) dy.
  const double y0 = -s * r.tstar;
  auto g = [](double y) { return std::exp(-y * y); };
  // Beyond Y the tail erfc(Y) sqrt(pi)/2 is below 1e-17 and is added in closed form.
  const double Y = std::max(y0, 0.0) + 6.0;
  double num = 0.0;
  if (y0 < 0.0) {
    num += GK::integrate(g, y0, 0.0, 15, 1e-15);
    num += GK::integrate(g, 0.0, Y, 15, 1e-15);
  } else {
    num += GK::integrate(g, y0, Y, 15, 1e-15);
  }
  num += 0.5 * std::sqrt(kPi) * std::erfc(Y);
  TimeLemmaResult out;
  out.integral = std::exp(-alpha * r.perp2) / s * num;
  out.stated_bound = 0.5 * std::sqrt(kPi) / s;
  out.sharp_bound = std::sqrt(kPi) / s;
  return out;
}

const char* to_string(OperatorBound b) {
  switch (b) {
    case OperatorBound::binary_loss: return "binary_loss";
    case OperatorBound::binary_gain: return "binary_gain";
    case OperatorBound::ternary_loss: return "ternary_loss";
    case OperatorBound::ternary_gain: return "ternary_gain";
    case OperatorBound::total_loss: return "total_loss";
    case OperatorBound::total_gain: return "total_gain";
  }
  return "?";
}

bool TimeAverageReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const TimeAverageEntry& e) { return e.violations == 0; });
}

namespace {

Vec3 uniform_ball(int dim, Rng& rng, double radius) {
  const Vec3 d = sample_direction(dim, rng);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  return radius * std::pow(U(rng), 1.0 / dim) * d;
}

}  // namespace

TimeAverageReport verify_time_average(const DensityFn& f, const DensityFn& g, const DensityFn& h, double norm_f,
                                      double norm_g, double norm_h, const TimeAverageScenario& sc) {
  sc.kernel.validate();
  const Maxwellian M{sc.alpha, sc.beta};
  M.validate();
  if (!(sc.T_max > 0.0) || sc.n_points < 1 || sc.n_panels < 1 || sc.n_per_panel < 1)
    throw InvalidInput("verify_time_average: invalid scenario");
  const int dim = sc.kernel.dim;
  const WellposednessConstants wc = wellposedness_constants(sc.kernel, sc.alpha, sc.beta, sc.cd_mode);

  TimeAverageReport rep;
  rep.K_beta = wc.K_beta;
  rep.samples = static_cast<std::size_t>(sc.n_points);

  Rng rng = make_stream(sc.seed, 0);
  std::vector<Vec3> xs(sc.n_points), vs(sc.n_points);
  for (int i = 0; i < sc.n_points; ++i) {
    xs[i] = uniform_ball(dim, rng, sc.x_radius);
    vs[i] = uniform_ball(dim, rng, sc.v_radius);
  }

  std::vector<double> tn, tw;
  const double panel = sc.T_max / sc.n_panels;
  const Rule1D gl = gauss_legendre(sc.n_per_panel, 0.0, panel);
  for (int p = 0; p < sc.n_panels; ++p)
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      tn.push_back(p * panel + gl.nodes[i]);
      tw.push_back(gl.weights[i]);
    }

  const RuleBuilder builder(sc.kernel, sc.quad, sc.beta);
  const double base = wc.K_beta / std::sqrt(sc.alpha);
  const double scale[6] = {norm_f * norm_g,          norm_f * norm_g,          norm_f * norm_g * norm_h,
                           norm_f * norm_g * norm_h, norm_f * norm_g * (1 + norm_h), norm_f * norm_g * (1 + norm_h)};

  std::vector<std::array<double, 6>> ratio(sc.n_points);
  parallel_for(sc.quad.workers, static_cast<std::size_t>(sc.n_points), [&](std::size_t b, std::size_t e, int) {
    for (std::size_t i = b; i < e; ++i) {
      const CollisionRule rule = builder.build(vs[i], i + 1);
      std::array<double, 6> acc{};
      for (std::size_t k = 0; k < tn.size(); ++k) {
        const PointValues pv = evaluate_point(rule, f, g, h, tn[k], xs[i]);
        const double ops[6] = {pv.L2(), pv.G2, pv.L3(), pv.G3, pv.L2() + pv.L3(), pv.G2 + pv.G3};
        for (int j = 0; j < 6; ++j) acc[j] += tw[k] * std::abs(ops[j]);
      }
      const double m = M(xs[i], vs[i]);
      for (int j = 0; j < 6; ++j) {
        const double bound = base * m * scale[j];
        ratio[i][j] = bound > 0.0 ? acc[j] / bound : (acc[j] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      }
    }
  });

  for (int j = 0; j < 6; ++j) {
    TimeAverageEntry& e = rep.entries[j];
    e.which = static_cast<OperatorBound>(j);
    for (int i = 0; i < sc.n_points; ++i) {
      if (ratio[i][j] > 1.0) ++e.violations;
      if (ratio[i][j] > e.max_ratio || i == 0) {
        e.max_ratio = ratio[i][j];
        e.worst_x = xs[i];
        e.worst_v = vs[i];
      }
    }
  }
  return rep;
}

TimeAverageReport verify_time_average(const PhaseDensity& f, const PhaseDensity& g, const PhaseDensity& h,
                                      const TimeAverageScenario& sc) {
  return verify_time_average(density_fn(f), density_fn(g), density_fn(h), sup_m_norm(f), sup_m_norm(g),
                             sup_m_norm(h), sc);
}

double k_beta(int dim, double beta, double gamma2, double gamma3, double norm_b2, double norm_b3, double Cd) {
  const double d = dim;
  return Cd * (norm_b2 * (std::pow(beta, -d / 2.0) + 1.0 / (d + gamma2 - 1.0)) +
               norm_b3 * (std::pow(beta, -d) + 1.0 / (2.0 * d + gamma3 - 1.0)));
}

double WellposednessConstants::c_out(double f0_norm) const {
  if (!(f0_norm >= 0.0)) throw InvalidInput("c_out: the initial norm must be nonnegative");
  const double disc = discriminant(f0_norm);
  if (disc < 0.0)
    throw SmallnessViolation("initial data too large for guaranteed global existence: norm " +
                             std::to_string(f0_norm) + " exceeds threshold " + std::to_string(threshold));
  // 2 f0 / (1 + sqrt(disc)) equals (1 - sqrt(disc)) / (24 A) without the cancellation.
  const double C = 2.0 * f0_norm / (1.0 + std::sqrt(disc));
  const double resid = f0_norm + 12.0 * A * C * C - C;
  if (std::abs(resid) > 1e-12 * std::max(C, 1e-300) && std::abs(resid) > 1e-300)
    throw std::logic_error("c_out: fixed-point identity violated");
  if (C > 0.0 && !(C < lambda)) throw std::logic_error("c_out: C_out is not below lambda");
  return C;
}

double WellposednessConstants::rho(double C) const { return 12.0 * K_beta / std::sqrt(alpha) * (C + C * C); }

WellposednessConstants wellposedness_constants(const KernelConfig& kernel, double alpha, double beta, CdMode mode,
                                               const AngularNormOptions& opt) {
  kernel.validate();
  Maxwellian{alpha, beta}.validate();
  WellposednessConstants c;
  c.dim = kernel.dim;
  c.alpha = alpha;
  c.beta = beta;
  c.gamma2 = kernel.gamma2;
  c.gamma3 = kernel.gamma3;
  c.C_d = dimensional_constant(kernel.dim, mode);
  c.norm_b2 = angular_norm(kernel, CollisionKind::binary, opt);
  c.norm_b3 = angular_norm(kernel, CollisionKind::ternary, opt);
  c.K2 = convolution_constant(kernel.dim, beta, kernel.gamma2, CollisionKind::binary, c.C_d);
  c.K3 = convolution_constant(kernel.dim, beta, kernel.gamma3, CollisionKind::ternary, c.C_d);
  c.K_beta = k_beta(kernel.dim, beta, kernel.gamma2, kernel.gamma3, c.norm_b2, c.norm_b3, c.C_d);
  const double r = std::pow(alpha, 0.25) / (2.0 * std::sqrt(6.0 * c.K_beta));
  c.lambda = std::min(std::sqrt(alpha) / (24.0 * c.K_beta), r);
  c.A = c.K_beta / std::sqrt(alpha) * (1.0 + r);
  c.threshold = 1.0 / (48.0 * c.A);
  return c;
}

SmallnessCheck smallness_check(const WellposednessConstants& c, double f0_norm) {
  SmallnessCheck s;
  s.f0_norm = f0_norm;
  s.threshold = c.threshold;
  s.discriminant = c.discriminant(f0_norm);
  s.accepted = f0_norm < c.threshold && s.discriminant >= 0.0;
  if (s.accepted) {
    s.c_out = c.c_out(f0_norm);
    s.message = "ok";
  } else {
    s.c_out = std::numeric_limits<double>::quiet_NaN();
    s.message = "initial data too large for guaranteed global existence (norm " + std::to_string(f0_norm) +
                " >= threshold " + std::to_string(c.threshold) + ")";
  }
  return s;
}

}  // namespace ksbt
