#include "ksbt/cross_sections.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "ksbt/collision_maps.hpp"
#include "ksbt/errors.hpp"
#include "ksbt/quadrature.hpp"

namespace ksbt {

AngularDensity AngularDensity::zero() { return AngularDensity(); }

AngularDensity AngularDensity::hard_sphere() {
  AngularDensity b;
  b.kind_ = Kind::hard_sphere;
  return b;
}

AngularDensity AngularDensity::derived_ternary() {
  AngularDensity b;
  b.kind_ = Kind::derived_ternary;
  return b;
}

AngularDensity AngularDensity::constant(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidInput("angular density: constant must be finite and >= 0");
  AngularDensity b;
  b.kind_ = Kind::constant;
  b.c_ = c;
  return b;
}

AngularDensity AngularDensity::tabulated(std::vector<double> z, std::vector<double> value) {
  if (z.size() != value.size() || z.size() < 2) throw InvalidInput("angular table: need at least two (z, value) rows");
  std::vector<std::size_t> order(z.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
  AngularDensity b;
  b.kind_ = Kind::tabulated;
  for (std::size_t i : order) {
    if (!(z[i] >= -1.0 && z[i] <= 1.0)) throw InvalidInput("angular table: z outside [-1,1]");
    if (!(value[i] >= 0.0) || !std::isfinite(value[i])) throw InvalidInput("angular table: values must be finite and >= 0");
    if (!b.z_.empty() && z[i] == b.z_.back()) throw InvalidInput("angular table: duplicate z");
    b.z_.push_back(z[i]);
    b.val_.push_back(value[i]);
  }
  // A table on [0,1] is read at |z|; otherwise it must span [-1,1].
  const bool half = b.z_.front() >= 0.0;
  if ((half && (b.z_.front() != 0.0 || b.z_.back() != 1.0)) || (!half && (b.z_.front() != -1.0 || b.z_.back() != 1.0)))
    throw InvalidInput("angular table: z must cover [0,1] or [-1,1]");
  return b;
}

AngularDensity AngularDensity::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("angular table: cannot open " + path);
  std::vector<double> z, val;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a, b;
    if (!(ss >> a >> b)) {
      if (z.empty()) continue;  // header row
      throw InvalidInput("angular table: malformed row in " + path);
    }
    z.push_back(a);
    val.push_back(b);
  }
  return tabulated(std::move(z), std::move(val));
}

std::string AngularDensity::describe() const {
  switch (kind_) {
    case Kind::zero: return "zero";
    case Kind::hard_sphere: return "hard_sphere";
    case Kind::derived_ternary: return "derived_ternary";
    case Kind::constant: {
      std::ostringstream s;
      s.precision(17);
      s << "constant(" << c_ << ")";
      return s.str();
    }
    case Kind::tabulated: return "tabulated(" + std::to_string(z_.size()) + ")";
  }
  return "?";
}

double AngularDensity::table(double z) const {
  auto it = std::upper_bound(z_.begin(), z_.end(), z);
  if (it == z_.begin()) return val_.front();
  if (it == z_.end()) return val_.back();
  const std::size_t i = static_cast<std::size_t>(it - z_.begin()) - 1;
  const double t = (z - z_[i]) / (z_[i + 1] - z_[i]);
  return (1.0 - t) * val_[i] + t * val_[i + 1];
}

double AngularDensity::operator()(double z, double w) const {
  constexpr double slack = 1e-12;
  if (!(std::abs(z) <= 1.0 + slack)) throw InvalidInput("angular density: z outside [-1,1]");
  if (!(std::abs(w) <= 0.5 + slack)) throw InvalidInput("angular density: w outside [-1/2,1/2]");
  z = std::clamp(z, -1.0, 1.0);
  w = std::clamp(w, -0.5, 0.5);
  switch (kind_) {
    case Kind::zero: return 0.0;
    case Kind::hard_sphere: return 0.5 * std::abs(z);
    case Kind::derived_ternary: return 0.5 * std::abs(z) / std::sqrt(1.0 + w);
    case Kind::constant: return c_;
    case Kind::tabulated:
      if (z_.front() >= 0.0) return table(std::abs(z));
      return 0.5 * (table(z) + table(-z));
  }
  return 0.0;
}

std::vector<std::string> KernelConfig::violations() const {
  std::vector<std::string> out;
  if (dim < 2 || dim > 3) out.push_back("dim must be 2 or 3");
  const double d = dim;
  if (!(gamma2 > -d + 1.0 && gamma2 <= 1.0)) {
    std::ostringstream s;
    s << "kernel.gamma2 = " << gamma2 << " outside (" << -d + 1.0 << ", 1]";
    out.push_back(s.str());
  }
  if (!(gamma3 > -2.0 * d + 1.0 && gamma3 <= 1.0)) {
    std::ostringstream s;
    s << "kernel.gamma3 = " << gamma3 << " outside (" << -2.0 * d + 1.0 << ", 1]";
    out.push_back(s.str());
  }
  if (b2.is_zero() && b3.is_zero()) out.push_back("kernel.b2 and kernel.b3 cannot both be zero");
  return out;
}

void KernelConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid kernel configuration:";
  for (const auto& s : v) msg += " " + s + ";";
  throw InvalidInput(msg);
}

double b2_eval(const KernelConfig& k, double z) { return k.b2(z); }

double b3_eval(const KernelConfig& k, double z, double w) { return k.b3(z, w); }

std::optional<double> B2_eval(const KernelConfig& k, const Vec3& u, const Vec3& omega) {
  const double m = norm(u);
  if (m == 0.0) {
    if (k.gamma2 > 0.0) return 0.0;
    return std::nullopt;
  }
  const double z = dot(u, omega) / m;
  return std::pow(m, k.gamma2) * k.b2(z);
}

std::optional<double> B3_eval(const KernelConfig& k, const Vec3& v, const Vec3& v1, const Vec3& v2,
                              const Vec3& omega1, const Vec3& omega2) {
  const double m = u_tilde_mag(v, v1, v2);
  if (m == 0.0) {
    if (k.gamma3 > 0.0) return 0.0;
    return std::nullopt;
  }
  const double z = (dot(v1 - v, omega1) + dot(v2 - v, omega2)) / m;
  return std::pow(m, k.gamma3) * k.b3(z, dot(omega1, omega2));
}

namespace {

constexpr double kPi = std::numbers::pi;

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-13);
}

double inner_ternary(const KernelConfig& k, const SphereRule& rule, const Vec3& n1, const Vec3& n2) {
  double acc = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double z = dot(n1, rule.a[q]) + dot(n2, rule.b[q]);
    acc += rule.weights[q] * k.b3(z, dot(rule.a[q], rule.b[q]));
  }
  return acc;
}

double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

// S^5 products grow fast; d=3 uses a third of the circle resolution.
// d = 3 squares a 2-D sphere rule, so the resolution is scaled down to
// keep the cost comparable with d = 2.
int ternary_n_ang(int d, const AngularNormOptions& opt) {
  return d == 2 ? opt.n_ang : std::max(8, (opt.n_ang / 6) & ~1);
}

int ternary_n_chi(int d, const AngularNormOptions& opt) { return d == 2 ? opt.n_chi : std::max(1, opt.n_chi / 2); }

// Project a nonzero vector of R^{2d} onto the ellipsoid along its ray.
std::pair<Vec3, Vec3> to_ellipsoid(const Vec3& a, const Vec3& b) {
  const double s = 1.0 / std::sqrt(ellipsoid_form(a, b));
  return {s * a, s * b};
}

}  // namespace

double ternary_angular_integral(const KernelConfig& k, const Vec3& n1, const Vec3& n2, const AngularNormOptions& opt) {
  return inner_ternary(k, double_sphere_rule(k.dim, ternary_n_chi(k.dim, opt), ternary_n_ang(k.dim, opt)), n1, n2);
}

double angular_norm(const KernelConfig& k, CollisionKind kind, const AngularNormOptions& opt) {
  const int d = k.dim;
  if (kind == CollisionKind::binary) {
    if (k.b2.is_zero()) return 0.0;
    double r = 0.0;
    if (d == 2) {
      auto f = [&](double th) { return k.b2(std::cos(th)); };
      r = 2.0 * (integrate(f, 0.0, kPi / 2.0) + integrate(f, kPi / 2.0, kPi));
    } else {
      auto f = [&](double z) { return k.b2(z) * std::pow(std::max(0.0, 1.0 - z * z), 0.5 * (d - 3)); };
      r = sphere_area(d - 1) * (integrate(f, -1.0, 0.0) + integrate(f, 0.0, 1.0));
    }
    if (!std::isfinite(r) || r > 1e12) throw InvalidInput("unintegrable angular density");
    return r;
  }

  if (k.b3.is_zero()) return 0.0;
  // The search is costly; presets and constants are memoised.
  const bool cacheable = k.b3.kind() != AngularDensity::Kind::tabulated;
  std::ostringstream key;
  key.precision(17);
  key << d << ' ' << k.b3.describe() << ' ' << opt.n_chi << ' ' << opt.n_ang << ' ' << opt.n_search << ' '
      << opt.n_refine;
  static std::mutex cache_mutex;
  static std::map<std::string, double> cache;
  if (cacheable) {
    std::lock_guard<std::mutex> lock(cache_mutex);
    if (const auto it = cache.find(key.str()); it != cache.end()) return it->second;
  }
  // Global search on a coarse rule, local refinement on the full one.
  AngularNormOptions coarse = opt;
  coarse.n_chi = std::max(2, opt.n_chi / 4);
  coarse.n_ang = std::max(8, (opt.n_ang / 3) & ~1);
  const SphereRule search_rule = double_sphere_rule(d, ternary_n_chi(d, coarse), ternary_n_ang(d, coarse));
  const SphereRule rule = double_sphere_rule(d, ternary_n_chi(d, opt), ternary_n_ang(d, opt));
  static constexpr unsigned primes[6] = {2, 3, 5, 7, 11, 13};
  double best = -1.0;
  Vec3 b1{}, b2{};
  for (int i = 0; i < opt.n_search; ++i) {
    Vec3 a{}, b{};
    for (int c = 0; c < 2 * d; ++c) {
      const double u = radical_inverse(static_cast<std::uint64_t>(i) + 1, primes[c]);
      const double g = std::sqrt(2.0) * boost::math::erf_inv(2.0 * u - 1.0);
      (c < d ? a[c] : b[c - d]) = g;
    }
    if (norm2(a) + norm2(b) == 0.0) continue;
    const auto [n1, n2] = to_ellipsoid(a, b);
    const double val = inner_ternary(k, search_rule, n1, n2);
    if (val > best) {
      best = val;
      b1 = n1;
      b2 = n2;
    }
  }
  best = inner_ternary(k, rule, b1, b2);
  Rng rng(0x5eedull);
  std::normal_distribution<double> g;
  double step = 0.25;
  for (int it = 0; it < opt.n_refine; ++it) {
    Vec3 a = b1, b = b2;
    for (int c = 0; c < d; ++c) {
      a[c] += step * g(rng);
      b[c] += step * g(rng);
    }
    const auto [n1, n2] = to_ellipsoid(a, b);
    const double val = inner_ternary(k, rule, n1, n2);
    if (val > best) {
      best = val;
      b1 = n1;
      b2 = n2;
    } else {
      step *= 0.95;
    }
  }
  if (!std::isfinite(best) || best > 1e12) throw InvalidInput("unintegrable angular density");
  if (cacheable) {
    std::lock_guard<std::mutex> lock(cache_mutex);
    cache[key.str()] = best;
  }
  return best;
}

}  // namespace ksbt
