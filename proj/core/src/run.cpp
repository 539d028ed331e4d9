#include "ksbt/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ksbt/collision_maps.hpp"
#include "ksbt/errors.hpp"

namespace ksbt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

json grid_json(const PhaseGrid& g) {
  return {{"dim", g.dim()}, {"Nx", g.Nx()}, {"Nv", g.Nv()}, {"Nt", g.Nt()},
          {"T", g.T()},     {"Rx", g.Rx()}, {"Rv", g.Rv()}};
}

json constants_to_json(const WellposednessConstants& c, const RunConfig& cfg) {
  return {{"config_hash", cfg.hash()},
          {"dim", c.dim},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"gamma2", c.gamma2},
          {"gamma3", c.gamma3},
          {"cd_mode", cfg.cd_mode == CdMode::derived ? "derived" : "normalized"},
          {"C_d", c.C_d},
          {"norm_b2", c.norm_b2},
          {"norm_b3", c.norm_b3},
          {"Ktilde2", c.K2},
          {"Ktilde3", c.K3},
          {"K_beta", c.K_beta},
          {"lambda", c.lambda},
          {"smallness_threshold", c.threshold}};
}

}  // namespace

std::string constants_json(const WellposednessConstants& c, const RunConfig& cfg, int indent) {
  return constants_to_json(c, cfg).dump(indent);
}

int run_constants(const RunConfig& cfg, std::ostream& out) {
  const auto c = wellposedness_constants(cfg.kernel, cfg.alpha, cfg.beta, cfg.cd_mode);
  json j = constants_to_json(c, cfg);
  if (cfg.initial.preset == InitialPreset::scaled_maxwellian) {
    const double f0 = cfg.initial.factor * c.threshold;
    const SmallnessCheck s = smallness_check(c, f0);
    j["f0_norm"] = f0;
    j["discriminant"] = s.discriminant;
    j["smallness_accepted"] = s.accepted;
    if (s.accepted) {
      j["C_out"] = s.c_out;
      j["rho"] = c.rho(s.c_out);
    }
  }
  const std::string s = j.dump(2);
  auto f = open_out(fs::path(cfg.output.dir) / "constants.json");
  f << s << "\n";
  out << s << "\n";
  return exit_ok;
}

namespace {

Vec3 ball_point(int dim, Rng& rng, double radius) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  return radius * std::pow(U(rng), 1.0 / dim) * sample_direction(dim, rng);
}

struct CertRow {
  std::string certificate, detail;
  std::size_t samples = 0, violations = 0;
  double max_ratio = 0.0;
  bool certify = true;  // false: informational row, not part of the pass/fail verdict
};

}  // namespace

int run_verify(const RunConfig& cfg, std::ostream& log) {
  const int d = cfg.dim;
  std::vector<CertRow> rows;

  {
    // Collision-map conservation over random frames.
    Rng rng = make_stream(cfg.seed, 101);
    double worst2 = 0.0, worst3 = 0.0;
    std::size_t bad2 = 0, bad3 = 0;
    for (int i = 0; i < cfg.verify.frames; ++i) {
      const Vec3 v = sample_velocity(d, rng), v1 = sample_velocity(d, rng), v2 = sample_velocity(d, rng);
      const auto r2 = residuals(make_binary_frame(v, v1, sample_direction(d, rng)));
      const auto [o1, o2] = sample_direction_pair(d, rng);
      const auto r3 = residuals(make_ternary_frame(v, v1, v2, o1, o2));
      const double m2 = std::max({r2.momentum, r2.energy, r2.relative_speed, r2.specular, r2.involution});
      const double m3 = std::max({r3.momentum, r3.energy, r3.relative_speed, r3.specular, r3.involution});
      worst2 = std::max(worst2, m2);
      worst3 = std::max(worst3, m3);
      bad2 += m2 > 1e-12;
      bad3 += m3 > 1e-12;
    }
    rows.push_back({"conservation", "binary frames, tol 1e-12", std::size_t(cfg.verify.frames), bad2, worst2 / 1e-12});
    rows.push_back({"conservation", "ternary frames, tol 1e-12", std::size_t(cfg.verify.frames), bad3, worst3 / 1e-12});
  }

  {
    const double Cd = dimensional_constant(d, cfg.cd_mode);
    Rng rng = make_stream(cfg.seed, 102);
    std::vector<Vec3> vs(cfg.verify.conv_samples);
    for (auto& v : vs) v = ball_point(d, rng, cfg.verify.conv_vmax);
    struct Case {
      CollisionKind kind;
      double q;
    };
    std::vector<Case> cases = {{CollisionKind::binary, cfg.kernel.gamma2}, {CollisionKind::ternary, cfg.kernel.gamma3}};
    if (cfg.kernel.gamma2 - 1.0 > -d) cases.push_back({CollisionKind::binary, cfg.kernel.gamma2 - 1.0});
    if (cfg.kernel.gamma3 - 1.0 > -2 * d) cases.push_back({CollisionKind::ternary, cfg.kernel.gamma3 - 1.0});
    for (const auto& cs : cases) {
      const auto rep = verify_convolution(d, cfg.beta, cs.q, cs.kind, vs, Cd, cfg.workers);
      std::ostringstream det;
      det << (cs.kind == CollisionKind::binary ? "binary" : "ternary") << " beta=" << cfg.beta << " q=" << cs.q;
      rows.push_back({"convolution", det.str(), rep.samples, rep.violations, rep.max_ratio});
    }
  }

  {
    Rng rng = make_stream(cfg.seed, 103);
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_real_distribution<double> U(std::log(0.1), std::log(10.0));
    for (int n : {d, 2 * d}) {
      std::size_t bad_sharp = 0, bad_stated = 0;
      double r_sharp = 0.0, r_stated = 0.0;
      std::vector<double> x0(n), u0(n);
      for (int i = 0; i < cfg.verify.time_samples; ++i) {
        for (int k = 0; k < n; ++k) {
          x0[k] = 2.0 * N(rng);
          u0[k] = N(rng);
        }
        const double alpha = std::exp(U(rng));
        const auto r = time_lemma_bound(x0, u0, alpha);
        r_sharp = std::max(r_sharp, r.integral / r.sharp_bound);
        r_stated = std::max(r_stated, r.integral / r.stated_bound);
        bad_sharp += r.integral > r.sharp_bound;
        bad_stated += r.integral > r.stated_bound;
      }
      const std::string dim = "n=" + std::to_string(n);
      rows.push_back({"time_lemma", dim + " bound sqrt(pi)/(sqrt(alpha)|u0|)", std::size_t(cfg.verify.time_samples),
                      bad_sharp, r_sharp});
      rows.push_back({"time_lemma", dim + " bound sqrt(pi)/(2 sqrt(alpha)|u0|) (informational)",
                      std::size_t(cfg.verify.time_samples), bad_stated, r_stated, false});
    }
  }

  {
    TimeAverageScenario sc;
    sc.kernel = cfg.kernel;
    sc.quad = cfg.quad;
    sc.alpha = cfg.alpha;
    sc.beta = cfg.beta;
    sc.T_max = cfg.verify.T_max;
    sc.n_points = cfg.verify.time_points;
    sc.seed = cfg.seed;
    sc.cd_mode = cfg.cd_mode;
    const Maxwellian M = cfg.envelope();
    const DensityFn m = maxwellian_fn(M);
    const auto rep = verify_time_average(m, m, m, 1.0, 1.0, 1.0, sc);
    for (const auto& e : rep.entries)
      rows.push_back({"time_average", std::string(to_string(e.which)) + " T_max=" + g17(sc.T_max), rep.samples,
                      e.violations, e.max_ratio});
  }

  {
    const auto c = wellposedness_constants(cfg.kernel, cfg.alpha, cfg.beta, cfg.cd_mode);
    std::size_t bad = 0;
    double worst = 0.0;
    for (double fac : {0.0, 0.25, 0.5, 0.9, 0.99}) {
      try {
        const double f0 = fac * c.threshold;
        const double C = c.c_out(f0);
        const double resid = std::abs(f0 + 12.0 * c.A * C * C - C);
        worst = std::max(worst, C > 0 ? resid / C / 1e-12 : 0.0);
        if (!(C < c.lambda) && C > 0) ++bad;
      } catch (const std::exception&) {
        ++bad;
      }
    }
    rows.push_back({"wellposedness", "C_out fixed point and C_out < lambda below threshold", 5, bad, worst});
  }

  auto out = open_out(fs::path(cfg.output.dir) / "certificates.csv");
  out << "# config_hash " << cfg.hash() << "\n";
  out << "certificate,detail,samples,violations,max_ratio,status\n";
  bool ok = true;
  for (const auto& r : rows) {
    const bool pass = r.violations == 0;
    if (r.certify) ok = ok && pass;
    const char* status = !r.certify ? "info" : (pass ? "pass" : "FAIL");
    out << r.certificate << ",\"" << r.detail << "\"," << r.samples << "," << r.violations << "," << g17(r.max_ratio)
        << "," << status << "\n";
    log << r.certificate << " [" << r.detail << "]: " << status << " (max ratio " << r.max_ratio << ", " << r.violations
        << " of " << r.samples << ")\n";
  }
  return ok ? exit_ok : exit_certificate;
}

int run_kernels(const RunConfig& cfg, const RunOptions& opt, std::ostream& log) {
  const int d = cfg.dim;
  Rng rng = make_stream(cfg.seed, 201);
  auto out = open_out(fs::path(cfg.output.dir) / "frames.csv");
  out << "# config_hash " << cfg.hash() << "\n";
  auto vec_cols = [&](const char* name, int n) {
    for (int a = 0; a < n; ++a) out << "," << name << "_" << a;
  };
  out << "kind,index";
  for (const char* nm : {"v", "v1", "v2", "omega1", "omega2", "post", "post1", "post2"}) vec_cols(nm, d);
  out << ",B,momentum,energy,relative_speed,specular,involution\n";
  auto put = [&](const Vec3& x) {
    for (int a = 0; a < d; ++a) out << "," << g17(x[a]);
  };
  const Vec3 z{};
  double worst = 0.0;
  for (int i = 0; i < opt.kernel_frames; ++i) {
    const Vec3 v = sample_velocity(d, rng), v1 = sample_velocity(d, rng), v2 = sample_velocity(d, rng);
    const Vec3 om = sample_direction(d, rng);
    const auto bf = make_binary_frame(v, v1, om);
    const auto r2 = residuals(bf);
    const auto B2 = B2_eval(cfg.kernel, v1 - v, om);
    out << "binary," << i;
    put(v), put(v1), put(z), put(om), put(z), put(bf.vp), put(bf.v1p), put(z);
    out << "," << g17(B2.value_or(NAN)) << "," << g17(r2.momentum) << "," << g17(r2.energy) << ","
        << g17(r2.relative_speed) << "," << g17(r2.specular) << "," << g17(r2.involution) << "\n";
    const auto [o1, o2] = sample_direction_pair(d, rng);
    const auto tf = make_ternary_frame(v, v1, v2, o1, o2);
    const auto r3 = residuals(tf);
    const auto B3 = B3_eval(cfg.kernel, v, v1, v2, o1, o2);
    out << "ternary," << i;
    put(v), put(v1), put(v2), put(o1), put(o2), put(tf.vs), put(tf.v1s), put(tf.v2s);
    out << "," << g17(B3.value_or(NAN)) << "," << g17(r3.momentum) << "," << g17(r3.energy) << ","
        << g17(r3.relative_speed) << "," << g17(r3.specular) << "," << g17(r3.involution) << "\n";
    worst = std::max({worst, r2.momentum, r2.energy, r2.specular, r3.momentum, r3.energy, r3.specular});
  }
  log << "wrote " << 2 * opt.kernel_frames << " frames, max conservation defect " << worst << "\n";
  return exit_ok;
}

std::vector<double> initial_data(const RunConfig& cfg, const PhaseGrid& grid, const WellposednessConstants& c) {
  const Maxwellian M = cfg.envelope();
  if (cfg.initial.preset == InitialPreset::scaled_maxwellian) {
    std::vector<double> f0 = grid.envelope_slice(M);
    const double s = cfg.initial.factor * c.threshold;
    for (double& x : f0) x *= s;
    return f0;
  }
  fs::path p(cfg.initial.path);
  if (p.is_relative() && !cfg.source_dir.empty()) p = fs::path(cfg.source_dir) / p;
  std::ifstream in(p);
  if (!in) throw ConfigError({"initial.path: cannot open " + p.string()});
  const int d = grid.dim();
  std::vector<double> f0(grid.slice_size(), 0.0);
  std::vector<std::string> errs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::vector<double> vals;
    double x;
    while (ss >> x) vals.push_back(x);
    if (vals.size() != static_cast<std::size_t>(2 * d + 1)) {
      if (lineno == 1) continue;  // header
      errs.push_back("initial.path line " + std::to_string(lineno) + ": expected " + std::to_string(2 * d + 1) +
                     " values");
      continue;
    }
    // Rows must sit on grid nodes.
    std::size_t ix = 0, iv = 0;
    bool on = true;
    for (int a = 0; a < d; ++a) {
      const AxisLocation lx = grid.locate_x(vals[a]), lv = grid.locate_v(vals[d + a]);
      if (!lx.inside || !lv.inside || (lx.frac != 0.0 && lx.frac != 1.0) || (lv.frac != 0.0 && lv.frac != 1.0)) {
        on = false;
        break;
      }
      ix = ix * grid.Nx() + lx.i0 + (lx.frac == 1.0 ? 1 : 0);
      iv = iv * grid.Nv() + lv.i0 + (lv.frac == 1.0 ? 1 : 0);
    }
    if (!on) {
      errs.push_back("initial.path line " + std::to_string(lineno) + ": point is not a grid node");
      continue;
    }
    const double val = vals[2 * d];
    if (!(val >= 0.0) || !std::isfinite(val)) {
      errs.push_back("initial.path line " + std::to_string(lineno) + ": value must be finite and nonnegative");
      continue;
    }
    f0[iv * grid.x_count() + ix] = val;
  }
  if (!errs.empty()) throw ConfigError(errs);
  // Envelope certificate: a finite M-norm on the grid.
  (void)PhaseDensity::certify(grid.single_slice(0.0), M, f0);
  return f0;
}

void write_checkpoint(const std::string& path, const PhaseGrid& grid, const Checkpoint& cp) {
  if (cp.l.size() != grid.size() || cp.u.size() != grid.size())
    throw InvalidInput("write_checkpoint: fields do not match the grid");
  json tr = json::array();
  for (const auto& e : cp.trace)
    tr.push_back({e.n, e.gap, e.max_mono_violation, e.residual_L1, e.wall_time_s});
  json h = {{"format", "ksbt-checkpoint"},
            {"version", 1},
            {"n", cp.n},
            {"config_hash", cp.config_hash},
            {"c_out", cp.c_out},
            {"layout", "t,x,v"},
            {"fields", {"l", "u"}},
            {"count", grid.size()},
            {"grid", grid_json(grid)},
            {"trace", tr}};
  const fs::path p(path);
  const fs::path tmp = p.string() + ".tmp";
  {
    auto out = open_out(tmp);
    out << h.dump() << "\n";
    const std::size_t xc = grid.x_count(), vc = grid.v_count();
    std::vector<double> buf(grid.size());
    for (const auto* f : {&cp.l, &cp.u}) {
      for (int k = 0; k < grid.Nt(); ++k)
        for (std::size_t ix = 0; ix < xc; ++ix)
          for (std::size_t iv = 0; iv < vc; ++iv)
            buf[(static_cast<std::size_t>(k) * xc + ix) * vc + iv] = (*f)[grid.index(k, iv, ix)];
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("write_checkpoint: write failed for " + path);
  }
  fs::rename(tmp, p);
}

Checkpoint read_checkpoint(const std::string& path, const PhaseGrid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_checkpoint: cannot open " + path);
  std::string header;
  std::getline(in, header);
  const json h = json::parse(header);
  if (h.value("format", "") != "ksbt-checkpoint") throw std::runtime_error(path + ": not a checkpoint");
  if (h.at("grid") != grid_json(grid)) throw std::runtime_error(path + ": grid does not match the configuration");
  Checkpoint cp;
  cp.n = h.at("n").get<int>();
  cp.config_hash = h.at("config_hash").get<std::string>();
  cp.c_out = h.at("c_out").get<double>();
  for (const auto& e : h.at("trace"))
    cp.trace.push_back({e[0].get<int>(), e[1].get<double>(), e[2].get<double>(), e[3].get<double>(),
                        e[4].get<double>()});
  const std::size_t xc = grid.x_count(), vc = grid.v_count();
  std::vector<double> buf(grid.size());
  for (auto* f : {&cp.l, &cp.u}) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated data");
    f->resize(grid.size());
    for (int k = 0; k < grid.Nt(); ++k)
      for (std::size_t ix = 0; ix < xc; ++ix)
        for (std::size_t iv = 0; iv < vc; ++iv)
          (*f)[grid.index(k, iv, ix)] = buf[(static_cast<std::size_t>(k) * xc + ix) * vc + iv];
  }
  return cp;
}

namespace {

fs::path checkpoint_path(const RunConfig& cfg, int n) {
  char name[32];
  std::snprintf(name, sizeof name, "iter_%04d.bin", n);
  return fs::path(cfg.output.dir) / "checkpoints" / name;
}

std::optional<fs::path> newest_checkpoint(const RunConfig& cfg) {
  const fs::path dir = fs::path(cfg.output.dir) / "checkpoints";
  if (!fs::exists(dir)) return std::nullopt;
  std::optional<fs::path> best;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("iter_", 0) == 0 && e.path().extension() == ".bin" && (!best || e.path() > *best)) best = e.path();
  }
  return best;
}

void write_trace(const RunConfig& cfg, const std::vector<TraceEntry>& trace) {
  auto out = open_out(fs::path(cfg.output.dir) / "trace.csv");
  out << "# config_hash " << cfg.hash() << "\n";
  out << "n,gap,max_mono_violation,residual_L1,wall_time_s\n";
  for (const auto& e : trace)
    out << e.n << "," << g17(e.gap) << "," << g17(e.max_mono_violation) << "," << g17(e.residual_L1) << ","
        << g17(cfg.output.trace_wall_time ? e.wall_time_s : 0.0) << "\n";
  auto tim = open_out(fs::path(cfg.output.dir) / "timing.csv");
  tim << "# config_hash " << cfg.hash() << "\n";
  tim << "n,wall_time_s\n";
  for (const auto& e : trace) tim << e.n << "," << g17(e.wall_time_s) << "\n";
}

}  // namespace

int run_solve(const RunConfig& cfg, const RunOptions& opt, std::ostream& log) {
  const PhaseGrid grid = cfg.phase_grid();
  const Maxwellian M = cfg.envelope();
  const auto c = wellposedness_constants(cfg.kernel, cfg.alpha, cfg.beta, cfg.cd_mode);
  const std::vector<double> f0 = initial_data(cfg, grid, c);
  const double f0_norm = m_norm_slice(grid, M, f0);
  const SmallnessCheck small = smallness_check(c, f0_norm);

  json summary = {{"config_hash", cfg.hash()},
                  {"f0_norm", f0_norm},
                  {"smallness_threshold", c.threshold},
                  {"smallness_accepted", small.accepted},
                  {"K_beta", c.K_beta},
                  {"lambda", c.lambda},
                  {"grid", grid_json(grid)}};
  auto finish = [&](int code) {
    summary["exit_code"] = code;
    auto out = open_out(fs::path(cfg.output.dir) / "summary.json");
    out << summary.dump(2) << "\n";
    return code;
  };

  if (!small.accepted && !opt.override_smallness) {
    log << small.message << "\n";
    summary["converged"] = false;
    summary["error"] = small.message;
    return finish(exit_certificate);
  }
  summary["flagged"] = !small.accepted;

  const CollisionOperators ops(grid, M, cfg.kernel, cfg.quad);
  KsOptions ko;
  ko.n_max = cfg.solver.n_max;
  ko.eps_gap = cfg.solver.eps_gap;
  ko.tol_mono = cfg.solver.tol_mono;
  ko.override_smallness = opt.override_smallness;
  const std::string hash = cfg.hash();
  ko.on_iterate = [&](const KsState& s) {
    const TraceEntry& e = s.trace.back();
    log << "n=" << e.n << " gap=" << e.gap << " mono=" << e.max_mono_violation << " residual=" << e.residual_L1
        << " (" << e.wall_time_s << " s)\n";
    if (cfg.output.checkpoints)
      write_checkpoint(checkpoint_path(cfg, s.n).string(), grid, {s.n, hash, s.c_out, s.trace, s.l, s.u});
    write_trace(cfg, s.trace);
  };

  std::optional<KsState> start;
  if (opt.resume) {
    if (const auto p = newest_checkpoint(cfg)) {
      Checkpoint cp = read_checkpoint(p->string(), grid);
      if (cp.config_hash != hash)
        throw ConfigError({"checkpoint " + p->string() + " was written with config hash " + cp.config_hash +
                           ", current hash is " + hash + "; refusing to resume"});
      KsState s;
      s.n = cp.n;
      s.c_out = cp.c_out;
      s.l = std::move(cp.l);
      s.u = std::move(cp.u);
      s.trace = std::move(cp.trace);
      log << "resuming from " << p->string() << " (n = " << s.n << ")\n";
      start = std::move(s);
    }
  }

  KsResult res;
  try {
    res = ks_solve(ops, M, f0, c, ko, std::move(start));
  } catch (const MonotonicityViolation& e) {
    log << e.what() << "\n";
    summary["converged"] = false;
    summary["error"] = e.what();
    return finish(exit_nonconvergence);
  }
  write_trace(cfg, res.state.trace);
  summary["C_out"] = res.c_out;
  summary["rho"] = c.rho(res.c_out);
  summary["beginning_condition"] = {{"passed", res.beginning.passed},
                                    {"violated", res.beginning.violated},
                                    {"worst", res.beginning.worst}};
  summary["iterations"] = res.state.n;
  summary["converged"] = res.converged;
  summary["final_gap"] = res.final_gap;
  summary["sup_norm"] = res.sup_norm;
  summary["residual_L1"] = res.residual_L1;
  if (!res.beginning.passed) {
    log << "beginning condition fails: " << res.beginning.violated << " by " << res.beginning.worst << "\n";
    return finish(exit_certificate);
  }
  log << (res.converged ? "converged" : "not converged") << " after " << res.state.n << " iterations, gap "
      << res.final_gap << ", residual " << res.residual_L1 << "\n";
  return finish(res.converged ? exit_ok : exit_nonconvergence);
}

int run_command(const std::string& name, const RunConfig& cfg, const RunOptions& opt, std::ostream& log) {
  try {
    if (name == "constants") return run_constants(cfg, log);
    if (name == "verify") return run_verify(cfg, log);
    if (name == "kernels") return run_kernels(cfg, opt, log);
    if (name == "solve") return run_solve(cfg, opt, log);
    log << "unknown subcommand '" << name << "'\n";
    return exit_config;
  } catch (const ConfigError& e) {
    log << e.what() << "\n";
    return exit_config;
  } catch (const SmallnessViolation& e) {
    log << e.what() << "\n";
    return exit_certificate;
  }
}

}  // namespace ksbt
