#include "smhd/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "smhd/diagnostics.hpp"
#include "smhd/montecarlo.hpp"

namespace smhd {
namespace {

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Least-squares slope of log y against log x.
double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

CriterionResult started(int id, std::string name) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  return r;
}

std::vector<const Trajectory*> complete(const std::vector<Trajectory>& e) {
  std::vector<const Trajectory*> out;
  for (const auto& t : e)
    if (!t.aborted) out.push_back(&t);
  return out;
}

/// Largest stopping statistic before T; τ = T at level N iff this is below N.
double pre_terminal_norm(const Trajectory& t) {
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < t.records.size(); ++i)
    m = std::max({m, t.records[i].l2, t.records[i].noise_norm});
  return m;
}

struct Context {
  SelftestOptions opts;
  RunConfig cfg;
  /// Main ensemble (opts.paths paths, indices 0..paths-1).
  std::vector<Trajectory> main;
  bool have_main = false;

  const std::vector<Trajectory>& ensemble() {
    if (!have_main) {
      main = run_paths(cfg.path_config(), cfg.master_seed, opts.paths, opts.threads);
      have_main = true;
    }
    return main;
  }
};

CriterionResult mass_conservation(Context& ctx) {
  CriterionResult r = started(1, "mass conservation");
  double worst = 0.0;
  int runs = 0;
  for (double eps : {0.0, 1e-3}) {
    for (bool noise : {false, true}) {
      RunConfig c = ctx.cfg;
      c.params.eps = eps;
      if (!noise) c.noise.amplitude = 0.0;
      const auto paths = run_paths(c.path_config(), c.master_seed, 2, ctx.opts.threads);
      for (const auto& t : paths) {
        const double m0 = t.records.front().mass;
        for (const auto& rec : t.records) worst = std::max(worst, std::abs(rec.mass - m0) / m0);
        ++runs;
      }
    }
  }
  r.pass = worst <= 1e-12;
  r.detail = fmt("max relative drift %.3e over %d runs (limit 1e-12)", worst, runs);
  return r;
}

CriterionResult positivity(Context& ctx) {
  CriterionResult r = started(2, "positivity and density bounds");
  const auto& e = ctx.ensemble();
  const auto done = complete(e);
  int positive = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (const Trajectory* t : done) {
    bool pos = true;
    const double rho0 = t->records.front().rho_min;
    double integral = 0.0;
    for (std::size_t i = 0; i < t->records.size(); ++i) {
      const StepRecord& rec = t->records[i];
      if (!(rec.rho_min > 0.0)) pos = false;
      // The bound is attained at t = 0; report the margin after it.
      if (i > 0) worst_ratio = std::min(worst_ratio, rec.rho_min / (rho0 * std::exp(-integral)));
      integral += t->dt * rec.divu_sup;
    }
    positive += pos;
  }
  const bool all_pos = positive == static_cast<int>(done.size()) && !done.empty();
  r.pass = all_pos && worst_ratio >= 0.95;
  r.detail = fmt("%d/%zu complete paths positive; min rho/lower bound %.4f (limit 0.95)",
                 positive, done.size(), worst_ratio);
  return r;
}

CriterionResult energy_identity(Context& ctx) {
  CriterionResult r = started(3, "energy identity");
  // Coupled dt sweep: coarse increments are sums of the fine ones.
  const std::vector<int> factors{4, 2, 1};
  const double dt_fine = 1e-3;
  const int sweep_paths = 8;
  PathConfig pc = ctx.cfg.path_config();
  const Operators ops(pc.domain, pc.n_per_axis);
  const NoiseModel nm(pc.domain, pc.noise, pc.params.gamma);
  std::vector<double> dts, rms, cs;
  for (int f : factors) {
    pc.dt = dt_fine * f;
    double sq = 0.0, cmax = 0.0;
    int used = 0;
    for (int p = 0; p < sweep_paths; ++p) {
      const auto fine = sample_brownian(path_seed(ctx.cfg.master_seed, p), pc.noise.K, pc.T,
                                        dt_fine);
      const auto tr = run_path(pc, ops, nm, f == 1 ? fine : fine.coarsen(f));
      if (tr.aborted) continue;
      const double res = std::abs(tr.records.back().residual);
      sq += res * res;
      cmax = std::max(cmax, res / (pc.dt * (1.0 + tr.sup_energy())));
      ++used;
    }
    dts.push_back(pc.dt);
    rms.push_back(used ? std::sqrt(sq / used) : std::numeric_limits<double>::quiet_NaN());
    cs.push_back(cmax);
  }
  const double order = log_slope(dts, rms);
  const double c_spread =
      *std::max_element(cs.begin(), cs.end()) / *std::min_element(cs.begin(), cs.end());

  // Ensemble doubling: the second batch continues the path indices.
  const auto& first = ctx.ensemble();
  const auto second = run_paths(ctx.cfg.path_config(), ctx.cfg.master_seed, ctx.opts.paths,
                                ctx.opts.threads, static_cast<std::uint64_t>(ctx.opts.paths));
  std::vector<double> a, ab;
  for (const auto* set : {&first, &second})
    for (const Trajectory& t : *set) {
      if (t.aborted) continue;
      const double v = t.sup_energy() + t.records.back().dissipation;
      if (set == &first) a.push_back(v);
      ab.push_back(v);
    }
  const Estimate e1 = estimate(a), e2 = estimate(ab);
  const double shift = std::abs(e2.mean - e1.mean);
  const bool stable = std::isfinite(e2.mean) && shift <= 2.0 * e1.se;

  r.pass = order >= 0.9 && c_spread <= 2.0 && stable;
  r.detail = fmt(
      "residual order %.3f (>= 0.9), C spread %.3f (<= 2); mean supE+D %.5f (%d) vs %.5f (%d), "
      "shift %.2e <= 2SE %.2e",
      order, c_spread, e1.mean, e1.count, e2.mean, e2.count, shift, 2.0 * e1.se);
  return r;
}

CriterionResult martingale(Context& ctx) {
  CriterionResult r = started(4, "martingale structure");
  const auto& e = ctx.ensemble();
  const Basis basis(ctx.cfg.domain, ctx.cfg.n_per_axis);
  double zmax = 0.0;
  bool pass = true;
  std::string worst;
  for (const auto& [name, phi] : martingale_directions(basis)) {
    const MartingaleTest t = martingale_qv_test(e, phi);
    pass = pass && t.pass;
    for (const ZStat& z : t.stats)
      if (std::abs(z.z) >= zmax) {
        zmax = std::abs(z.z);
        worst = name + "/" + z.name;
      }
  }
  r.pass = pass;
  r.detail = fmt("max |z| %.3f at %s over 3 directions x 5 statistics (limit 4)", zmax,
                 worst.c_str());
  return r;
}

CriterionResult stopping(Context& ctx) {
  CriterionResult r = started(5, "stopping-time saturation");
  const auto& e = ctx.ensemble();
  const std::vector<double> levels{1, 3, 10, 30};
  const double base_stop = ctx.cfg.params.N_stop;
  // Below the default level the stopped dynamics coincide, so τ follows from
  // the recorded norms; paths stopped at the default level are rerun.
  RunConfig high = ctx.cfg;
  high.params.N_stop = levels.back();
  const PathConfig high_pc = high.path_config();
  std::vector<int> hits(levels.size(), 0);
  int total = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i].aborted) continue;
    ++total;
    const double m = pre_terminal_norm(e[i]);
    double m_high = m;
    if (m >= base_stop) {
      const Trajectory t = run_path(high_pc, path_seed(ctx.cfg.master_seed, i));
      m_high = t.aborted ? std::numeric_limits<double>::infinity() : pre_terminal_norm(t);
    }
    for (std::size_t j = 0; j < levels.size(); ++j) {
      const double mm = levels[j] <= base_stop ? m : m_high;
      hits[j] += mm < levels[j];
    }
  }
  std::vector<double> frac;
  for (int h : hits) frac.push_back(total ? static_cast<double>(h) / total : 0.0);
  bool mono = true;
  for (std::size_t j = 1; j < frac.size(); ++j) mono = mono && frac[j] >= frac[j - 1];
  r.pass = mono && frac.back() > 0.99;
  r.detail = fmt("P(tau=T) at N=1,3,10,30: %.3f %.3f %.3f %.3f (non-decreasing, > 0.99 at 30)",
                 frac[0], frac[1], frac[2], frac[3]);
  return r;
}

GridField random_mean_zero(const Domain& d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  constexpr int M = 8;
  std::vector<double> a(M * M);
  for (double& x : a) x = normal(rng);
  const int g0 = d.grid_pts[0], g1 = d.grid_pts[1];
  GridField f(d.num_cells());
  for (int i = 0; i < g0; ++i)
    for (int j = 0; j < g1; ++j) {
      const double x = std::numbers::pi * d.center(0, i) / d.lengths[0];
      const double y = std::numbers::pi * d.center(1, j) / d.lengths[1];
      double s = 0.0;
      for (int m = 0; m < M; ++m)
        for (int n = 0; n < M; ++n)
          if (m + n > 0)
            s += a[m * M + n] * std::cos(m * x) * std::cos(n * y) / (1.0 + m * m + n * n);
      f[i * g1 + j] = s;
    }
  f.array() -= f.mean();
  return f;
}

CriterionResult bogovskii(Context& ctx) {
  CriterionResult r = started(6, "Bogovskii operator");
  Domain d = ctx.cfg.domain;
  d.dim = 2;
  const BogovskiiSolver solver(d);
  std::mt19937_64 rng(ctx.opts.seed);
  double div_max = 0.0, lin_max = 0.0;
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
  std::vector<GridField> inputs;
  std::vector<BogovskiiResult> outs;
  for (int i = 0; i < 20; ++i) {
    inputs.push_back(random_mean_zero(d, rng));
    outs.push_back(solver.solve(inputs.back()));
    const auto& o = outs.back();
    div_max = std::max(div_max, o.div_residual);
    rmin = std::min(rmin, o.h1_norm / o.f_norm);
    rmax = std::max(rmax, o.h1_norm / o.f_norm);
  }
  for (int i = 0; i + 1 < 20; i += 2) {
    const double alpha = 0.7, beta = -1.3;
    const auto c = solver.solve(alpha * inputs[i] + beta * inputs[i + 1]);
    double num = 0.0, den = 0.0;
    for (int a = 0; a < d.dim; ++a) {
      const GridField comb = alpha * outs[i].values[a] + beta * outs[i + 1].values[a];
      num += (c.values[a] - comb).squaredNorm();
      den += comb.squaredNorm();
    }
    lin_max = std::max(lin_max, std::sqrt(num / den));
  }
  r.pass = div_max <= 1e-6 && lin_max <= 1e-10 && rmax / rmin <= 2.0;
  r.detail = fmt("div residual %.2e (<= 1e-6), linearity %.2e (<= 1e-10), H1/L2 %.3f..%.3f "
                 "ratio %.3f (<= 2)",
                 div_max, lin_max, rmin, rmax, rmax / rmin);
  return r;
}

CriterionResult operators(Context& ctx) {
  CriterionResult r = started(7, "mass operator");
  const Operators ops(ctx.cfg.domain, ctx.cfg.n_per_axis);
  const Domain& d = ops.domain();
  const int cells = d.num_cells();
  const long n = ops.basis().n();

  const double c = 2.5;
  const MassOp mc(GridField::Constant(cells, c), ops, false);
  const double const_err =
      (mc.block() - c * Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() / c;

  std::mt19937_64 rng(ctx.opts.seed + 7);
  std::uniform_real_distribution<double> unif(0.05, 3.0);
  double inv_ratio = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    GridField rho(cells);
    for (auto& v : rho) v = unif(rng);
    const MassOp m(rho, ops, false);
    inv_ratio = std::max(inv_ratio, (1.0 / m.min_eigenvalue()) * rho.minCoeff());
  }

  // C_n = sup_x Σ_i φ_i(x)² bounds ‖M[ρ1] - M[ρ2]‖ by C_n‖ρ1 - ρ2‖_{L¹}.
  const double Cn = ops.phi().rowwise().squaredNorm().maxCoeff();
  GridField s1(cells), s2(cells);
  for (int i = 0; i < cells; ++i) {
    const int ix = i / d.grid_pts[1], iy = i % d.grid_pts[1];
    const double x = d.center(0, ix) / d.lengths[0], y = d.center(1, iy) / d.lengths[1];
    s1[i] = std::pow(std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y), 2);
    s2[i] = std::pow(std::sin(2 * std::numbers::pi * x) * std::sin(std::numbers::pi * y), 2);
  }
  double lip_max = 0.0;
  std::string seq;
  for (int j = 0; j < 8; ++j) {
    const double eta = 0.1 * std::pow(0.5, j);
    const auto rho1 = DensityField::from_values(GridField::Constant(cells, eta) + s1, d);
    const auto rho2 = DensityField::from_values(GridField::Constant(cells, eta) + 0.5 * s2, d);
    const MassLipschitz ml = mass_lipschitz_check(rho1, rho2, eta, ops);
    const double ratio = ml.lhs * eta * eta / ml.rhs;
    lip_max = std::max(lip_max, ratio);
    seq += fmt("%s%.3g", j ? "," : "", ratio);
  }
  r.pass = const_err <= 1e-12 && inv_ratio <= 1.0 + 1e-8 && lip_max <= Cn;
  r.detail = fmt("M[c]=cI error %.2e (<= 1e-12); |M^-1| min rho %.10f (<= 1+1e-8); "
                 "Lipschitz ratios [%s] <= C_n %.3f",
                 const_err, inv_ratio, seq.c_str(), Cn);
  return r;
}

CriterionResult strong_order(Context& ctx) {
  CriterionResult r = started(8, "Euler-Maruyama strong order");
  // Short horizon with strengthened multiplicative noise, so the stochastic
  // error dominates the drift error on the whole ladder.
  PathConfig pc = ctx.cfg.path_config();
  pc.T = 0.1;
  pc.noise.f2_scale = 2.0;
  pc.noise.g_scale = 2.0;
  const double dt_min = 1.25e-4;
  const int levels = 5;
  const int paths = 40;
  const Operators ops(pc.domain, pc.n_per_axis);
  const NoiseModel nm(pc.domain, pc.noise, pc.params.gamma);
  std::vector<double> e2(levels - 1, 0.0);
  int used = 0;
  for (int p = 0; p < paths; ++p) {
    const auto fine = sample_brownian(path_seed(ctx.cfg.master_seed ^ 0x5eed, p), pc.noise.K,
                                      pc.T, dt_min);
    std::vector<CoeffVec> X;
    bool bad = false;
    for (int j = 0; j < levels && !bad; ++j) {
      const int fac = 1 << j;
      pc.dt = dt_min * fac;
      const auto tr = run_path(pc, ops, nm, fac == 1 ? fine : fine.coarsen(fac));
      if (tr.aborted) {
        bad = true;
        break;
      }
      CoeffVec x(2 * tr.final_state.u.size());
      x << tr.final_state.u, tr.final_state.B;
      X.push_back(std::move(x));
    }
    if (bad) continue;
    ++used;
    for (int j = 0; j + 1 < levels; ++j) e2[j] += (X[j + 1] - X[j]).squaredNorm();
  }
  // Differences of consecutive levels scale like the error at the coarser one.
  std::vector<double> dts, errs;
  for (int j = 0; j + 1 < levels; ++j) {
    dts.push_back(dt_min * (2 << j));
    errs.push_back(std::sqrt(e2[j] / std::max(used, 1)));
  }
  const double order = log_slope(dts, errs);
  r.pass = used > paths / 2 && order >= 0.4 && order <= 0.6;
  r.detail = fmt("fitted order %.3f over dt %.2e..%.2e with %d paths (in [0.4, 0.6])", order,
                 dts.front(), dts.back(), used);
  return r;
}

CriterionResult renormalized(Context& ctx, bool lk) {
  CriterionResult r = started(9, lk ? "renormalized continuity (L_k)"
                          : "renormalized continuity (identity, T_k)");
  PathConfig pc = ctx.cfg.path_config();
  pc.noise.amplitude = 0.0;
  pc.params.eps = 0.0;
  pc.store_states = true;
  pc.store_stride = 1;
  const Operators ops(pc.domain, pc.n_per_axis);
  const Trajectory tr = run_path(pc, path_seed(ctx.cfg.master_seed, 0));
  if (tr.aborted) {
    r.detail = "deterministic run aborted: " + *tr.aborted;
    return r;
  }
  double rmax = 0.0;
  for (const State& s : tr.states) rmax = std::max(rmax, s.rho.max());
  const double k = 2.0 * rmax;
  using K = Renormalization::Kind;
  std::vector<Renormalization> bs;
  if (lk)
    bs.push_back({K::Lk, k});
  else
    bs = {{K::Identity, k}, {K::Tk, k}};
  double worst = 0.0;
  std::string parts;
  for (const auto& b : bs) {
    const RenormReport rep = renorm_residual(tr, b, 0.0, ops);
    worst = std::max(worst, rep.max_abs);
    parts += fmt("%s%s %.2e", parts.empty() ? "" : ", ", b.name().c_str(), rep.max_abs);
  }
  r.pass = worst <= 1e-8;
  r.detail = fmt("k = %.3f; max residual over 8 test functions: %s (limit 1e-8)", k,
                 parts.c_str());
  return r;
}

}  // namespace

std::vector<CriterionResult> run_selftest(
    const SelftestOptions& opts, const std::function<void(const CriterionResult&)>& on_result) {
  Context ctx;
  ctx.opts = opts;
  ctx.cfg.master_seed = opts.seed;
  ctx.cfg.threads = opts.threads;
  ctx.cfg.ensemble_size = opts.paths;
  ctx.cfg.validate();

  using Fn = CriterionResult (*)(Context&);
  const std::vector<std::pair<int, Fn>> table{
      {1, mass_conservation},
      {2, positivity},
      {3, energy_identity},
      {4, martingale},
      {5, stopping},
      {6, bogovskii},
      {7, operators},
      {8, strong_order},
      {9, [](Context& c) { return renormalized(c, false); }},
      {9, [](Context& c) { return renormalized(c, true); }},
  };
  std::vector<CriterionResult> out;
  for (const auto& [id, fn] : table) {
    if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), id) == opts.only.end())
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult res;
    try {
      res = fn(ctx);
    } catch (const std::exception& e) {
      res.id = id;
      res.name = "criterion " + std::to_string(id);
      res.pass = false;
      res.detail = std::string("error: ") + e.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_result) on_result(res);
    out.push_back(std::move(res));
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  return fmt("[%2d] %s %s: %s (%.1f s)", r.id, r.pass ? "PASS" : "FAIL", r.name.c_str(),
             r.detail.c_str(), r.seconds);
}

std::string results_json(const std::vector<CriterionResult>& results) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results)
    j.push_back({{"id", r.id},
                 {"name", r.name},
                 {"pass", r.pass},
                 {"detail", r.detail},
                 {"seconds", r.seconds}});
  return j.dump(2);
}

}  // namespace smhd
