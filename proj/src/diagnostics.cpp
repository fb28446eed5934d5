#include "smhd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "smhd/error.hpp"
#include "smhd/transport.hpp"

namespace smhd {

namespace {

double bump1(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - s * s));
}

bool nondecreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1]) return false;
  return true;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// J(w) = ∫_1^w T(v)/v² dv for w ≥ 1.
double J(double w) {
  auto inner = [](double x) {
    return -(x - 1.0) / 4.0 + 1.5 * std::log(x) + 0.25 * (1.0 / x - 1.0);
  };
  if (w <= 3.0) return inner(w);
  return inner(3.0) + 2.0 * (1.0 / 3.0 - 1.0 / w);
}

}  // namespace

double EnergyReport::max_abs_residual() const {
  double m = 0.0;
  for (double r : residual) m = std::max(m, std::abs(r));
  return m;
}

bool EnergyReport::finite() const {
  return all_finite(E) && all_finite(D) && all_finite(A) && all_finite(I) && all_finite(Mart) &&
         all_finite(residual);
}

bool EnergyReport::monotone() const { return nondecreasing(D) && nondecreasing(A) && nondecreasing(I); }

EnergyReport energy_report(const Trajectory& traj) {
  EnergyReport r;
  const std::size_t n = traj.records.size();
  for (auto* v : {&r.t, &r.E, &r.D, &r.A, &r.I, &r.Mart, &r.residual}) v->reserve(n);
  for (const auto& rec : traj.records) {
    r.t.push_back(rec.t);
    r.E.push_back(rec.energy);
    r.D.push_back(rec.dissipation);
    r.A.push_back(rec.artificial);
    r.I.push_back(rec.ito);
    r.Mart.push_back(rec.martingale);
    r.residual.push_back(rec.residual);
  }
  return r;
}

ZStat z_statistic(const std::string& name, std::span<const double> samples) {
  const Estimate e = estimate(samples);
  ZStat z{name, e.mean, e.se, 0.0};
  if (e.se > 0.0)
    z.z = e.mean / e.se;
  else if (e.mean != 0.0)
    z.z = std::copysign(std::numeric_limits<double>::infinity(), e.mean);
  return z;
}

Estimate estimate(std::span<const double> samples) {
  Estimate e;
  e.count = static_cast<int>(samples.size());
  if (samples.empty()) return e;
  double s = 0.0;
  for (double x : samples) s += x;
  e.mean = s / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    double q = 0.0;
    for (double x : samples) q += (x - e.mean) * (x - e.mean);
    e.se = std::sqrt(q / static_cast<double>(samples.size() - 1) /
                     static_cast<double>(samples.size()));
  }
  return e;
}

MartingaleTest martingale_qv_test(std::span<const Trajectory> ensemble, const CoeffVec& phi,
                                  bool at_half, double z_max) {
  std::vector<double> x1, y1, x2, y2, cross;
  for (const auto& tr : ensemble) {
    if (tr.aborted) continue;
    const MartingaleData& m = tr.mart;
    const CoeffVec& M1 = at_half ? m.M1_half : m.M1;
    const CoeffVec& M2 = at_half ? m.M2_half : m.M2;
    const Eigen::MatrixXd& Q1 = at_half ? m.Q1_half : m.Q1;
    const Eigen::MatrixXd& Q2 = at_half ? m.Q2_half : m.Q2;
    if (M1.size() != phi.size())
      throw std::invalid_argument("martingale_qv_test: direction has the wrong length");
    const double a = phi.dot(M1), b = phi.dot(M2);
    x1.push_back(a);
    y1.push_back(a * a - phi.dot(Q1 * phi));
    x2.push_back(b);
    y2.push_back(b * b - phi.dot(Q2 * phi));
    cross.push_back(a * b);
  }
  if (x1.size() < 50)
    throw std::invalid_argument("martingale_qv_test: need at least 50 complete paths, got " +
                                std::to_string(x1.size()));
  MartingaleTest t;
  t.paths = static_cast<int>(x1.size());
  t.stats = {z_statistic("mean_M1", x1), z_statistic("qv_M1", y1), z_statistic("mean_M2", x2),
             z_statistic("qv_M2", y2), z_statistic("cross", cross)};
  t.pass = std::all_of(t.stats.begin(), t.stats.end(),
                       [&](const ZStat& z) { return std::abs(z.z) <= z_max; });
  return t;
}

double integrability_theta_max(double gamma) {
  return std::min({1.0, gamma / 3.0, 2.0 * gamma / 3.0 - 1.0});
}

void validate_integrability_theta(double theta, double gamma) {
  const double hi = integrability_theta_max(gamma);
  if (!(theta > 0.0 && theta < hi))
    throw ConfigError("integrability exponent theta must lie in (0, min{1, gamma/3, 2*gamma/3 - 1}) = (0, " +
                      std::to_string(std::max(hi, 0.0)) + ")");
}

Estimate pressure_integrability(std::span<const Trajectory> ensemble, const SimParams& params,
                                double theta) {
  validate_integrability_theta(theta, params.gamma);
  std::vector<double> v;
  for (const auto& tr : ensemble) {
    if (tr.aborted) continue;
    if (std::abs(tr.moment_theta - theta) > 1e-15)
      throw std::invalid_argument("pressure_integrability: trajectory recorded with theta = " +
                                  std::to_string(tr.moment_theta));
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < tr.records.size(); ++i)
      s += tr.dt * tr.records[i].pressure_moment;
    v.push_back(s);
  }
  return estimate(v);
}

FluxField effective_flux(const State& s, const SimParams& params, const Basis& basis) {
  const GridField div = spectral_derivatives(s.u, basis).div;
  FluxField f;
  f.values.resize(s.rho.values.size());
  for (long i = 0; i < f.values.size(); ++i)
    f.values[i] = params.pressure(s.rho.values[i]) - (params.lambda + 2.0 * params.mu) * div[i];
  return f;
}

double cutoff_T(double z) {
  if (z <= 1.0) return z;
  if (z >= 3.0) return 2.0;
  return z - 0.25 * (z - 1.0) * (z - 1.0);
}

double cutoff_T_derivative(double z) {
  if (z <= 1.0) return 1.0;
  if (z >= 3.0) return 0.0;
  return 1.0 - 0.5 * (z - 1.0);
}

double cutoff_Tk(double z, double k) { return k * cutoff_T(z / k); }
double cutoff_Tk_derivative(double z, double k) { return cutoff_T_derivative(z / k); }

double cutoff_Lk(double z, double k) {
  if (z <= 0.0) return 0.0;
  if (z < k) return z * std::log(z);
  return z * std::log(k) + z * J(z / k);
}

double cutoff_Lk_derivative(double z, double k) {
  if (z <= 0.0) throw std::domain_error("cutoff_Lk_derivative: z must be positive");
  if (z < k) return std::log(z) + 1.0;
  return std::log(k) + J(z / k) + cutoff_Tk(z, k) / z;
}

double Renormalization::b(double z) const {
  switch (kind) {
    case Kind::Identity: return z;
    case Kind::Tk: return cutoff_Tk(z, k);
    case Kind::Lk: return cutoff_Lk(z, k);
  }
  return z;
}

double Renormalization::db(double z) const {
  switch (kind) {
    case Kind::Identity: return 1.0;
    case Kind::Tk: return cutoff_Tk_derivative(z, k);
    case Kind::Lk: return cutoff_Lk_derivative(z, k);
  }
  return 1.0;
}

std::string Renormalization::name() const {
  switch (kind) {
    case Kind::Identity: return "identity";
    case Kind::Tk: return "T_k";
    case Kind::Lk: return "L_k";
  }
  return "?";
}

const std::array<TestBump, 8>& test_battery() {
  static const std::array<TestBump, 8> battery = {{
      {{0.50, 0.50, 0.50}, {0.30, 0.30, 0.30}, 0.50, 0.45},
      {{0.30, 0.30, 0.50}, {0.20, 0.20, 0.20}, 0.40, 0.30},
      {{0.70, 0.30, 0.50}, {0.20, 0.20, 0.20}, 0.60, 0.30},
      {{0.30, 0.70, 0.50}, {0.20, 0.20, 0.20}, 0.50, 0.40},
      {{0.70, 0.70, 0.50}, {0.20, 0.20, 0.20}, 0.50, 0.20},
      {{0.50, 0.25, 0.50}, {0.15, 0.15, 0.15}, 0.30, 0.25},
      {{0.25, 0.50, 0.50}, {0.15, 0.15, 0.15}, 0.70, 0.25},
      {{0.60, 0.60, 0.40}, {0.35, 0.35, 0.35}, 0.50, 0.45},
  }};
  return battery;
}

GridField bump_values(const TestBump& bump, double t, double T, const Domain& d) {
  GridField out(d.num_cells());
  const double tt = bump1((t / T - bump.t_center) / bump.t_radius);
  std::array<std::vector<double>, 3> axis;
  for (int a = 0; a < d.dim; ++a) {
    axis[a].resize(d.grid_pts[a]);
    for (int i = 0; i < d.grid_pts[a]; ++i)
      axis[a][i] = bump1((d.center(a, i) / d.lengths[a] - bump.center[a]) / bump.radius[a]);
  }
  for (long idx = 0; idx < out.size(); ++idx) {
    long rem = idx;
    double v = tt;
    for (int a = d.dim - 1; a >= 0; --a) {
      v *= axis[a][rem % d.grid_pts[a]];
      rem /= d.grid_pts[a];
    }
    out[idx] = v;
  }
  return out;
}

RenormReport renorm_residual(const Trajectory& traj, const Renormalization& b, double eps,
                             const Operators& ops) {
  if (traj.states.size() < 2 || traj.states.size() != traj.records.size())
    throw std::invalid_argument("renorm_residual: trajectory has no stored states");
  const Basis& basis = ops.basis();
  const Domain& d = basis.domain();
  const double w = d.cell_volume();
  const double dt = traj.dt;
  const double T = traj.records.back().t;
  const auto& battery = test_battery();
  RenormReport rep;
  for (std::size_t n = 0; n + 1 < traj.states.size(); ++n) {
    const State& s0 = traj.states[n];
    const State& s1 = traj.states[n + 1];
    if (s0.stopped) break;
    const GridField& r0 = s0.rho.values;
    const GridField& r1 = s1.rho.values;
    const FaceField uf = face_velocities(s0.u, basis);
    const FaceField up = upwind_density(r0, uf, d);
    FaceField bflux(d.dim);
    for (int a = 0; a < d.dim; ++a) {
      bflux[a].resize(up[a].size());
      for (long i = 0; i < up[a].size(); ++i) bflux[a][i] = b.b(up[a][i]) * uf[a][i];
    }
    const GridField div_b = face_divergence(bflux, d);
    const GridField div_u = face_divergence(uf, d);
    GridField lap;
    if (eps != 0.0) lap = neumann_laplacian(r1, d);
    GridField local(r0.size());
    for (long i = 0; i < r0.size(); ++i) {
      const double bz = b.b(r0[i]);
      const double dbz = b.db(r0[i]);
      double v = (b.b(r1[i]) - bz) + dt * div_b[i] + dt * (dbz * r0[i] - bz) * div_u[i];
      if (eps != 0.0) v -= dt * eps * dbz * lap[i];
      local[i] = v;
    }
    for (std::size_t j = 0; j < battery.size(); ++j)
      rep.residual[j] += w * local.dot(bump_values(battery[j], s0.t, T, d));
  }
  for (double r : rep.residual) rep.max_abs = std::max(rep.max_abs, std::abs(r));
  return rep;
}

double flux_pairing(const Trajectory& traj, const SimParams& params, double k,
                    const Basis& basis) {
  if (traj.states.size() < 2)
    throw std::invalid_argument("flux_pairing: trajectory has no stored states");
  const Domain& d = basis.domain();
  const double T = traj.records.back().t;
  const TestBump& bump = test_battery()[0];
  double s = 0.0;
  for (std::size_t n = 0; n + 1 < traj.states.size(); ++n) {
    const State& st = traj.states[n];
    const FluxField F = effective_flux(st, params, basis);
    const GridField psi = bump_values(bump, st.t, T, d);
    double acc = 0.0;
    for (long i = 0; i < psi.size(); ++i)
      acc += psi[i] * F.values[i] * cutoff_Tk(st.rho.values[i], k);
    s += traj.dt * d.cell_volume() * acc;
  }
  return s;
}

std::vector<FluxStudyRow> flux_pairing_study(const PathConfig& base, StudyParameter param,
                                             const std::vector<double>& schedule, double k,
                                             const std::vector<std::uint64_t>& seeds) {
  if (schedule.size() < 2) throw ConfigError("flux study needs at least two levels");
  const bool dec = schedule[1] < schedule[0];
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if ((schedule[i] < schedule[i - 1]) != dec || schedule[i] == schedule[i - 1])
      throw ConfigError("flux study schedule must be strictly monotone");
  std::vector<FluxStudyRow> rows;
  for (double v : schedule) {
    PathConfig cfg = base;
    (param == StudyParameter::Eps ? cfg.params.eps : cfg.params.delta) = v;
    cfg.params.validate();
    cfg.store_states = true;
    const Operators ops(cfg.domain, cfg.n_per_axis);
    const NoiseModel noise(cfg.domain, cfg.noise, cfg.params.gamma);
    std::vector<double> vals;
    for (auto seed : seeds) {
      const BrownianPaths paths = sample_brownian(seed, cfg.noise.K, cfg.T, cfg.dt);
      const Trajectory tr = run_path(cfg, ops, noise, paths);
      if (tr.aborted) continue;
      vals.push_back(flux_pairing(tr, cfg.params, k, ops.basis()));
    }
    FluxStudyRow row;
    row.value = v;
    row.pairing = estimate(vals);
    if (!rows.empty()) row.increment = std::abs(row.pairing.mean - rows.back().pairing.mean);
    rows.push_back(row);
  }
  return rows;
}

double divB_norm(const CoeffVec& B, const Operators& ops) { return (ops.weak_div() * B).norm(); }

double divB_norm(const SpectralVector& B, const Domain& d) {
  const GridField div = evaluate(spectral_div(B), d.grid());
  return grid_norm(div, d);
}

CoeffVec solenoidal_project(const CoeffVec& B, const Operators& ops) {
  return ops.solenoidal_projector() * B;
}

}  // namespace smhd
