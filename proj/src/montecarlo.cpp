#include "smhd/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <thread>

#include "json.hpp"

#include "smhd/error.hpp"

namespace smhd {

namespace {

int worker_count(int requested, int jobs) {
  int t = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(t, 1, std::max(1, jobs));
}

double relative_mass_drift(const Trajectory& tr) {
  if (tr.records.empty()) return 0.0;
  const double m0 = tr.records.front().mass;
  double d = 0.0;
  for (const auto& r : tr.records) d = std::max(d, std::abs(r.mass - m0) / std::abs(m0));
  return d;
}

// τ = T: never stopped, or stopped exactly at the final time.
bool survived(const Trajectory& tr) {
  const auto& st = tr.final_state.stopped;
  return !st || *st >= tr.records.back().t - 0.5 * tr.dt;
}

// Cosine-series H^{-1} norm of a cell field.
class NegativeNorm {
 public:
  explicit NegativeNorm(const Domain& d) : d_(d) {
    for (int a = 0; a < d.dim; ++a) {
      tab_[a] = axis_table(Parity::Cosine, d.grid_pts[a], d.lengths[a], d.grid_pts[a],
                           Points::Centers, 0);
      ptr_[a] = &tab_[a];
    }
    weight_.resize(d.num_cells());
    for (long t = 0; t < weight_.size(); ++t) {
      long rem = t;
      double lam = 0.0;
      for (int a = d.dim - 1; a >= 0; --a) {
        const double om = static_cast<double>(rem % d.grid_pts[a]) * std::numbers::pi / d.lengths[a];
        rem /= d.grid_pts[a];
        lam += om * om;
      }
      weight_[t] = 1.0 / (1.0 + lam);
    }
  }

  double operator()(const GridField& f) const {
    const Eigen::VectorXd c =
        d_.cell_volume() * tensor_apply(d_.dim, std::span(ptr_.data(), d_.dim), true, f);
    return std::sqrt((c.array().square() * weight_.array()).sum());
  }

 private:
  Domain d_;
  std::array<Eigen::MatrixXd, 3> tab_;
  std::array<const Eigen::MatrixXd*, 3> ptr_{};
  Eigen::VectorXd weight_;
};

// Embeds coefficients of `from` into the (larger or equal) basis `to`.
CoeffVec embed(const CoeffVec& c, const Basis& from, const Basis& to) {
  if (from.n() == to.n()) return c;
  CoeffVec out = CoeffVec::Zero(to.vector_size());
  for (int comp = 0; comp < from.dim(); ++comp)
    for (int j = 0; j < from.n(); ++j) {
      const int k = to.mode_index(from.modes()[j]);
      if (k < 0) throw std::logic_error("embed: basis is not nested");
      out[comp * to.n() + k] = c[comp * from.n() + j];
    }
  return out;
}

double weighted_coeff_norm(const CoeffVec& c, const Basis& b) {
  double s = 0.0;
  for (int comp = 0; comp < b.dim(); ++comp)
    for (int j = 0; j < b.n(); ++j) {
      const double v = c[comp * b.n() + j];
      s += v * v / (1.0 + b.eigvals()[j]);
    }
  return std::sqrt(s);
}

GridVector momentum(const State& s, const Basis& b) {
  GridVector U = reconstruct(s.u, b);
  for (auto& c : U) c = c.cwiseProduct(s.rho.values);
  return U;
}

nlohmann::json estimate_json(const Estimate& e) {
  return {{"mean", e.mean}, {"se", e.se}, {"count", e.count}};
}

nlohmann::json test_json(const std::string& name, double statistic, double threshold,
                         bool pass) {
  return {{"name", name}, {"statistic", statistic}, {"threshold", threshold}, {"pass", pass}};
}

}  // namespace

void RunningStats::add(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / n_;
  m2_ += d * (x - mean_);
}

double RunningStats::se() const {
  if (n_ < 2) return 0.0;
  return std::sqrt(m2_ / (n_ - 1) / n_);
}

std::vector<Trajectory> run_paths(const PathConfig& cfg, std::uint64_t master_seed, int count,
                                  int threads, std::uint64_t first_index) {
  cfg.params.validate();
  const Operators ops(cfg.domain, cfg.n_per_axis);
  const NoiseModel noise(cfg.domain, cfg.noise, cfg.params.gamma);
  std::vector<Trajectory> out(static_cast<std::size_t>(count));
  std::vector<std::exception_ptr> errors(out.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        const BrownianPaths paths =
            sample_brownian(path_seed(master_seed, first_index + i), cfg.noise.K, cfg.T, cfg.dt);
        out[i] = run_path(cfg, ops, noise, paths);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int nt = worker_count(threads, count);
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<std::pair<std::string, CoeffVec>> martingale_directions(const Basis& basis) {
  const int nd = basis.vector_size();
  const int n = basis.n();
  CoeffVec e1 = CoeffVec::Zero(nd), e2 = CoeffVec::Zero(nd);
  e1[0] = 1.0;
  e2[(basis.dim() - 1) * n + std::min(1, n - 1)] = 1.0;
  CoeffVec ones = CoeffVec::Ones(nd) / std::sqrt(static_cast<double>(nd));
  return {{"e_first", e1}, {"e_last_comp", e2}, {"uniform", ones}};
}

EnsembleReport summarize(const std::vector<Trajectory>& ensemble, const RunConfig& cfg) {
  EnsembleReport r;
  r.paths = static_cast<int>(ensemble.size());
  std::vector<double> sup_e, diss, fin_e, res;
  int alive = 0;
  r.min_density = std::numeric_limits<double>::infinity();
  for (const auto& tr : ensemble) {
    for (const auto& rec : tr.records) r.min_density = std::min(r.min_density, rec.rho_min);
    r.max_mass_drift = std::max(r.max_mass_drift, relative_mass_drift(tr));
    if (tr.aborted) {
      ++r.aborted;
      r.abort_causes.push_back("seed " + std::to_string(tr.seed) + ": " + *tr.aborted);
      continue;
    }
    const EnergyReport er = energy_report(tr);
    r.energy_terms_monotone = r.energy_terms_monotone && er.monotone() && er.finite();
    sup_e.push_back(tr.sup_energy());
    diss.push_back(tr.records.back().dissipation);
    fin_e.push_back(tr.records.back().energy);
    res.push_back(er.max_abs_residual());
    if (survived(tr)) ++alive;
  }
  r.sup_energy = estimate(sup_e);
  r.final_dissipation = estimate(diss);
  r.final_energy = estimate(fin_e);
  r.max_abs_residual = estimate(res);
  const int done = r.paths - r.aborted;
  r.survival = done > 0 ? static_cast<double>(alive) / done : 0.0;
  if (done > 0) r.integrability = pressure_integrability(ensemble, cfg.params, cfg.moment_theta);
  if (done >= 50) {
    const Basis basis(cfg.domain, cfg.n_per_axis);
    for (const auto& [name, phi] : martingale_directions(basis))
      r.martingale.push_back({name, martingale_qv_test(ensemble, phi)});
  }
  r.ok = r.aborted * 10 <= r.paths;
  return r;
}

std::string EnsembleReport::json() const {
  nlohmann::json j;
  j["paths"] = paths;
  j["aborted"] = aborted;
  j["abort_causes"] = abort_causes;
  j["estimates"] = {{"sup_energy", estimate_json(sup_energy)},
                    {"final_dissipation", estimate_json(final_dissipation)},
                    {"final_energy", estimate_json(final_energy)},
                    {"max_abs_energy_residual", estimate_json(max_abs_residual)},
                    {"pressure_integrability", estimate_json(integrability)},
                    {"survival_fraction", survival},
                    {"min_density", min_density}};
  nlohmann::json tests = nlohmann::json::array();
  tests.push_back(test_json("abort_budget", paths ? static_cast<double>(aborted) / paths : 0.0,
                            0.1, ok));
  tests.push_back(test_json("mass_conservation", max_mass_drift, 1e-12, max_mass_drift <= 1e-12));
  tests.push_back(test_json("positivity", min_density, 0.0, min_density > 0.0));
  tests.push_back(test_json("energy_terms_monotone", energy_terms_monotone ? 1.0 : 0.0, 1.0,
                            energy_terms_monotone));
  for (const auto& nt : martingale)
    for (const auto& z : nt.test.stats)
      tests.push_back(test_json("martingale_" + nt.name + "_" + z.name, z.z, 4.0,
                                std::abs(z.z) <= 4.0));
  j["tests"] = tests;
  return j.dump(2) + "\n";
}

void write_mean_timeseries(const std::vector<Trajectory>& ensemble, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "t,mass,energy,u_h1,B_h1,divB,theta,stopped\n";
  std::vector<const Trajectory*> done;
  for (const auto& tr : ensemble)
    if (!tr.aborted) done.push_back(&tr);
  if (done.empty()) return;
  const std::size_t len = done.front()->records.size();
  const double inv = 1.0 / static_cast<double>(done.size());
  for (std::size_t i = 0; i < len; ++i) {
    std::array<double, 7> m{};
    for (const auto* tr : done) {
      const StepRecord& r = tr->records[i];
      m[0] += r.mass;
      m[1] += r.energy;
      m[2] += r.u_h1;
      m[3] += r.B_h1;
      m[4] += r.divB;
      m[5] += r.theta;
      m[6] += r.stopped ? 1.0 : 0.0;
    }
    out << done.front()->records[i].t;
    for (double v : m) out << ',' << v * inv;
    out << '\n';
  }
}

EnsembleResult run_ensemble(const RunConfig& cfg, bool write) {
  cfg.validate();
  EnsembleResult res;
  res.trajectories =
      run_paths(cfg.path_config(), cfg.master_seed, cfg.ensemble_size, cfg.threads);
  res.report = summarize(res.trajectories, cfg);
  if (write) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream j(std::filesystem::path(cfg.out_dir) / "report.json");
    if (!j) throw std::runtime_error("cannot write report.json in " + cfg.out_dir);
    j << res.report.json();
    write_mean_timeseries(res.trajectories,
                          (std::filesystem::path(cfg.out_dir) / "timeseries.csv").string());
  }
  return res;
}

std::string study_name(StudyKind k) {
  switch (k) {
    case StudyKind::N: return "n";
    case StudyKind::Eps: return "eps";
    case StudyKind::Delta: return "delta";
  }
  return "?";
}

bool StudyTable::distances_decreasing() const {
  if (rows.size() < 3) return false;
  for (std::size_t i = 2; i < rows.size(); ++i) {
    const StudyRow& a = rows[i - 1];
    const StudyRow& b = rows[i];
    if (!(b.dist_rho.mean < a.dist_rho.mean && b.dist_m.mean < a.dist_m.mean &&
          b.dist_B.mean < a.dist_B.mean))
      return false;
  }
  return true;
}

bool StudyTable::delta_bound_decreasing() const {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].delta_rho_beta.mean < rows[i - 1].delta_rho_beta.mean)) return false;
  return true;
}

bool StudyTable::pass() const {
  for (const auto& r : rows)
    if (r.max_mass_drift > 1e-12) return false;
  return distances_decreasing() && (kind != StudyKind::Delta || delta_bound_decreasing());
}

void StudyTable::write_csv(std::ostream& out, bool header) const {
  if (header)
    out << "study,n,eps,delta,paths,sup_energy,sup_energy_se,dissipation,dissipation_se,"
           "integrability,integrability_se,delta_rho_beta,delta_rho_beta_se,dist_rho,"
           "dist_rho_se,dist_m,dist_m_se,dist_B,dist_B_se,mass_drift\n";
  const auto old = out.precision(12);
  for (const auto& r : rows) {
    out << study_name(kind) << ',' << r.n << ',' << r.eps << ',' << r.delta << ',' << r.paths;
    for (const Estimate* e : {&r.sup_energy, &r.dissipation, &r.integrability, &r.delta_rho_beta,
                              &r.dist_rho, &r.dist_m, &r.dist_B})
      out << ',' << e->mean << ',' << e->se;
    out << ',' << r.max_mass_drift << '\n';
  }
  out.precision(old);
}

StudyTable convergence_study(const RunConfig& cfg, StudyKind kind) {
  cfg.validate();
  StudyTable table;
  table.kind = kind;
  std::size_t levels = 0;
  switch (kind) {
    case StudyKind::N: levels = cfg.n_levels.size(); break;
    case StudyKind::Eps: levels = cfg.eps_levels.size(); break;
    case StudyKind::Delta: levels = cfg.delta_levels.size(); break;
  }
  const NegativeNorm hm1(cfg.domain);
  std::vector<Trajectory> prev;
  std::optional<Basis> prev_basis;
  for (std::size_t lv = 0; lv < levels; ++lv) {
    PathConfig pc = cfg.path_config();
    if (kind == StudyKind::N) pc.n_per_axis = cfg.n_levels[lv];
    if (kind == StudyKind::Eps) pc.params.eps = cfg.eps_levels[lv];
    if (kind == StudyKind::Delta) pc.params.delta = cfg.delta_levels[lv];
    pc.store_states = true;
    pc.store_stride = kStudyStride;
    std::vector<Trajectory> cur = run_paths(pc, cfg.master_seed, cfg.ensemble_size, cfg.threads);
    const Basis basis(pc.domain, pc.n_per_axis);

    StudyRow row;
    row.n = pc.n_per_axis;
    row.eps = pc.params.eps;
    row.delta = pc.params.delta;
    std::vector<double> se, di, drb;
    for (const auto& tr : cur) {
      row.max_mass_drift = std::max(row.max_mass_drift, relative_mass_drift(tr));
      if (tr.aborted) continue;
      ++row.paths;
      se.push_back(tr.sup_energy());
      di.push_back(tr.records.back().dissipation);
      double sb = 0.0;
      for (const auto& r : tr.records) sb = std::max(sb, r.rho_beta);
      drb.push_back(pc.params.delta * sb);
    }
    row.sup_energy = estimate(se);
    row.dissipation = estimate(di);
    row.delta_rho_beta = estimate(drb);
    if (row.paths > 0) row.integrability = pressure_integrability(cur, pc.params, pc.moment_theta);

    if (!prev.empty()) {
      const Basis& fine = prev_basis->n() >= basis.n() ? *prev_basis : basis;
      std::vector<double> dr, dm, dB;
      for (std::size_t i = 0; i < cur.size(); ++i) {
        const Trajectory& a = prev[i];
        const Trajectory& b = cur[i];
        if (a.aborted || b.aborted || a.states.size() != b.states.size()) continue;
        double sr = 0.0, sm = 0.0, sB = 0.0;
        for (std::size_t j = 0; j < a.states.size(); ++j) {
          const State& x = a.states[j];
          const State& y = b.states[j];
          sr = std::max(sr, hm1(y.rho.values - x.rho.values));
          GridVector mx = momentum(x, *prev_basis), my = momentum(y, basis);
          for (int c = 0; c < basis.dim(); ++c) my[c] -= mx[c];
          sm = std::max(sm, weighted_coeff_norm(project(my, fine), fine));
          const CoeffVec diff = embed(y.B, basis, fine) - embed(x.B, *prev_basis, fine);
          sB += kStudyStride * cfg.dt * diff.squaredNorm();
        }
        dr.push_back(sr);
        dm.push_back(sm);
        dB.push_back(std::sqrt(sB));
      }
      row.dist_rho = estimate(dr);
      row.dist_m = estimate(dm);
      row.dist_B = estimate(dB);
    }
    table.rows.push_back(row);
    prev = std::move(cur);
    prev_basis.emplace(basis);
  }
  return table;
}

}  // namespace smhd
