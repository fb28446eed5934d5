#include "smhd/stepper.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "smhd/error.hpp"

namespace smhd {

namespace {

constexpr char kStateMagic[8] = {'S', 'M', 'H', 'D', 'S', 'T', 'A', 'T'};
constexpr std::uint32_t kStateVersion = 1;

double dissipation_rate(const CoeffVec& u, const CoeffVec& B, const SimParams& p,
                        const Operators& ops) {
  const Basis& basis = ops.basis();
  const int n = basis.n();
  double su = 0.0, sb = 0.0;
  for (int c = 0; c < basis.dim(); ++c) {
    su += (basis.eigvals().array() * u.segment(c * n, n).array().square()).sum();
    sb += (basis.eigvals().array() * B.segment(c * n, n).array().square()).sum();
  }
  const double div2 = -u.dot(ops.grad_div() * u);
  return p.mu * su + (p.lambda + p.mu) * div2 + p.nu * sb;
}

// ε Σ_f w (Δh/h)(Δρ/h): the discrete ε∫h'(ρ)|∇ρ|².
double artificial_rate(const GridField& rho, const SimParams& p, const Domain& d) {
  if (p.eps == 0.0) return 0.0;
  GridField h(rho.size());
  for (long i = 0; i < rho.size(); ++i) h[i] = p.enthalpy(rho[i]);
  const FaceField gh = face_gradient(h, d);
  const FaceField gr = face_gradient(rho, d);
  double s = 0.0;
  for (int a = 0; a < d.dim; ++a) s += gh[a].dot(gr[a]);
  return p.eps * d.cell_volume() * s;
}

void write_raw(std::ofstream& out, const void* p, std::size_t bytes) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
}

void read_raw(std::ifstream& in, void* p, std::size_t bytes, const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes))
    throw std::runtime_error(path + ": truncated state file");
}

}  // namespace

double State::noise_norm() const {
  double s = 0.0;
  if (noise_u.size()) s += noise_u.squaredNorm();
  if (noise_B.size()) s += noise_B.squaredNorm();
  return std::sqrt(s);
}

double State::l2_norm() const { return std::sqrt(u.squaredNorm() + B.squaredNorm()); }

Stepper::Stepper(const Operators& ops, const SimParams& params, const NoiseModel& noise,
                 StepperOptions opts)
    : ops_(ops), params_(params), noise_(noise), opts_(opts) {
  params_.validate();
}

const MassOp& Stepper::mass(const State& s) {
  if (!cached_ || cached_rho_.size() != s.rho.values.size() || cached_rho_ != s.rho.values) {
    cached_.emplace(s.rho.values, ops_, true);
    cached_rho_ = s.rho.values;
  }
  return *cached_;
}

void Stepper::step(State& s, double dt, std::span<const double> dW1,
                   std::span<const double> dW2, StepEnergy* energy, StepNoise* noise_out) {
  const Basis& basis = ops_.basis();
  const Domain& dom = basis.domain();
  const int K = noise_.K();
  const int d = basis.dim();
  const int nd = basis.vector_size();
  if (static_cast<int>(dW1.size()) < K || static_cast<int>(dW2.size()) < K)
    throw std::invalid_argument("em_step: need K increments per channel");
  if (!(dt > 0.0)) throw std::invalid_argument("em_step: dt must be positive");

  const double theta =
      opts_.use_cutoff ? cutoff_theta(s.u, s.B, params_.N_cutoff, basis) : 1.0;
  const FaceField faces = face_velocities(s.u, basis);
  DensityField rho_next = opts_.freeze_density
                              ? s.rho
                              : advance_density(s.rho, faces, params_.eps, dt, dom,
                                                &ops_.neumann(), opts_.transport);
  const GridField rate = (rho_next.values - s.rho.values) / dt;
  const MassOp& M = mass(s);

  const CoeffVec N1 = momentum_rhs(s.rho.values, s.u, s.B, params_, ops_, {&faces, &rate});
  const CoeffVec N2 = induction_rhs(s.u, s.B, params_, basis);

  CoeffVec csum = CoeffVec::Zero(nd);
  CoeffVec gsum = CoeffVec::Zero(nd);
  double c2 = 0.0, g2 = 0.0;
  Eigen::MatrixXd F1, F2;
  if (!noise_.silent()) {
    const GridVector U = reconstruct(s.u, basis);
    const GridVector Bg = reconstruct(s.B, basis);
    GridVector m(d);
    for (int c = 0; c < d; ++c) m[c] = s.rho.values.cwiseProduct(U[c]);
    const auto cks = normalized_noise(s.rho.values, eval_f(s.rho.values, m, noise_), basis);
    auto pgs = projected_g(eval_g(Bg, noise_), basis);
    if (opts_.solenoidal)
      for (auto& v : pgs) v = ops_.solenoidal_projector() * v;
    for (int k = 0; k < K; ++k) {
      csum += dW1[k] * cks[k];
      gsum += dW2[k] * pgs[k];
      c2 += cks[k].squaredNorm();
      g2 += pgs[k].squaredNorm();
    }
    if (noise_out) {
      F1.resize(nd, K);
      F2.resize(nd, K);
      for (int k = 0; k < K; ++k) {
        F1.col(k) = theta * M.apply_sqrt(cks[k]);
        F2.col(k) = theta * pgs[k];
      }
    }
  }
  const CoeffVec xi1 = theta * M.apply_sqrt(csum);
  const CoeffVec xi2 = theta * gsum;

  const CoeffVec q_next = M.apply(s.u) + dt * theta * N1 + xi1;
  std::optional<MassOp> M_next;
  if (!opts_.freeze_density) M_next.emplace(rho_next.values, ops_, true);
  const CoeffVec u_next = (M_next ? *M_next : M).solve(q_next);
  CoeffVec B_next = s.B + dt * theta * N2 + xi2;
  if (opts_.solenoidal) B_next = ops_.solenoidal_projector() * B_next;

  if (energy) {
    energy->dissipation = dt * theta * dissipation_rate(s.u, s.B, params_, ops_);
    energy->artificial = opts_.freeze_density ? 0.0 : dt * artificial_rate(s.rho.values, params_, dom);
    energy->ito = 0.5 * theta * theta * dt * (c2 + g2);
    energy->martingale = s.u.dot(xi1) + s.B.dot(xi2) +
                         0.5 * theta * theta * (csum.squaredNorm() - dt * c2) +
                         0.5 * theta * theta * (gsum.squaredNorm() - dt * g2);
  }
  if (noise_out) {
    noise_out->dM1 = xi1;
    noise_out->dM2 = xi2;
    noise_out->F1 = std::move(F1);
    noise_out->F2 = std::move(F2);
  }

  if (s.noise_u.size() != nd) s.noise_u = CoeffVec::Zero(nd);
  if (s.noise_B.size() != nd) s.noise_B = CoeffVec::Zero(nd);
  s.noise_u += xi1;
  s.noise_B += xi2;
  s.t += dt;
  ++s.step;
  s.theta = theta;
  s.u = u_next;
  s.B = std::move(B_next);
  if (M_next) {
    cached_.emplace(std::move(*M_next));
    cached_rho_ = rho_next.values;
  }
  s.rho = std::move(rho_next);
}

State em_step(const State& state, const SimParams& params, const Operators& ops,
              const NoiseModel& noise, std::span<const double> dW1,
              std::span<const double> dW2, double dt, StepperOptions opts) {
  if (state.stopped) throw std::invalid_argument("em_step: state is stopped");
  Stepper st(ops, params, noise, opts);
  State s = state;
  st.step(s, dt, dW1, dW2);
  return s;
}

State update_stopping(State state, double N) {
  if (state.stopped) return state;
  if (state.l2_norm() >= N || state.noise_norm() >= N) state.stopped = state.t;
  return state;
}

double energy_functional(const State& s, const MassOp& m, const SimParams& params,
                         const Domain& d) {
  double pot = 0.0;
  for (long i = 0; i < s.rho.values.size(); ++i) pot += params.pressure_potential(s.rho.values[i]);
  return 0.5 * s.u.dot(m.apply(s.u)) + d.cell_volume() * pot + 0.5 * s.B.squaredNorm();
}

State initial_state(const InitialData& init, const Operators& ops) {
  const Basis& basis = ops.basis();
  const Domain& dom = basis.domain();
  const int d = basis.dim();
  const int n = basis.n();
  if (!(init.rho_mean - std::abs(init.rho_amp) > 0.0))
    throw ConfigError("initial density must be strictly positive (rho_mean > |rho_amp|)");

  GridField rho(dom.num_cells());
  for (long t = 0; t < rho.size(); ++t) {
    long rem = t;
    double prod = 1.0;
    for (int a = d - 1; a >= 0; --a) {
      const int i = static_cast<int>(rem % dom.grid_pts[a]);
      rem /= dom.grid_pts[a];
      prod *= std::cos(std::numbers::pi * dom.center(a, i) / dom.lengths[a]);
    }
    rho[t] = init.rho_mean + init.rho_amp * prod;
  }

  auto idx = [&](int k0, int k1) {
    std::array<int, 3> k{k0, k1, 1};
    int m = basis.mode_index(k);
    if (m < 0) m = basis.mode_index({1, 1, 1});
    return m;
  };
  State s;
  s.rho = DensityField::from_values(std::move(rho), dom);
  s.u = CoeffVec::Zero(basis.vector_size());
  s.B = CoeffVec::Zero(basis.vector_size());
  s.u[0 * n + idx(1, 2)] += init.u_amp;
  s.u[1 * n + idx(2, 1)] -= init.u_amp;
  s.B[0 * n + idx(2, 1)] += init.B_amp;
  s.B[1 * n + idx(1, 2)] += init.B_amp;
  if (init.solenoidal_B) s.B = ops.solenoidal_projector() * s.B;
  s.noise_u = CoeffVec::Zero(basis.vector_size());
  s.noise_B = CoeffVec::Zero(basis.vector_size());
  return s;
}

double Trajectory::sup_energy() const {
  double e = 0.0;
  for (const auto& r : records) e = std::max(e, r.energy);
  return e;
}

Trajectory run_path(const PathConfig& cfg, std::uint64_t seed) {
  cfg.params.validate();
  const Operators ops(cfg.domain, cfg.n_per_axis);
  const NoiseModel noise(cfg.domain, cfg.noise, cfg.params.gamma);
  const BrownianPaths paths = sample_brownian(seed, cfg.noise.K, cfg.T, cfg.dt);
  return run_path(cfg, ops, noise, paths);
}

Trajectory run_path(const PathConfig& cfg, const Operators& ops, const NoiseModel& noise,
                    const BrownianPaths& paths) {
  const long steps = std::lround(cfg.T / cfg.dt);
  if (steps < 1) throw ConfigError("final time must be at least one time step");
  if (cfg.store_stride < 1) throw ConfigError("store_stride must be at least 1");
  if (std::abs(paths.dt() - cfg.dt) > 1e-12 * cfg.dt || paths.steps() < steps ||
      paths.K() != noise.K())
    throw std::invalid_argument("run_path: Brownian increments do not match the time grid");

  const Basis& basis = ops.basis();
  const Domain& dom = basis.domain();
  const int nd = basis.vector_size();
  const int K = noise.K();

  Trajectory tr;
  tr.seed = paths.seed();
  tr.dt = cfg.dt;
  tr.moment_theta = cfg.moment_theta;
  tr.records.reserve(static_cast<std::size_t>(steps) + 1);

  Stepper st(ops, cfg.params, noise, cfg.stepper);
  State s = initial_state(cfg.init, ops);
  if (cfg.stopping) s = update_stopping(s, cfg.params.N_stop);

  MartingaleData& md = tr.mart;
  md.M1 = md.M2 = md.M1_half = md.M2_half = CoeffVec::Zero(nd);
  md.Q1 = md.Q2 = md.Q1_half = md.Q2_half = Eigen::MatrixXd::Zero(nd, nd);

  StepRecord cum;
  double E0 = 0.0;
  auto record = [&](const State& x) {
    StepRecord r = cum;
    r.t = x.t;
    r.theta = x.theta;
    r.mass = x.rho.mass;
    r.energy = energy_functional(x, st.mass(x), cfg.params, dom);
    r.u_h1 = coeff_h1_norm(x.u, basis);
    r.B_h1 = coeff_h1_norm(x.B, basis);
    r.divB = (ops.weak_div() * x.B).norm();
    r.rho_min = x.rho.min();
    r.rho_max = x.rho.max();
    r.divu_sup = sup_div(x.u, basis);
    r.l2 = x.l2_norm();
    r.noise_norm = x.noise_norm();
    double pm = 0.0, rb = 0.0;
    for (long i = 0; i < x.rho.values.size(); ++i) {
      const double v = x.rho.values[i];
      const double vb = std::pow(v, cfg.params.beta);
      rb += vb;
      pm += (cfg.params.a * std::pow(v, cfg.params.gamma) + cfg.params.delta * vb) *
            std::pow(v, cfg.moment_theta);
    }
    r.pressure_moment = dom.cell_volume() * pm;
    r.rho_beta = dom.cell_volume() * rb;
    r.stopped = x.stopped.has_value();
    r.residual = r.energy + r.dissipation + r.artificial - E0 - r.ito - r.martingale;
    return r;
  };
  tr.records.push_back(record(s));
  E0 = tr.records[0].energy;
  tr.records[0].residual = 0.0;
  if (cfg.store_states) tr.states.push_back(s);

  const long half = steps / 2;
  std::vector<double> w1(K), w2(K);
  StepEnergy en;
  StepNoise nz;
  for (long n = 0; n < steps; ++n) {
    if (!s.stopped) {
      for (int k = 0; k < K; ++k) {
        w1[k] = paths.increment(0, k, n);
        w2[k] = paths.increment(1, k, n);
      }
      try {
        st.step(s, cfg.dt, w1, w2, &en, &nz);
      } catch (const PositivityError& e) {
        tr.aborted = std::string("positivity: ") + e.what();
        break;
      } catch (const CflError& e) {
        tr.aborted = std::string("cfl: ") + e.what();
        break;
      }
      cum.dissipation += en.dissipation;
      cum.artificial += en.artificial;
      cum.ito += en.ito;
      cum.martingale += en.martingale;
      md.M1 += nz.dM1;
      md.M2 += nz.dM2;
      if (nz.F1.size()) {
        md.Q1.noalias() += cfg.dt * nz.F1 * nz.F1.transpose();
        md.Q2.noalias() += cfg.dt * nz.F2 * nz.F2.transpose();
      }
      if (cfg.stopping) s = update_stopping(std::move(s), cfg.params.N_stop);
    } else {
      s.t += cfg.dt;
      ++s.step;
    }
    if (n + 1 == half) {
      md.M1_half = md.M1;
      md.M2_half = md.M2;
      md.Q1_half = md.Q1;
      md.Q2_half = md.Q2;
    }
    tr.records.push_back(record(s));
    if (cfg.store_states && (n + 1) % cfg.store_stride == 0) tr.states.push_back(s);
  }
  tr.final_state = s;
  return tr;
}

FixedPointResult fixed_point_substep(const State& state, const SimParams& params,
                                     const Operators& ops, double dt, double tol, int max_iter,
                                     StepperOptions opts) {
  const Basis& basis = ops.basis();
  const Domain& dom = basis.domain();
  const FaceField faces0 = face_velocities(state.u, basis);
  const DensityField rho_next =
      opts.freeze_density ? state.rho
                          : advance_density(state.rho, faces0, params.eps, dt, dom,
                                            &ops.neumann(), opts.transport);
  const GridField rate = (rho_next.values - state.rho.values) / dt;
  const MassOp M(state.rho.values, ops, false);
  const MassOp M_next(rho_next.values, ops, false);
  const CoeffVec q = M.apply(state.u);

  CoeffVec u = state.u, B = state.B;
  FixedPointResult res;
  double prev = -1.0;
  const double floor = 1e-13 * std::max(1.0, std::sqrt(u.squaredNorm() + B.squaredNorm()));
  for (int it = 1; it <= max_iter; ++it) {
    const FaceField faces = face_velocities(u, basis);
    const CoeffVec u_new =
        M_next.solve(q + dt * momentum_rhs(state.rho.values, u, B, params, ops, {&faces, &rate}));
    const CoeffVec B_new = state.B + dt * induction_rhs(u, B, params, basis);
    const double diff = std::sqrt((u_new - u).squaredNorm() + (B_new - B).squaredNorm());
    u = u_new;
    B = B_new;
    res.iterations = it;
    if (prev > floor) {
      const double k = diff / prev;
      res.kappa = std::max(res.kappa, k);
      if (k >= 1.0)
        throw std::runtime_error("fixed_point_substep: no contraction at dt = " +
                                 std::to_string(dt) + " (kappa = " + std::to_string(k) +
                                 "); reduce dt");
    }
    const double scale = std::max(1.0, std::sqrt(u.squaredNorm() + B.squaredNorm()));
    if (diff <= tol * scale) break;
    if (it == max_iter)
      throw std::runtime_error("fixed_point_substep: no convergence within max_iter");
    prev = diff;
  }
  res.state = state;
  res.state.t += dt;
  ++res.state.step;
  res.state.rho = rho_next;
  res.state.u = u;
  res.state.B = B;
  return res;
}

void write_timeseries_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "t,mass,energy,u_h1,B_h1,divB,theta,stopped\n";
  for (const auto& r : traj.records)
    out << r.t << ',' << r.mass << ',' << r.energy << ',' << r.u_h1 << ',' << r.B_h1 << ','
        << r.divB << ',' << r.theta << ',' << (r.stopped ? 1 : 0) << '\n';
}

void write_state(const State& s, const Basis& basis, const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  const Domain& d = basis.domain();
  write_raw(out, kStateMagic, sizeof kStateMagic);
  write_raw(out, &kStateVersion, sizeof kStateVersion);
  const std::int32_t dim = d.dim;
  write_raw(out, &dim, sizeof dim);
  for (int a = 0; a < 3; ++a) {
    const std::int32_t g = a < d.dim ? d.grid_pts[a] : 1;
    write_raw(out, &g, sizeof g);
  }
  const std::int32_t npa = basis.n_per_axis();
  write_raw(out, &npa, sizeof npa);
  write_raw(out, &s.t, sizeof s.t);
  write_raw(out, s.rho.values.data(), sizeof(double) * s.rho.values.size());
  write_raw(out, s.u.data(), sizeof(double) * s.u.size());
  write_raw(out, s.B.data(), sizeof(double) * s.B.size());
}

State read_state(const std::string& path, const Basis& basis) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  read_raw(in, magic, sizeof magic, path);
  if (std::memcmp(magic, kStateMagic, sizeof magic) != 0)
    throw std::runtime_error(path + ": not a state dump");
  std::uint32_t version = 0;
  read_raw(in, &version, sizeof version, path);
  if (version != kStateVersion) throw std::runtime_error(path + ": unsupported version");
  std::int32_t dim = 0, grid[3] = {0, 0, 0}, npa = 0;
  read_raw(in, &dim, sizeof dim, path);
  read_raw(in, grid, sizeof grid, path);
  read_raw(in, &npa, sizeof npa, path);
  const Domain& d = basis.domain();
  bool ok = dim == d.dim && npa == basis.n_per_axis();
  for (int a = 0; a < d.dim; ++a) ok = ok && grid[a] == d.grid_pts[a];
  if (!ok) throw std::runtime_error(path + ": dump does not match the discretization");
  State s;
  read_raw(in, &s.t, sizeof s.t, path);
  GridField rho(d.num_cells());
  read_raw(in, rho.data(), sizeof(double) * rho.size(), path);
  s.rho = DensityField::from_values(std::move(rho), d);
  s.u.resize(basis.vector_size());
  s.B.resize(basis.vector_size());
  read_raw(in, s.u.data(), sizeof(double) * s.u.size(), path);
  read_raw(in, s.B.data(), sizeof(double) * s.B.size(), path);
  s.noise_u = CoeffVec::Zero(basis.vector_size());
  s.noise_B = CoeffVec::Zero(basis.vector_size());
  return s;
}

}  // namespace smhd
