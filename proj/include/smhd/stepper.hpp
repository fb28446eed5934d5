#pragma once

// Euler–Maruyama integration of the truncated Galerkin system in momentum
// form, with the density advanced by the transport scheme, the cut-off θ_N
// and the discrete stopping time.
//
// One step from (ρ, u, B) at t_n:
//   θ   = θ_N(u, B)                                  (pre-step, non-anticipating)
//   ρ'  = S_dt[u](ρ)
//   q'  = M[ρ]u + dt·θ·N1 + θ Σ_k M^{1/2}[ρ] ℙ(f_k/√ρ) Δβ¹_k
//   u'  = M[ρ']⁻¹ q'
//   B'  = B + dt·θ·N2 + θ Σ_k ℙg_k Δβ²_k
// N1 uses the realized density rate (ρ' - ρ)/dt.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smhd/basis.hpp"
#include "smhd/galerkin.hpp"
#include "smhd/noise.hpp"
#include "smhd/transport.hpp"

namespace smhd {

struct State {
  double t = 0.0;
  long step = 0;
  DensityField rho;
  CoeffVec u;
  CoeffVec B;
  std::optional<double> stopped;
  double theta = 1.0;
  /// Accumulated Σ θ f^n_k Δβ¹_k and Σ θ ℙg_k Δβ²_k.
  CoeffVec noise_u;
  CoeffVec noise_B;

  double noise_norm() const;
  /// ‖(u, B)‖_{L²}.
  double l2_norm() const;
};

struct StepperOptions {
  /// Skip transport: ρ' = ρ.
  bool freeze_density = false;
  /// θ ≡ 1 when false.
  bool use_cutoff = true;
  /// Project B onto the weakly divergence-free subspace after each step.
  bool solenoidal = false;
  TransportOptions transport;
};

/// Energy bookkeeping for one step (all pre-step quantities unless noted).
struct StepEnergy {
  double dissipation = 0.0;
  double artificial = 0.0;
  double ito = 0.0;
  double martingale = 0.0;
};

/// Data the martingale tests need from one step.
struct StepNoise {
  /// Σ_k θ f^n_k Δβ¹_k and Σ_k θ ℙg_k Δβ²_k.
  CoeffVec dM1;
  CoeffVec dM2;
  /// θ f^n_k and θ ℙg_k for every k (columns).
  Eigen::MatrixXd F1;
  Eigen::MatrixXd F2;
};

class Stepper {
 public:
  Stepper(const Operators& ops, const SimParams& params, const NoiseModel& noise,
          StepperOptions opts = {});

  /// Advances `s` by dt with the given increments (K per channel). Throws
  /// PositivityError or CflError; `s` is unchanged on error.
  void step(State& s, double dt, std::span<const double> dW1, std::span<const double> dW2,
            StepEnergy* energy = nullptr, StepNoise* noise = nullptr);

  const Operators& ops() const { return ops_; }
  const SimParams& params() const { return params_; }
  const NoiseModel& noise() const { return noise_; }
  const StepperOptions& options() const { return opts_; }

  /// Mass operator of the current state's density (cached across steps).
  const MassOp& mass(const State& s);

 private:
  const Operators& ops_;
  SimParams params_;
  const NoiseModel& noise_;
  StepperOptions opts_;
  std::optional<MassOp> cached_;
  GridField cached_rho_;
};

/// Single step with a freshly assembled mass operator.
State em_step(const State& state, const SimParams& params, const Operators& ops,
              const NoiseModel& noise, std::span<const double> dW1,
              std::span<const double> dW2, double dt, StepperOptions opts = {});

/// Sets `stopped` when ‖(u,B)‖_{L²} ≥ N or the accumulated noise norm ≥ N.
State update_stopping(State state, double N);

/// Energy functional ∫ ½ρ|u|² + P(ρ) + ½|B|² (quadrature consistent with M[ρ]).
double energy_functional(const State& s, const MassOp& m, const SimParams& params,
                         const Domain& d);

struct InitialData {
  double rho_mean = 1.0;
  double rho_amp = 0.3;
  double u_amp = 0.8;
  double B_amp = 0.8;
  /// Weakly divergence-free initial field.
  bool solenoidal_B = true;
};

/// ρ0 = mean + amp·∏cos(πx_a/L_a); u0 = u_amp(φ_(1,2), -φ_(2,1));
/// B0 = B_amp(φ_(2,1), φ_(1,2)), projected when requested. Third components vanish in 3-D.
State initial_state(const InitialData& init, const Operators& ops);

struct PathConfig {
  SimParams params;
  NoiseConfig noise;
  Domain domain;
  int n_per_axis = 4;
  double dt = 1e-3;
  double T = 0.5;
  InitialData init;
  StepperOptions stepper;
  /// Keep (ρ, u, B) at t = 0 and every `store_stride` steps.
  bool store_states = false;
  int store_stride = 1;
  /// Apply the stopping rule (level params.N_stop).
  bool stopping = true;
  /// Exponent θ of the recorded moment ∫(aρ^{γ+θ} + δρ^{β+θ}).
  double moment_theta = 0.1;
};

struct StepRecord {
  double t = 0.0;
  double theta = 1.0;
  double mass = 0.0;
  double energy = 0.0;
  double dissipation = 0.0;  // cumulative
  double artificial = 0.0;   // cumulative
  double ito = 0.0;          // cumulative
  double martingale = 0.0;   // cumulative
  double residual = 0.0;
  double u_h1 = 0.0;
  double B_h1 = 0.0;
  double divB = 0.0;
  double rho_min = 0.0;
  double rho_max = 0.0;
  double divu_sup = 0.0;
  double l2 = 0.0;
  double noise_norm = 0.0;
  /// ∫(aρ^{γ+θ} + δρ^{β+θ}) with θ = PathConfig::moment_theta.
  double pressure_moment = 0.0;
  /// ∫ρ^β.
  double rho_beta = 0.0;
  bool stopped = false;
};

struct MartingaleData {
  /// Accumulated stochastic integrals at T/2 and T.
  CoeffVec M1_half, M2_half, M1, M2;
  /// Σ_n dt Σ_k (θ f^n_k)(θ f^n_k)^T and the g analog, at T/2 and T.
  Eigen::MatrixXd Q1_half, Q2_half, Q1, Q2;
};

struct Trajectory {
  std::uint64_t seed = 0;
  double dt = 0.0;
  double moment_theta = 0.0;
  /// records[i] is the state after i steps; records.size() = steps + 1 unless aborted.
  std::vector<StepRecord> records;
  State final_state;
  std::vector<State> states;
  MartingaleData mart;
  std::optional<std::string> aborted;

  double sup_energy() const;
};

/// Builds the operators and noise model from `cfg` and runs with increments
/// sampled from `seed`.
Trajectory run_path(const PathConfig& cfg, std::uint64_t seed);
/// Runs on prebuilt shared data; `paths.dt()` must equal cfg.dt.
Trajectory run_path(const PathConfig& cfg, const Operators& ops, const NoiseModel& noise,
                    const BrownianPaths& paths);

struct FixedPointResult {
  State state;
  int iterations = 0;
  double kappa = 0.0;
};

/// Implicit deterministic step (u*, B*) = (M[ρ']⁻¹(M[ρ]u + dt N1(u*, B*)), B + dt N2(u*, B*))
/// solved by Picard iteration. Throws std::runtime_error when the measured
/// contraction factor is ≥ 1.
FixedPointResult fixed_point_substep(const State& state, const SimParams& params,
                                     const Operators& ops, double dt, double tol,
                                     int max_iter = 200, StepperOptions opts = {});

/// Columns t, mass, energy, u_h1, B_h1, divB, theta, stopped.
void write_timeseries_csv(const Trajectory& traj, const std::string& path);

/// "SMHDSTAT" magic, u32 version, i32 dim, i32 grid[3], i32 n_per_axis, f64 t,
/// then ρ (cells), u and B (n·d each) as little-endian float64.
void write_state(const State& s, const Basis& basis, const std::string& path);
State read_state(const std::string& path, const Basis& basis);

}  // namespace smhd
