#pragma once

// Post-processing checks on trajectories: the Itô energy balance, martingale
// identities of the stochastic integrals, density integrability, the
// effective viscous flux, renormalized continuity residuals, the divergence
// right inverse and the magnetic divergence constraint.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smhd/basis.hpp"
#include "smhd/galerkin.hpp"
#include "smhd/spectral.hpp"
#include "smhd/stepper.hpp"

namespace smhd {

struct EnergyReport {
  std::vector<double> t;
  std::vector<double> E;
  /// Cumulative viscous plus resistive dissipation.
  std::vector<double> D;
  /// Cumulative artificial-viscosity dissipation.
  std::vector<double> A;
  /// Cumulative Itô correction.
  std::vector<double> I;
  /// Accumulated stochastic pairings.
  std::vector<double> Mart;
  /// E + D + A - E(0) - I - Mart.
  std::vector<double> residual;

  double max_abs_residual() const;
  bool finite() const;
  /// D, A and I nondecreasing.
  bool monotone() const;
};

EnergyReport energy_report(const Trajectory& traj);

struct ZStat {
  std::string name;
  double mean = 0.0;
  double se = 0.0;
  double z = 0.0;
};

struct MartingaleTest {
  std::vector<ZStat> stats;
  int paths = 0;
  bool pass = false;
};

/// Five statistics along the direction phi at T (or T/2): E⟨M,φ⟩,
/// E[⟨M,φ⟩² - φᵀQφ] for both channels, and E[⟨M1,φ⟩⟨M2,φ⟩]. Aborted paths
/// are skipped; at least 50 usable paths are required.
MartingaleTest martingale_qv_test(std::span<const Trajectory> ensemble, const CoeffVec& phi,
                                  bool at_half = false, double z_max = 4.0);

/// z = mean / (sd/√n); 0 when every sample vanishes.
ZStat z_statistic(const std::string& name, std::span<const double> samples);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  int count = 0;
};

/// Mean and standard error (sample standard deviation over √n).
Estimate estimate(std::span<const double> samples);

/// Upper end min{1, γ/3, 2γ/3 - 1} of the admissible integrability exponents.
double integrability_theta_max(double gamma);
/// Throws ConfigError unless 0 < θ < integrability_theta_max(γ).
void validate_integrability_theta(double theta, double gamma);

/// Monte Carlo estimate of E∫₀ᵀ∫(aρ^{γ+θ} + δρ^{β+θ}). Every trajectory must
/// have been recorded with moment_theta = theta.
Estimate pressure_integrability(std::span<const Trajectory> ensemble, const SimParams& params,
                                double theta);

struct FluxField {
  GridField values;
};

/// F = aρ^γ + δρ^β - (λ+2μ) div u at cell centers.
FluxField effective_flux(const State& s, const SimParams& params, const Basis& basis);

// Density cut-offs. T is C¹, equal to z on [0,1], concave quadratic on
// [1,3] and 2 beyond; T_k(z) = k T(z/k). L_k(z) = z log z below k and
// z log k + z ∫_k^z T_k(s)/s² ds above.
double cutoff_T(double z);
double cutoff_T_derivative(double z);
double cutoff_Tk(double z, double k);
double cutoff_Tk_derivative(double z, double k);
double cutoff_Lk(double z, double k);
double cutoff_Lk_derivative(double z, double k);

struct Renormalization {
  enum class Kind { Identity, Tk, Lk };
  Kind kind = Kind::Identity;
  double k = 1.0;

  double b(double z) const;
  double db(double z) const;
  std::string name() const;
};

/// Smooth space-time bump with support inside (0,T)×D; positions and radii
/// are fractions of the domain lengths and of T.
struct TestBump {
  std::array<double, 3> center{};
  std::array<double, 3> radius{};
  double t_center = 0.5;
  double t_radius = 0.25;
};

/// The eight reference bumps.
const std::array<TestBump, 8>& test_battery();

/// ψ(t, x) at the cell centers.
GridField bump_values(const TestBump& bump, double t, double T, const Domain& d);

struct RenormReport {
  std::array<double, 8> residual{};
  double max_abs = 0.0;
};

/// Discrete weak residual of ∂_t b(ρ) + div(b(ρ)u) + (b'(ρ)ρ - b(ρ)) div u - ε b'(ρ)Δρ
/// tested against the battery, using the face fluxes and divergence of the
/// transport scheme. Needs a trajectory with stored states.
RenormReport renorm_residual(const Trajectory& traj, const Renormalization& b, double eps,
                             const Operators& ops);

/// ∫₀ᵀ∫ ψ F T_k(ρ) for the first battery bump along a stored trajectory.
double flux_pairing(const Trajectory& traj, const SimParams& params, double k,
                    const Basis& basis);

struct FluxStudyRow {
  double value = 0.0;
  Estimate pairing;
  /// |pairing(level) - pairing(previous level)|; zero on the first row.
  double increment = 0.0;
};

enum class StudyParameter { Eps, Delta };

/// Pairing of the effective flux with T_k(ρ) across a monotone schedule of ε
/// or δ, with the same seeds at every level.
std::vector<FluxStudyRow> flux_pairing_study(const PathConfig& base, StudyParameter param,
                                             const std::vector<double>& schedule, double k,
                                             const std::vector<std::uint64_t>& seeds);

/// |D B| for the weak divergence operator.
double divB_norm(const CoeffVec& B, const Operators& ops);
/// ‖div B‖_{L²} of a symbolic field, sampled at cell centers.
double divB_norm(const SpectralVector& B, const Domain& d);
/// Least-squares projection onto ker D.
CoeffVec solenoidal_project(const CoeffVec& B, const Operators& ops);

struct BogovskiiResult {
  SpectralVector field;
  /// Samples at cell centers.
  GridVector values;
  /// ‖div v - f‖₂ / ‖f‖₂.
  double div_residual = 0.0;
  /// RMS of v on ∂D relative to the RMS trace of the gradient part.
  double trace_residual = 0.0;
  double h1_norm = 0.0;
  double f_norm = 0.0;
};

/// Right inverse of the divergence with (approximately) zero trace: the
/// gradient of the Neumann solve plus a divergence-free corrector whose
/// potential vanishes on ∂D, fitted to cancel the tangential trace.
/// The relative Tikhonov penalty keeps the fit well conditioned; below 1e-8
/// the solve loses linearity to rounding without reducing the trace.
class BogovskiiSolver {
 public:
  explicit BogovskiiSolver(const Domain& d, int corrector_modes = 0, double penalty = 1e-6);

  /// f at cell centers with ∫f = 0 to 1e-10 relative. Throws std::invalid_argument otherwise.
  BogovskiiResult solve(const GridField& f) const;
  const Domain& domain() const { return domain_; }

 private:
  struct Potential {
    std::array<Parity, 3> parity;
    std::array<int, 3> modes;
  };
  Domain domain_;
  int M_;
  std::vector<Potential> pots_;
  std::vector<int> offsets_;
  bool dual_;
  Eigen::MatrixXd A_;         // trace rows × corrector unknowns
  Eigen::VectorXd weight2_;   // penalty weights squared
  Eigen::LDLT<Eigen::MatrixXd> fact_;

  Eigen::VectorXd trace_samples(const SpectralVector& v) const;
  SpectralVector corrector(const Eigen::VectorXd& c) const;
};

BogovskiiResult bogovskii_solve(const GridField& f, const Domain& d);

}  // namespace smhd
