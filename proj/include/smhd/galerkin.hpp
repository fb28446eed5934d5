#pragma once

// Finite-dimensional operators of the Galerkin scheme: the density-weighted
// mass operator, the momentum and induction drifts, and the cut-off θ_N.
//
// The momentum drift is assembled in a form whose pairing with the velocity
// reproduces the discrete energy balance of the transport scheme exactly:
// convection and the artificial-viscosity term are written skew-symmetrically,
// the density-rate contribution ½ρ̇u is explicit, and the pressure force is
// evaluated on the transport faces with the upwind density.

#include <limits>
#include <memory>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "smhd/basis.hpp"
#include "smhd/transport.hpp"

namespace smhd {

struct SimParams {
  double mu = 1.0;
  double lambda = 0.0;
  double nu = 1.0;
  double a = 1.0;
  double gamma = 5.0 / 3.0;
  double beta = 5.0;
  double delta = 1e-3;
  double eps = 1e-3;
  /// Cut-off level N of θ_N (W^{1,∞} norms).
  double N_cutoff = 10.0;
  /// Stopping level of τ (L² norms); separate from N_cutoff.
  double N_stop = 10.0;
  /// Permits γ ≤ 3/2 for experiments outside the existence regime.
  bool allow_low_gamma = false;

  /// Throws ConfigError naming the violated invariant.
  void validate() const;

  /// Pressure p(ρ) = aρ^γ + δρ^β.
  double pressure(double rho) const;
  /// Pressure potential P(ρ) = aρ^γ/(γ-1) + δρ^β/(β-1), so P'' ρ = p'.
  double pressure_potential(double rho) const;
  /// Enthalpy h(ρ) = P'(ρ).
  double enthalpy(double rho) const;
  /// h'(ρ) = aγρ^{γ-2} + δβρ^{β-2}.
  double enthalpy_derivative(double rho) const;
};

/// Precomputed, immutable discretization data shared by one or more paths.
class Operators {
 public:
  Operators(const Domain& domain, int n_per_axis);
  explicit Operators(const Basis& basis);

  const Basis& basis() const { return basis_; }
  const Domain& domain() const { return basis_.domain(); }
  const NeumannSolver& neumann() const { return neumann_; }
  /// Scalar modes sampled at cell centers (cells × n).
  const Eigen::MatrixXd& phi() const { return phi_; }
  /// (GD)_{(c,j),(c',i)} = -Σ_x w ∂_{c'}φ_i ∂_cφ_j, the quadrature form of ∇div.
  const Eigen::MatrixXd& grad_div() const { return grad_div_; }
  /// D_{m,(c,j)} = Σ_x w φ_j ∂_cφ_m: pairing of a field with the gradients of
  /// the scalar modes. D B = 0 is the discrete (weak) divergence constraint.
  const Eigen::MatrixXd& weak_div() const { return weak_div_; }
  /// Orthogonal projector onto ker D.
  const Eigen::MatrixXd& solenoidal_projector() const { return sol_proj_; }

 private:
  Basis basis_;
  NeumannSolver neumann_;
  Eigen::MatrixXd phi_;
  Eigen::MatrixXd grad_div_;
  Eigen::MatrixXd weak_div_;
  Eigen::MatrixXd sol_proj_;
};

class MassOp {
 public:
  /// Scalar Gram block G_ij = Σ_x w ρ φ_i φ_j; the vector operator is
  /// block diagonal with d copies of G.
  MassOp(const GridField& rho, const Operators& ops, bool with_sqrt = true);

  int dim() const { return dim_; }
  const Eigen::MatrixXd& block() const { return block_; }
  const Eigen::MatrixXd& sqrt_block() const;
  /// Full n·d × n·d matrix.
  Eigen::MatrixXd matrix() const;
  Eigen::MatrixXd sqrt_matrix() const;

  CoeffVec apply(const CoeffVec& v) const;
  CoeffVec solve(const CoeffVec& v) const;
  CoeffVec apply_sqrt(const CoeffVec& v) const;
  /// Extreme eigenvalues of the scalar block.
  double min_eigenvalue() const;
  double max_eigenvalue() const;

 private:
  int dim_;
  Eigen::MatrixXd block_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd eig_;
  Eigen::MatrixXd sqrt_;
  bool have_sqrt_ = false;
};

MassOp mass_op(const DensityField& rho, const Operators& ops, bool with_sqrt = true);

struct MassLipschitz {
  /// Spectral norm of M⁻¹[ρ1] - M⁻¹[ρ2].
  double lhs;
  /// ‖ρ1 - ρ2‖_{L¹}.
  double rhs;
};

/// Both densities must be bounded below by eta > 0.
MassLipschitz mass_lipschitz_check(const DensityField& rho1, const DensityField& rho2,
                                   double eta, const Operators& ops);

struct MomentumParts {
  CoeffVec viscous;
  CoeffVec convection;
  CoeffVec density_rate;
  CoeffVec artificial;
  CoeffVec pressure;
  CoeffVec lorentz;

  CoeffVec total() const;
};

/// Context for the pressure face term and the density-rate term.
struct TransportContext {
  /// Face velocities of u; computed from u when null.
  const FaceField* faces = nullptr;
  /// Density rate ρ̇; the semi-discrete rate -div_h(ρ_up u_f) + εΔ_hρ when null.
  const GridField* rho_rate = nullptr;
};

MomentumParts momentum_parts(const GridField& rho, const CoeffVec& u, const CoeffVec& B,
                             const SimParams& params, const Operators& ops,
                             TransportContext ctx = {});
CoeffVec momentum_rhs(const GridField& rho, const CoeffVec& u, const CoeffVec& B,
                      const SimParams& params, const Operators& ops, TransportContext ctx = {});

/// Coefficients of P(∇×(u×B)) + νΔB, the curl term in weak form ⟨u×B, ∇×φ⟩.
CoeffVec induction_rhs(const CoeffVec& u, const CoeffVec& B, const SimParams& params,
                       const Basis& basis);

/// Lorentz coefficients P((∇×B)×B); in 2-D (∇×B)×B = J(-B_y, B_x) with J = ∂_xB_y - ∂_yB_x.
CoeffVec lorentz_force(const CoeffVec& B, const Basis& basis);

/// 1 on [0,N], quintic smoothstep down to 0 on [N,N+1], 0 beyond.
double cutoff_profile(double s, double N);
/// θ_N(max{‖u‖_{W^{1,∞}}, ‖B‖_{W^{1,∞}}}).
double cutoff_theta(const CoeffVec& u, const CoeffVec& B, double N, const Basis& basis);

}  // namespace smhd
