#pragma once

// Density solution operator: conservative finite volumes for
// ρ_t + div(ρu) = εΔρ on the quadrature cells, zero diffusive flux on ∂D.
// Advection uses first-order upwind fluxes at cell faces with the face
// velocity sampled from the Galerkin field (which vanishes on ∂D);
// diffusion is backward Euler, diagonalized by a cosine transform.

#include <utility>
#include <vector>

#include "smhd/basis.hpp"

namespace smhd {

struct DensityField {
  GridField values;
  /// Quadrature integral of `values`.
  double mass = 0.0;

  static DensityField from_values(GridField v, const Domain& d);
  double min() const { return values.minCoeff(); }
  double max() const { return values.maxCoeff(); }
};

/// Face-normal velocity per axis; entry a lives on the faces normal to a.
using FaceField = std::vector<GridField>;

FaceField face_velocities(const CoeffVec& u, const Basis& basis);

/// Upwind density on every face: ρ_L where u_f ≥ 0, else ρ_R (zero on boundary faces).
FaceField upwind_density(const GridField& rho, const FaceField& uf, const Domain& d);
/// Upwind flux ρ_up·u_f on every face (zero on boundary faces).
FaceField upwind_flux(const GridField& rho, const FaceField& uf, const Domain& d);
/// Cell-centered divergence of a face field: Σ_a (F_{i+1/2} - F_{i-1/2}) / h_a.
GridField face_divergence(const FaceField& f, const Domain& d);
/// (ρ_R - ρ_L)/h on interior faces, zero on boundary faces.
FaceField face_gradient(const GridField& rho, const Domain& d);
/// Central differences at cell centers with mirrored ghost cells.
GridVector center_gradient(const GridField& rho, const Domain& d);
/// Five-point (seven-point) Neumann Laplacian.
GridField neumann_laplacian(const GridField& rho, const Domain& d);

/// Solver for (I - τΔ_h) x = b with the Neumann Laplacian.
class NeumannSolver {
 public:
  explicit NeumannSolver(const Domain& d);
  GridField solve(const GridField& b, double tau) const;
  /// Eigenvalues of -Δ_h in the tensor cosine basis (flattened).
  const Eigen::VectorXd& eigenvalues() const { return eig_; }
  const Domain& domain() const { return domain_; }

 private:
  Domain domain_;
  std::array<Eigen::MatrixXd, 3> dct_;  // orthonormal DCT-II, rows = modes
  Eigen::VectorXd eig_;
};

struct TransportOptions {
  double c_cfl = 0.5;
};

/// Largest dt with dt · max_i Σ_{outflow faces of i} |u_f|/h_f ≤ c_cfl.
double admissible_dt(const FaceField& uf, const Domain& d, double c_cfl);

DensityField advance_density(const DensityField& rho, const FaceField& uf, double eps, double dt,
                             const Domain& d, const NeumannSolver* solver = nullptr,
                             TransportOptions opts = {});
DensityField advance_density(const DensityField& rho, const CoeffVec& u, double eps, double dt,
                             const Basis& basis, TransportOptions opts = {});

/// ρ^{n+1} = advance(ρ^n, u_traj[n]); returns u_traj.size() + 1 fields.
std::vector<DensityField> solve_S(const std::vector<CoeffVec>& u_traj, const DensityField& rho0,
                                  double eps, double dt, const Basis& basis,
                                  TransportOptions opts = {});

struct DensityBounds {
  double lower;
  double upper;
};

/// (min ρ0)·e^{-I}, (max ρ0)·e^{+I} with I the time integral of ‖div u‖_∞.
DensityBounds density_bounds(const DensityField& rho0, double divu_integral);
/// I accumulated by the left rectangle rule over the first `steps` entries.
DensityBounds density_bounds(const DensityField& rho0, const std::vector<CoeffVec>& u_traj,
                             double dt, std::size_t steps, const Basis& basis);

double sup_div(const CoeffVec& u, const Basis& basis);
/// ‖u‖_∞ + ‖∇u‖_∞ on the grid (pointwise Euclidean/Frobenius norms).
double w1inf_norm(const CoeffVec& u, const Basis& basis);

/// Discrete H¹ norm of a cell field (face differences for the gradient).
double density_h1_norm(const GridField& rho, const Domain& d);
/// Spectral H¹ norm of a Galerkin field.
double coeff_h1_norm(const CoeffVec& u, const Basis& basis);

struct LipschitzProbe {
  double ratio;
  double density_sup;
  double velocity_sup;
};

/// sup_t‖S[u1]-S[u2]‖_{H¹} / sup_t‖u1-u2‖_{H¹}; both trajectories must satisfy
/// ‖u‖_∞ + ‖∇u‖_∞ ≤ K at all times.
LipschitzProbe lipschitz_probe(const std::vector<CoeffVec>& u1_traj,
                               const std::vector<CoeffVec>& u2_traj, const DensityField& rho0,
                               double eps, double dt, double K, const Basis& basis);

}  // namespace smhd
