#pragma once

// Galerkin space X_n of Dirichlet-Laplacian eigenfunctions on an axis-aligned
// box, the midpoint quadrature grid, and spectral differentiation.
//
// Coefficient layout: a scalar field has n coefficients ordered by
// nondecreasing eigenvalue (ties broken lexicographically in the mode
// multi-index). A vector field (CoeffVec) stores its components back to
// back: [component 0 | component 1 | ...], each of length n.

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "smhd/spectral.hpp"

namespace smhd {

using GridField = Eigen::VectorXd;
using GridVector = std::vector<GridField>;
using CoeffVec = Eigen::VectorXd;

/// Retained modes per axis may not exceed grid_pts / kOversampling.
inline constexpr int kOversampling = 2;

struct Domain {
  int dim = 2;
  std::array<double, 3> lengths{3.14159265358979323846, 3.14159265358979323846,
                                3.14159265358979323846};
  std::array<int, 3> grid_pts{32, 32, 32};

  /// Throws ConfigError naming the violated constraint.
  void validate() const;

  double cell_width(int axis) const { return lengths[axis] / grid_pts[axis]; }
  double cell_volume() const;
  double volume() const;
  int num_cells() const;
  GridSpec grid() const;
  /// Coordinate of cell center i along `axis`.
  double center(int axis, int i) const { return (i + 0.5) * cell_width(axis); }
};

class Basis {
 public:
  Basis(const Domain& domain, int n_per_axis);

  const Domain& domain() const { return domain_; }
  int dim() const { return domain_.dim; }
  int n_per_axis() const { return n_per_axis_; }
  /// Scalar mode count n_per_axis^dim.
  int n() const { return n_; }
  int vector_size() const { return n_ * domain_.dim; }
  int num_cells() const { return domain_.num_cells(); }
  double cell_volume() const { return domain_.cell_volume(); }

  /// Multi-indices (1-based) in coefficient order.
  const std::vector<std::array<int, 3>>& modes() const { return modes_; }
  const Eigen::VectorXd& eigvals() const { return eigvals_; }
  /// Coefficient index of a multi-index, or -1 if not retained.
  int mode_index(std::array<int, 3> k) const;

  const Eigen::MatrixXd& table(int axis, int deriv, Points pts) const {
    return tables_[axis][deriv][pts == Points::Centers ? 0 : 1];
  }

  /// Samples ∂^deriv of the scalar series `c` at cell centers
  /// (face_axis < 0) or at the faces normal to `face_axis`.
  void eval(std::span<const double> c, std::array<int, 3> deriv, int face_axis,
            GridField& out) const;
  GridField eval(const Eigen::Ref<const Eigen::VectorXd>& c, std::array<int, 3> deriv = {0, 0, 0},
                 int face_axis = -1) const;

  /// c_k += w Σ_x field(x) ∂^deriv φ_k(x) with w the cell volume.
  void project_add(const GridField& field, std::array<int, 3> deriv, int face_axis,
                   std::span<double> c) const;

  /// Point count of the sample set used by eval/project_add.
  int sample_count(int face_axis) const;

  /// The scalar mode c as a SpectralScalar (for symbolic differentiation).
  SpectralScalar as_spectral(const Eigen::Ref<const Eigen::VectorXd>& c) const;

 private:
  Domain domain_;
  int n_per_axis_;
  int n_;
  std::vector<std::array<int, 3>> modes_;
  Eigen::VectorXd eigvals_;
  std::vector<int> to_tensor_;  // coefficient index -> tensor index
  std::vector<int> from_tensor_;
  // [axis][deriv 0..3][centers, faces]
  std::array<std::array<std::array<Eigen::MatrixXd, 2>, 4>, 3> tables_;
};

Basis build_basis(const Domain& domain, int n_per_axis);

/// Componentwise quadrature projection onto X_n.
CoeffVec project(const GridVector& field, const Basis& basis);
Eigen::VectorXd project_scalar(const GridField& field, const Basis& basis);

GridVector reconstruct(const CoeffVec& coeffs, const Basis& basis);
GridField reconstruct_scalar(const Eigen::Ref<const Eigen::VectorXd>& c, const Basis& basis);

struct Derivatives {
  /// grad[c][b] = ∂_b u_c at cell centers.
  std::vector<GridVector> grad;
  GridField div;
  /// One component in 2-D (out of plane), three in 3-D.
  GridVector curl;
};

Derivatives spectral_derivatives(const CoeffVec& coeffs, const Basis& basis);

/// Componentwise view of a vector coefficient array.
inline Eigen::Ref<const Eigen::VectorXd> component(const CoeffVec& c, const Basis& b, int comp) {
  return c.segment(static_cast<Eigen::Index>(comp) * b.n(), b.n());
}
inline Eigen::Ref<Eigen::VectorXd> component(CoeffVec& c, const Basis& b, int comp) {
  return c.segment(static_cast<Eigen::Index>(comp) * b.n(), b.n());
}

/// Quadrature L² inner product of grid fields.
double grid_dot(const GridField& a, const GridField& b, const Domain& d);
double grid_norm(const GridField& a, const Domain& d);

}  // namespace smhd
