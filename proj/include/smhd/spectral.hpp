#pragma once

// Separable trigonometric transforms on tensor-product grids.
//
// A scalar field is a tensor-product series ∏_a T_a(x_a) where each axis
// carries either the Dirichlet sine family sin(kπx/L), k = 1..n, or the
// Neumann cosine family cos(mπx/L), m = 0..n-1, both normalized in L²(0,L).
// Fields are sampled at cell centers x_i = (i+½)h or at cell faces
// x_i = i·h (i = 0..G). Grid arrays are flattened with axis 0 slowest.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace smhd {

enum class Parity { Sine, Cosine };
enum class Points { Centers, Faces };

/// One-dimensional sampling matrix of shape (points × modes). Entry (i, k)
/// is the `deriv`-th derivative of the k-th normalized mode at point i.
Eigen::MatrixXd axis_table(Parity parity, int modes, double length, int cells,
                           Points points, int deriv);

/// Row count of the sample set for `cells` cells.
inline int point_count(int cells, Points points) {
  return points == Points::Centers ? cells : cells + 1;
}

struct TensorShape {
  int dim = 2;
  std::array<int, 3> extent{1, 1, 1};

  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(extent[a]);
    return s;
  }
};

/// Applies `mats[a]` along every axis a. With transpose=false the input has
/// extents mats[a].cols() and the output mats[a].rows(); transpose=true
/// applies the adjoint map.
void tensor_apply(int dim, std::span<const Eigen::MatrixXd* const> mats,
                  bool transpose, std::span<const double> in,
                  std::vector<double>& out, std::vector<double>& scratch);

/// Convenience wrapper returning a fresh vector.
Eigen::VectorXd tensor_apply(int dim, std::span<const Eigen::MatrixXd* const> mats,
                             bool transpose, const Eigen::VectorXd& in);

/// A derivative of a separable series with fixed per-axis families.
struct SpectralTerm {
  std::array<Parity, 3> parity{Parity::Sine, Parity::Sine, Parity::Sine};
  std::array<int, 3> modes{1, 1, 1};
  std::array<int, 3> deriv{0, 0, 0};
  double scale = 1.0;
  Eigen::VectorXd coeffs;
};

/// Sum of separable terms. Differentiation only shifts derivative orders,
/// so identities such as div(curl A) = 0 hold to rounding.
struct SpectralScalar {
  std::vector<SpectralTerm> terms;

  SpectralScalar derivative(int axis) const;
  SpectralScalar scaled(double s) const;
  SpectralScalar operator+(const SpectralScalar& o) const;
  SpectralScalar operator-(const SpectralScalar& o) const;
};

using SpectralVector = std::vector<SpectralScalar>;

struct GridSpec {
  int dim = 2;
  std::array<double, 3> lengths{};
  std::array<int, 3> cells{};
};

/// Samples at cell centers.
Eigen::VectorXd evaluate(const SpectralScalar& f, const GridSpec& grid);
/// Samples on the tensor grid with per-axis point sets.
Eigen::VectorXd evaluate(const SpectralScalar& f, const GridSpec& grid,
                         std::array<Points, 3> points);

SpectralScalar spectral_div(const SpectralVector& v);
/// Three components in 3-D; a single out-of-plane component in 2-D.
SpectralVector spectral_curl(const SpectralVector& v);
SpectralVector spectral_grad(const SpectralScalar& f, int dim);
/// In-plane rotated gradient (∂_y f, -∂_x f), the 2-D curl of a stream function.
SpectralVector rotated_grad(const SpectralScalar& f);

}  // namespace smhd
