#include "smhd/spectral.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace smhd {

namespace {

// sin(π j / n) with exact zeros at multiples of n.
double sin_pi_frac(long j, long n) {
  const long period = 2 * n;
  j %= period;
  if (j < 0) j += period;
  if (j == 0 || j == n) return 0.0;
  return std::sin(std::numbers::pi * static_cast<double>(j) / static_cast<double>(n));
}

double cos_pi_frac(long j, long n) {
  // cos(πj/n) = sin(π(j + n/2)/n); shift in doubled units to stay integral.
  return sin_pi_frac(2 * j + n, 2 * n);
}

}  // namespace

Eigen::MatrixXd axis_table(Parity parity, int modes, double length, int cells,
                           Points points, int deriv) {
  if (modes < 1 || cells < 1 || length <= 0.0 || deriv < 0)
    throw std::invalid_argument("axis_table: invalid arguments");
  const int rows = point_count(cells, points);
  Eigen::MatrixXd t(rows, modes);
  for (int c = 0; c < modes; ++c) {
    const int k = parity == Parity::Sine ? c + 1 : c;
    const double omega = k * std::numbers::pi / length;
    double norm = std::sqrt(2.0 / length);
    if (parity == Parity::Cosine && k == 0) norm = std::sqrt(1.0 / length);
    const double amp = norm * std::pow(omega, deriv);
    for (int i = 0; i < rows; ++i) {
      // Phase kπx/L in units of π/(2·cells).
      const long j = points == Points::Centers ? static_cast<long>(k) * (2 * i + 1)
                                               : static_cast<long>(k) * (2 * i);
      const long n = 2L * cells;
      const double s = sin_pi_frac(j, n);
      const double co = cos_pi_frac(j, n);
      double v = 0.0;
      if (parity == Parity::Sine) {
        switch (deriv % 4) {
          case 0: v = s; break;
          case 1: v = co; break;
          case 2: v = -s; break;
          default: v = -co; break;
        }
      } else {
        switch (deriv % 4) {
          case 0: v = co; break;
          case 1: v = -s; break;
          case 2: v = -co; break;
          default: v = s; break;
        }
      }
      t(i, c) = (deriv > 0 && k == 0) ? 0.0 : amp * v;
    }
  }
  return t;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// dst (r0 × r1) = op(A) · src (s0 × s1) · op(B)ᵀ with row-major maps.
void apply2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool transpose,
            const double* src, long s0, long s1, double* dst) {
  Eigen::Map<const RowMat> x(src, s0, s1);
  if (transpose) {
    Eigen::Map<RowMat> y(dst, a.cols(), b.cols());
    y.noalias() = a.transpose() * x * b;
  } else {
    Eigen::Map<RowMat> y(dst, a.rows(), b.rows());
    y.noalias() = a * x * b.transpose();
  }
}

}  // namespace

void tensor_apply(int dim, std::span<const Eigen::MatrixXd* const> mats, bool transpose,
                  std::span<const double> in, std::vector<double>& out,
                  std::vector<double>& scratch) {
  std::array<long, 3> shape{1, 1, 1}, res{1, 1, 1};
  std::size_t expect = 1, total = 1;
  for (int a = 0; a < dim; ++a) {
    shape[a] = transpose ? mats[a]->rows() : mats[a]->cols();
    res[a] = transpose ? mats[a]->cols() : mats[a]->rows();
    expect *= static_cast<std::size_t>(shape[a]);
    total *= static_cast<std::size_t>(res[a]);
  }
  if (in.size() != expect) throw std::invalid_argument("tensor_apply: input size mismatch");
  if (dim == 0) {
    out.assign(in.begin(), in.end());
    return;
  }
  out.resize(total);
  if (dim == 1) {
    Eigen::Map<const Eigen::VectorXd> x(in.data(), shape[0]);
    Eigen::Map<Eigen::VectorXd> y(out.data(), res[0]);
    if (transpose)
      y.noalias() = mats[0]->transpose() * x;
    else
      y.noalias() = *mats[0] * x;
    return;
  }
  if (dim == 2) {
    apply2(*mats[0], *mats[1], transpose, in.data(), shape[0], shape[1], out.data());
    return;
  }
  // Axis 0 as one product over the flattened trailing axes, then 2-D slabs.
  scratch.resize(static_cast<std::size_t>(res[0] * shape[1] * shape[2]));
  {
    Eigen::Map<const RowMat> x(in.data(), shape[0], shape[1] * shape[2]);
    Eigen::Map<RowMat> y(scratch.data(), res[0], shape[1] * shape[2]);
    if (transpose)
      y.noalias() = mats[0]->transpose() * x;
    else
      y.noalias() = *mats[0] * x;
  }
  const long slab_in = shape[1] * shape[2];
  const long slab_out = res[1] * res[2];
  for (long i = 0; i < res[0]; ++i)
    apply2(*mats[1], *mats[2], transpose, scratch.data() + i * slab_in, shape[1], shape[2],
           out.data() + i * slab_out);
}

Eigen::VectorXd tensor_apply(int dim, std::span<const Eigen::MatrixXd* const> mats,
                             bool transpose, const Eigen::VectorXd& in) {
  std::vector<double> out, scratch;
  tensor_apply(dim, mats, transpose, std::span<const double>(in.data(), in.size()), out,
               scratch);
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

SpectralScalar SpectralScalar::derivative(int axis) const {
  SpectralScalar r = *this;
  for (auto& t : r.terms) ++t.deriv[axis];
  return r;
}

SpectralScalar SpectralScalar::scaled(double s) const {
  SpectralScalar r = *this;
  for (auto& t : r.terms) t.scale *= s;
  return r;
}

SpectralScalar SpectralScalar::operator+(const SpectralScalar& o) const {
  SpectralScalar r = *this;
  r.terms.insert(r.terms.end(), o.terms.begin(), o.terms.end());
  return r;
}

SpectralScalar SpectralScalar::operator-(const SpectralScalar& o) const {
  return *this + o.scaled(-1.0);
}

Eigen::VectorXd evaluate(const SpectralScalar& f, const GridSpec& grid) {
  return evaluate(f, grid, {Points::Centers, Points::Centers, Points::Centers});
}

Eigen::VectorXd evaluate(const SpectralScalar& f, const GridSpec& grid,
                         std::array<Points, 3> points) {
  std::size_t n = 1;
  for (int a = 0; a < grid.dim; ++a)
    n *= static_cast<std::size_t>(point_count(grid.cells[a], points[a]));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (const auto& t : f.terms) {
    std::array<Eigen::MatrixXd, 3> tabs;
    std::array<const Eigen::MatrixXd*, 3> ptr{};
    for (int a = 0; a < grid.dim; ++a) {
      tabs[a] = axis_table(t.parity[a], t.modes[a], grid.lengths[a], grid.cells[a],
                           points[a], t.deriv[a]);
      ptr[a] = &tabs[a];
    }
    out += t.scale * tensor_apply(grid.dim, std::span(ptr.data(), grid.dim), false, t.coeffs);
  }
  return out;
}

SpectralScalar spectral_div(const SpectralVector& v) {
  SpectralScalar r;
  for (std::size_t a = 0; a < v.size(); ++a) r = r + v[a].derivative(static_cast<int>(a));
  return r;
}

SpectralVector spectral_curl(const SpectralVector& v) {
  if (v.size() == 2) return {v[1].derivative(0) - v[0].derivative(1)};
  if (v.size() != 3) throw std::invalid_argument("spectral_curl: need 2 or 3 components");
  return {v[2].derivative(1) - v[1].derivative(2), v[0].derivative(2) - v[2].derivative(0),
          v[1].derivative(0) - v[0].derivative(1)};
}

SpectralVector spectral_grad(const SpectralScalar& f, int dim) {
  SpectralVector g;
  for (int a = 0; a < dim; ++a) g.push_back(f.derivative(a));
  return g;
}

SpectralVector rotated_grad(const SpectralScalar& f) {
  return {f.derivative(1), f.derivative(0).scaled(-1.0)};
}

}  // namespace smhd
