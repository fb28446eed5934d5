#include "smhd/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "smhd/error.hpp"

namespace smhd {

namespace {

thread_local std::vector<double> tl_in, tl_out, tl_scratch;

}  // namespace

void Domain::validate() const {
  if (dim != 2 && dim != 3) throw ConfigError("dimension must be 2 or 3");
  for (int a = 0; a < dim; ++a) {
    if (!(lengths[a] > 0.0)) throw ConfigError("domain lengths must be positive");
    if (grid_pts[a] < 8 || grid_pts[a] % 2 != 0)
      throw ConfigError("grid points per axis must be even and at least 8");
  }
}

double Domain::cell_volume() const {
  double w = 1.0;
  for (int a = 0; a < dim; ++a) w *= cell_width(a);
  return w;
}

double Domain::volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= lengths[a];
  return v;
}

int Domain::num_cells() const {
  int c = 1;
  for (int a = 0; a < dim; ++a) c *= grid_pts[a];
  return c;
}

GridSpec Domain::grid() const {
  GridSpec g;
  g.dim = dim;
  g.lengths = lengths;
  g.cells = grid_pts;
  return g;
}

Basis::Basis(const Domain& domain, int n_per_axis) : domain_(domain), n_per_axis_(n_per_axis) {
  domain_.validate();
  if (n_per_axis < 1) throw ConfigError("n_per_axis must be at least 1");
  for (int a = 0; a < domain_.dim; ++a) {
    if (n_per_axis * kOversampling > domain_.grid_pts[a])
      throw ConfigError("grid too coarse for requested modes: need grid_pts >= " +
                        std::to_string(kOversampling) + " * n_per_axis (aliasing)");
  }
  const int d = domain_.dim;
  n_ = 1;
  for (int a = 0; a < d; ++a) n_ *= n_per_axis;

  std::vector<std::array<int, 3>> tensor_modes(n_);
  std::vector<double> lam(n_);
  for (int t = 0; t < n_; ++t) {
    std::array<int, 3> k{1, 1, 1};
    int rem = t;
    for (int a = d - 1; a >= 0; --a) {
      k[a] = rem % n_per_axis + 1;
      rem /= n_per_axis;
    }
    tensor_modes[t] = k;
    double l = 0.0;
    for (int a = 0; a < d; ++a) {
      const double w = k[a] * std::numbers::pi / domain_.lengths[a];
      l += w * w;
    }
    lam[t] = l;
  }
  to_tensor_.resize(n_);
  std::iota(to_tensor_.begin(), to_tensor_.end(), 0);
  std::stable_sort(to_tensor_.begin(), to_tensor_.end(),
                   [&](int x, int y) { return lam[x] < lam[y]; });
  from_tensor_.resize(n_);
  modes_.resize(n_);
  eigvals_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    from_tensor_[to_tensor_[i]] = i;
    modes_[i] = tensor_modes[to_tensor_[i]];
    eigvals_[i] = lam[to_tensor_[i]];
  }

  for (int a = 0; a < d; ++a)
    for (int deriv = 0; deriv < 4; ++deriv)
      for (int p = 0; p < 2; ++p)
        tables_[a][deriv][p] =
            axis_table(Parity::Sine, n_per_axis, domain_.lengths[a], domain_.grid_pts[a],
                       p == 0 ? Points::Centers : Points::Faces, deriv);
}

int Basis::mode_index(std::array<int, 3> k) const {
  int t = 0;
  for (int a = 0; a < dim(); ++a) {
    if (k[a] < 1 || k[a] > n_per_axis_) return -1;
    t = t * n_per_axis_ + (k[a] - 1);
  }
  return from_tensor_[t];
}

int Basis::sample_count(int face_axis) const {
  int c = 1;
  for (int a = 0; a < dim(); ++a)
    c *= point_count(domain_.grid_pts[a], a == face_axis ? Points::Faces : Points::Centers);
  return c;
}

void Basis::eval(std::span<const double> c, std::array<int, 3> deriv, int face_axis,
                 GridField& out) const {
  if (static_cast<int>(c.size()) != n_) throw std::invalid_argument("Basis::eval: size mismatch");
  tl_in.resize(n_);
  for (int i = 0; i < n_; ++i) tl_in[to_tensor_[i]] = c[i];
  std::array<const Eigen::MatrixXd*, 3> mats{};
  for (int a = 0; a < dim(); ++a)
    mats[a] = &table(a, deriv[a], a == face_axis ? Points::Faces : Points::Centers);
  tensor_apply(dim(), std::span(mats.data(), dim()), false, tl_in, tl_out, tl_scratch);
  out = Eigen::Map<const Eigen::VectorXd>(tl_out.data(), static_cast<Eigen::Index>(tl_out.size()));
}

GridField Basis::eval(const Eigen::Ref<const Eigen::VectorXd>& c, std::array<int, 3> deriv,
                      int face_axis) const {
  GridField out;
  eval(std::span<const double>(c.data(), c.size()), deriv, face_axis, out);
  return out;
}

void Basis::project_add(const GridField& field, std::array<int, 3> deriv, int face_axis,
                        std::span<double> c) const {
  if (field.size() != sample_count(face_axis))
    throw std::invalid_argument("Basis::project_add: field does not match sample grid");
  std::array<const Eigen::MatrixXd*, 3> mats{};
  for (int a = 0; a < dim(); ++a)
    mats[a] = &table(a, deriv[a], a == face_axis ? Points::Faces : Points::Centers);
  tensor_apply(dim(), std::span(mats.data(), dim()), true,
               std::span<const double>(field.data(), field.size()), tl_out, tl_scratch);
  const double w = cell_volume();
  for (int i = 0; i < n_; ++i) c[i] += w * tl_out[to_tensor_[i]];
}

SpectralScalar Basis::as_spectral(const Eigen::Ref<const Eigen::VectorXd>& c) const {
  SpectralTerm t;
  for (int a = 0; a < dim(); ++a) t.modes[a] = n_per_axis_;
  t.coeffs.resize(n_);
  for (int i = 0; i < n_; ++i) t.coeffs[to_tensor_[i]] = c[i];
  SpectralScalar s;
  s.terms.push_back(std::move(t));
  return s;
}

Basis build_basis(const Domain& domain, int n_per_axis) { return Basis(domain, n_per_axis); }

Eigen::VectorXd project_scalar(const GridField& field, const Basis& basis) {
  if (field.size() != basis.num_cells())
    throw std::invalid_argument("project: field does not match quadrature grid");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(basis.n());
  basis.project_add(field, {0, 0, 0}, -1, std::span<double>(c.data(), c.size()));
  return c;
}

CoeffVec project(const GridVector& field, const Basis& basis) {
  if (static_cast<int>(field.size()) != basis.dim())
    throw std::invalid_argument("project: component count must equal dimension");
  CoeffVec c(basis.vector_size());
  for (int comp = 0; comp < basis.dim(); ++comp)
    component(c, basis, comp) = project_scalar(field[comp], basis);
  return c;
}

GridField reconstruct_scalar(const Eigen::Ref<const Eigen::VectorXd>& c, const Basis& basis) {
  if (c.size() != basis.n()) throw std::invalid_argument("reconstruct: coefficient size mismatch");
  return basis.eval(c);
}

GridVector reconstruct(const CoeffVec& coeffs, const Basis& basis) {
  if (coeffs.size() != basis.vector_size())
    throw std::invalid_argument("reconstruct: coefficient size mismatch");
  GridVector out(basis.dim());
  for (int comp = 0; comp < basis.dim(); ++comp)
    out[comp] = basis.eval(component(coeffs, basis, comp));
  return out;
}

Derivatives spectral_derivatives(const CoeffVec& coeffs, const Basis& basis) {
  if (coeffs.size() != basis.vector_size())
    throw std::invalid_argument("spectral_derivatives: coefficient size mismatch");
  const int d = basis.dim();
  Derivatives r;
  r.grad.assign(d, GridVector(d));
  r.div = GridField::Zero(basis.num_cells());
  for (int c = 0; c < d; ++c) {
    for (int b = 0; b < d; ++b) {
      std::array<int, 3> der{0, 0, 0};
      der[b] = 1;
      r.grad[c][b] = basis.eval(component(coeffs, basis, c), der);
    }
    r.div += r.grad[c][c];
  }
  if (d == 2) {
    r.curl = {r.grad[1][0] - r.grad[0][1]};
  } else {
    r.curl = {r.grad[2][1] - r.grad[1][2], r.grad[0][2] - r.grad[2][0],
              r.grad[1][0] - r.grad[0][1]};
  }
  return r;
}

double grid_dot(const GridField& a, const GridField& b, const Domain& d) {
  return d.cell_volume() * a.dot(b);
}

double grid_norm(const GridField& a, const Domain& d) { return std::sqrt(grid_dot(a, a, d)); }

}  // namespace smhd
