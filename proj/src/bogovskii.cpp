#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "smhd/diagnostics.hpp"

namespace smhd {

namespace {

std::array<Points, 3> face_points(int axis) {
  std::array<Points, 3> p{Points::Centers, Points::Centers, Points::Centers};
  p[axis] = Points::Faces;
  return p;
}

// Boundary slice indices (side 0 and side 1) of a face-grid sample array.
std::vector<long> boundary_indices(const Domain& d, int axis, int side) {
  std::array<int, 3> ext{1, 1, 1};
  for (int a = 0; a < d.dim; ++a) ext[a] = d.grid_pts[a] + (a == axis ? 1 : 0);
  std::vector<long> idx;
  long total = 1;
  for (int a = 0; a < d.dim; ++a) total *= ext[a];
  const int target = side == 0 ? 0 : d.grid_pts[axis];
  for (long t = 0; t < total; ++t) {
    long rem = t;
    int ia = 0;
    for (int a = d.dim - 1; a >= 0; --a) {
      if (a == axis) ia = static_cast<int>(rem % ext[a]);
      rem /= ext[a];
    }
    if (ia == target) idx.push_back(t);
  }
  return idx;
}

double frequency2(const std::array<Parity, 3>& par, const std::array<int, 3>& k,
                  const Domain& d) {
  double s = 0.0;
  for (int a = 0; a < d.dim; ++a) {
    const int f = par[a] == Parity::Sine ? k[a] + 1 : k[a];
    const double w = f * std::numbers::pi / d.lengths[a];
    s += w * w;
  }
  return s;
}

// Samples of `v` on the boundary faces: component c on faces normal to a for
// every a, restricted to tangential components unless `all`.
Eigen::VectorXd boundary_samples(const SpectralVector& v, const Domain& d, bool all) {
  std::vector<double> out;
  const GridSpec g = d.grid();
  for (int a = 0; a < d.dim; ++a) {
    const auto i0 = boundary_indices(d, a, 0);
    const auto i1 = boundary_indices(d, a, 1);
    for (int c = 0; c < d.dim; ++c) {
      if (c == a && !all) continue;
      const Eigen::VectorXd s = evaluate(v[c], g, face_points(a));
      for (long i : i0) out.push_back(s[i]);
      for (long i : i1) out.push_back(s[i]);
    }
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

double h1_norm(const SpectralVector& v, const Domain& d) {
  const GridSpec g = d.grid();
  double s = 0.0;
  for (const auto& comp : v) {
    const GridField x = evaluate(comp, g);
    s += grid_dot(x, x, d);
    for (int b = 0; b < d.dim; ++b) {
      const GridField y = evaluate(comp.derivative(b), g);
      s += grid_dot(y, y, d);
    }
  }
  return std::sqrt(s);
}

}  // namespace

BogovskiiSolver::BogovskiiSolver(const Domain& d, int corrector_modes, double penalty)
    : domain_(d) {
  d.validate();
  int gmin = d.grid_pts[0];
  for (int a = 1; a < d.dim; ++a) gmin = std::min(gmin, d.grid_pts[a]);
  M_ = corrector_modes > 0 ? corrector_modes : (d.dim == 2 ? gmin : std::min(6, gmin / 2));
  if (d.dim == 2) {
    pots_.push_back({{Parity::Sine, Parity::Sine, Parity::Sine}, {M_, M_, 1}});
  } else {
    for (int c = 0; c < 3; ++c) {
      Potential p{{Parity::Sine, Parity::Sine, Parity::Sine}, {M_, M_, M_}};
      p.parity[c] = Parity::Cosine;
      pots_.push_back(p);
    }
  }
  int total = 0;
  for (const auto& p : pots_) {
    offsets_.push_back(total);
    int n = 1;
    for (int a = 0; a < d.dim; ++a) n *= p.modes[a];
    total += n;
  }
  offsets_.push_back(total);

  weight2_.resize(total);
  for (std::size_t j = 0; j < pots_.size(); ++j) {
    const auto& p = pots_[j];
    for (int t = 0; t < offsets_[j + 1] - offsets_[j]; ++t) {
      std::array<int, 3> k{0, 0, 0};
      int rem = t;
      for (int a = d.dim - 1; a >= 0; --a) {
        k[a] = rem % p.modes[a];
        rem /= p.modes[a];
      }
      const double w = 1.0 + frequency2(p.parity, k, d);
      weight2_[offsets_[j] + t] = w * w;
    }
  }

  Eigen::VectorXd e = Eigen::VectorXd::Zero(total);
  e[0] = 1.0;
  const Eigen::Index rows = boundary_samples(corrector(e), d, false).size();
  A_.resize(rows, total);
  for (int j = 0; j < total; ++j) {
    e.setZero();
    e[j] = 1.0;
    A_.col(j) = boundary_samples(corrector(e), d, false);
  }

  dual_ = rows <= total;
  if (dual_) {
    const Eigen::MatrixXd AW = A_ * weight2_.cwiseInverse().asDiagonal();
    Eigen::MatrixXd G = AW * A_.transpose();
    const double alpha = penalty * G.trace() / static_cast<double>(rows);
    G.diagonal().array() += alpha;
    fact_.compute(G);
  } else {
    Eigen::MatrixXd G = A_.transpose() * A_;
    const double alpha = penalty * G.trace() / weight2_.sum();
    G.diagonal() += alpha * weight2_;
    fact_.compute(G);
  }
  if (fact_.info() != Eigen::Success)
    throw std::runtime_error("BogovskiiSolver: corrector system factorization failed");
}

SpectralVector BogovskiiSolver::corrector(const Eigen::VectorXd& c) const {
  const int d = domain_.dim;
  std::vector<SpectralScalar> pot;
  for (std::size_t j = 0; j < pots_.size(); ++j) {
    SpectralTerm t;
    t.parity = pots_[j].parity;
    t.modes = pots_[j].modes;
    t.coeffs = c.segment(offsets_[j], offsets_[j + 1] - offsets_[j]);
    pot.push_back(SpectralScalar{{t}});
  }
  if (d == 2) return rotated_grad(pot[0]);
  return spectral_curl(pot);
}

BogovskiiResult BogovskiiSolver::solve(const GridField& f) const {
  const Domain& d = domain_;
  if (f.size() != d.num_cells()) throw std::invalid_argument("bogovskii_solve: size mismatch");
  const double w = d.cell_volume();
  const double integral = w * f.sum();
  const double l1 = w * f.cwiseAbs().sum();
  if (std::abs(integral) > 1e-10 * l1)
    throw std::invalid_argument("bogovskii_solve: f must have zero mean");

  // Cosine coefficients of f: the sampled cosine family is orthogonal with norm² 1/h per axis.
  std::array<Eigen::MatrixXd, 3> tab;
  std::array<const Eigen::MatrixXd*, 3> ptr{};
  for (int a = 0; a < d.dim; ++a) {
    tab[a] = axis_table(Parity::Cosine, d.grid_pts[a], d.lengths[a], d.grid_pts[a],
                        Points::Centers, 0);
    ptr[a] = &tab[a];
  }
  Eigen::VectorXd chat = w * tensor_apply(d.dim, std::span(ptr.data(), d.dim), true, f);
  for (long t = 0; t < chat.size(); ++t) {
    long rem = t;
    double lam = 0.0;
    for (int a = d.dim - 1; a >= 0; --a) {
      const int m = static_cast<int>(rem % d.grid_pts[a]);
      rem /= d.grid_pts[a];
      const double om = m * std::numbers::pi / d.lengths[a];
      lam += om * om;
    }
    chat[t] = lam > 0.0 ? -chat[t] / lam : 0.0;
  }
  SpectralTerm pt;
  pt.parity = {Parity::Cosine, Parity::Cosine, Parity::Cosine};
  for (int a = 0; a < d.dim; ++a) pt.modes[a] = d.grid_pts[a];
  pt.coeffs = chat;
  const SpectralScalar p{{pt}};
  const SpectralVector v0 = spectral_grad(p, d.dim);

  const Eigen::VectorXd r0 = boundary_samples(v0, d, false);
  Eigen::VectorXd c;
  if (dual_)
    c = -(weight2_.cwiseInverse().asDiagonal() * (A_.transpose() * fact_.solve(r0)));
  else
    c = -fact_.solve(A_.transpose() * r0);
  const SpectralVector w1 = corrector(c);

  BogovskiiResult res;
  for (int a = 0; a < d.dim; ++a) res.field.push_back(v0[a] + w1[a]);
  const GridSpec g = d.grid();
  for (const auto& comp : res.field) res.values.push_back(evaluate(comp, g));
  res.f_norm = grid_norm(f, d);
  const GridField div = evaluate(spectral_div(res.field), g);
  res.div_residual = res.f_norm > 0.0 ? grid_norm(div - f, d) / res.f_norm : grid_norm(div, d);
  const Eigen::VectorXd tr = boundary_samples(res.field, d, true);
  const double base = boundary_samples(v0, d, true).norm();
  res.trace_residual = base > 0.0 ? tr.norm() / base : tr.norm();
  res.h1_norm = h1_norm(res.field, d);
  return res;
}

BogovskiiResult bogovskii_solve(const GridField& f, const Domain& d) {
  return BogovskiiSolver(d).solve(f);
}

}  // namespace smhd
