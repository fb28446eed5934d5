#include "smhd/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "smhd/error.hpp"

namespace smhd {

namespace {

// Splits a grid (cell or face) along `axis` into outer × len × inner blocks.
struct AxisSplit {
  long outer = 1;
  long inner = 1;
};

AxisSplit split(const Domain& d, int axis) {
  AxisSplit s;
  for (int b = 0; b < axis; ++b) s.outer *= d.grid_pts[b];
  for (int b = axis + 1; b < d.dim; ++b) s.inner *= d.grid_pts[b];
  return s;
}

long face_count(const Domain& d, int axis) {
  long c = 1;
  for (int b = 0; b < d.dim; ++b) c *= d.grid_pts[b] + (b == axis ? 1 : 0);
  return c;
}

void check_cells(const GridField& rho, const Domain& d, const char* who) {
  if (rho.size() != d.num_cells())
    throw std::invalid_argument(std::string(who) + ": field does not match the cell grid");
}

void check_faces(const FaceField& f, const Domain& d, const char* who) {
  if (static_cast<int>(f.size()) != d.dim)
    throw std::invalid_argument(std::string(who) + ": need one face array per axis");
  for (int a = 0; a < d.dim; ++a)
    if (f[a].size() != face_count(d, a))
      throw std::invalid_argument(std::string(who) + ": face array size mismatch");
}

Eigen::MatrixXd dct_matrix(int g) {
  Eigen::MatrixXd c(g, g);
  for (int m = 0; m < g; ++m) {
    const double s = std::sqrt((m == 0 ? 1.0 : 2.0) / g);
    for (int i = 0; i < g; ++i) c(m, i) = s * std::cos(std::numbers::pi * m * (i + 0.5) / g);
  }
  return c;
}

}  // namespace

DensityField DensityField::from_values(GridField v, const Domain& d) {
  DensityField r;
  r.mass = d.cell_volume() * v.sum();
  r.values = std::move(v);
  return r;
}

FaceField face_velocities(const CoeffVec& u, const Basis& basis) {
  if (u.size() != basis.vector_size())
    throw std::invalid_argument("face_velocities: coefficient size mismatch");
  FaceField f(basis.dim());
  for (int a = 0; a < basis.dim(); ++a) {
    const auto c = component(u, basis, a);
    basis.eval(std::span<const double>(c.data(), c.size()), {0, 0, 0}, a, f[a]);
  }
  return f;
}

FaceField upwind_density(const GridField& rho, const FaceField& uf, const Domain& d) {
  check_cells(rho, d, "upwind_density");
  check_faces(uf, d, "upwind_density");
  FaceField up(d.dim);
  for (int a = 0; a < d.dim; ++a) {
    const AxisSplit s = split(d, a);
    const long g = d.grid_pts[a];
    up[a] = GridField::Zero(face_count(d, a));
    for (long o = 0; o < s.outer; ++o)
      for (long j = 1; j < g; ++j)
        for (long in = 0; in < s.inner; ++in) {
          const long f = (o * (g + 1) + j) * s.inner + in;
          const long left = (o * g + j - 1) * s.inner + in;
          up[a][f] = uf[a][f] >= 0.0 ? rho[left] : rho[left + s.inner];
        }
  }
  return up;
}

FaceField upwind_flux(const GridField& rho, const FaceField& uf, const Domain& d) {
  FaceField flux = upwind_density(rho, uf, d);
  for (int a = 0; a < d.dim; ++a) flux[a].array() *= uf[a].array();
  return flux;
}

GridField face_divergence(const FaceField& f, const Domain& d) {
  check_faces(f, d, "face_divergence");
  GridField div = GridField::Zero(d.num_cells());
  for (int a = 0; a < d.dim; ++a) {
    const AxisSplit s = split(d, a);
    const long g = d.grid_pts[a];
    const double inv_h = 1.0 / d.cell_width(a);
    for (long o = 0; o < s.outer; ++o)
      for (long i = 0; i < g; ++i)
        for (long in = 0; in < s.inner; ++in) {
          const long lo = (o * (g + 1) + i) * s.inner + in;
          div[(o * g + i) * s.inner + in] += (f[a][lo + s.inner] - f[a][lo]) * inv_h;
        }
  }
  return div;
}

FaceField face_gradient(const GridField& rho, const Domain& d) {
  check_cells(rho, d, "face_gradient");
  FaceField grad(d.dim);
  for (int a = 0; a < d.dim; ++a) {
    const AxisSplit s = split(d, a);
    const long g = d.grid_pts[a];
    const double inv_h = 1.0 / d.cell_width(a);
    grad[a] = GridField::Zero(face_count(d, a));
    for (long o = 0; o < s.outer; ++o)
      for (long j = 1; j < g; ++j)
        for (long in = 0; in < s.inner; ++in) {
          const long left = (o * g + j - 1) * s.inner + in;
          grad[a][(o * (g + 1) + j) * s.inner + in] = (rho[left + s.inner] - rho[left]) * inv_h;
        }
  }
  return grad;
}

GridVector center_gradient(const GridField& rho, const Domain& d) {
  const FaceField fg = face_gradient(rho, d);
  GridVector out(d.dim);
  for (int a = 0; a < d.dim; ++a) {
    const AxisSplit s = split(d, a);
    const long g = d.grid_pts[a];
    out[a] = GridField::Zero(d.num_cells());
    for (long o = 0; o < s.outer; ++o)
      for (long i = 0; i < g; ++i)
        for (long in = 0; in < s.inner; ++in) {
          const long lo = (o * (g + 1) + i) * s.inner + in;
          out[a][(o * g + i) * s.inner + in] = 0.5 * (fg[a][lo] + fg[a][lo + s.inner]);
        }
  }
  return out;
}

GridField neumann_laplacian(const GridField& rho, const Domain& d) {
  return face_divergence(face_gradient(rho, d), d);
}

NeumannSolver::NeumannSolver(const Domain& d) : domain_(d) {
  domain_.validate();
  std::array<Eigen::VectorXd, 3> axis_eig;
  for (int a = 0; a < d.dim; ++a) {
    const int g = d.grid_pts[a];
    const double h = d.cell_width(a);
    dct_[a] = dct_matrix(g);
    axis_eig[a].resize(g);
    for (int m = 0; m < g; ++m) {
      const double s = std::sin(std::numbers::pi * m / (2.0 * g));
      axis_eig[a][m] = 4.0 * s * s / (h * h);
    }
  }
  eig_ = Eigen::VectorXd::Zero(d.num_cells());
  for (long t = 0; t < eig_.size(); ++t) {
    long rem = t;
    double e = 0.0;
    for (int a = d.dim - 1; a >= 0; --a) {
      e += axis_eig[a][rem % d.grid_pts[a]];
      rem /= d.grid_pts[a];
    }
    eig_[t] = e;
  }
}

GridField NeumannSolver::solve(const GridField& b, double tau) const {
  check_cells(b, domain_, "NeumannSolver::solve");
  std::array<const Eigen::MatrixXd*, 3> mats{&dct_[0], &dct_[1], &dct_[2]};
  const auto m = std::span(mats.data(), domain_.dim);
  std::vector<double> hat, scratch, out;
  tensor_apply(domain_.dim, m, false, std::span<const double>(b.data(), b.size()), hat, scratch);
  for (std::size_t t = 0; t < hat.size(); ++t) hat[t] /= 1.0 + tau * eig_[static_cast<long>(t)];
  tensor_apply(domain_.dim, m, true, hat, out, scratch);
  return Eigen::Map<const GridField>(out.data(), static_cast<long>(out.size()));
}

double admissible_dt(const FaceField& uf, const Domain& d, double c_cfl) {
  check_faces(uf, d, "admissible_dt");
  GridField rate = GridField::Zero(d.num_cells());
  for (int a = 0; a < d.dim; ++a) {
    const AxisSplit s = split(d, a);
    const long g = d.grid_pts[a];
    const double inv_h = 1.0 / d.cell_width(a);
    for (long o = 0; o < s.outer; ++o)
      for (long i = 0; i < g; ++i)
        for (long in = 0; in < s.inner; ++in) {
          const long lo = (o * (g + 1) + i) * s.inner + in;
          const double out = std::max(uf[a][lo + s.inner], 0.0) + std::max(-uf[a][lo], 0.0);
          rate[(o * g + i) * s.inner + in] += out * inv_h;
        }
  }
  const double r = rate.maxCoeff();
  return r > 0.0 ? c_cfl / r : std::numeric_limits<double>::infinity();
}

DensityField advance_density(const DensityField& rho, const FaceField& uf, double eps, double dt,
                             const Domain& d, const NeumannSolver* solver,
                             TransportOptions opts) {
  check_cells(rho.values, d, "advance_density");
  if (!(dt > 0.0)) throw std::invalid_argument("advance_density: dt must be positive");
  if (eps < 0.0) throw std::invalid_argument("advance_density: eps must be nonnegative");
  if (rho.values.minCoeff() < 0.0)
    throw PositivityError("advance_density: negative input density");
  const double dt_max = admissible_dt(uf, d, opts.c_cfl);
  if (dt > dt_max)
    throw CflError("advance_density: dt = " + std::to_string(dt) + " exceeds the admissible step " +
                       std::to_string(dt_max),
                   dt_max);

  GridField next = rho.values - dt * face_divergence(upwind_flux(rho.values, uf, d), d);
  if (eps > 0.0) {
    if (solver) {
      next = solver->solve(next, eps * dt);
    } else {
      next = NeumannSolver(d).solve(next, eps * dt);
    }
  }
  if (next.minCoeff() < 0.0) {
    // Rounding-level undershoot of a zero density is clipped; anything larger is a failure.
    if (next.minCoeff() < -1e-14 * std::max(1.0, rho.values.maxCoeff()))
      throw PositivityError("advance_density: density became negative");
    next = next.cwiseMax(0.0);
  }
  return DensityField::from_values(std::move(next), d);
}

DensityField advance_density(const DensityField& rho, const CoeffVec& u, double eps, double dt,
                             const Basis& basis, TransportOptions opts) {
  return advance_density(rho, face_velocities(u, basis), eps, dt, basis.domain(), nullptr, opts);
}

std::vector<DensityField> solve_S(const std::vector<CoeffVec>& u_traj, const DensityField& rho0,
                                  double eps, double dt, const Basis& basis,
                                  TransportOptions opts) {
  const NeumannSolver solver(basis.domain());
  std::vector<DensityField> out;
  out.reserve(u_traj.size() + 1);
  out.push_back(rho0);
  for (const auto& u : u_traj)
    out.push_back(advance_density(out.back(), face_velocities(u, basis), eps, dt, basis.domain(),
                                  &solver, opts));
  return out;
}

DensityBounds density_bounds(const DensityField& rho0, double divu_integral) {
  return {rho0.min() * std::exp(-divu_integral), rho0.max() * std::exp(divu_integral)};
}

DensityBounds density_bounds(const DensityField& rho0, const std::vector<CoeffVec>& u_traj,
                             double dt, std::size_t steps, const Basis& basis) {
  double integral = 0.0;
  for (std::size_t k = 0; k < std::min(steps, u_traj.size()); ++k)
    integral += dt * sup_div(u_traj[k], basis);
  return density_bounds(rho0, integral);
}

double sup_div(const CoeffVec& u, const Basis& basis) {
  GridField div = GridField::Zero(basis.num_cells());
  GridField tmp;
  for (int c = 0; c < basis.dim(); ++c) {
    std::array<int, 3> der{0, 0, 0};
    der[c] = 1;
    const auto comp = component(u, basis, c);
    basis.eval(std::span<const double>(comp.data(), comp.size()), der, -1, tmp);
    div += tmp;
  }
  return div.cwiseAbs().maxCoeff();
}

double w1inf_norm(const CoeffVec& u, const Basis& basis) {
  const int d = basis.dim();
  GridField mag = GridField::Zero(basis.num_cells());
  GridField gmag = GridField::Zero(basis.num_cells());
  GridField tmp;
  for (int c = 0; c < d; ++c) {
    const auto comp = component(u, basis, c);
    const std::span<const double> cs(comp.data(), comp.size());
    basis.eval(cs, {0, 0, 0}, -1, tmp);
    mag += tmp.cwiseAbs2();
    for (int b = 0; b < d; ++b) {
      std::array<int, 3> der{0, 0, 0};
      der[b] = 1;
      basis.eval(cs, der, -1, tmp);
      gmag += tmp.cwiseAbs2();
    }
  }
  return std::sqrt(mag.maxCoeff()) + std::sqrt(gmag.maxCoeff());
}

double density_h1_norm(const GridField& rho, const Domain& d) {
  double s = rho.squaredNorm();
  for (const auto& g : face_gradient(rho, d)) s += g.squaredNorm();
  return std::sqrt(d.cell_volume() * s);
}

double coeff_h1_norm(const CoeffVec& u, const Basis& basis) {
  double s = 0.0;
  for (int c = 0; c < basis.dim(); ++c) {
    const auto comp = component(u, basis, c);
    s += (comp.array().square() * (1.0 + basis.eigvals().array())).sum();
  }
  return std::sqrt(s);
}

LipschitzProbe lipschitz_probe(const std::vector<CoeffVec>& u1_traj,
                               const std::vector<CoeffVec>& u2_traj, const DensityField& rho0,
                               double eps, double dt, double K, const Basis& basis) {
  if (u1_traj.size() != u2_traj.size())
    throw std::invalid_argument("lipschitz_probe: trajectories differ in length");
  for (const auto* traj : {&u1_traj, &u2_traj})
    for (const auto& u : *traj)
      if (w1inf_norm(u, basis) > K)
        throw std::invalid_argument("lipschitz_probe: trajectory leaves the class M_K");
  LipschitzProbe r{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < u1_traj.size(); ++k)
    r.velocity_sup = std::max(r.velocity_sup, coeff_h1_norm(u1_traj[k] - u2_traj[k], basis));
  if (r.velocity_sup == 0.0) return r;
  const auto s1 = solve_S(u1_traj, rho0, eps, dt, basis);
  const auto s2 = solve_S(u2_traj, rho0, eps, dt, basis);
  for (std::size_t k = 0; k < s1.size(); ++k)
    r.density_sup = std::max(r.density_sup,
                             density_h1_norm(s1[k].values - s2[k].values, basis.domain()));
  r.ratio = r.density_sup / r.velocity_sup;
  return r;
}

}  // namespace smhd
