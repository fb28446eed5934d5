#include "smhd/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "smhd/error.hpp"

namespace smhd {

namespace {

std::array<int, 3> unit_deriv(int axis) {
  std::array<int, 3> d{0, 0, 0};
  if (axis >= 0) d[axis] = 1;
  return d;
}

GridField eval_comp(const Basis& basis, const CoeffVec& v, int comp, int deriv_axis = -1) {
  GridField out;
  const auto c = component(v, basis, comp);
  basis.eval(std::span<const double>(c.data(), c.size()), unit_deriv(deriv_axis), -1, out);
  return out;
}

// Adds Σ_x w field(x) ∂_{deriv_axis}φ_j(x) into component `comp` of `out`.
void project_into(const Basis& basis, const GridField& field, int deriv_axis, int comp,
                  CoeffVec& out, int face_axis = -1) {
  auto seg = component(out, basis, comp);
  basis.project_add(field, unit_deriv(deriv_axis), face_axis,
                    std::span<double>(seg.data(), seg.size()));
}

void check_sizes(const CoeffVec& v, const Basis& basis, const char* who) {
  if (v.size() != basis.vector_size())
    throw std::invalid_argument(std::string(who) + ": coefficient size mismatch");
}

}  // namespace

void SimParams::validate() const {
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (!(2.0 * mu + 3.0 * lambda >= 0.0)) throw ConfigError("2*mu + 3*lambda must be nonnegative");
  if (!(nu > 0.0)) throw ConfigError("nu must be positive");
  if (!(a > 0.0)) throw ConfigError("pressure constant a must be positive");
  if (!allow_low_gamma && !(gamma > 1.5))
    throw ConfigError("gamma must exceed 3/2 (existence regime gamma > 3/2)");
  if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
  if (!(beta > std::max(4.0, gamma))) throw ConfigError("beta must exceed max{4, gamma}");
  if (!(delta >= 0.0)) throw ConfigError("delta must be nonnegative");
  if (!(eps >= 0.0)) throw ConfigError("eps must be nonnegative");
  if (!(N_cutoff > 0.0)) throw ConfigError("cut-off level N must be positive");
  if (!(N_stop >= 0.0)) throw ConfigError("stopping level must be nonnegative");
}

double SimParams::pressure(double rho) const {
  return a * std::pow(rho, gamma) + delta * std::pow(rho, beta);
}

double SimParams::pressure_potential(double rho) const {
  return a / (gamma - 1.0) * std::pow(rho, gamma) + delta / (beta - 1.0) * std::pow(rho, beta);
}

double SimParams::enthalpy(double rho) const {
  return a * gamma / (gamma - 1.0) * std::pow(rho, gamma - 1.0) +
         delta * beta / (beta - 1.0) * std::pow(rho, beta - 1.0);
}

double SimParams::enthalpy_derivative(double rho) const {
  return a * gamma * std::pow(rho, gamma - 2.0) + delta * beta * std::pow(rho, beta - 2.0);
}

Operators::Operators(const Domain& domain, int n_per_axis)
    : Operators(Basis(domain, n_per_axis)) {}

Operators::Operators(const Basis& basis) : basis_(basis), neumann_(basis.domain()) {
  const int n = basis_.n();
  const int d = basis_.dim();
  phi_.resize(basis_.num_cells(), n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    e.setZero();
    e[i] = 1.0;
    phi_.col(i) = basis_.eval(e);
  }
  const int nd = basis_.vector_size();
  grad_div_ = Eigen::MatrixXd::Zero(nd, nd);
  CoeffVec unit = CoeffVec::Zero(nd);
  CoeffVec col(nd);
  for (int cp = 0; cp < d; ++cp) {
    for (int i = 0; i < n; ++i) {
      unit.setZero();
      unit[cp * n + i] = 1.0;
      const GridField f = eval_comp(basis_, unit, cp, cp);
      col.setZero();
      for (int c = 0; c < d; ++c) project_into(basis_, f, c, c, col);
      grad_div_.col(cp * n + i) = -col;
    }
  }

  weak_div_ = Eigen::MatrixXd::Zero(n, nd);
  for (int m = 0; m < n; ++m) {
    unit.setZero();
    unit[m] = 1.0;
    for (int c = 0; c < d; ++c) {
      const GridField f = eval_comp(basis_, unit, 0, c);
      weak_div_.block(m, c * n, 1, n) = project_scalar(f, basis_).transpose();
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(weak_div_, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-12 * std::max(1.0, sv.size() > 0 ? sv[0] : 0.0);
  long rank = 0;
  while (rank < sv.size() && sv[rank] > tol) ++rank;
  const Eigen::MatrixXd vr = svd.matrixV().leftCols(rank);
  sol_proj_ = Eigen::MatrixXd::Identity(nd, nd) - vr * vr.transpose();
  sol_proj_ = (0.5 * (sol_proj_ + sol_proj_.transpose())).eval();
}

MassOp::MassOp(const GridField& rho, const Operators& ops, bool with_sqrt)
    : dim_(ops.basis().dim()) {
  if (rho.size() != ops.basis().num_cells())
    throw std::invalid_argument("mass_op: density does not match the cell grid");
  if (!(rho.minCoeff() > 0.0))
    throw PositivityError("mass_op: density must be strictly positive (M[rho] not invertible)");
  const Eigen::MatrixXd& phi = ops.phi();
  const Eigen::VectorXd w = ops.basis().cell_volume() * rho;
  Eigen::MatrixXd g = phi.transpose() * w.asDiagonal() * phi;
  block_ = 0.5 * (g + g.transpose());
  llt_.compute(block_);
  if (llt_.info() != Eigen::Success)
    throw PositivityError("mass_op: weighted Gram matrix is not positive definite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block_);
  eig_ = es.eigenvalues();
  if (with_sqrt) {
    sqrt_ = es.eigenvectors() * eig_.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
            es.eigenvectors().transpose();
    sqrt_ = 0.5 * (sqrt_ + sqrt_.transpose()).eval();
    have_sqrt_ = true;
  }
}

const Eigen::MatrixXd& MassOp::sqrt_block() const {
  if (!have_sqrt_) throw std::logic_error("MassOp: square root was not assembled");
  return sqrt_;
}

Eigen::MatrixXd MassOp::matrix() const {
  const long n = block_.rows();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n * dim_, n * dim_);
  for (int c = 0; c < dim_; ++c) m.block(c * n, c * n, n, n) = block_;
  return m;
}

Eigen::MatrixXd MassOp::sqrt_matrix() const {
  const Eigen::MatrixXd& s = sqrt_block();
  const long n = s.rows();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n * dim_, n * dim_);
  for (int c = 0; c < dim_; ++c) m.block(c * n, c * n, n, n) = s;
  return m;
}

CoeffVec MassOp::apply(const CoeffVec& v) const {
  const long n = block_.rows();
  if (v.size() != n * dim_) throw std::invalid_argument("MassOp::apply: size mismatch");
  CoeffVec r(v.size());
  for (int c = 0; c < dim_; ++c) r.segment(c * n, n).noalias() = block_ * v.segment(c * n, n);
  return r;
}

CoeffVec MassOp::solve(const CoeffVec& v) const {
  const long n = block_.rows();
  if (v.size() != n * dim_) throw std::invalid_argument("MassOp::solve: size mismatch");
  CoeffVec r(v.size());
  for (int c = 0; c < dim_; ++c) r.segment(c * n, n) = llt_.solve(v.segment(c * n, n));
  return r;
}

CoeffVec MassOp::apply_sqrt(const CoeffVec& v) const {
  const Eigen::MatrixXd& s = sqrt_block();
  const long n = s.rows();
  if (v.size() != n * dim_) throw std::invalid_argument("MassOp::apply_sqrt: size mismatch");
  CoeffVec r(v.size());
  for (int c = 0; c < dim_; ++c) r.segment(c * n, n).noalias() = s * v.segment(c * n, n);
  return r;
}

double MassOp::min_eigenvalue() const { return eig_.minCoeff(); }
double MassOp::max_eigenvalue() const { return eig_.maxCoeff(); }

MassOp mass_op(const DensityField& rho, const Operators& ops, bool with_sqrt) {
  return MassOp(rho.values, ops, with_sqrt);
}

MassLipschitz mass_lipschitz_check(const DensityField& rho1, const DensityField& rho2,
                                   double eta, const Operators& ops) {
  if (!(eta > 0.0)) throw std::invalid_argument("mass_lipschitz_check: eta must be positive");
  if (rho1.min() < eta || rho2.min() < eta)
    throw std::invalid_argument("mass_lipschitz_check: density below the lower bound eta");
  const MassOp m1(rho1.values, ops, false);
  const MassOp m2(rho2.values, ops, false);
  const long n = m1.block().rows();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd diff =
      m1.block().llt().solve(id) - m2.block().llt().solve(id);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (diff + diff.transpose()),
                                                    Eigen::EigenvaluesOnly);
  MassLipschitz r;
  r.lhs = es.eigenvalues().cwiseAbs().maxCoeff();
  r.rhs = ops.basis().cell_volume() * (rho1.values - rho2.values).cwiseAbs().sum();
  return r;
}

CoeffVec MomentumParts::total() const {
  return viscous + convection + density_rate + artificial + pressure + lorentz;
}

MomentumParts momentum_parts(const GridField& rho, const CoeffVec& u, const CoeffVec& B,
                             const SimParams& params, const Operators& ops,
                             TransportContext ctx) {
  const Basis& basis = ops.basis();
  const Domain& dom = basis.domain();
  check_sizes(u, basis, "momentum_rhs");
  check_sizes(B, basis, "momentum_rhs");
  if (rho.size() != basis.num_cells())
    throw std::invalid_argument("momentum_rhs: density does not match the cell grid");
  const int d = basis.dim();
  const int n = basis.n();
  const int nd = basis.vector_size();

  MomentumParts p;
  p.viscous = (params.lambda + params.mu) * (ops.grad_div() * u);
  for (int c = 0; c < d; ++c)
    p.viscous.segment(c * n, n) -= params.mu * basis.eigvals().cwiseProduct(u.segment(c * n, n));

  GridVector U(d);
  std::vector<GridVector> G(d, GridVector(d));
  for (int c = 0; c < d; ++c) {
    U[c] = eval_comp(basis, u, c);
    for (int b = 0; b < d; ++b) G[c][b] = eval_comp(basis, u, c, b);
  }

  // ½Σ w ρ [u_b u_c ∂_bφ - φ u_b ∂_b u_c]
  p.convection = CoeffVec::Zero(nd);
  for (int c = 0; c < d; ++c) {
    GridField adv = GridField::Zero(rho.size());
    for (int b = 0; b < d; ++b) {
      project_into(basis, (0.5 * rho.array() * U[b].array() * U[c].array()).matrix(), b, c,
                   p.convection);
      adv.array() += U[b].array() * G[c][b].array();
    }
    project_into(basis, (-0.5 * rho.array() * adv.array()).matrix(), -1, c, p.convection);
  }

  FaceField faces_local;
  const FaceField* faces = ctx.faces;
  if (!faces) {
    faces_local = face_velocities(u, basis);
    faces = &faces_local;
  }

  GridField rate_local;
  const GridField* rate = ctx.rho_rate;
  if (!rate) {
    rate_local = -face_divergence(upwind_flux(rho, *faces, dom), dom);
    if (params.eps > 0.0) rate_local += params.eps * neumann_laplacian(rho, dom);
    rate = &rate_local;
  }
  p.density_rate = CoeffVec::Zero(nd);
  for (int c = 0; c < d; ++c)
    project_into(basis, (0.5 * rate->array() * U[c].array()).matrix(), -1, c, p.density_rate);

  // -½εΣ w [∂_bρ ∂_b u_c φ - ∂_bρ u_c ∂_bφ]
  p.artificial = CoeffVec::Zero(nd);
  if (params.eps > 0.0) {
    const GridVector grho = center_gradient(rho, dom);
    for (int c = 0; c < d; ++c) {
      GridField s = GridField::Zero(rho.size());
      for (int b = 0; b < d; ++b) {
        s.array() += grho[b].array() * G[c][b].array();
        project_into(basis, (0.5 * params.eps * grho[b].array() * U[c].array()).matrix(), b, c,
                     p.artificial);
      }
      project_into(basis, (-0.5 * params.eps * s).eval(), -1, c, p.artificial);
    }
  }

  // -Σ_faces w ρ_up (h(ρ_R) - h(ρ_L))/h_a φ(x_f) on the faces normal to a.
  p.pressure = CoeffVec::Zero(nd);
  {
    GridField h(rho.size());
    for (long i = 0; i < rho.size(); ++i) h[i] = params.enthalpy(rho[i]);
    const FaceField dh = face_gradient(h, dom);
    const FaceField up = upwind_density(rho, *faces, dom);
    for (int a = 0; a < d; ++a)
      project_into(basis, (-up[a].array() * dh[a].array()).matrix(), -1, a, p.pressure, a);
  }

  p.lorentz = lorentz_force(B, basis);
  return p;
}

CoeffVec momentum_rhs(const GridField& rho, const CoeffVec& u, const CoeffVec& B,
                      const SimParams& params, const Operators& ops, TransportContext ctx) {
  return momentum_parts(rho, u, B, params, ops, ctx).total();
}

CoeffVec lorentz_force(const CoeffVec& B, const Basis& basis) {
  check_sizes(B, basis, "lorentz_force");
  const int d = basis.dim();
  CoeffVec out = CoeffVec::Zero(basis.vector_size());
  GridVector Bg(d);
  for (int c = 0; c < d; ++c) Bg[c] = eval_comp(basis, B, c);
  if (d == 2) {
    const GridField J = eval_comp(basis, B, 1, 0) - eval_comp(basis, B, 0, 1);
    project_into(basis, (-J.array() * Bg[1].array()).matrix(), -1, 0, out);
    project_into(basis, (J.array() * Bg[0].array()).matrix(), -1, 1, out);
    return out;
  }
  GridVector J(3);
  for (int c = 0; c < 3; ++c) {
    const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
    J[c] = eval_comp(basis, B, c2, c1) - eval_comp(basis, B, c1, c2);
  }
  for (int c = 0; c < 3; ++c) {
    const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
    project_into(basis, (J[c1].array() * Bg[c2].array() - J[c2].array() * Bg[c1].array()).matrix(),
                 -1, c, out);
  }
  return out;
}

CoeffVec induction_rhs(const CoeffVec& u, const CoeffVec& B, const SimParams& params,
                       const Basis& basis) {
  check_sizes(u, basis, "induction_rhs");
  check_sizes(B, basis, "induction_rhs");
  const int d = basis.dim();
  const int n = basis.n();
  CoeffVec out = CoeffVec::Zero(basis.vector_size());
  for (int c = 0; c < d; ++c)
    out.segment(c * n, n) = -params.nu * basis.eigvals().cwiseProduct(B.segment(c * n, n));
  GridVector U(d), Bg(d);
  for (int c = 0; c < d; ++c) {
    U[c] = eval_comp(basis, u, c);
    Bg[c] = eval_comp(basis, B, c);
  }
  if (d == 2) {
    const GridField E = (U[0].array() * Bg[1].array() - U[1].array() * Bg[0].array()).matrix();
    project_into(basis, (-E).eval(), 1, 0, out);
    project_into(basis, E, 0, 1, out);
    return out;
  }
  GridVector E(3);
  for (int c = 0; c < 3; ++c) {
    const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
    E[c] = (U[c1].array() * Bg[c2].array() - U[c2].array() * Bg[c1].array()).matrix();
  }
  for (int c = 0; c < 3; ++c) {
    const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
    project_into(basis, E[c1], c2, c, out);
    project_into(basis, (-E[c2]).eval(), c1, c, out);
  }
  return out;
}

double cutoff_profile(double s, double N) {
  const double x = s - N;
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  return 1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
}

double cutoff_theta(const CoeffVec& u, const CoeffVec& B, double N, const Basis& basis) {
  return cutoff_profile(std::max(w1inf_norm(u, basis), w1inf_norm(B, basis)), N);
}

}  // namespace smhd
