#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "smhd/diagnostics.hpp"
#include "smhd/error.hpp"
#include "smhd/montecarlo.hpp"

using namespace smhd;
using std::numbers::pi;

namespace {

Domain dom(int g = 16) {
  Domain d;
  d.grid_pts = {g, g, g};
  return d;
}

PathConfig tiny(double T = 0.05) {
  PathConfig c;
  c.domain = dom(8);
  c.n_per_axis = 2;
  c.T = T;
  return c;
}

PathConfig constant_state(double c) {
  PathConfig p = tiny();
  p.init = {c, 0.0, 0.0, 0.0, false};
  p.noise.amplitude = 0.0;
  return p;
}

Trajectory renorm_run(double T = 0.1) {
  PathConfig c;
  c.domain = dom(16);
  c.T = T;
  c.noise.amplitude = 0.0;
  c.params.eps = 0.0;
  c.store_states = true;
  return run_path(c, 1);
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("energy report of a constant state") {
    const Trajectory t = run_path(constant_state(1.2), 1);
    const EnergyReport r = energy_report(t);
    CHECK(r.t.size() == t.records.size());
    CHECK(r.finite());
    CHECK(r.monotone());
    CHECK(r.max_abs_residual() < 1e-12);
  }

  TEST_CASE("energy report terms are cumulative") {
    const Trajectory t = run_path(tiny(), 4);
    const EnergyReport r = energy_report(t);
    CHECK(r.monotone());
    for (std::size_t i = 0; i < r.t.size(); ++i)
      CHECK(r.residual[i] == doctest::Approx(r.E[i] + r.D[i] + r.A[i] - r.E[0] - r.I[i] - r.Mart[i]));
  }

  TEST_CASE("z statistics and estimates") {
    const std::vector<double> zeros(10, 0.0);
    CHECK(z_statistic("z", zeros).z == 0.0);
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const Estimate e = estimate(x);
    CHECK(e.mean == doctest::Approx(2.5));
    CHECK(e.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
    CHECK(z_statistic("x", x).z == doctest::Approx(2.5 / e.se));
  }

  TEST_CASE("martingale statistics vanish without noise") {
    PathConfig c = tiny(0.02);
    c.noise.amplitude = 0.0;
    const auto e = run_paths(c, 1, 60, 1);
    const Basis b(c.domain, c.n_per_axis);
    for (const auto& [name, phi] : martingale_directions(b)) {
      const MartingaleTest t = martingale_qv_test(e, phi);
      CHECK(t.pass);
      for (const auto& z : t.stats) CHECK(z.mean == 0.0);
    }
    const std::vector<Trajectory> few(e.begin(), e.begin() + 10);
    CHECK_THROWS(martingale_qv_test(few, martingale_directions(b).front().second));
  }

  TEST_CASE("martingale statistics on a small ensemble") {
    const PathConfig c = tiny(0.05);
    const auto e = run_paths(c, 5, 200, 1);
    const Basis b(c.domain, c.n_per_axis);
    for (const auto& [name, phi] : martingale_directions(b)) {
      CHECK(martingale_qv_test(e, phi).pass);
      CHECK(martingale_qv_test(e, phi, true).pass);
    }
  }

  TEST_CASE("integrability exponent range") {
    CHECK(integrability_theta_max(2.0) == doctest::Approx(1.0 / 3.0));
    CHECK(integrability_theta_max(5.0 / 3.0) == doctest::Approx(1.0 / 9.0));
    CHECK_NOTHROW(validate_integrability_theta(0.3, 2.0));
    CHECK_THROWS_AS(validate_integrability_theta(0.34, 2.0), ConfigError);
    CHECK_THROWS_AS(validate_integrability_theta(0.1, 1.5 + 1e-6), ConfigError);
  }

  TEST_CASE("pressure integrability of a constant state") {
    const double c = 1.3, theta = 0.1;
    PathConfig p = constant_state(c);
    p.moment_theta = theta;
    const std::vector<Trajectory> e{run_path(p, 1), run_path(p, 2)};
    const SimParams& s = p.params;
    const double expect = p.T * p.domain.volume() *
                          (s.a * std::pow(c, s.gamma + theta) + s.delta * std::pow(c, s.beta + theta));
    const Estimate est = pressure_integrability(e, s, theta);
    CHECK(est.mean == doctest::Approx(expect).epsilon(1e-12));
    CHECK(est.se == 0.0);
    CHECK_THROWS(pressure_integrability(e, s, 0.05));
  }

  TEST_CASE("effective viscous flux") {
    const Domain d = dom(16);
    const Basis b(d, 4);
    SimParams p;
    p.lambda = 0.5;
    State s;
    s.rho = DensityField::from_values(GridField::Constant(d.num_cells(), 1.5), d);
    s.u = CoeffVec::Zero(b.vector_size());
    s.B = s.u;
    const FluxField f0 = effective_flux(s, p, b);
    CHECK((f0.values.array() - p.pressure(1.5)).abs().maxCoeff() < 1e-13);

    s.u[b.mode_index({1, 1, 1})] = 0.7;
    const FluxField f = effective_flux(s, p, b);
    double err = 0.0;
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) {
        const double div = 0.7 * (2.0 / pi) * std::cos(d.center(0, i)) * std::sin(d.center(1, j));
        err = std::max(err, std::abs(f.values[i * 16 + j] -
                                     (p.pressure(1.5) - (p.lambda + 2 * p.mu) * div)));
      }
    CHECK(err < 1e-8);
  }

  TEST_CASE("density cut-offs") {
    CHECK(cutoff_T(0.5) == 0.5);
    CHECK(cutoff_T(1.0) == 1.0);
    CHECK(cutoff_T(3.0) == doctest::Approx(2.0));
    CHECK(cutoff_T(10.0) == 2.0);
    // C¹ at the junctions.
    for (double z : {1.0, 3.0})
      CHECK(cutoff_T_derivative(z - 1e-12) == doctest::Approx(cutoff_T_derivative(z + 1e-12)));
    // Concave and nondecreasing.
    for (double z = 0.0; z < 4.0; z += 0.01) {
      const double h = 1e-3;
      CHECK(cutoff_T(z + h) - 2 * cutoff_T(z) + cutoff_T(z - h) <= 1e-14);
      CHECK(cutoff_T_derivative(z) >= 0.0);
      CHECK(cutoff_T_derivative(z) ==
            doctest::Approx((cutoff_T(z + h) - cutoff_T(z - h)) / (2 * h)).epsilon(1e-3));
    }
    const double k = 2.5;
    for (double z : {0.3, 2.0, 4.0, 9.0}) {
      CHECK(cutoff_Tk(z, k) == doctest::Approx(k * cutoff_T(z / k)));
      const double h = 1e-6;
      CHECK(cutoff_Tk_derivative(z, k) ==
            doctest::Approx((cutoff_Tk(z + h, k) - cutoff_Tk(z - h, k)) / (2 * h)).epsilon(1e-6));
      CHECK(cutoff_Lk_derivative(z, k) ==
            doctest::Approx((cutoff_Lk(z + h, k) - cutoff_Lk(z - h, k)) / (2 * h)).epsilon(1e-6));
    }
    CHECK(cutoff_Lk(1.7, k) == doctest::Approx(1.7 * std::log(1.7)));
    CHECK(cutoff_Lk(k - 1e-12, k) == doctest::Approx(cutoff_Lk(k + 1e-12, k)));
    // L_k' z - L_k = T_k.
    for (double z : {0.5, 2.0, 3.0, 6.0, 20.0})
      CHECK(z * cutoff_Lk_derivative(z, k) - cutoff_Lk(z, k) == doctest::Approx(cutoff_Tk(z, k)));
  }

  TEST_CASE("renormalized residual of a constant state vanishes") {
    PathConfig p = constant_state(1.1);
    p.params.eps = 0.0;
    p.store_states = true;
    const Trajectory t = run_path(p, 1);
    const Operators ops(p.domain, p.n_per_axis);
    using K = Renormalization::Kind;
    for (const Renormalization& b :
         {Renormalization{K::Identity, 1.0}, Renormalization{K::Tk, 0.5}, Renormalization{K::Lk, 0.5}})
      CHECK(renorm_residual(t, b, 0.0, ops).max_abs < 1e-14);
  }

  TEST_CASE("renormalized residual for identity and high truncation") {
    const Trajectory t = renorm_run();
    const Operators ops(dom(16), 4);
    double mx = 0.0;
    for (const auto& s : t.states) mx = std::max(mx, s.rho.max());
    using K = Renormalization::Kind;
    const RenormReport id = renorm_residual(t, {K::Identity, 1.0}, 0.0, ops);
    const RenormReport tk = renorm_residual(t, {K::Tk, 2.0 * mx}, 0.0, ops);
    CHECK(id.max_abs < 1e-10);
    for (int i = 0; i < 8; ++i) CHECK(tk.residual[i] == doctest::Approx(id.residual[i]).epsilon(1e-12));

    PathConfig sparse;
    sparse.domain = dom(16);
    sparse.T = 0.02;
    CHECK_THROWS(renorm_residual(run_path(sparse, 1), {K::Identity, 1.0}, 0.0, ops));
  }

  TEST_CASE("test battery bumps are supported inside the domain") {
    const Domain d = dom(16);
    for (const TestBump& b : test_battery()) {
      CHECK(bump_values(b, 0.0, 1.0, d).cwiseAbs().maxCoeff() == 0.0);
      CHECK(bump_values(b, b.t_center, 1.0, d).maxCoeff() > 0.0);
    }
  }

  TEST_CASE("weak divergence") {
    const Operators ops(dom(16), 4);
    const Basis& b = ops.basis();
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    SpectralTerm t;
    t.modes = {4, 4, 1};
    t.coeffs.resize(16);
    for (auto& x : t.coeffs) x = n(rng);
    SpectralScalar psi;
    psi.terms.push_back(t);
    CHECK(divB_norm(rotated_grad(psi), ops.domain()) < 1e-10);

    CoeffVec B(b.vector_size());
    for (auto& x : B) x = n(rng);
    const CoeffVec P = solenoidal_project(B, ops);
    CHECK((solenoidal_project(P, ops) - P).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(divB_norm(P, ops) < 1e-10);
    CHECK(divB_norm(B, ops) > 1e-3);
  }

  TEST_CASE("Bogovskii solver") {
    const Domain d = dom(16);
    const BogovskiiSolver solver(d);
    const BogovskiiResult zero = solver.solve(GridField::Zero(d.num_cells()));
    for (const auto& c : zero.values) CHECK(c.cwiseAbs().maxCoeff() == 0.0);

    const Basis b(d, 1);
    GridField f = b.eval(Eigen::VectorXd::Ones(1));
    f.array() -= f.mean();
    const BogovskiiResult r = solver.solve(f);
    CHECK(r.div_residual <= 1e-6);
    CHECK(r.h1_norm / r.f_norm < 10.0);
    CHECK_THROWS_AS(solver.solve(GridField::Ones(d.num_cells())), std::invalid_argument);
  }

  TEST_CASE("Bogovskii solver in three dimensions") {
    Domain d;
    d.dim = 3;
    d.grid_pts = {8, 8, 8};
    const Basis b(d, 1);
    GridField f = b.eval(Eigen::VectorXd::Ones(1));
    f.array() -= f.mean();
    const BogovskiiResult r = bogovskii_solve(f, d);
    CHECK(r.div_residual <= 1e-6);
  }

  TEST_CASE("flux pairing study across delta") {
    PathConfig c;
    c.domain = dom(16);
    c.T = 0.1;
    c.store_states = true;
    c.store_stride = 5;
    const auto rows = flux_pairing_study(c, StudyParameter::Delta, {1e-2, 1e-3, 1e-4}, 2.0, {1, 2});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].increment == 0.0);
    CHECK(rows[2].increment < rows[1].increment);
    CHECK_THROWS(flux_pairing_study(c, StudyParameter::Delta, {1e-2, 1e-3, 1e-2}, 2.0, {1}));
  }
}
