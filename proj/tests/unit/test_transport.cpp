#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "smhd/error.hpp"
#include "smhd/transport.hpp"

using namespace smhd;
using std::numbers::pi;

namespace {

Domain dom(int dim = 2, int g = 16) {
  Domain d;
  d.dim = dim;
  d.grid_pts = {g, g, g};
  return d;
}

DensityField bumpy(const Domain& d, double c, double amp) {
  GridField v(d.num_cells());
  for (int i = 0; i < d.grid_pts[0]; ++i)
    for (int j = 0; j < d.grid_pts[1]; ++j)
      v[i * d.grid_pts[1] + j] = c + amp * std::cos(pi * d.center(0, i) / d.lengths[0]) *
                                         std::cos(2 * pi * d.center(1, j) / d.lengths[1]);
  return DensityField::from_values(v, d);
}

CoeffVec random_velocity(const Basis& b, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  CoeffVec u(b.vector_size());
  for (int i = 0; i < u.size(); ++i) u[i] = scale * n(rng) / (1.0 + b.eigvals()[i % b.n()]);
  return u;
}

}  // namespace

TEST_SUITE("transport") {
  TEST_CASE("zero velocity without diffusion is the identity") {
    const Domain d = dom();
    const Basis b(d, 4);
    const DensityField rho = bumpy(d, 1.0, 0.3);
    const DensityField out =
        advance_density(rho, CoeffVec::Zero(b.vector_size()), 0.0, 1e-2, b);
    CHECK((out.values - rho.values).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("pure diffusion damps a cosine mode at the heat rate") {
    const Domain d = dom(2, 32);
    const Basis b(d, 4);
    GridField v(d.num_cells());
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j) v[i * 32 + j] = 1.0 + 0.1 * std::cos(d.center(0, i));
    const auto rho = DensityField::from_values(v, d);
    const double eps = 1e-2, dt = 1e-2;
    const auto out = advance_density(rho, CoeffVec::Zero(b.vector_size()), eps, dt, b);
    const GridField p0 = v.array() - 1.0;
    const GridField p1 = out.values.array() - 1.0;
    const double amp = p1.dot(p0) / p0.squaredNorm();
    CHECK(amp == doctest::Approx(std::exp(-eps * dt)).epsilon(1e-7));
    CHECK(std::abs(out.mass - rho.mass) <= 1e-14 * rho.mass);
  }

  TEST_CASE("mass is conserved for admissible steps") {
    for (int dim : {2, 3}) {
      const Domain d = dom(dim, dim == 2 ? 16 : 8);
      const Basis b(d, dim == 2 ? 4 : 3);
      GridField v = GridField::Constant(d.num_cells(), 1.0);
      for (int i = 0; i < v.size(); ++i) v[i] += 0.4 * std::sin(0.37 * i);
      const auto rho = DensityField::from_values(v, d);
      const CoeffVec u = random_velocity(b, 1.0, 11);
      const double dt = 0.5 * admissible_dt(face_velocities(u, b), d, 0.5);
      const auto out = advance_density(rho, u, 1e-3, dt, b);
      CHECK(std::abs(out.mass - rho.mass) <= 1e-12 * rho.mass);
    }
  }

  TEST_CASE("steps above the transport limit raise CflError") {
    const Domain d = dom();
    const Basis b(d, 4);
    const CoeffVec u = random_velocity(b, 5.0, 3);
    const double dt_max = admissible_dt(face_velocities(u, b), d, 0.5);
    try {
      advance_density(bumpy(d, 1.0, 0.2), u, 0.0, 2.0 * dt_max, b);
      FAIL("expected CflError");
    } catch (const CflError& e) {
      CHECK(e.admissible_dt() == doctest::Approx(dt_max));
    }
  }

  TEST_CASE("solve_S: zero velocity keeps the density; runs are bit-identical") {
    const Domain d = dom();
    const Basis b(d, 4);
    const auto rho0 = bumpy(d, 1.0, 0.3);
    const std::vector<CoeffVec> still(5, CoeffVec::Zero(b.vector_size()));
    for (const auto& r : solve_S(still, rho0, 0.0, 1e-2, b))
      CHECK((r.values - rho0.values).cwiseAbs().maxCoeff() == 0.0);

    std::vector<CoeffVec> traj;
    for (int k = 0; k < 20; ++k) traj.push_back(random_velocity(b, 1.0, 100 + k));
    const auto a = solve_S(traj, rho0, 1e-3, 1e-3, b);
    const auto c = solve_S(traj, rho0, 1e-3, 1e-3, b);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].values == c[k].values);
  }

  TEST_CASE("density stays within the div u bounds") {
    const Domain d = dom(2, 32);
    const Basis b(d, 4);
    const auto rho0 = bumpy(d, 1.0, 0.3);
    std::vector<CoeffVec> traj;
    const double dt = 1e-3;
    for (int k = 0; k < 200; ++k) traj.push_back(random_velocity(b, 2.0, 500 + k / 20));
    const auto s = solve_S(traj, rho0, 1e-3, dt, b);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const DensityBounds bd = density_bounds(rho0, traj, dt, k, b);
      CHECK(s[k].min() >= 0.95 * bd.lower);
      CHECK(s[k].max() <= 1.05 * bd.upper);
    }
  }

  TEST_CASE("density_bounds closed forms") {
    const Domain d = dom();
    const Basis b(d, 4);
    const auto rho0 = bumpy(d, 1.0, 0.3);
    const DensityBounds still = density_bounds(rho0, {CoeffVec::Zero(b.vector_size())}, 0.1, 1, b);
    CHECK(still.lower == doctest::Approx(rho0.min()));
    CHECK(still.upper == doctest::Approx(rho0.max()));
    const double s = 0.7, t = 0.4;
    CHECK(density_bounds(rho0, s * t).lower == doctest::Approx(rho0.min() * std::exp(-s * t)));
  }

  TEST_CASE("Lipschitz probe") {
    const Domain d = dom();
    const Basis b(d, 3);
    const auto rho0 = bumpy(d, 1.0, 0.3);
    std::vector<CoeffVec> u1, v;
    for (int k = 0; k < 10; ++k) {
      u1.push_back(random_velocity(b, 1.0, 40 + k));
      v.push_back(random_velocity(b, 1.0, 80 + k));
    }
    CHECK(lipschitz_probe(u1, u1, rho0, 1e-3, 1e-3, 100.0, b).ratio == 0.0);

    // Directional limit: the ratio is Cauchy along η → 0.
    std::vector<double> ratios;
    for (double eta : {1e-2, 1e-3, 1e-4}) {
      std::vector<CoeffVec> u2 = u1;
      for (std::size_t k = 0; k < u2.size(); ++k) u2[k] += eta * v[k];
      ratios.push_back(lipschitz_probe(u1, u2, rho0, 1e-3, 1e-3, 100.0, b).ratio);
    }
    CHECK(std::abs(ratios[2] - ratios[1]) < std::abs(ratios[1] - ratios[0]));
    CHECK(std::isfinite(ratios[2]));

    CHECK_THROWS_AS(lipschitz_probe(u1, u1, rho0, 1e-3, 1e-3, 1e-6, b), std::invalid_argument);
  }
}
