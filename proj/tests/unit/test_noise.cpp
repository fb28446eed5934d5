#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "smhd/noise.hpp"

using namespace smhd;

namespace {

Domain dom(int g = 16) {
  Domain d;
  d.grid_pts = {g, g, g};
  return d;
}

GridVector random_vector(int dim, int cells, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  GridVector v(dim, GridField(cells));
  for (auto& c : v)
    for (auto& x : c) x = scale * n(rng);
  return v;
}

GridField random_positive(int cells, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  GridField r(cells);
  for (auto& x : r) x = u(rng);
  return r;
}

std::vector<GrowthSample> samples(const Domain& d, int count) {
  std::vector<GrowthSample> out;
  for (int s = 0; s < count; ++s)
    out.push_back({random_positive(d.num_cells(), 100 + s),
                   random_vector(d.dim, d.num_cells(), 1.0, 200 + s),
                   random_vector(d.dim, d.num_cells(), 1.0, 300 + s)});
  return out;
}

}  // namespace

TEST_SUITE("noise") {
  TEST_CASE("Philox4x32-10 known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
  }

  TEST_CASE("increments are reproducible and addressable") {
    const BrownianPaths a = sample_brownian(42, 3, 0.1, 1e-3);
    const BrownianPaths b = sample_brownian(42, 3, 0.1, 1e-3);
    const BrownianPaths c = sample_brownian(43, 3, 0.1, 1e-3);
    CHECK(a.data() == b.data());
    CHECK(a.data() != c.data());
    CHECK(a.steps() == 100);
    // A longer horizon extends the same stream.
    const BrownianPaths longer = sample_brownian(42, 3, 0.2, 1e-3);
    for (int ch = 0; ch < 2; ++ch)
      for (int k = 0; k < 3; ++k)
        for (long s = 0; s < a.steps(); ++s) CHECK(longer.increment(ch, k, s) == a.increment(ch, k, s));
  }

  TEST_CASE("increment moments") {
    const double dt = 1e-3;
    const long steps = 100000;
    const BrownianPaths p = sample_brownian(7, 1, dt * steps, dt);
    REQUIRE(p.steps() == steps);
    double sum = 0.0, qv = 0.0, q4 = 0.0;
    for (long s = 0; s < steps; ++s) {
      const double x = p.increment(0, 0, s);
      sum += x;
      qv += x * x;
      q4 += x * x * x * x;
    }
    CHECK(std::abs(sum / steps) <= 5.0 * std::sqrt(dt / steps));
    const double T = dt * steps;
    // Var(Σ(Δβ)²) = 2 dt² steps.
    CHECK(std::abs(qv - T) <= 5.0 * std::sqrt(2.0 * steps) * dt);
    CHECK(q4 / steps == doctest::Approx(3.0 * dt * dt).epsilon(0.05));
  }

  TEST_CASE("coarsening sums consecutive increments") {
    const BrownianPaths f = sample_brownian(5, 2, 0.064, 1e-3);
    const BrownianPaths c = f.coarsen(4);
    CHECK(c.steps() == 16);
    CHECK(c.dt() == doctest::Approx(4e-3));
    for (int ch = 0; ch < 2; ++ch)
      for (int k = 0; k < 2; ++k)
        for (long s = 0; s < c.steps(); ++s) {
          double sum = 0.0;
          for (int j = 0; j < 4; ++j) sum += f.increment(ch, k, 4 * s + j);
          CHECK(c.increment(ch, k, s) == doctest::Approx(sum).epsilon(1e-15));
        }
  }

  TEST_CASE("binary dump round trip") {
    const BrownianPaths p = sample_brownian(9, 2, 0.01, 1e-3);
    const std::string path =
        (std::filesystem::temp_directory_path() / "smhd_increments_test.bin").string();
    p.write_binary(path);
    CHECK(std::filesystem::file_size(path) == p.data().size() * sizeof(double));
    const BrownianPaths q = BrownianPaths::read_binary(path, 9, 2, 1e-3, p.steps());
    CHECK(q.data() == p.data());
    std::filesystem::remove(path);
  }

  TEST_CASE("f vanishes at zero density and momentum") {
    const Domain d = dom();
    const NoiseModel model(d, NoiseConfig{}, 5.0 / 3.0);
    const int cells = d.num_cells();
    const auto f = eval_f(GridField::Zero(cells), GridVector(2, GridField::Zero(cells)), model);
    for (const auto& fk : f)
      for (const auto& c : fk) CHECK(c.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("f growth bound at zero momentum") {
    const Domain d = dom();
    const double gamma = 5.0 / 3.0;
    const NoiseModel model(d, NoiseConfig{}, gamma);
    const int cells = d.num_cells();
    const GridField rho = random_positive(cells, 3);
    const auto f = eval_f(rho, GridVector(2, GridField::Zero(cells)), model);
    double bound = 0.0;
    for (double a : model.amplitudes()) bound += a * a;
    for (int x = 0; x < cells; ++x) {
      double s = 0.0;
      for (const auto& fk : f)
        for (const auto& c : fk) s += c[x] * c[x];
      CHECK(s / std::pow(rho[x], gamma + 1.0) <= bound * (1.0 + 1e-12));
    }
  }

  TEST_CASE("f is affine in the momentum") {
    const Domain d = dom();
    const NoiseModel model(d, NoiseConfig{}, 5.0 / 3.0);
    const int cells = d.num_cells();
    const GridField one = GridField::Ones(cells);
    GridVector ex(2, GridField::Zero(cells));
    ex[0].setOnes();
    const auto f0 = eval_f(one, GridVector(2, GridField::Zero(cells)), model);
    const auto f1 = eval_f(one, ex, model);
    for (int k = 0; k < model.K(); ++k) {
      CHECK((f1[k][0] - f0[k][0] - model.a(k) * model.f2_profile(k)).cwiseAbs().maxCoeff() < 1e-15);
      CHECK((f1[k][1] - f0[k][1]).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("g is linear in B and bounded") {
    const Domain d = dom();
    const NoiseModel model(d, NoiseConfig{}, 5.0 / 3.0);
    const int cells = d.num_cells();
    CHECK(eval_g(GridVector(2, GridField::Zero(cells)), model)[0][0].cwiseAbs().maxCoeff() == 0.0);
    const GridVector B = random_vector(2, cells, 1.0, 5);
    GridVector B2 = B;
    for (auto& c : B2) c *= 2.0;
    const auto g1 = eval_g(B, model), g2 = eval_g(B2, model);
    double bound = 0.0;
    for (double a : model.amplitudes()) bound += a * a;
    for (int k = 0; k < model.K(); ++k)
      for (int c = 0; c < 2; ++c) CHECK((g2[k][c] - 2.0 * g1[k][c]).cwiseAbs().maxCoeff() < 1e-14);
    for (int x = 0; x < cells; ++x) {
      double s = 0.0, b2 = B[0][x] * B[0][x] + B[1][x] * B[1][x];
      for (const auto& gk : g1) s += gk[0][x] * gk[0][x] + gk[1][x] * gk[1][x];
      CHECK(s <= bound * b2 * (1.0 + 1e-12));
    }
  }

  TEST_CASE("projected noise at constant density") {
    const Domain d = dom();
    const Operators ops(d, 4);
    const NoiseModel model(d, NoiseConfig{}, 5.0 / 3.0);
    const int cells = d.num_cells();
    const GridVector m = random_vector(2, cells, 1.0, 8);
    for (double c : {1.0, 2.3}) {
      const GridField rho = GridField::Constant(cells, c);
      const auto f = eval_f(rho, m, model);
      const auto fn = projected_noise(rho, f, MassOp(rho, ops), ops.basis());
      for (std::size_t k = 0; k < f.size(); ++k)
        CHECK((fn[k] - project(f[k], ops.basis())).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("projected noise norm is the mass-weighted norm of the normalized noise") {
    const Domain d = dom();
    const Operators ops(d, 4);
    const NoiseModel model(d, NoiseConfig{}, 5.0 / 3.0);
    const int cells = d.num_cells();
    const GridField rho = random_positive(cells, 12);
    const auto f = eval_f(rho, random_vector(2, cells, 1.0, 13), model);
    const MassOp M(rho, ops);
    const auto fn = projected_noise(rho, f, M, ops.basis());
    const auto q = normalized_noise(rho, f, ops.basis());
    for (std::size_t k = 0; k < f.size(); ++k) {
      CHECK(fn[k].squaredNorm() == doctest::Approx(q[k].dot(M.apply(q[k]))).epsilon(1e-8));
      double raw = 0.0;
      for (const auto& c : f[k]) raw += (c.array().square() / rho.array()).sum();
      CHECK(fn[k].squaredNorm() <= rho.maxCoeff() * raw * d.cell_volume() * (1.0 + 1e-10));
    }
  }

  TEST_CASE("growth report") {
    const Domain d = dom();
    NoiseConfig cfg;
    const NoiseModel model(d, cfg, 5.0 / 3.0);
    const GrowthReport r = validate_growth(model, samples(d, 6));
    CHECK(r.pass);
    CHECK(r.C_g == doctest::Approx(r.bound_g).epsilon(0.01));
    CHECK(r.C_g <= r.bound_g * (1.0 + 1e-12));
    CHECK(r.C_f1 <= r.bound_f1 * (1.0 + 1e-12));

    NoiseConfig silent = cfg;
    silent.amplitude = 0.0;
    const GrowthReport z = validate_growth(NoiseModel(d, silent, 5.0 / 3.0), samples(d, 4));
    CHECK(z.C_f1 == 0.0);
    CHECK(z.C_df1 == 0.0);
    CHECK(z.C_f2 == 0.0);
    CHECK(z.C_g == 0.0);
    CHECK(z.C_dg == 0.0);

    NoiseConfig loud = cfg;
    loud.amplitude = 2.0 * cfg.amplitude;
    const GrowthReport l = validate_growth(NoiseModel(d, loud, 5.0 / 3.0), samples(d, 6));
    CHECK(l.C_f1 == doctest::Approx(4.0 * r.C_f1).epsilon(1e-12));
    CHECK(l.C_f2 == doctest::Approx(4.0 * r.C_f2).epsilon(1e-12));
    CHECK(l.bound_f1 == doctest::Approx(4.0 * r.bound_f1).epsilon(1e-12));
  }
}
