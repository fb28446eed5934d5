#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "smhd/basis.hpp"
#include "smhd/error.hpp"

using namespace smhd;
using std::numbers::pi;

namespace {

Domain small_domain(int dim = 2, int g = 16) {
  Domain d;
  d.dim = dim;
  d.grid_pts = {g, g, g};
  return d;
}

CoeffVec random_coeffs(const Basis& b, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  CoeffVec c(b.vector_size());
  for (auto& x : c) x = n(rng);
  return c;
}

}  // namespace

TEST_SUITE("basis") {
  TEST_CASE("eigenvalues of the lowest modes") {
    const Basis b(small_domain(), 2);
    REQUIRE(b.n() == 4);
    CHECK(b.eigvals()[0] == doctest::Approx(2.0));
    CHECK(b.eigvals()[1] == doctest::Approx(5.0));
    CHECK(b.eigvals()[2] == doctest::Approx(5.0));
    CHECK(b.eigvals()[3] == doctest::Approx(8.0));
    CHECK(b.mode_index({1, 1, 1}) == 0);
    CHECK(b.mode_index({3, 1, 1}) == -1);
  }

  TEST_CASE("eigenvalues are sorted") {
    const Basis b(small_domain(3, 12), 4);
    for (int i = 1; i < b.n(); ++i) CHECK(b.eigvals()[i] >= b.eigvals()[i - 1]);
  }

  TEST_CASE("quadrature Gram matrix is the identity") {
    for (int dim : {2, 3}) {
      const Basis b(small_domain(dim, 12), dim == 2 ? 5 : 3);
      Eigen::MatrixXd phi(b.num_cells(), b.n());
      for (int i = 0; i < b.n(); ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Unit(b.n(), i);
        phi.col(i) = b.eval(e);
      }
      const Eigen::MatrixXd gram = b.cell_volume() * phi.transpose() * phi;
      CHECK((gram - Eigen::MatrixXd::Identity(b.n(), b.n())).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("reconstruct of a unit mode samples the normalized sine product") {
    const Domain d = small_domain();
    const Basis b(d, 3);
    CoeffVec c = CoeffVec::Zero(b.vector_size());
    c[b.mode_index({1, 1, 1})] = 1.0;
    const GridVector v = reconstruct(c, b);
    double err = 0.0;
    for (int i = 0; i < d.grid_pts[0]; ++i)
      for (int j = 0; j < d.grid_pts[1]; ++j) {
        const double expect = (2.0 / pi) * std::sin(d.center(0, i)) * std::sin(d.center(1, j));
        err = std::max(err, std::abs(v[0][i * d.grid_pts[1] + j] - expect));
      }
    CHECK(err < 1e-13);
    CHECK(v[1].cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("projection recovers mode coefficients") {
    const Basis b(small_domain(), 3);
    CoeffVec c = CoeffVec::Zero(b.vector_size());
    c[b.mode_index({2, 1, 1})] = 3.0;
    c[b.mode_index({1, 2, 1})] = -2.0;
    const CoeffVec back = project(reconstruct(c, b), b);
    CHECK((back - c).cwiseAbs().maxCoeff() < 1e-12);

    GridVector zero(2, GridField::Zero(b.num_cells()));
    CHECK(project(zero, b).cwiseAbs().maxCoeff() == 0.0);
    CHECK(reconstruct(CoeffVec::Zero(b.vector_size()), b)[0].cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("project after reconstruct is the identity for random coefficients") {
    for (int dim : {2, 3}) {
      const Basis b(small_domain(dim, 10), 4);
      const CoeffVec c = random_coeffs(b, 7 + dim);
      CHECK((project(reconstruct(c, b), b) - c).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("spectral derivative of a single mode") {
    const Domain d = small_domain();
    const Basis b(d, 2);
    CoeffVec c = CoeffVec::Zero(b.vector_size());
    c[b.mode_index({1, 1, 1})] = 1.0;
    const Derivatives D = spectral_derivatives(c, b);
    double err = 0.0;
    for (int i = 0; i < d.grid_pts[0]; ++i)
      for (int j = 0; j < d.grid_pts[1]; ++j) {
        const double expect = (2.0 / pi) * std::cos(d.center(0, i)) * std::sin(d.center(1, j));
        err = std::max(err, std::abs(D.grad[0][0][i * d.grid_pts[1] + j] - expect));
      }
    CHECK(err < 1e-13);
    CHECK((D.div - D.grad[0][0]).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("zero field has zero derivatives") {
    const Basis b(small_domain(3, 8), 3);
    const Derivatives D = spectral_derivatives(CoeffVec::Zero(b.vector_size()), b);
    CHECK(D.div.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& c : D.curl) CHECK(c.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("divergence of a symbolic curl vanishes") {
    GridSpec g{3, {pi, 2.0, 1.5}, {9, 8, 7}};
    SpectralVector A(3);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int c = 0; c < 3; ++c) {
      SpectralTerm t;
      t.modes = {3, 3, 3};
      t.parity = {Parity::Sine, Parity::Sine, Parity::Sine};
      t.parity[c] = Parity::Cosine;
      t.coeffs.resize(27);
      for (auto& x : t.coeffs) x = n(rng);
      A[c].terms.push_back(t);
    }
    const Eigen::VectorXd div = evaluate(spectral_div(spectral_curl(A)), g);
    CHECK(div.cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("tensor_apply adjoint") {
    const Eigen::MatrixXd a = axis_table(Parity::Sine, 4, pi, 9, Points::Centers, 0);
    const Eigen::MatrixXd bm = axis_table(Parity::Cosine, 3, 1.0, 7, Points::Faces, 1);
    const Eigen::MatrixXd* mats[] = {&a, &bm};
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    Eigen::VectorXd x(4 * 3), y(9 * 8);
    for (auto& v : x) v = n(rng);
    for (auto& v : y) v = n(rng);
    const Eigen::VectorXd Ax = tensor_apply(2, mats, false, x);
    const Eigen::VectorXd Aty = tensor_apply(2, mats, true, y);
    CHECK(Ax.dot(y) == doctest::Approx(x.dot(Aty)).epsilon(1e-12));
  }

  TEST_CASE("invalid domains are rejected") {
    Domain d = small_domain();
    d.dim = 4;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    CHECK_THROWS_AS(Basis(small_domain(2, 8), 5), ConfigError);
  }
}
