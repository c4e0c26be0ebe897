#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "tflim/error.hpp"
#include "tflim/limiting_operator.hpp"

using namespace tflim;
using std::numbers::pi;

namespace {

Domain unit() { return Domain::interval(0.0, 1.0); }
Domain band(double w) { return Domain::interval(-w, w); }

}  // namespace

TEST_CASE("trace identity") {
  auto op = discretize(unit(), band(pi), 64);
  CHECK(std::abs(op.matrix.trace() - 1.0) < 1e-6);

  auto op2 = discretize(Domain::box({0.0, 0.0}, {1.0, 1.0}), Domain::ball({0.0, 0.0}, 1.0), 32);
  CHECK(std::abs(op2.matrix.trace() - 1.0 / (4.0 * pi)) < 1e-5);

  auto rep = spectrum(op2);
  CHECK(std::abs(rep.eigenvalues.sum() - op2.matrix.trace()) < 1e-8);
}

TEST_CASE("matrix invariants") {
  auto op = discretize(unit(), band(10.0 * pi), 200);
  CHECK((op.matrix - op.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  auto rep = spectrum(op);
  CHECK(rep.eigenvalues.minCoeff() > -1e-8);
  CHECK(rep.eigenvalues.maxCoeff() < 1.0 + 1e-6);
  for (int k = 1; k < rep.size(); ++k) CHECK(rep.eigenvalues(k) <= rep.eigenvalues(k - 1));
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(rep.size(), rep.size());
  CHECK((rep.eigenvectors.transpose() * rep.eigenvectors - id).cwiseAbs().maxCoeff() < 1e-8);
  REQUIRE(rep.bandwidth_product.has_value());
  CHECK(*rep.bandwidth_product == doctest::Approx(20.0 * pi));
}

TEST_CASE("largest eigenvalue near one") {
  auto rep = spectrum(discretize(unit(), band(10.0 * pi), 400));
  CHECK(rep.lambda(1) > 0.999);
  CHECK(rep.lambda(1) < 1.0 + 1e-6);
}

TEST_CASE("zero operator") {
  auto rep = spectrum(discretize(unit(), band(0.0), 32));
  CHECK(rep.eigenvalues.cwiseAbs().maxCoeff() == 0.0);
  CHECK(plunge_count(rep, 0.1) == 0);
  REQUIRE(crossing_index(rep).has_value());
  CHECK(*crossing_index(rep) == 1);
  CHECK(spectra_identity_defect(unit(), band(0.0), 32, 5) == 0.0);
  auto ref = refine_until(unit(), band(0.0), 1e-8, 5);
  CHECK(ref.converged);
  CHECK(ref.op.n_per_axis == 32);
}

TEST_CASE("near-one count, crossing and plunge at c = 40 pi") {
  auto rep = spectrum(discretize(unit(), band(20.0 * pi), 600));
  // The c/2pi = 20 heuristic over-counts here; the computed count is 16 and is
  // stable under resolution doubling.
  CHECK(near_one_count(rep, 1e-3) == 16);
  const auto idx = crossing_index(rep);
  REQUIRE(idx.has_value());
  CHECK(*idx >= 20);
  CHECK(*idx <= 22);
  const double c = 40.0 * pi;
  const int p = plunge_count(rep, 0.01);
  CHECK(p <= 3.0 * std::log(c / 0.01));
  CHECK(plunge_count(rep, 0.49) <= p);
}

TEST_CASE("crossing at c = 10 pi") {
  auto rep = spectrum(discretize(unit(), band(5.0 * pi), 400));
  const auto idx = crossing_index(rep);
  REQUIRE(idx.has_value());
  CHECK(*idx >= 5);
  CHECK(*idx <= 7);
}

TEST_CASE("plunge count on an exact 0/1 spectrum") {
  SpectrumReport rep;
  rep.eigenvalues = Eigen::VectorXd::Zero(6);
  rep.eigenvalues.head(3).setOnes();
  CHECK(plunge_count(rep, 0.01) == 0);
  CHECK(near_one_count(rep, 1e-3) == 3);
  CHECK(*crossing_index(rep) == 4);
  CHECK_THROWS_AS(plunge_count(rep, 0.5), ValidationError);
  CHECK_THROWS_AS(plunge_count(rep, 0.0), ValidationError);
}

TEST_CASE("double orthogonality") {
  auto op = discretize(unit(), band(10.0 * pi), 400);
  auto rep = spectrum(op);
  CHECK(double_orthogonality_defect(rep, op, 1) == 0.0);
  auto dbl = double_orthogonality(rep, op, 8);
  CHECK(dbl.defect <= 1e-6);
  CHECK(dbl.global_defect <= 1e-6);
  for (int k = 0; k < 8; ++k) CHECK(std::abs(dbl.restricted_norms(k) - rep.eigenvalues(k)) < 1e-6);
  CHECK_THROWS_AS(double_orthogonality(rep, op, 399), ValidationError);
}

TEST_CASE("spectra identity") {
  CHECK(spectra_identity_defect(unit(), band(10.0 * pi), 400, 10) <= 1e-3);
  const Domain sq = Domain::box({0.0, 0.0}, {1.0, 1.0});
  const Domain s = Domain::box({-pi, -pi}, {pi, pi});
  CHECK(spectra_identity_defect(sq, s, 40, 5) <= 1e-3);
}

TEST_CASE("rayleigh minimum over a span") {
  auto op = discretize(unit(), band(4.0 * pi), 120);
  auto rep = spectrum(op);
  const int n = op.size();
  auto as_values = [&](const Eigen::MatrixXd& coords) {
    Eigen::MatrixXcd v(n, coords.cols());
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < coords.cols(); ++j) v(i, j) = coords(i, j) / std::sqrt(op.weights(i));
    return v;
  };
  for (int k : {1, 3, 5}) {
    const double r = rayleigh_min_over_span(op, as_values(rep.eigenvectors.leftCols(k)));
    CHECK(std::abs(r - rep.lambda(k)) < 1e-10);
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v(7) = 1.0;
  CHECK(std::abs(rayleigh_min_over_span(op, as_values(v)) - (op.matrix * v).norm()) < 1e-12);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1e-6);
  Eigen::MatrixXd top = rep.eigenvectors.leftCols(3);
  for (int i = 0; i < top.rows(); ++i)
    for (int j = 0; j < 3; ++j) top(i, j) += N(rng);
  CHECK(std::abs(rayleigh_min_over_span(op, as_values(top)) - rep.lambda(3)) < 1e-4);

  Eigen::MatrixXd dup(n, 2);
  dup.col(0) = rep.eigenvectors.col(0);
  dup.col(1) = rep.eigenvectors.col(0);
  CHECK_THROWS_AS(rayleigh_min_over_span(op, as_values(dup)), ValidationError);
}

TEST_CASE("monotonicity in S") {
  auto small = spectrum(discretize(unit(), band(3.0 * pi), 160));
  auto large = spectrum(discretize(unit(), band(6.0 * pi), 160));
  for (int k = 0; k < small.size(); ++k) CHECK(large.eigenvalues(k) >= small.eigenvalues(k) - 1e-8);
}

TEST_CASE("refinement") {
  auto ref = refine_until(unit(), band(2.0 * pi), 1e-8, 5);
  CHECK(ref.converged);
  CHECK(ref.op.n_per_axis <= 512);

  auto hard = refine_until(unit(), band(2.0 * pi), 1e-15, 5, {.size_cap = 600});
  CHECK_FALSE(hard.converged);

  auto fine = refine_until(unit(), band(8.0 * pi), 1e-10, 20);
  REQUIRE(fine.converged);
  auto twice = spectrum(discretize(unit(), band(8.0 * pi), 2 * fine.op.n_per_axis));
  for (int k = 0; k < 20; ++k) CHECK(std::abs(twice.eigenvalues(k) - fine.report.eigenvalues(k)) < 1e-6);
}

TEST_CASE("trace identity in three dimensions and for masked F") {
  auto op = discretize(Domain::box({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}),
                       Domain::ball({0.0, 0.0, 0.0}, 2.0), 12);
  CHECK(std::abs(op.matrix.trace() / (32.0 / 3.0 * pi / std::pow(2.0 * pi, 3)) - 1.0) < 1e-6);

  auto disk = discretize(Domain::ball({0.0, 0.0}, 1.0), Domain::box({-1.0, -1.0}, {1.0, 1.0}), 40);
  CHECK(disk.weights.sum() < pi + 0.05);
  CHECK(disk.weights.sum() > pi - 0.05);
}

TEST_CASE("size and input guards") {
  CHECK_THROWS_AS(discretize(unit(), band(pi), 7), ValidationError);
  CHECK_THROWS_AS(discretize(Domain::box({0.0, 0.0}, {1.0, 1.0}), Domain::box({-1.0, -1.0}, {1.0, 1.0}), 80),
                  SizeError);
  const Domain g = Domain::generic([](std::span<const double>) { return true; }, {0.0}, {1.0});
  CHECK_THROWS_AS(discretize(g, band(pi), 16), ValidationError);
}
